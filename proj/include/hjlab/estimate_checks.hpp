#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "hjlab/core_problem.hpp"
#include "hjlab/estimates_ledger.hpp"
#include "hjlab/initial_data.hpp"
#include "hjlab/time_integrator.hpp"

// Post-processing checks that compare runs against the decay, gradient and
// universal estimates. Constants in those estimates are never computed: the
// checks test exponents, ratios and amplitude independence.

namespace hjlab {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Gradient bound t |grad u|^q <= u.

inline constexpr double kRatioFloor = 1e-12;

struct GradientBoundReport {
    double worst_ratio = 0.0;
    double worst_time = 0.0;
    std::vector<double> times;
    std::vector<double> ratios;
};

inline void require_gradient_bound_regime(const ProblemSpec& spec) {
    if (spec.nu != 1.0 || spec.p != 2.0 || spec.gamma != 1.0 || spec.lambda != 0.0 || !(spec.q > 1.0) ||
        spec.q > 2.0) {
        throw RegimeError("gradient bound applies only for nu = 1, p = 2, gamma = 1, lambda = 0, 1 < q <= 2");
    }
}

/// max over nodes of t g^q / max(u, 1e-12) at one field.
inline double gradient_bound_ratio(const Field& u, double q) {
    if (u.time <= 0.0) return 0.0;
    const Field grad_q = upwind_hamiltonian(u, q);
    double worst = 0.0;
    u.grid.for_each_interior([&](std::size_t i) {
        worst = std::max(worst, u.time * grad_q.values[i] / std::max(u.values[i], kRatioFloor));
    });
    return worst;
}

/// Worst ratio over every snapshot of the run.
inline GradientBoundReport gradient_bound_check(const RunResult& run, const ProblemSpec& spec) {
    require_gradient_bound_regime(spec);
    GradientBoundReport rep;
    for (const auto& snap : run.snapshots) {
        const auto lowest = std::min_element(snap.values.begin(), snap.values.end());
        if (lowest != snap.values.end() && *lowest < -1e-12) {
            throw RegimeError("gradient bound requires nonnegative solutions");
        }
        const double ratio = gradient_bound_ratio(snap, spec.q);
        rep.times.push_back(snap.time);
        rep.ratios.push_back(ratio);
        if (ratio > rep.worst_ratio) {
            rep.worst_ratio = ratio;
            rep.worst_time = snap.time;
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Far-field decay of the L^r mass for power-tail data.

struct FarFieldOptions {
    double t_begin = 1.0;
    double t_end = 50.0;
    int samples = 24;
    StepControl control{};
};

struct FarFieldReport {
    double r = 1.0;
    double a = 0.0;                    ///< (2 - q)/(q - 1)
    double bound_exponent = 0.0;       ///< (a r - N)/2
    double tail_slope_prediction = 0.0;  ///< -(b r - N)/2
    double fitted_constant = 0.0;
    double max_ratio = 0.0;  ///< max of mass / (C * bound) over the samples
    bool bound_holds = false;
    DecayFit mass_fit;
    double slope_relative_error = 0.0;
    std::vector<double> times;
    std::vector<double> mass;
    std::vector<double> tail_integral;
    std::vector<double> bound;
};

inline double far_field_exponent_a(double q) { return (2.0 - q) / (q - 1.0); }

inline void require_far_field_regime(const ProblemSpec& spec, double b, double r) {
    const double n = spec.dim;
    const double q_crit = (n + 2.0 * r) / (n + r);
    if (!(spec.q > 1.0 && spec.q < q_crit)) {
        throw RegimeError("far-field estimate needs 1 < q < (N+2r)/(N+r) = " + format_double(q_crit));
    }
    if (!(b * r > n)) throw RegimeError("power tail needs b r > N");
}

/// n log-spaced times in [t_begin, t_end], both ends included.
inline std::vector<double> log_spaced(double t_begin, double t_end, int n) {
    std::vector<double> t(static_cast<std::size_t>(n));
    const double la = std::log(t_begin);
    const double lb = std::log(t_end);
    for (int k = 0; k < n; ++k) t[k] = std::exp(la + (lb - la) * k / (n - 1));
    t.front() = t_begin;
    t.back() = t_end;
    return t;
}

/// Integral of u0^r over {|x| > sqrt(t)} by node quadrature; a node whose
/// cell straddles the cut counts with the radial fraction lying outside.
inline double tail_integral(const Field& u0, double r, double t) {
    const double cut = std::sqrt(t);
    const double h = u0.grid.spacing();
    std::vector<double> terms;
    u0.grid.for_each_interior([&](std::size_t i) {
        const double w = std::clamp((u0.grid.radius(i) - cut) / h + 0.5, 0.0, 1.0);
        if (w > 0.0) terms.push_back(w * std::pow(std::abs(u0.values[i]), r));
    });
    return u0.grid.cell_volume() * pairwise_sum(terms);
}

/**
 * Evaluates mass_r(t) <= C (tail(t) + t^{-(ar-N)/2}) at the given snapshot
 * times of a run. C is the smallest constant that makes the bound hold at
 * the first sample; the report carries the largest ratio over all samples.
 */
inline FarFieldReport far_field_report(const Field& u0, const RunResult& run, const ProblemSpec& spec,
                                       double b, double r, const std::vector<double>& times) {
    require_far_field_regime(spec, b, r);
    FarFieldReport rep;
    rep.r = r;
    rep.a = far_field_exponent_a(spec.q);
    rep.bound_exponent = (rep.a * r - spec.dim) / 2.0;
    rep.tail_slope_prediction = -(b * r - spec.dim) / 2.0;
    for (double t : times) {
        const Field& snap = run.snapshot_at(t);
        rep.times.push_back(t);
        rep.mass.push_back(lr_mass(snap, r));
        rep.tail_integral.push_back(tail_integral(u0, r, t));
        rep.bound.push_back(rep.tail_integral.back() + std::pow(t, -rep.bound_exponent));
    }
    rep.fitted_constant = rep.mass.front() / rep.bound.front();
    for (std::size_t k = 0; k < rep.times.size(); ++k) {
        rep.max_ratio = std::max(rep.max_ratio, rep.mass[k] / (rep.fitted_constant * rep.bound[k]));
    }
    rep.bound_holds = rep.max_ratio <= 1.0 + 1e-12;
    rep.mass_fit = fit_decay(rep.times, rep.mass, times.front(), times.back());
    rep.slope_relative_error =
        std::abs(rep.mass_fit.slope - rep.tail_slope_prediction) / std::abs(rep.tail_slope_prediction);
    return rep;
}

/// Samples the power tail, runs to the end of the window and reports.
inline FarFieldReport far_field_check(ProblemSpec spec, const datum::PowerTail& tail, double r,
                                      FarFieldOptions opts = {}) {
    require_far_field_regime(spec, tail.tail_exponent, r);
    if (opts.samples < static_cast<int>(kMinFitSamples)) throw ConfigError("far-field check needs >= 8 samples");
    const auto times = log_spaced(opts.t_begin, opts.t_end, opts.samples);
    spec.horizon = std::max(spec.horizon, opts.t_end);
    InitialDatum d;
    d.kind = tail;
    const Field u0 = sample(d, make_grid(spec), r);
    StepControl control = opts.control;
    control.snapshot_times = times;
    RunOptions ro;
    ro.ledger_r = {r};
    ro.trace_every = 16;
    ro.keep_dt_history = false;
    const RunResult result = run(u0, spec, control, ro);
    return far_field_report(u0, result, spec, tail.tail_exponent, r, times);
}

// ---------------------------------------------------------------------------
// Universal bound: amplitude independence of sup_t t^kappa ||u(t)||_inf.

/// 1/(q-1+lambda) when the absorption is active, else 1/(p-2) for p > 2.
inline double universal_exponent(const ProblemSpec& spec) {
    if (spec.gamma > 0.0) return 1.0 / (spec.q - 1.0 + spec.lambda);
    if (spec.p > 2.0) return 1.0 / (spec.p - 2.0);
    throw RegimeError("no universal bound without absorption unless p > 2");
}

inline double weighted_sup(const NormTrace& trace, double kappa, double t_begin, double t_end) {
    double best = 0.0;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const double t = trace.times[i];
        if (t < t_begin * (1.0 - 1e-12) || t > t_end * (1.0 + 1e-12)) continue;
        best = std::max(best, std::pow(t, kappa) * trace.linf[i]);
    }
    return best;
}

struct UniversalBoundReport {
    double kappa = 0.0;
    double t_begin = 0.0;
    double t_end = 0.0;
    std::vector<double> amplitudes;
    std::vector<double> weighted;
    double spread = 0.0;
};

/// Runs base * A for each amplitude on a bounded (Dirichlet) box.
inline UniversalBoundReport universal_bound_check(ProblemSpec spec, const Field& base,
                                                  const std::vector<double>& amplitudes, double t_begin,
                                                  double t_end, const StepControl& control) {
    if (spec.domain.mode != BoundaryMode::Dirichlet) {
        throw RegimeError("universal bound holds on bounded domains only (use Dirichlet mode)");
    }
    if (amplitudes.size() < 2) throw ConfigError("universal bound check needs at least two amplitudes");
    UniversalBoundReport rep;
    rep.kappa = universal_exponent(spec);
    rep.t_begin = t_begin;
    rep.t_end = t_end;
    spec.horizon = std::max(spec.horizon, t_end);
    RunOptions ro;
    ro.ledger_r = {};
    ro.keep_dt_history = false;
    for (double amp : amplitudes) {
        Field u0 = base;
        for (double& v : u0.values) v *= amp;
        const RunResult res = run(u0, spec, control, ro);
        rep.amplitudes.push_back(amp);
        rep.weighted.push_back(weighted_sup(res.trace, rep.kappa, t_begin, t_end));
    }
    const auto [lo, hi] = std::minmax_element(rep.weighted.begin(), rep.weighted.end());
    rep.spread = *lo > 0.0 ? *hi / *lo : kInfinity;
    return rep;
}

// ---------------------------------------------------------------------------
// Monotone traces.

/// Largest relative increase y[i+1] > y[i] along a series (0 if non-increasing).
inline double max_relative_increase(const std::vector<double>& y) {
    double worst = 0.0;
    for (std::size_t i = 1; i < y.size(); ++i) {
        const double scale = std::max(std::abs(y[i - 1]), std::numeric_limits<double>::min());
        worst = std::max(worst, (y[i] - y[i - 1]) / scale);
    }
    return worst;
}

// ---------------------------------------------------------------------------
// JSON renderings. Every report names the estimate it tests under
// "paper_ref".

inline json to_json(const DecayFit& f) {
    return {{"t_begin", f.t_begin}, {"t_end", f.t_end},         {"slope", f.slope},
            {"intercept", f.intercept}, {"r_squared", f.r_squared}, {"samples", f.samples}};
}

inline json to_json(const GradientBoundReport& r) {
    return {{"check", "gradient_bound"},
            {"paper_ref", "pointwise gradient bound |grad u|^q <= u/t"},
            {"worst_ratio", r.worst_ratio},
            {"worst_time", r.worst_time},
            {"times", r.times},
            {"ratios", r.ratios}};
}

inline json to_json(const FarFieldReport& r) {
    return {{"check", "far_field"},
            {"paper_ref", "far-field L^r decay bound C(int_{|x|>sqrt t} u0^r + t^{-(ar-N)/2})"},
            {"r", r.r},
            {"a", r.a},
            {"bound_exponent", r.bound_exponent},
            {"tail_slope_prediction", r.tail_slope_prediction},
            {"fitted_constant", r.fitted_constant},
            {"max_ratio", r.max_ratio},
            {"bound_holds", r.bound_holds},
            {"mass_fit", to_json(r.mass_fit)},
            {"slope_relative_error", r.slope_relative_error},
            {"times", r.times},
            {"mass", r.mass},
            {"tail_integral", r.tail_integral},
            {"bound", r.bound}};
}

inline json to_json(const UniversalBoundReport& r) {
    return {{"check", "universal_bound"},
            {"paper_ref", "universal estimate ||u(t)||_inf <= C t^{-kappa} on bounded domains"},
            {"kappa", r.kappa},
            {"t_begin", r.t_begin},
            {"t_end", r.t_end},
            {"amplitudes", r.amplitudes},
            {"weighted_sup", r.weighted},
            {"spread", r.spread}};
}

}  // namespace hjlab
