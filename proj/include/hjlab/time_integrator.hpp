#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "hjlab/core_problem.hpp"
#include "hjlab/discrete_operators.hpp"
#include "hjlab/estimates_ledger.hpp"

namespace hjlab {

/// Time-step collapse or a non-finite value during integration.
class SolverError : public Error {
public:
    using Error::Error;
};

struct StepControl {
    double cfl_safety = 0.4;
    double dt_min = 1e-12;
    double dt_max = 1e-2;
    std::vector<double> snapshot_times;
};

inline ValidationReport validate_control(const StepControl& c, double horizon) {
    ValidationReport report;
    if (!(c.cfl_safety > 0.0 && c.cfl_safety <= 1.0)) {
        report.violations.push_back("cfl_safety must lie in (0, 1]");
    }
    if (!(c.dt_min > 0.0 && c.dt_min <= c.dt_max)) {
        report.violations.push_back("time-step bounds must satisfy 0 < dt_min <= dt_max");
    }
    for (std::size_t i = 0; i < c.snapshot_times.size(); ++i) {
        const double t = c.snapshot_times[i];
        if (!(t >= 0.0) || t > horizon) {
            report.violations.push_back("snapshot time " + format_double(t) + " outside [0, horizon]");
        }
        if (i > 0 && !(t > c.snapshot_times[i - 1])) {
            report.violations.push_back("snapshot times must be strictly increasing");
        }
    }
    return report;
}

/// The individual stability limits behind stable_dt (before safety and clamping).
struct StabilityLimits {
    double parabolic = kInfinity;    ///< h^2 / (2 N D_max)
    double hamiltonian = kInfinity;  ///< h / (q gamma max |u|^lambda g^{q-1})
    double reaction = kInfinity;     ///< 1 / (lambda gamma max |u|^{lambda-1} g^q), lambda >= 1

    double binding() const { return std::min({parabolic, hamiltonian, reaction}); }
};

inline StabilityLimits stability_limits(const Field& u, const ProblemSpec& spec, double epsilon_p) {
    StabilityLimits lim;
    const Grid& g = u.grid;
    const double h = g.spacing();
    const double d_max = max_edge_diffusivity(u, spec, epsilon_p);
    if (d_max > 0.0) lim.parabolic = h * h / (2.0 * g.dim() * d_max);
    if (spec.gamma > 0.0) {
        const std::span<const double> v(u.values);
        double speed = 0.0;
        double react = 0.0;
        const bool signed_term = spec.lambda > 0.0;
        g.for_each_interior([&](std::size_t i) {
            const double gsq = std::max(detail::upwind_gradient_sq(v, g, i, false),
                                        signed_term ? detail::upwind_gradient_sq(v, g, i, true) : 0.0);
            if (gsq == 0.0) return;
            const double grad = std::sqrt(gsq);
            const double amp = spec.lambda == 0.0 ? 1.0 : std::pow(std::abs(v[i]), spec.lambda);
            speed = std::max(speed, amp * std::pow(grad, spec.q - 1.0));
            if (spec.lambda >= 1.0) {
                react = std::max(react, std::pow(std::abs(v[i]), spec.lambda - 1.0) * std::pow(grad, spec.q));
            }
        });
        if (speed > 0.0) lim.hamiltonian = h / (spec.q * spec.gamma * speed);
        if (react > 0.0) lim.reaction = 1.0 / (spec.lambda * spec.gamma * react);
    }
    return lim;
}

/**
 * CFL-limited explicit step:
 *
 *     dt = safety * min(h^2 / (2 N D_max), h / (q G_max^{q-1}))
 *
 * clamped to [dt_min, dt_max]. D_max is nu times the largest edge
 * diffusivity (nu itself for p = 2). The Hamiltonian speed carries the
 * coefficient gamma |u|^lambda, so the bare formula is the gamma = 1,
 * lambda = 0 case; lambda >= 1 adds a zero-order reaction limit. Throws
 * SolverError when dt_min exceeds the stable step by more than a factor 10.
 */
inline double stable_dt(const Field& u, const ProblemSpec& spec, const StepControl& control,
                        double epsilon_p) {
    const double raw = control.cfl_safety * stability_limits(u, spec, epsilon_p).binding();
    if (raw < control.dt_min / 10.0) {
        throw SolverError("time step collapsed: stable dt " + format_double(raw) +
                          " is below dt_min / 10");
    }
    return std::clamp(raw, control.dt_min, control.dt_max);
}

inline double stable_dt(const Field& u, const ProblemSpec& spec, const StepControl& control) {
    return stable_dt(u, spec, control, default_epsilon_p(spec));
}

/// Reusable buffers for step(); one per run.
struct StepBuffers {
    OperatorWorkspace ws;
    Field diffusion;
    Field rate;

    StepBuffers(const Grid& g, const ProblemSpec& spec)
        : ws(make_workspace(spec)), diffusion(g), rate(g) {}
};

/**
 * One forward-Euler step of u_t = nu * Delta_p u - g(u, grad u).
 *
 * Leaves buf.rate holding g evaluated on the pre-step field. Throws
 * SolverError naming `step_index` if a non-finite value appears.
 */
inline void step(const Field& u, const ProblemSpec& spec, double dt, StepBuffers& buf, Field& out,
                 long step_index = 0) {
    detail::require_same_grid(u, out);
    const bool diffuse = spec.nu != 0.0;
    if (diffuse) p_laplacian(u, spec.p, buf.ws.epsilon_p, buf.diffusion, buf.ws.flux);
    absorption_rate(u, spec, buf.ws.epsilon_u, buf.rate);
    const auto& v = u.values;
    bool finite = true;
    std::fill(out.values.begin(), out.values.end(), 0.0);
    u.grid.for_each_interior([&](std::size_t i) {
        const double d = diffuse ? spec.nu * buf.diffusion.values[i] : 0.0;
        const double next = v[i] + dt * (d - buf.rate.values[i]);
        finite = finite && std::isfinite(next);
        out.values[i] = next;
    });
    out.time = u.time + dt;
    if (!finite) {
        throw SolverError("non-finite value at step " + std::to_string(step_index) + " (t = " +
                          format_double(u.time) + ")");
    }
}

inline Field step(const Field& u, const ProblemSpec& spec, double dt) {
    StepBuffers buf(u.grid, spec);
    Field out(u.grid);
    step(u, spec, dt, buf, out);
    return out;
}

struct RunOptions {
    std::vector<double> ledger_r{1.0, 2.0};
    std::vector<double> extra_r;
    /// Record the norm trace every k-th step (snapshots and the final step are always recorded).
    int trace_every = 1;
    bool keep_dt_history = true;
};

struct RunDiagnostics {
    long steps = 0;
    std::vector<double> dt_history;
    double dt_smallest = kInfinity;
    double dt_largest = 0.0;
    bool support_breach = false;
    double max_boundary_fraction = 0.0;
    double first_breach_time = -1.0;
};

struct RunResult {
    std::vector<Field> snapshots;
    Field final_field;
    NormTrace trace;
    std::vector<EnergyLedger> ledgers;
    RunDiagnostics diagnostics;

    const Field& snapshot_at(double t) const {
        for (const auto& s : snapshots) {
            if (std::abs(s.time - t) <= 1e-12 * std::max(1.0, std::abs(t))) return s;
        }
        throw ConfigError("no snapshot at t = " + format_double(t));
    }
};

/// Relative mass in the outermost two interior layers.
inline constexpr double kSupportMonitorThreshold = 1e-8;
inline constexpr int kSupportMonitorLayers = 2;

/**
 * Integrates from u0.time to spec.horizon.
 *
 * Steps are shortened to land exactly on every requested snapshot time and
 * on the horizon. A zero horizon returns u0 as the single snapshot. In whole-space-proxy mode the boundary-layer mass is
 * monitored and a breach is flagged (not fatal).
 */
inline RunResult run(const Field& u0, const ProblemSpec& spec, const StepControl& control,
                     const RunOptions& options = {}) {
    ValidationReport report = validate_spec(spec);
    if (spec.horizon == 0.0) {
        std::erase(report.violations, std::string("horizon must be positive"));
    }
    if (!report.ok()) throw ConfigError(report.message());
    if (const auto c = validate_control(control, spec.horizon); !c.ok()) throw ConfigError(c.message());
    if (!(u0.grid == make_grid(spec))) throw ConfigError("initial field does not match the problem grid");
    if (!u0.all_finite()) throw ConfigError("initial field has non-finite values");

    RunResult result;
    result.trace.q = spec.q;
    result.trace.extra_r = options.extra_r;
    for (double r : options.ledger_r) {
        result.ledgers.push_back(EnergyLedger::start(u0, r));
        result.trace.ledgers.push_back(LedgerSeries{r, {}, {}, {}, {}});
    }
    auto record = [&](const Field& u) {
        result.trace.record(u);
        for (std::size_t k = 0; k < result.ledgers.size(); ++k) result.trace.ledgers[k].push(result.ledgers[k]);
    };

    Field u = u0;
    u.time = 0.0;
    u.zero_boundary();
    record(u);

    std::vector<double> targets = control.snapshot_times;
    std::size_t next_snap = 0;
    while (next_snap < targets.size() && targets[next_snap] <= 0.0) {
        result.snapshots.push_back(u);
        ++next_snap;
    }

    std::vector<std::size_t> rim;
    const Grid& g = u.grid;
    const bool monitor = spec.domain.mode == BoundaryMode::WholeSpaceProxy;
    if (monitor) {
        g.for_each_interior([&](std::size_t i) {
            if (g.near_boundary(i, kSupportMonitorLayers)) rim.push_back(i);
        });
    }

    StepBuffers buf(g, spec);
    Field next(g);
    const double horizon = spec.horizon;
    long steps = 0;
    auto& diag = result.diagnostics;

    while (u.time < horizon) {
        double dt = stable_dt(u, spec, control, buf.ws.epsilon_p);
        const double target = next_snap < targets.size() ? std::min(targets[next_snap], horizon) : horizon;
        bool lands = false;
        if (u.time + dt >= target * (1.0 - 1e-14)) {
            dt = target - u.time;
            lands = true;
        }
        step(u, spec, dt, buf, next, steps);
        if (lands) next.time = target;
        ++steps;

        for (auto& ledger : result.ledgers) {
            if (spec.gamma != 0.0) ledger.diss_grad += dt * gradient_dissipation_rate(u, buf.rate, ledger.r);
            if (spec.nu != 0.0) ledger.diss_visc += dt * viscous_dissipation_rate(u, spec, ledger.r, buf.ws.epsilon_p);
            ledger.mass_r = lr_mass(next, ledger.r);
            ledger.residual = ledger.mass_r + ledger.diss_grad + ledger.diss_visc - ledger.mass_r0;
        }

        std::swap(u.values, next.values);
        u.time = next.time;

        if (options.keep_dt_history) diag.dt_history.push_back(dt);
        diag.dt_smallest = std::min(diag.dt_smallest, dt);
        diag.dt_largest = std::max(diag.dt_largest, dt);

        if (monitor) {
            double edge = 0.0;
            for (std::size_t i : rim) edge += std::abs(u.values[i]);
            const double total = lr_mass(u, 1.0) / g.cell_volume();
            const double frac = total > 0.0 ? edge / total : 0.0;
            diag.max_boundary_fraction = std::max(diag.max_boundary_fraction, frac);
            if (frac > kSupportMonitorThreshold && !diag.support_breach) {
                diag.support_breach = true;
                diag.first_breach_time = u.time;
            }
        }

        const bool snap = lands && next_snap < targets.size() && target == targets[next_snap];
        const bool last = u.time >= horizon;
        if (snap || last || options.trace_every <= 1 || steps % options.trace_every == 0) record(u);
        if (snap) {
            result.snapshots.push_back(u);
            ++next_snap;
        }
    }
    if (horizon == 0.0 && result.snapshots.empty()) result.snapshots.push_back(u);
    diag.steps = steps;
    result.final_field = u;
    return result;
}

}  // namespace hjlab
