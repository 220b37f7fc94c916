#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "hjlab/core_problem.hpp"
#include "hjlab/discrete_operators.hpp"

namespace hjlab {

/// Raised when a power-law fit is requested on unusable data.
class FitError : public Error {
public:
    using Error::Error;
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Pairwise (tree) summation; the order depends only on the length.
inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double acc = 0.0;
        for (double x : v) acc += x;
        return acc;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

namespace detail {

template <typename F>
double interior_sum(const Grid& g, F&& term) {
    std::vector<double> buf;
    buf.reserve(g.interior_count());
    g.for_each_interior([&](std::size_t i) { buf.push_back(term(i)); });
    return pairwise_sum(buf);
}

/// |u|^{r-1} sign(u), the derivative of |u|^r / r.
inline double power_sign(double u, double r) {
    if (u == 0.0) return 0.0;
    if (r == 1.0) return signum(u);
    if (r == 2.0) return u;
    return signum(u) * std::pow(std::abs(u), r - 1.0);
}

}  // namespace detail

/// Sum of |u|^r h^N over interior nodes (the r-th power of the L^r norm).
inline double lr_mass(const Field& u, double r) {
    if (!(r >= 1.0) || std::isinf(r)) throw ConfigError("lr_mass requires finite r >= 1");
    const double vol = u.grid.cell_volume();
    const auto& v = u.values;
    if (r == 1.0) return vol * detail::interior_sum(u.grid, [&](std::size_t i) { return std::abs(v[i]); });
    if (r == 2.0) return vol * detail::interior_sum(u.grid, [&](std::size_t i) { return v[i] * v[i]; });
    return vol * detail::interior_sum(u.grid, [&](std::size_t i) { return std::pow(std::abs(v[i]), r); });
}

/// Grid L^r norm with node quadrature; r = infinity gives max |u|.
inline double lr_norm(const Field& u, double r) {
    if (!(r >= 1.0)) throw ConfigError("norm order r must be at least 1");
    if (std::isinf(r)) {
        double best = 0.0;
        u.grid.for_each_interior([&](std::size_t i) { best = std::max(best, std::abs(u.values[i])); });
        return best;
    }
    const double m = lr_mass(u, r);
    return r == 1.0 ? m : std::pow(m, 1.0 / r);
}

/// Grid L^q norm of the upwind gradient magnitude.
inline double grad_lq_norm(const Field& u, double q) {
    const Field g = upwind_hamiltonian(u, q);
    const double m = u.grid.cell_volume() *
                     detail::interior_sum(u.grid, [&](std::size_t i) { return g.values[i]; });
    return std::pow(m, 1.0 / q);
}

/**
 * Running energy balance for the r-th power of the L^r norm:
 *
 *     residual = mass_r(t) + diss_grad(t) + diss_visc(t) - mass_r(0).
 *
 * Dissipation is accumulated from the pre-step field with the same spatial
 * operators the stepper uses, so residual is a pure time-discretization
 * error: zero on frozen dynamics, first order in dt otherwise.
 */
struct EnergyLedger {
    double r = 1.0;
    double mass_r0 = 0.0;
    double mass_r = 0.0;
    double diss_grad = 0.0;
    double diss_visc = 0.0;
    double residual = 0.0;

    static EnergyLedger start(const Field& u0, double r) {
        EnergyLedger l;
        l.r = r;
        l.mass_r0 = lr_mass(u0, r);
        l.mass_r = l.mass_r0;
        return l;
    }

    double relative_residual() const {
        return mass_r0 > 0.0 ? std::abs(residual) / mass_r0 : std::abs(residual);
    }
};

/// Gradient-absorption dissipation rate r * sum phi_r(u) g h^N, given the
/// absorption field g already evaluated on u (see absorption_rate).
inline double gradient_dissipation_rate(const Field& u, const Field& rate, double r) {
    const auto& v = u.values;
    return r * u.grid.cell_volume() * detail::interior_sum(u.grid, [&](std::size_t i) {
               return detail::power_sign(v[i], r) * rate.values[i];
           });
}

/**
 * Viscous dissipation rate on edges:
 *
 *     r * nu * h^{N-1} * sum_e (phi_r(u_j) - phi_r(u_i)) * F_e,
 *
 * with F_e the (regularized) p-Laplacian edge flux. For r = 2, p = 2 this is
 * exactly 2 nu sum |D u|^2 h^N; for other r the secant of phi_r stands in for
 * (r - 1)|u|^{r-2}.
 */
inline double viscous_dissipation_rate(const Field& u, const ProblemSpec& spec, double r,
                                       double epsilon_p) {
    if (spec.nu == 0.0 || r == 1.0) return 0.0;
    const Grid& g = u.grid;
    const double h = g.spacing();
    const std::span<const double> v(u.values);
    const double eps2 = epsilon_p * epsilon_p;
    const double half_exp = 0.5 * (spec.p - 2.0);
    const int n = g.cells_per_axis();
    std::vector<double> terms;
    terms.reserve(g.size() * static_cast<std::size_t>(g.dim()));
    for (int a = 0; a < g.dim(); ++a) {
        const std::size_t s = g.stride(a);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const auto ij = g.multi_index(i);
            if (ij[a] >= n) continue;
            if (g.dim() == 2 && (ij[1 - a] == 0 || ij[1 - a] == n)) continue;
            const std::size_t j = i + s;
            const double d = (v[j] - v[i]) / h;
            double flux = d;
            if (spec.p != 2.0 || epsilon_p != 0.0) {
                flux *= std::pow(detail::edge_gradient_sq(v, g, i, a) + eps2, half_exp);
            }
            terms.push_back((detail::power_sign(v[j], r) - detail::power_sign(v[i], r)) * flux);
        }
    }
    const double edge_area = g.dim() == 1 ? 1.0 : h;
    return r * spec.nu * edge_area * pairwise_sum(terms);
}

/// Advances the ledger across one explicit step u_before -> u_after.
inline void update_ledger(EnergyLedger& ledger, const Field& u_before, const Field& u_after,
                          double dt, const ProblemSpec& spec, const OperatorWorkspace& ws,
                          Field& scratch) {
    if (spec.gamma != 0.0) {
        absorption_rate(u_before, spec, ws.epsilon_u, scratch);
        ledger.diss_grad += dt * gradient_dissipation_rate(u_before, scratch, ledger.r);
    }
    if (spec.nu != 0.0) {
        ledger.diss_visc += dt * viscous_dissipation_rate(u_before, spec, ledger.r, ws.epsilon_p);
    }
    ledger.mass_r = lr_mass(u_after, ledger.r);
    ledger.residual = ledger.mass_r + ledger.diss_grad + ledger.diss_visc - ledger.mass_r0;
}

inline void update_ledger(EnergyLedger& ledger, const Field& u_before, const Field& u_after,
                          double dt, const ProblemSpec& spec) {
    Field scratch(u_before.grid);
    update_ledger(ledger, u_before, u_after, dt, spec, make_workspace(spec), scratch);
}

/// Per-ledger history stored alongside the norm trace.
struct LedgerSeries {
    double r = 1.0;
    std::vector<double> mass_r;
    std::vector<double> diss_grad;
    std::vector<double> diss_visc;
    std::vector<double> residual;

    void push(const EnergyLedger& l) {
        mass_r.push_back(l.mass_r);
        diss_grad.push_back(l.diss_grad);
        diss_visc.push_back(l.diss_visc);
        residual.push_back(l.residual);
    }
};

/// Time series of norms and energy ledgers recorded by a run.
struct NormTrace {
    double q = 1.5;  ///< exponent used for grad_lq
    std::vector<double> extra_r;  ///< additional finite L^r orders beyond 1 and 2
    std::vector<double> times;
    std::vector<double> l1;
    std::vector<double> l2;
    std::vector<double> linf;
    std::vector<double> grad_lq;
    std::vector<std::vector<double>> extra;  ///< extra[k][i] = ||u(t_i)||_{extra_r[k]}
    std::vector<LedgerSeries> ledgers;

    std::size_t size() const { return times.size(); }

    void record(const Field& u) {
        times.push_back(u.time);
        l1.push_back(lr_norm(u, 1.0));
        l2.push_back(lr_norm(u, 2.0));
        linf.push_back(lr_norm(u, kInfinity));
        grad_lq.push_back(grad_lq_norm(u, q));
        extra.resize(extra_r.size());
        for (std::size_t k = 0; k < extra_r.size(); ++k) extra[k].push_back(lr_norm(u, extra_r[k]));
    }

    /// Series by name: l1, l2, linf, grad_lq, l<r> for an extra order, or a
    /// ledger column mass_r / diss_grad / diss_visc / residual (first ledger,
    /// or "<column>@<r>").
    const std::vector<double>& series(const std::string& name) const {
        if (name == "l1" || name == "L1") return l1;
        if (name == "l2" || name == "L2") return l2;
        if (name == "linf" || name == "Linf" || name == "sup") return linf;
        if (name == "grad_lq") return grad_lq;
        for (std::size_t k = 0; k < extra_r.size(); ++k) {
            if (name == "l" + format_double(extra_r[k])) return extra[k];
        }
        std::string column = name;
        const LedgerSeries* ledger = ledgers.empty() ? nullptr : &ledgers.front();
        if (const auto at = name.find('@'); at != std::string::npos) {
            column = name.substr(0, at);
            const double r = parse_double(name, name.substr(at + 1));
            ledger = nullptr;
            for (const auto& l : ledgers) {
                if (l.r == r) ledger = &l;
            }
        }
        if (ledger != nullptr) {
            if (column == "mass_r") return ledger->mass_r;
            if (column == "diss_grad") return ledger->diss_grad;
            if (column == "diss_visc") return ledger->diss_visc;
            if (column == "residual") return ledger->residual;
        }
        throw ConfigError("unknown trace series '" + name + "'");
    }
};

// ---------------------------------------------------------------------------
// Power-law fitting.

struct DecayFit {
    double t_begin = 0.0;
    double t_end = 0.0;
    double slope = 0.0;
    double intercept = 0.0;  ///< natural log of the prefactor
    double r_squared = 0.0;
    std::size_t samples = 0;
};

inline constexpr std::size_t kMinFitSamples = 8;
inline constexpr std::size_t kFitResamples = 64;

/// Ordinary least squares of log y on log t over the given points.
inline DecayFit fit_log_log(std::span<const double> log_t, std::span<const double> log_y) {
    const std::size_t n = log_t.size();
    if (n < 2) throw FitError("need at least two points to fit a line");
    double mt = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mt += log_t[i];
        my += log_y[i];
    }
    mt /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double stt = 0.0, sty = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dt = log_t[i] - mt;
        const double dy = log_y[i] - my;
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    if (stt == 0.0) throw FitError("all sample times coincide");
    DecayFit fit;
    fit.slope = sty / stt;
    fit.intercept = my - fit.slope * mt;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = log_y[i] - (fit.intercept + fit.slope * log_t[i]);
        ss_res += e * e;
    }
    fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
    fit.samples = n;
    return fit;
}

/**
 * Fits y ~ C t^slope over [t_begin, t_end].
 *
 * The trace is resampled at log-uniform times by linear interpolation in
 * (log t, log y), so dense late-time steps do not dominate the fit. Requires
 * at least 8 trace samples in the window, a window spanning at least one
 * decade, and positive values throughout.
 */
inline DecayFit fit_decay(std::span<const double> times, std::span<const double> values,
                          double t_begin, double t_end) {
    if (times.size() != values.size()) throw FitError("times and values differ in length");
    if (!(t_begin > 0.0) || !(t_end > t_begin)) throw FitError("fit window must satisfy 0 < t_a < t_b");
    if (t_end / t_begin < 10.0 * (1.0 - 1e-12)) {
        throw FitError("degenerate fit: window spans less than one decade of t");
    }
    std::vector<double> lt, ly;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < t_begin * (1.0 - 1e-12) || times[i] > t_end * (1.0 + 1e-12)) continue;
        if (!(values[i] > 0.0)) throw FitError("norm is not positive inside the fit window");
        if (!lt.empty() && !(std::log(times[i]) > lt.back())) continue;
        lt.push_back(std::log(times[i]));
        ly.push_back(std::log(values[i]));
    }
    if (lt.size() < kMinFitSamples) {
        throw FitError("fit window holds fewer than 8 samples");
    }
    const double a = lt.front();
    const double b = lt.back();
    if (!(b > a)) throw FitError("fit window holds a single time");
    std::vector<double> rt(kFitResamples), ry(kFitResamples);
    std::size_t k = 0;
    for (std::size_t j = 0; j < kFitResamples; ++j) {
        const double x = j + 1 == kFitResamples
                             ? b
                             : a + (b - a) * static_cast<double>(j) / (kFitResamples - 1);
        while (k + 2 < lt.size() && lt[k + 1] < x) ++k;
        const double w = (x - lt[k]) / (lt[k + 1] - lt[k]);
        rt[j] = x;
        ry[j] = ly[k] + std::clamp(w, 0.0, 1.0) * (ly[k + 1] - ly[k]);
    }
    DecayFit fit = fit_log_log(rt, ry);
    fit.t_begin = std::exp(a);
    fit.t_end = std::exp(b);
    fit.samples = lt.size();
    return fit;
}

inline DecayFit fit_decay(const NormTrace& trace, const std::string& which_norm,
                          double t_begin, double t_end) {
    return fit_decay(trace.times, trace.series(which_norm), t_begin, t_end);
}

// ---------------------------------------------------------------------------
// CSV export / import.

namespace detail {

inline std::string csv_row(std::span<const double> cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) line += ',';
        line += format_double(cells[i]);
    }
    line += '\n';
    return line;
}

}  // namespace detail

/// Columns: t,l1,l2,linf,grad_lq,mass_r,diss_grad,diss_visc,residual, then
/// one l<r> column per extra order. Ledger columns come from the ledger with
/// order `ledger_r` (the first ledger when absent; empty cells if none).
inline std::string trace_to_csv(const NormTrace& trace, double ledger_r = 0.0) {
    const LedgerSeries* ledger = nullptr;
    for (const auto& l : trace.ledgers) {
        if (ledger == nullptr || l.r == ledger_r) ledger = &l;
        if (l.r == ledger_r) break;
    }
    std::string out = "t,l1,l2,linf,grad_lq,mass_r,diss_grad,diss_visc,residual";
    for (double r : trace.extra_r) out += ",l" + format_double(r);
    out += '\n';
    for (std::size_t i = 0; i < trace.size(); ++i) {
        std::string line = format_double(trace.times[i]) + "," + format_double(trace.l1[i]) + "," +
                           format_double(trace.l2[i]) + "," + format_double(trace.linf[i]) + "," +
                           format_double(trace.grad_lq[i]);
        if (ledger != nullptr) {
            line += "," + format_double(ledger->mass_r[i]) + "," + format_double(ledger->diss_grad[i]) +
                    "," + format_double(ledger->diss_visc[i]) + "," + format_double(ledger->residual[i]);
        } else {
            line += ",,,,";
        }
        for (std::size_t k = 0; k < trace.extra_r.size(); ++k) line += "," + format_double(trace.extra[k][i]);
        out += line + '\n';
    }
    return out;
}

/// A CSV table keyed by header names; empty cells read as NaN.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;

    const std::vector<double>& column(const std::string& name) const {
        for (std::size_t k = 0; k < header.size(); ++k) {
            if (header[k] == name) return columns[k];
        }
        throw ConfigError("CSV has no column '" + name + "'");
    }
};

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(s);
    while (std::getline(in, cell, sep)) out.push_back(trim(cell));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

inline CsvTable parse_csv(const std::string& text) {
    CsvTable table;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty CSV");
    table.header = split(trim(line), ',');
    table.columns.resize(table.header.size());
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto cells = split(trim(line), ',');
        if (cells.size() != table.header.size()) {
            throw ConfigError("CSV row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                              " cells, expected " + std::to_string(table.header.size()));
        }
        for (std::size_t k = 0; k < cells.size(); ++k) {
            table.columns[k].push_back(cells[k].empty() ? std::numeric_limits<double>::quiet_NaN()
                                                        : parse_double(table.header[k], cells[k]));
        }
    }
    return table;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out << text;
}

}  // namespace hjlab
