#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hjlab/core_problem.hpp"

namespace hjlab::moser {

/// Exponents of the smoothing estimate ||v(t)||_inf <= C t^{-sigma} ||v0||_r^{varpi}.
struct ExponentSpec {
    double r = 1.0;
    double m = 2.0;
    double lambda = 0.0;
    double theta = 2.0;  ///< Sobolev gain; +infinity means theta' = 1
    double theta_conj = 2.0;
    double sigma = 0.0;
    double varpi = 0.0;
};

/// Conjugate exponent theta / (theta - 1); 1 for theta = infinity.
inline double conjugate(double theta) {
    if (std::isinf(theta)) return 1.0;
    return theta / (theta - 1.0);
}

/// Sobolev gain N / (N - m) for m < N, infinity for m > N, nullopt at m == N.
inline std::optional<double> sobolev_theta(int n_dim, double m) {
    if (m < n_dim) return n_dim / (n_dim - m);
    if (m > n_dim) return std::numeric_limits<double>::infinity();
    return std::nullopt;
}

/// r > (N/m)(1 - m - lambda).
inline bool admissible(double r, double m, double lambda, int n_dim) {
    return r > (n_dim / m) * (1.0 - m - lambda);
}

/**
 * sigma = 1 / (r/theta' + lambda + m - 1),  varpi = (r/theta') sigma.
 *
 * Throws RegimeError when the denominator is not positive (the estimate is
 * void there) and ConfigError for r < 1, m <= 1 or theta <= 1.
 */
inline ExponentSpec sigma_varpi(double r, double m, double lambda, double theta) {
    if (!(r >= 1.0)) throw ConfigError("r must be at least 1");
    if (!(m > 1.0)) throw ConfigError("m must exceed 1");
    if (!(theta > 1.0)) throw ConfigError("theta must exceed 1");
    ExponentSpec e{r, m, lambda, theta, conjugate(theta), 0.0, 0.0};
    const double denom = r / e.theta_conj + lambda + m - 1.0;
    if (!(denom > 0.0)) {
        throw RegimeError("non-positive denominator r/theta' + lambda + m - 1 = " + format_double(denom) +
                          ": estimate is void");
    }
    e.sigma = 1.0 / denom;
    e.varpi = (r / e.theta_conj) * e.sigma;
    return e;
}

struct BootstrapInput {
    double omega = 0.5;
    double sigma = 1.0;
    double K = 1.0;
    double t = 1.0;
};

/// 2^{sigma (1-omega)^{-2}} (K t^{-sigma})^{(1-omega)^{-1}}.
inline double bootstrap_bound(const BootstrapInput& in) {
    if (!(in.omega > 0.0 && in.omega < 1.0)) throw ConfigError("omega must lie in (0, 1)");
    if (!(in.sigma > 0.0)) throw ConfigError("sigma must be positive");
    if (!(in.K > 0.0)) throw ConfigError("K must be positive");
    if (!(in.t > 0.0)) throw ConfigError("t must be positive");
    const double inv = 1.0 / (1.0 - in.omega);
    return std::pow(2.0, in.sigma * inv * inv) * std::pow(in.K * std::pow(in.t, -in.sigma), inv);
}

/// Sequences of the Moser iteration r_{n+1} = (r_n + lambda + m - 1) theta.
struct RecursionTrace {
    ExponentSpec closed_form;
    /// ln r_n for n = 0..n_max+1; r_n itself while below the linear threshold.
    std::vector<double> log_r;
    std::vector<double> r;  ///< NaN once the log domain takes over
    std::vector<double> varpi_seq;    ///< theta^{n+1} r / r_{n+1}, n = 0..n_max
    std::vector<double> sigma_seq;    ///< (1/r_{n+1}) sum_{k=1}^{n+1} theta^{n+2-k}
    std::vector<double> series_seq;   ///< sum_{k=1}^{n+1} k theta^{1-k}
    double theta_conj_sq = 0.0;
    double varpi_error = 0.0;
    double sigma_error = 0.0;
    double series_error = 0.0;
    /// ell = exp(r^{-1} varpi ((m theta - 1) S - m theta ln r)), S = sum theta^{-k} ln r_k.
    double ell = 0.0;
    bool converged = false;
};

inline constexpr double kLinearThreshold = 1e12;
inline constexpr double kRecursionTolerance = 1e-6;

/**
 * Iterates the recursion n_max times and compares the three limits with
 * (varpi, sigma, theta'^2). Above r_n = 1e12 the iteration continues in
 * logarithms, so large theta and n_max never overflow.
 */
inline RecursionTrace simulate_recursion(double r, double m, double lambda, double theta, int n_max) {
    if (n_max < 10) throw ConfigError("n_max must be at least 10");
    if (std::isinf(theta)) throw ConfigError("the recursion needs a finite theta");
    RecursionTrace tr;
    tr.closed_form = sigma_varpi(r, m, lambda, theta);
    const double shift = lambda + m - 1.0;
    const double log_theta = std::log(theta);

    tr.log_r.push_back(std::log(r));
    tr.r.push_back(r);
    double lin = r;
    bool linear = true;
    for (int n = 0; n <= n_max; ++n) {
        if (linear) {
            lin = (lin + shift) * theta;
            if (!(lin > 0.0)) throw RegimeError("recursion left the positive half-line");
            tr.r.push_back(lin);
            tr.log_r.push_back(std::log(lin));
            linear = lin <= kLinearThreshold;
        } else {
            const double prev = tr.log_r.back();
            tr.log_r.push_back(log_theta + prev + std::log1p(shift * std::exp(-prev)));
            tr.r.push_back(std::numeric_limits<double>::quiet_NaN());
        }
    }

    // sum_{k=1}^{n+1} theta^{n+2-k} = theta^{n+1} * sum_{i=0}^{n} theta^{-i}
    double geometric = 0.0;  // sum_{i=0}^{n} theta^{-i}
    double series = 0.0;
    double s_sum = 0.0;
    for (int n = 0; n <= n_max; ++n) {
        geometric += std::exp(-n * log_theta);
        series += (n + 1) * std::exp(-n * log_theta);
        const double log_rn1 = tr.log_r[n + 1];
        tr.varpi_seq.push_back(std::exp((n + 1) * log_theta + std::log(r) - log_rn1));
        tr.sigma_seq.push_back(std::exp((n + 1) * log_theta + std::log(geometric) - log_rn1));
        tr.series_seq.push_back(series);
        s_sum += std::exp(-n * log_theta) * tr.log_r[n];
    }
    tr.theta_conj_sq = tr.closed_form.theta_conj * tr.closed_form.theta_conj;
    tr.varpi_error = std::abs(tr.varpi_seq.back() - tr.closed_form.varpi);
    tr.sigma_error = std::abs(tr.sigma_seq.back() - tr.closed_form.sigma);
    tr.series_error = std::abs(tr.series_seq.back() - tr.theta_conj_sq);
    const double mt = m * theta;
    tr.ell = std::exp(tr.closed_form.varpi / r * ((mt - 1.0) * s_sum - mt * std::log(r)));
    tr.converged = tr.varpi_error < kRecursionTolerance && tr.sigma_error < kRecursionTolerance &&
                   tr.series_error < kRecursionTolerance;
    return tr;
}

/// One exponent in the table; `valid` is false where the formula's
/// hypotheses fail, in which case `fallback` holds the replacement (if any).
struct ExponentRow {
    double r = 1.0;
    std::string name;
    std::string formula;
    double value = std::numeric_limits<double>::quiet_NaN();
    double varpi = std::numeric_limits<double>::quiet_NaN();
    bool valid = false;
    std::optional<double> fallback;
    std::string note;
};

struct ExponentTable {
    int n_dim = 1;
    double q = 1.5;
    double p = 2.0;
    double lambda = 0.0;
    std::vector<ExponentRow> rows;

    const ExponentRow& find(const std::string& name, double r) const {
        for (const auto& row : rows) {
            if (row.name == name && row.r == r) return row;
        }
        throw ConfigError("no exponent row '" + name + "' for r = " + format_double(r));
    }
};

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline ExponentRow make_row(double r, std::string name, std::string formula) {
    ExponentRow row;
    row.r = r;
    row.name = std::move(name);
    row.formula = std::move(formula);
    return row;
}

/**
 * Every exponent the decay and smoothing estimates use, per r:
 *
 *  - sigma_rqN / varpi_rqN        gradient-coercive HJ, valid for q < N
 *                                 (fallback 1/(q+r-1) for q >= N)
 *  - sigma_rql                    quasilinear, gradient-coercive absorption, 1 < q < N
 *  - sigma_rp                     coercive p-Laplacian, p < N, r > (2-p)N/p
 *  - heat                         N/(2r)
 *  - universal_g, universal_p     1/(q-1+lambda), 1/(p-2) for p > 2
 *
 * Rows whose hypotheses fail still carry the formula value, marked void.
 */
inline ExponentTable exponent_table(int n_dim, double q, double p, double lambda,
                                    const std::vector<double>& r_list) {
    if (n_dim < 1) throw ConfigError("N must be a positive integer");
    ExponentTable table{n_dim, q, p, lambda, {}};
    const double N = n_dim;
    for (double r : r_list) {
        {
            ExponentRow row = make_row(r, "sigma_rqN", "1/(rq/N+q-1)");
            const double denom = r * q / N + q - 1.0;
            row.value = denom > 0.0 ? 1.0 / denom : kNaN;
            row.varpi = r * q / N * row.value;
            row.valid = q > 1.0 && q < N && r >= 1.0;
            if (q >= N && q > 1.0) {
                row.fallback = 1.0 / (q + r - 1.0);
                row.note = q > N ? "q > N: sigma = 1/(q+r-1), varpi = r sigma"
                                 : "q = N: 1/(N(1-delta)+r-1), shown as delta -> 0";
            }
            table.rows.push_back(row);
        }
        {
            ExponentRow row = make_row(r, "sigma_rql", "1/(rq/N+lambda+q-1)");
            const double denom = r * q / N + lambda + q - 1.0;
            row.value = denom > 0.0 ? 1.0 / denom : kNaN;
            row.varpi = r * q / N * row.value;
            row.valid = q > 1.0 && q < N && r >= 1.0 && denom > 0.0;
            if (!row.valid) row.note = "requires 1 < q < N";
            table.rows.push_back(row);
        }
        {
            ExponentRow row = make_row(r, "sigma_rp", "1/(rp/N+p-2)");
            const double denom = r * p / N + p - 2.0;
            row.value = denom > 0.0 ? 1.0 / denom : kNaN;
            row.varpi = denom > 0.0 ? 1.0 / (1.0 + N * (p - 2.0) / (r * p)) : kNaN;
            row.valid = p > 1.0 && p < N && r > (2.0 - p) * N / p && denom > 0.0;
            if (!row.valid) row.note = "requires p < N and r > (2-p)N/p";
            table.rows.push_back(row);
        }
        {
            ExponentRow row = make_row(r, "heat", "N/(2r)");
            row.value = N / (2.0 * r);
            row.varpi = 1.0;
            row.valid = r >= 1.0;
            row.note = "requires nu > 0";
            table.rows.push_back(row);
        }
        {
            ExponentRow row = make_row(r, "universal_g", "1/(q-1+lambda)");
            const double denom = q - 1.0 + lambda;
            row.value = denom > 0.0 ? 1.0 / denom : kNaN;
            row.valid = denom > 0.0;
            row.note = "bounded domain";
            table.rows.push_back(row);
        }
        {
            ExponentRow row = make_row(r, "universal_p", "1/(p-2)");
            row.value = p > 2.0 ? 1.0 / (p - 2.0) : kNaN;
            row.valid = p > 2.0;
            row.note = p > 2.0 ? "bounded domain" : "requires p > 2";
            table.rows.push_back(row);
        }
    }
    return table;
}

inline std::string cell(double v) { return std::isnan(v) ? "" : format_double(v); }

inline std::string exponent_table_csv(const ExponentTable& t) {
    std::string out = "r,name,formula,value,varpi,valid,fallback,note\n";
    for (const auto& row : t.rows) {
        out += format_double(row.r) + "," + row.name + "," + row.formula + "," + cell(row.value) + "," +
               cell(row.varpi) + "," + (row.valid ? "1" : "0") + "," +
               (row.fallback ? format_double(*row.fallback) : std::string()) + "," + row.note + "\n";
    }
    return out;
}

inline std::string exponent_table_text(const ExponentTable& t) {
    char line[256];
    std::string out;
    std::snprintf(line, sizeof line, "N=%d q=%s p=%s lambda=%s\n", t.n_dim, format_double(t.q).c_str(),
                  format_double(t.p).c_str(), format_double(t.lambda).c_str());
    out += line;
    std::snprintf(line, sizeof line, "%-6s %-12s %-22s %-12s %-12s %-6s %-12s %s\n", "r", "name", "formula",
                  "value", "varpi", "valid", "fallback", "note");
    out += line;
    auto num = [](double v) {
        char b[32];
        if (std::isnan(v)) return std::string("-");
        std::snprintf(b, sizeof b, "%.10g", v);
        return std::string(b);
    };
    for (const auto& row : t.rows) {
        std::snprintf(line, sizeof line, "%-6s %-12s %-22s %-12s %-12s %-6s %-12s %s\n",
                      format_double(row.r).c_str(), row.name.c_str(), row.formula.c_str(), num(row.value).c_str(),
                      num(row.varpi).c_str(), row.valid ? "yes" : "VOID",
                      row.fallback ? num(*row.fallback).c_str() : "-", row.note.c_str());
        out += line;
    }
    return out;
}

}  // namespace hjlab::moser
