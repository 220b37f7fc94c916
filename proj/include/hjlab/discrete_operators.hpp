#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "hjlab/core_problem.hpp"

namespace hjlab {

/// Regularization knobs shared by the spatial kernels.
struct OperatorWorkspace {
    /// Smooths |grad u|^{p-2} at flat regions; exactly 0 when p == 2.
    double epsilon_p = 0.0;
    /// Floor for |u| in the lambda-power of the absorption term.
    double epsilon_u = 0.0;
    /// Edge flux scratch, one slot per node per axis.
    std::vector<double> flux;
};

/// Default epsilon_p: 1e-8 * L / n for p != 2, zero otherwise.
inline double default_epsilon_p(const ProblemSpec& spec) {
    if (spec.p == 2.0) return 0.0;
    return 1e-8 * spec.domain.half_width / spec.domain.cells_per_axis;
}

inline OperatorWorkspace make_workspace(const ProblemSpec& spec) {
    OperatorWorkspace ws;
    ws.epsilon_p = default_epsilon_p(spec);
    return ws;
}

namespace detail {

inline void require_same_grid(const Field& a, const Field& b) {
    if (!(a.grid == b.grid) || a.values.size() != b.values.size()) {
        throw ConfigError("field shape mismatch");
    }
}

/// Squared gradient on the edge from node i to i + stride(axis): normal
/// component from the first difference, transverse components (2-D only) from
/// the average of the centered differences at the two end nodes.
inline double edge_gradient_sq(std::span<const double> u, const Grid& g, std::size_t i,
                               int axis) {
    const double h = g.spacing();
    const std::size_t s = g.stride(axis);
    const double normal = (u[i + s] - u[i]) / h;
    double sq = normal * normal;
    if (g.dim() == 2) {
        const int other = 1 - axis;
        const std::size_t t = g.stride(other);
        const auto ij = g.multi_index(i);
        // Edges on the outer boundary line have no transverse neighbours; the
        // flux through them is never used by interior nodes.
        if (ij[other] > 0 && ij[other] < g.cells_per_axis()) {
            const std::size_t j = i + s;
            const double ti = (u[i + t] - u[i - t]) / (2.0 * h);
            const double tj = (u[j + t] - u[j - t]) / (2.0 * h);
            const double tr = 0.5 * (ti + tj);
            sq += tr * tr;
        }
    }
    return sq;
}

/// Osher-Sethian combination of one-sided differences. With `reversed` the
/// roles of D- and D+ swap, which is the monotone choice for -|grad u|^q.
inline double upwind_gradient_sq(std::span<const double> u, const Grid& g, std::size_t i,
                                 bool reversed = false) {
    const double h = g.spacing();
    double sq = 0.0;
    for (int a = 0; a < g.dim(); ++a) {
        const std::size_t s = g.stride(a);
        const double back = (u[i] - u[i - s]) / h;
        const double fwd = (u[i + s] - u[i]) / h;
        if (!reversed) {
            const double b = std::max(back, 0.0);
            const double f = std::min(fwd, 0.0);
            sq += b * b + f * f;
        } else {
            const double b = std::min(back, 0.0);
            const double f = std::max(fwd, 0.0);
            sq += b * b + f * f;
        }
    }
    return sq;
}

inline double signum(double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); }

}  // namespace detail

/// Standard (2N+1)-point Laplacian on interior nodes; boundary entries are 0.
inline void laplacian(const Field& u, Field& out) {
    detail::require_same_grid(u, out);
    const Grid& g = u.grid;
    const double inv_h2 = 1.0 / (g.spacing() * g.spacing());
    std::fill(out.values.begin(), out.values.end(), 0.0);
    const auto& v = u.values;
    g.for_each_interior([&](std::size_t i) {
        double acc = 0.0;
        for (int a = 0; a < g.dim(); ++a) {
            const std::size_t s = g.stride(a);
            acc += v[i + s] - 2.0 * v[i] + v[i - s];
        }
        out.values[i] = acc * inv_h2;
    });
    out.time = u.time;
}

inline Field laplacian(const Field& u) {
    Field out(u.grid, u.time);
    laplacian(u, out);
    return out;
}

/**
 * Discrete div((|grad u|^2 + eps^2)^{(p-2)/2} grad u).
 *
 * Fluxes live on edges and the divergence telescopes, so the interior sum of
 * the result equals the net boundary flux. For p == 2 and eps == 0 this
 * forwards to laplacian() and is bitwise identical to it.
 */
inline void p_laplacian(const Field& u, double p, double epsilon_p, Field& out,
                        std::vector<double>& flux) {
    if (!(p > 1.0)) throw ConfigError("p-Laplacian requires p > 1");
    detail::require_same_grid(u, out);
    if (p == 2.0 && epsilon_p == 0.0) {
        laplacian(u, out);
        return;
    }
    const Grid& g = u.grid;
    const double h = g.spacing();
    const double eps2 = epsilon_p * epsilon_p;
    const double half_exp = 0.5 * (p - 2.0);
    const std::size_t n = g.size();
    const std::span<const double> v(u.values);
    flux.assign(n * static_cast<std::size_t>(g.dim()), 0.0);

    // flux[a * n + i] is the flux on the edge (i, i + stride(a)).
    for (int a = 0; a < g.dim(); ++a) {
        const std::size_t s = g.stride(a);
        auto edge = [&](std::size_t i) {
            const double grad_sq = detail::edge_gradient_sq(v, g, i, a);
            const double coeff = std::pow(grad_sq + eps2, half_exp);
            flux[a * n + i] = coeff * (v[i + s] - v[i]) / h;
        };
        // Every edge touching an interior node: the interior nodes and their
        // lower neighbours along axis a.
        g.for_each_interior([&](std::size_t i) {
            edge(i);
            if (g.multi_index(i)[a] == 1) edge(i - s);
        });
    }

    std::fill(out.values.begin(), out.values.end(), 0.0);
    g.for_each_interior([&](std::size_t i) {
        double acc = 0.0;
        for (int a = 0; a < g.dim(); ++a) {
            acc += flux[a * n + i] - flux[a * n + i - g.stride(a)];
        }
        out.values[i] = acc / h;
    });
    out.time = u.time;
}

inline Field p_laplacian(const Field& u, double p, double epsilon_p = 0.0) {
    Field out(u.grid, u.time);
    std::vector<double> flux;
    p_laplacian(u, p, epsilon_p, out, flux);
    return out;
}

/// Upwind gradient magnitude g (not raised to q) at each interior node.
inline Field upwind_gradient(const Field& u) {
    Field out(u.grid, u.time);
    const std::span<const double> v(u.values);
    u.grid.for_each_interior(
        [&](std::size_t i) { out.values[i] = std::sqrt(detail::upwind_gradient_sq(v, u.grid, i)); });
    return out;
}

/**
 * Monotone Godunov value of |grad u|^q:
 *
 *     g^2 = sum over axes of max(D-, 0)^2 + min(D+, 0)^2,   result g^q.
 *
 * Non-decreasing in u_i and non-increasing in each neighbour value.
 */
inline Field upwind_hamiltonian(const Field& u, double q) {
    if (!(q > 0.0)) throw ConfigError("Hamiltonian exponent must be positive");
    Field out(u.grid, u.time);
    const std::span<const double> v(u.values);
    const double half_q = 0.5 * q;
    u.grid.for_each_interior([&](std::size_t i) {
        out.values[i] = std::pow(detail::upwind_gradient_sq(v, u.grid, i), half_q);
    });
    return out;
}

/// gamma * sign(u) * max(|u|, eps_u)^lambda * grad_q, node-wise.
inline double absorption_value(double u, double grad_q, double lambda, double gamma,
                               double epsilon_u) {
    if (gamma == 0.0) return 0.0;
    if (lambda == 0.0) {
        if (epsilon_u > 0.0) return gamma * (u / std::max(std::abs(u), epsilon_u)) * grad_q;
        return gamma * grad_q;
    }
    return gamma * detail::signum(u) * std::pow(std::max(std::abs(u), epsilon_u), lambda) *
           grad_q;
}

/**
 * Absorption term g(u, grad u) = gamma |u|^{lambda-1} u |grad u|^q.
 *
 * For lambda = 0 and epsilon_u = 0 this is the scalar Hamilton-Jacobi sink
 * gamma * grad_q with no sign factor; a positive epsilon_u switches on the
 * smoothed sign u / max(|u|, epsilon_u) for signed runs.
 */
inline Field absorption(const Field& u, const Field& grad_q, double lambda, double gamma,
                        double epsilon_u = 0.0) {
    if (lambda < 0.0) throw ConfigError("lambda must be non-negative");
    detail::require_same_grid(u, grad_q);
    Field out(u.grid, u.time);
    u.grid.for_each_interior([&](std::size_t i) {
        out.values[i] = absorption_value(u.values[i], grad_q.values[i], lambda, gamma, epsilon_u);
    });
    return out;
}

/**
 * The absorption term exactly as the time stepper applies it.
 *
 * Where the coefficient gamma sign(u)|u|^lambda is negative the sink becomes
 * a source -c|grad u|^q and the monotone upwinding reverses; elsewhere this
 * equals absorption(u, upwind_hamiltonian(u, q), ...).
 */
inline void absorption_rate(const Field& u, const ProblemSpec& spec, double epsilon_u,
                            Field& out) {
    detail::require_same_grid(u, out);
    std::fill(out.values.begin(), out.values.end(), 0.0);
    if (spec.gamma == 0.0) return;
    const std::span<const double> v(u.values);
    const double half_q = 0.5 * spec.q;
    const bool signed_term = spec.lambda > 0.0 || epsilon_u > 0.0;
    u.grid.for_each_interior([&](std::size_t i) {
        const bool reversed = signed_term && v[i] < 0.0;
        const double grad_q = std::pow(detail::upwind_gradient_sq(v, u.grid, i, reversed), half_q);
        out.values[i] = absorption_value(v[i], grad_q, spec.lambda, spec.gamma, epsilon_u);
    });
}

/// Largest nu * (|grad u|^2 + eps^2)^{(p-2)/2} over edges touching interior nodes.
inline double max_edge_diffusivity(const Field& u, const ProblemSpec& spec, double epsilon_p) {
    if (spec.nu == 0.0) return 0.0;
    if (spec.p == 2.0) return spec.nu;
    const Grid& g = u.grid;
    const std::span<const double> v(u.values);
    const double eps2 = epsilon_p * epsilon_p;
    const double half_exp = 0.5 * (spec.p - 2.0);
    double best = 0.0;
    for (int a = 0; a < g.dim(); ++a) {
        const std::size_t s = g.stride(a);
        auto edge = [&](std::size_t i) {
            best = std::max(best, std::pow(detail::edge_gradient_sq(v, g, i, a) + eps2, half_exp));
        };
        g.for_each_interior([&](std::size_t i) {
            edge(i);
            if (g.multi_index(i)[a] == 1) edge(i - s);
        });
    }
    return spec.nu * best;
}

}  // namespace hjlab
