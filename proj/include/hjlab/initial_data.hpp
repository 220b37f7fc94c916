#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <variant>

#include "hjlab/core_problem.hpp"
#include "hjlab/estimates_ledger.hpp"

namespace hjlab {

namespace datum {

/// A exp(-|x - x0|^2 / (2 s^2)).
struct Gaussian {
    double amplitude = 1.0;
    std::array<double, 2> center{0.0, 0.0};
    double width = 0.25;
};

/// A min(1, |x|^{-b}); lies in L^r exactly when b r > N.
struct PowerTail {
    double amplitude = 1.0;
    double tail_exponent = 1.5;
};

/// Smooth compactly supported bump of radius epsilon carrying mass M0.
struct MollifiedDirac {
    double mass = 1.0;
    double epsilon = 0.1;
    std::array<double, 2> center{0.0, 0.0};
};

/// height on the box [-a, a]^N.
struct Indicator {
    double half_width = 0.5;
    double height = 1.0;
};

/// Node values from a CSV file with header "x,u" or "x,y,u".
struct FromFile {
    std::string path;
};

}  // namespace datum

enum class DatumSign { Nonnegative, Signed };

struct InitialDatum {
    std::variant<datum::Gaussian, datum::PowerTail, datum::MollifiedDirac, datum::Indicator,
                 datum::FromFile>
        kind = datum::Gaussian{};
    DatumSign sign = DatumSign::Nonnegative;
};

inline std::string kind_name(const InitialDatum& d) {
    struct Namer {
        std::string operator()(const datum::Gaussian&) const { return "gaussian"; }
        std::string operator()(const datum::PowerTail&) const { return "power_tail"; }
        std::string operator()(const datum::MollifiedDirac&) const { return "mollified_dirac"; }
        std::string operator()(const datum::Indicator&) const { return "indicator"; }
        std::string operator()(const datum::FromFile&) const { return "from_file"; }
    };
    return std::visit(Namer{}, d.kind);
}

/// Unnormalized mollifier exp(1 / (|x/eps|^2 - 1)) on |x| < eps.
inline double bump(double radius, double epsilon) {
    const double s = radius / epsilon;
    if (s >= 1.0) return 0.0;
    return std::exp(1.0 / (s * s - 1.0));
}

// ---------------------------------------------------------------------------
// Field CSV: header "x,u" (1-D) or "x,y,u" (2-D), one node per row in
// storage order, every node including the boundary.

inline std::string field_to_csv(const Field& u) {
    std::string out = u.grid.dim() == 1 ? "x,u\n" : "x,y,u\n";
    for (std::size_t i = 0; i < u.size(); ++i) {
        const auto x = u.grid.position(i);
        out += format_double(x[0]);
        if (u.grid.dim() == 2) out += "," + format_double(x[1]);
        out += "," + format_double(u.values[i]) + "\n";
    }
    return out;
}

inline Field field_from_csv(const std::string& text, const Grid& grid) {
    const CsvTable table = parse_csv(text);
    const std::vector<std::string> expected =
        grid.dim() == 1 ? std::vector<std::string>{"x", "u"} : std::vector<std::string>{"x", "y", "u"};
    if (table.header != expected) {
        throw ConfigError(grid.dim() == 1 ? "field CSV header must be x,u" : "field CSV header must be x,y,u");
    }
    const auto& u = table.column("u");
    if (u.size() != grid.size()) {
        throw ConfigError("field CSV has " + std::to_string(u.size()) + " rows, grid has " +
                          std::to_string(grid.size()) + " nodes");
    }
    Field f(grid);
    const double tol = 1e-9 * grid.spacing();
    for (std::size_t i = 0; i < u.size(); ++i) {
        const auto x = grid.position(i);
        if (std::abs(table.column("x")[i] - x[0]) > tol ||
            (grid.dim() == 2 && std::abs(table.column("y")[i] - x[1]) > tol)) {
            throw ConfigError("field CSV row " + std::to_string(i + 2) + " does not match the grid node");
        }
        if (!std::isfinite(u[i])) throw ConfigError("field CSV row " + std::to_string(i + 2) + " is not finite");
        f.values[i] = u[i];
    }
    return f;
}

/**
 * Samples a datum at the grid nodes; boundary nodes are set to 0.
 *
 * `lr_order`, when given, is the L^r space the run is posed in: a power tail
 * with b r <= N is rejected. Mollified Dirac data are renormalized so the
 * node quadrature equals the requested mass exactly.
 */
inline Field sample(const InitialDatum& d, const Grid& grid,
                    std::optional<double> lr_order = std::nullopt) {
    Field f(grid);
    const int dim = grid.dim();
    auto dist = [&](std::size_t i, const std::array<double, 2>& c) {
        const auto x = grid.position(i);
        const double dx = x[0] - c[0];
        const double dy = dim == 2 ? x[1] - c[1] : 0.0;
        return std::sqrt(dx * dx + dy * dy);
    };
    const bool nonneg = d.sign == DatumSign::Nonnegative;

    if (const auto* g = std::get_if<datum::Gaussian>(&d.kind)) {
        if (!(g->width > 0.0)) throw ConfigError("gaussian width must be positive");
        if (nonneg && g->amplitude < 0.0) throw ConfigError("nonnegative datum has negative amplitude");
        grid.for_each_interior([&](std::size_t i) {
            const double r = dist(i, g->center);
            f.values[i] = g->amplitude * std::exp(-r * r / (2.0 * g->width * g->width));
        });
    } else if (const auto* p = std::get_if<datum::PowerTail>(&d.kind)) {
        if (!(p->tail_exponent > 0.0)) throw ConfigError("tail exponent must be positive");
        if (nonneg && p->amplitude < 0.0) throw ConfigError("nonnegative datum has negative amplitude");
        if (lr_order && !(p->tail_exponent * *lr_order > dim)) {
            throw ConfigError("power tail with b*r <= N is not in L^r");
        }
        grid.for_each_interior([&](std::size_t i) {
            const double r = grid.radius(i);
            f.values[i] = p->amplitude * (r <= 1.0 ? 1.0 : std::pow(r, -p->tail_exponent));
        });
    } else if (const auto* m = std::get_if<datum::MollifiedDirac>(&d.kind)) {
        if (!(m->epsilon > 0.0)) throw ConfigError("mollifier width must be positive");
        if (nonneg && m->mass < 0.0) throw ConfigError("nonnegative datum has negative mass");
        grid.for_each_interior([&](std::size_t i) { f.values[i] = bump(dist(i, m->center), m->epsilon); });
        const double raw = lr_mass(f, 1.0);
        if (!(raw > 0.0)) throw ConfigError("mollifier width is below the grid resolution");
        const double scale = m->mass / raw;
        for (double& v : f.values) v *= scale;
    } else if (const auto* ind = std::get_if<datum::Indicator>(&d.kind)) {
        if (!(ind->half_width > 0.0)) throw ConfigError("indicator half-width must be positive");
        if (nonneg && ind->height < 0.0) throw ConfigError("nonnegative datum has negative height");
        grid.for_each_interior([&](std::size_t i) {
            const auto x = grid.position(i);
            bool inside = std::abs(x[0]) <= ind->half_width;
            if (dim == 2) inside = inside && std::abs(x[1]) <= ind->half_width;
            f.values[i] = inside ? ind->height : 0.0;
        });
    } else {
        const auto& file = std::get<datum::FromFile>(d.kind);
        f = field_from_csv(read_text_file(file.path), grid);
        f.zero_boundary();
        if (nonneg && std::any_of(f.values.begin(), f.values.end(), [](double v) { return v < 0.0; })) {
            throw ConfigError("nonnegative datum file contains negative values");
        }
    }
    return f;
}

// ---------------------------------------------------------------------------
// Truncations.

/// T_k(u) = max(-k, min(k, u)).
inline double truncate(double u, double k) {
    if (!(k > 0.0)) throw ConfigError("truncation level k must be positive");
    return std::clamp(u, -k, k);
}

/// Theta_k(u) = integral of T_k from 0 to u: u^2/2 for |u| <= k, k|u| - k^2/2 beyond.
inline double theta_k(double u, double k) {
    if (!(k > 0.0)) throw ConfigError("truncation level k must be positive");
    const double a = std::abs(u);
    return a <= k ? 0.5 * u * u : k * a - 0.5 * k * k;
}

inline Field truncate(const Field& u, double k) {
    Field out = u;
    for (double& v : out.values) v = truncate(v, k);
    return out;
}

inline Field theta_k(const Field& u, double k) {
    Field out = u;
    for (double& v : out.values) v = theta_k(v, k);
    return out;
}

}  // namespace hjlab
