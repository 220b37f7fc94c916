#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace hjlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input (configs, specs, grids, data).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A check was asked to run outside the parameter regime where it is meaningful.
class RegimeError : public Error {
public:
    using Error::Error;
};

enum class BoundaryMode { WholeSpaceProxy, Dirichlet };

inline std::string to_string(BoundaryMode mode) {
    return mode == BoundaryMode::Dirichlet ? "dirichlet" : "whole_space";
}

inline BoundaryMode boundary_mode_from_string(std::string_view s) {
    if (s == "dirichlet" || s == "Dirichlet") return BoundaryMode::Dirichlet;
    if (s == "whole_space" || s == "WholeSpaceProxy" || s == "whole_space_proxy") {
        return BoundaryMode::WholeSpaceProxy;
    }
    throw ConfigError("unknown boundary mode '" + std::string(s) + "'");
}

/// Box [-L, L]^N with n cells per axis.
struct DomainSpec {
    double half_width = 1.0;
    BoundaryMode mode = BoundaryMode::WholeSpaceProxy;
    int cells_per_axis = 64;
};

/**
 * Parameters of
 *
 *     u_t = nu * div(|grad u|^{p-2} grad u) - gamma * |u|^{lambda-1} u |grad u|^q
 *
 * on a box. p = 2 is the viscous Hamilton-Jacobi equation; lambda = 0 with
 * gamma = 1 is the model gradient-absorption problem.
 */
struct ProblemSpec {
    double q = 1.5;
    double p = 2.0;
    double lambda = 0.0;
    double gamma = 1.0;
    double nu = 1.0;
    int dim = 1;
    DomainSpec domain{};
    double horizon = 1.0;
};

/// Every violated invariant, one message each. Empty means usable.
struct ValidationReport {
    std::vector<std::string> violations;

    bool ok() const { return violations.empty(); }

    std::string message() const {
        std::string out;
        for (const auto& v : violations) {
            if (!out.empty()) out += "; ";
            out += v;
        }
        return out;
    }
};

inline constexpr int kMinCellsPerAxis = 8;

inline ValidationReport validate_spec(const ProblemSpec& spec) {
    ValidationReport report;
    auto fail = [&](std::string msg) { report.violations.push_back(std::move(msg)); };
    auto finite = [](double v) { return std::isfinite(v); };

    if (!finite(spec.q) || !(spec.q > 1.0)) fail("q must exceed 1");
    if (!finite(spec.p) || !(spec.p > 1.0)) fail("p must exceed 1");
    if (!finite(spec.lambda) || spec.lambda < 0.0) fail("lambda must be non-negative");
    if (!finite(spec.gamma) || spec.gamma < 0.0) fail("gamma must be non-negative");
    if (!finite(spec.nu) || spec.nu < 0.0) fail("nu must be non-negative");
    if (!finite(spec.horizon) || !(spec.horizon > 0.0)) fail("horizon must be positive");
    if (spec.nu == 0.0 && spec.gamma == 0.0) {
        fail("degenerate: no diffusion and no absorption");
    }
    if (spec.p != 2.0 && !(spec.nu > 0.0)) fail("p != 2 requires nu > 0");
    if (spec.dim != 1 && spec.dim != 2) fail("dim must be 1 or 2");
    if (!finite(spec.domain.half_width) || !(spec.domain.half_width > 0.0)) {
        fail("half_width must be positive");
    }
    if (spec.domain.cells_per_axis < kMinCellsPerAxis) {
        fail("cells_per_axis must be at least 8");
    }
    return report;
}

/**
 * Uniform node-centered grid on [-L, L]^N.
 *
 * Nodes are indexed 0..n along each axis, so there are (n + 1)^N nodes; the
 * outermost layer is the homogeneous Dirichlet boundary and always holds 0.
 * Axis 0 is contiguous (stride 1), axis 1 has stride n + 1.
 */
class Grid {
public:
    Grid() = default;

    Grid(int dim, int cells_per_axis, double half_width)
        : dim_(dim), n_(cells_per_axis), half_width_(half_width),
          h_(2.0 * half_width / cells_per_axis) {
        if (dim != 1 && dim != 2) throw ConfigError("dim must be 1 or 2");
        if (cells_per_axis < kMinCellsPerAxis) {
            throw ConfigError("cells_per_axis must be at least 8");
        }
        if (!(half_width > 0.0)) throw ConfigError("half_width must be positive");
    }

    int dim() const { return dim_; }
    int cells_per_axis() const { return n_; }
    double half_width() const { return half_width_; }
    double spacing() const { return h_; }
    double cell_volume() const { return dim_ == 1 ? h_ : h_ * h_; }
    std::size_t nodes_per_axis() const { return static_cast<std::size_t>(n_) + 1; }

    std::size_t size() const {
        return dim_ == 1 ? nodes_per_axis() : nodes_per_axis() * nodes_per_axis();
    }

    std::size_t interior_count() const {
        const auto m = static_cast<std::size_t>(n_ - 1);
        return dim_ == 1 ? m : m * m;
    }

    std::size_t stride(int axis) const { return axis == 0 ? 1 : nodes_per_axis(); }

    double coordinate(int i) const { return -half_width_ + h_ * i; }

    std::size_t index(std::array<int, 2> ij) const {
        return static_cast<std::size_t>(ij[0]) +
               (dim_ == 2 ? static_cast<std::size_t>(ij[1]) * nodes_per_axis() : 0);
    }

    std::array<int, 2> multi_index(std::size_t flat) const {
        const auto m = nodes_per_axis();
        if (dim_ == 1) return {static_cast<int>(flat), 0};
        return {static_cast<int>(flat % m), static_cast<int>(flat / m)};
    }

    std::array<double, 2> position(std::size_t flat) const {
        const auto ij = multi_index(flat);
        return {coordinate(ij[0]), dim_ == 2 ? coordinate(ij[1]) : 0.0};
    }

    /// Euclidean distance of a node from the origin.
    double radius(std::size_t flat) const {
        const auto x = position(flat);
        return std::sqrt(x[0] * x[0] + x[1] * x[1]);
    }

    bool is_boundary(std::size_t flat) const {
        const auto ij = multi_index(flat);
        for (int a = 0; a < dim_; ++a) {
            if (ij[a] == 0 || ij[a] == n_) return true;
        }
        return false;
    }

    /// Interior nodes within `layers` nodes of the boundary.
    bool near_boundary(std::size_t flat, int layers) const {
        const auto ij = multi_index(flat);
        for (int a = 0; a < dim_; ++a) {
            if (ij[a] <= layers || ij[a] >= n_ - layers) return true;
        }
        return false;
    }

    /// Calls f(flat_index) for every interior node in storage order.
    template <typename F>
    void for_each_interior(F&& f) const {
        const auto m = nodes_per_axis();
        if (dim_ == 1) {
            for (std::size_t i = 1; i + 1 < m; ++i) f(i);
            return;
        }
        for (std::size_t j = 1; j + 1 < m; ++j) {
            for (std::size_t i = 1; i + 1 < m; ++i) f(i + j * m);
        }
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    int dim_ = 1;
    int n_ = kMinCellsPerAxis;
    double half_width_ = 1.0;
    double h_ = 0.25;
};

inline Grid make_grid(const DomainSpec& domain, int dim = 1) {
    return Grid(dim, domain.cells_per_axis, domain.half_width);
}

inline Grid make_grid(const ProblemSpec& spec) { return make_grid(spec.domain, spec.dim); }

/// Node samples of u at one time. Boundary nodes hold the Dirichlet value 0.
struct Field {
    Grid grid;
    double time = 0.0;
    std::vector<double> values;

    Field() = default;
    explicit Field(const Grid& g, double t = 0.0) : grid(g), time(t), values(g.size(), 0.0) {}

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }

    bool all_finite() const {
        return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
    }

    void zero_boundary() {
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (grid.is_boundary(i)) values[i] = 0.0;
        }
    }
};

// ---------------------------------------------------------------------------
// Serialization: flat key=value text and JSON.

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
    char buf[32];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

using KeyValues = std::map<std::string, std::string>;

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

/// Parses "key=value" lines; '#' starts a comment, blank lines are skipped.
inline KeyValues parse_key_values(std::string_view text) {
    KeyValues kv;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto stripped = trim(line);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
        }
        auto key = trim(std::string_view(stripped).substr(0, eq));
        if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        kv[key] = trim(std::string_view(stripped).substr(eq + 1));
    }
    return kv;
}

inline std::string write_key_values(const KeyValues& kv) {
    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
}

inline double parse_double(const std::string& key, const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': '" + text + "' is not a number");
    }
    if (trim(std::string_view(text).substr(used)) != "") {
        throw ConfigError("key '" + key + "': trailing characters in '" + text + "'");
    }
    return v;
}

inline int parse_int(const std::string& key, const std::string& text) {
    const double v = parse_double(key, text);
    if (v != std::floor(v) || std::abs(v) > 1e9) {
        throw ConfigError("key '" + key + "': '" + text + "' is not an integer");
    }
    return static_cast<int>(v);
}

inline KeyValues to_key_values(const ProblemSpec& spec) {
    return {
        {"q", format_double(spec.q)},
        {"p", format_double(spec.p)},
        {"lambda", format_double(spec.lambda)},
        {"gamma", format_double(spec.gamma)},
        {"nu", format_double(spec.nu)},
        {"dim", std::to_string(spec.dim)},
        {"half_width", format_double(spec.domain.half_width)},
        {"mode", to_string(spec.domain.mode)},
        {"cells_per_axis", std::to_string(spec.domain.cells_per_axis)},
        {"horizon", format_double(spec.horizon)},
    };
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline ProblemSpec problem_spec_from_key_values(const KeyValues& kv) {
    ProblemSpec spec;
    for (const auto& [key, value] : kv) {
        if (key == "q") spec.q = parse_double(key, value);
        else if (key == "p") spec.p = parse_double(key, value);
        else if (key == "lambda") spec.lambda = parse_double(key, value);
        else if (key == "gamma") spec.gamma = parse_double(key, value);
        else if (key == "nu") spec.nu = parse_double(key, value);
        else if (key == "dim") spec.dim = parse_int(key, value);
        else if (key == "half_width") spec.domain.half_width = parse_double(key, value);
        else if (key == "mode") spec.domain.mode = boundary_mode_from_string(value);
        else if (key == "cells_per_axis") spec.domain.cells_per_axis = parse_int(key, value);
        else if (key == "horizon") spec.horizon = parse_double(key, value);
        else throw ConfigError("unknown problem key '" + key + "'");
    }
    return spec;
}

inline nlohmann::json to_json(const ProblemSpec& spec) {
    return {
        {"q", spec.q},
        {"p", spec.p},
        {"lambda", spec.lambda},
        {"gamma", spec.gamma},
        {"nu", spec.nu},
        {"dim", spec.dim},
        {"half_width", spec.domain.half_width},
        {"mode", to_string(spec.domain.mode)},
        {"cells_per_axis", spec.domain.cells_per_axis},
        {"horizon", spec.horizon},
    };
}

inline ProblemSpec problem_spec_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("problem spec JSON must be an object");
    KeyValues kv;
    for (const auto& [key, value] : j.items()) {
        if (value.is_string()) kv[key] = value.get<std::string>();
        else if (value.is_number()) kv[key] = format_double(value.get<double>());
        else throw ConfigError("problem key '" + key + "' must be a number or string");
    }
    return problem_spec_from_key_values(kv);
}

}  // namespace hjlab
