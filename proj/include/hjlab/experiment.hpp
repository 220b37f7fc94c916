#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "hjlab/core_problem.hpp"
#include "hjlab/estimate_checks.hpp"
#include "hjlab/estimates_ledger.hpp"
#include "hjlab/initial_data.hpp"
#include "hjlab/time_integrator.hpp"

// Experiment configuration, the run pipeline behind `hjlab run`, and the
// parameter sweep behind `hjlab sweep`.

namespace hjlab {

/// Process exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitConfigError = 2, kExitSolverAbort = 3 };

struct EnergyLedgerCheck {
    std::vector<double> r{1.0};
    double tolerance = 1e-3;
};

struct DecayFitCheck {
    std::string norm = "linf";
    double t_begin = 0.05;
    double t_end = 1.0;
    std::optional<double> expected_slope;
    double tolerance = 0.1;  ///< relative error of the slope
};

struct GradientBoundCheck {
    double max_ratio = 1.1;
};

struct FarFieldCheck {
    double r = 1.0;
    double t_begin = 1.0;
    double t_end = 50.0;
    int samples = 24;
    double slope_tolerance = 0.15;
};

struct UniversalBoundCheck {
    std::vector<double> amplitudes{1.0, 10.0, 100.0};
    double t_begin = 0.1;
    double t_end = 1.0;
    double max_spread = 2.0;
};

struct MonotoneCheck {
    std::vector<std::string> norms{"l1", "l2", "linf"};
    double tolerance = 1e-10;
};

struct CheckSet {
    std::optional<EnergyLedgerCheck> energy_ledger;
    std::optional<DecayFitCheck> decay_fit;
    std::optional<GradientBoundCheck> gradient_bound;
    std::optional<FarFieldCheck> far_field;
    std::optional<UniversalBoundCheck> universal_bound;
    std::optional<MonotoneCheck> monotone;
};

struct ExperimentConfig {
    ProblemSpec spec;
    InitialDatum datum;
    StepControl control;
    RunOptions options;
    CheckSet checks;
    std::vector<std::string> plots;
    std::string output_dir = "hjlab_out";
    long seed = 0;
};

// ---------------------------------------------------------------------------
// Parsing.

inline std::vector<double> parse_double_list(const std::string& key, const std::string& text) {
    std::vector<double> out;
    for (const auto& cell : split(text, ',')) {
        if (!cell.empty()) out.push_back(parse_double(key, cell));
    }
    return out;
}

inline std::vector<std::string> parse_string_list(const std::string& text) {
    std::vector<std::string> out;
    for (auto& cell : split(text, ',')) {
        if (!cell.empty()) out.push_back(cell);
    }
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "on" || text == "yes" || text == "1") return true;
    if (text == "false" || text == "off" || text == "no" || text == "0") return false;
    throw ConfigError(key + ": expected a boolean, got '" + text + "'");
}

/// Nested JSON objects become dotted keys; arrays become comma lists.
inline KeyValues flatten_json(const json& j, const std::string& prefix = "") {
    KeyValues out;
    auto scalar = [](const json& v) -> std::string {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        if (v.is_number_integer()) return std::to_string(v.get<long long>());
        if (v.is_number()) return format_double(v.get<double>());
        throw ConfigError("unsupported JSON value " + v.dump());
    };
    if (!j.is_object()) throw ConfigError("JSON config must be an object");
    for (const auto& [key, value] : j.items()) {
        const std::string full = prefix.empty() ? key : prefix + "." + key;
        if (value.is_object()) {
            for (auto& kv : flatten_json(value, full)) out.insert(kv);
        } else if (value.is_array()) {
            std::string joined;
            for (const auto& e : value) joined += (joined.empty() ? "" : ",") + scalar(e);
            out[full] = joined;
        } else {
            out[full] = scalar(value);
        }
    }
    return out;
}

/// Reads key=value text, or JSON when the first non-blank character is '{'.
inline KeyValues parse_config_text(const std::string& text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("invalid JSON config: ") + e.what());
        }
        return flatten_json(j);
    }
    return parse_key_values(text);
}

namespace detail {

inline const std::set<std::string>& string_keys() {
    static const std::set<std::string> keys{
        "spec.mode",          "datum.kind",       "datum.sign", "datum.path", "datum.center",
        "control.snapshot_times", "run.ledger_r", "run.extra_r", "checks.energy_ledger.r",
        "checks.decay_fit.norm", "checks.monotone.norms", "checks.universal_bound.amplitudes",
        "plots",              "output_dir"};
    return keys;
}

inline const std::set<std::string>& numeric_keys() {
    static const std::set<std::string> keys{
        "spec.q", "spec.p", "spec.lambda", "spec.gamma", "spec.nu", "spec.dim", "spec.half_width",
        "spec.cells_per_axis", "spec.horizon",
        "datum.amplitude", "datum.width", "datum.tail_exponent", "datum.mass", "datum.epsilon",
        "datum.epsilon_cells", "datum.half_width", "datum.height",
        "control.cfl_safety", "control.dt_min", "control.dt_max",
        "run.trace_every",
        "checks.energy_ledger.tolerance",
        "checks.decay_fit.t_begin", "checks.decay_fit.t_end", "checks.decay_fit.expected_slope",
        "checks.decay_fit.tolerance",
        "checks.gradient_bound.max_ratio",
        "checks.far_field.r", "checks.far_field.t_begin", "checks.far_field.t_end",
        "checks.far_field.samples", "checks.far_field.slope_tolerance",
        "checks.universal_bound.t_begin", "checks.universal_bound.t_end",
        "checks.universal_bound.max_spread",
        "checks.monotone.tolerance",
        "seed"};
    return keys;
}

inline const std::vector<std::string>& check_names() {
    static const std::vector<std::string> names{"energy_ledger", "decay_fit",       "gradient_bound",
                                                "far_field",     "universal_bound", "monotone"};
    return names;
}

}  // namespace detail

/// True for keys a sweep axis may name.
inline bool is_numeric_config_key(const std::string& key) { return detail::numeric_keys().count(key) > 0; }

inline ExperimentConfig experiment_from_key_values(const KeyValues& kv) {
    ExperimentConfig cfg;
    KeyValues spec_kv;
    std::set<std::string> enabled;
    for (const auto& [key, value] : kv) {
        if (key.rfind("spec.", 0) == 0) {
            spec_kv[key.substr(5)] = value;
            continue;
        }
        if (key.rfind("checks.", 0) == 0) {
            const std::string rest = key.substr(7);
            const std::string name = rest.substr(0, rest.find('.'));
            const auto& names = detail::check_names();
            if (std::find(names.begin(), names.end(), name) == names.end()) {
                throw ConfigError("unknown check '" + name + "'");
            }
            if (rest == name) {
                if (parse_bool(key, value)) enabled.insert(name);
                continue;
            }
            enabled.insert(name);
        }
        if (key == "checks" ) continue;
        if (!detail::numeric_keys().count(key) && !detail::string_keys().count(key)) {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
    if (const auto it = kv.find("checks"); it != kv.end()) {
        for (const auto& name : parse_string_list(it->second)) {
            const auto& names = detail::check_names();
            if (std::find(names.begin(), names.end(), name) == names.end()) {
                throw ConfigError("unknown check '" + name + "'");
            }
            enabled.insert(name);
        }
    }
    cfg.spec = problem_spec_from_key_values(spec_kv);

    auto get = [&](const std::string& key) -> std::optional<std::string> {
        const auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        return it->second;
    };
    auto num = [&](const std::string& key, double fallback) {
        const auto v = get(key);
        return v ? parse_double(key, *v) : fallback;
    };

    // Initial datum.
    const std::string kind = get("datum.kind").value_or("gaussian");
    const double h = 2.0 * cfg.spec.domain.half_width / cfg.spec.domain.cells_per_axis;
    std::array<double, 2> center{0.0, 0.0};
    if (const auto c = get("datum.center")) {
        const auto xs = parse_double_list("datum.center", *c);
        if (xs.empty() || xs.size() > 2) throw ConfigError("datum.center needs one or two coordinates");
        for (std::size_t k = 0; k < xs.size(); ++k) center[k] = xs[k];
    }
    if (kind == "gaussian") {
        cfg.datum.kind = datum::Gaussian{num("datum.amplitude", 1.0), center, num("datum.width", 0.25)};
    } else if (kind == "power_tail") {
        cfg.datum.kind = datum::PowerTail{num("datum.amplitude", 1.0), num("datum.tail_exponent", 1.5)};
    } else if (kind == "mollified_dirac") {
        double eps = num("datum.epsilon", 0.1);
        if (const auto cells = get("datum.epsilon_cells")) eps = parse_double("datum.epsilon_cells", *cells) * h;
        cfg.datum.kind = datum::MollifiedDirac{num("datum.mass", 1.0), eps, center};
    } else if (kind == "indicator") {
        cfg.datum.kind = datum::Indicator{num("datum.half_width", 0.5), num("datum.height", 1.0)};
    } else if (kind == "from_file") {
        const auto path = get("datum.path");
        if (!path) throw ConfigError("datum.kind=from_file needs datum.path");
        cfg.datum.kind = datum::FromFile{*path};
    } else {
        throw ConfigError("unknown datum.kind '" + kind + "'");
    }
    const std::string sign = get("datum.sign").value_or("nonnegative");
    if (sign == "nonnegative") cfg.datum.sign = DatumSign::Nonnegative;
    else if (sign == "signed") cfg.datum.sign = DatumSign::Signed;
    else throw ConfigError("datum.sign must be nonnegative or signed");

    // Stepping and recording.
    cfg.control.cfl_safety = num("control.cfl_safety", cfg.control.cfl_safety);
    cfg.control.dt_min = num("control.dt_min", cfg.control.dt_min);
    cfg.control.dt_max = num("control.dt_max", cfg.control.dt_max);
    if (const auto s = get("control.snapshot_times")) {
        cfg.control.snapshot_times = parse_double_list("control.snapshot_times", *s);
    }
    if (const auto s = get("run.ledger_r")) cfg.options.ledger_r = parse_double_list("run.ledger_r", *s);
    if (const auto s = get("run.extra_r")) cfg.options.extra_r = parse_double_list("run.extra_r", *s);
    if (const auto s = get("run.trace_every")) cfg.options.trace_every = parse_int("run.trace_every", *s);
    cfg.options.keep_dt_history = false;

    // Checks.
    if (enabled.count("energy_ledger")) {
        EnergyLedgerCheck c;
        if (const auto s = get("checks.energy_ledger.r")) c.r = parse_double_list("checks.energy_ledger.r", *s);
        c.tolerance = num("checks.energy_ledger.tolerance", c.tolerance);
        cfg.checks.energy_ledger = c;
    }
    if (enabled.count("decay_fit")) {
        DecayFitCheck c;
        c.norm = get("checks.decay_fit.norm").value_or(c.norm);
        c.t_begin = num("checks.decay_fit.t_begin", c.t_begin);
        c.t_end = num("checks.decay_fit.t_end", c.t_end);
        if (const auto s = get("checks.decay_fit.expected_slope")) {
            c.expected_slope = parse_double("checks.decay_fit.expected_slope", *s);
        }
        c.tolerance = num("checks.decay_fit.tolerance", c.tolerance);
        cfg.checks.decay_fit = c;
    }
    if (enabled.count("gradient_bound")) {
        cfg.checks.gradient_bound = GradientBoundCheck{num("checks.gradient_bound.max_ratio", 1.1)};
    }
    if (enabled.count("far_field")) {
        FarFieldCheck c;
        c.r = num("checks.far_field.r", c.r);
        c.t_begin = num("checks.far_field.t_begin", c.t_begin);
        c.t_end = num("checks.far_field.t_end", c.t_end);
        if (const auto s = get("checks.far_field.samples")) c.samples = parse_int("checks.far_field.samples", *s);
        c.slope_tolerance = num("checks.far_field.slope_tolerance", c.slope_tolerance);
        cfg.checks.far_field = c;
    }
    if (enabled.count("universal_bound")) {
        UniversalBoundCheck c;
        if (const auto s = get("checks.universal_bound.amplitudes")) {
            c.amplitudes = parse_double_list("checks.universal_bound.amplitudes", *s);
        }
        c.t_begin = num("checks.universal_bound.t_begin", c.t_begin);
        c.t_end = num("checks.universal_bound.t_end", c.t_end);
        c.max_spread = num("checks.universal_bound.max_spread", c.max_spread);
        cfg.checks.universal_bound = c;
    }
    if (enabled.count("monotone")) {
        MonotoneCheck c;
        if (const auto s = get("checks.monotone.norms")) c.norms = parse_string_list(*s);
        c.tolerance = num("checks.monotone.tolerance", c.tolerance);
        cfg.checks.monotone = c;
    }

    if (const auto s = get("plots")) cfg.plots = parse_string_list(*s);
    for (const auto& p : cfg.plots) {
        if (p != "norms" && p != "ledger" && p != "snapshots") {
            throw ConfigError("unknown plot '" + p + "' (norms, ledger, snapshots)");
        }
    }
    cfg.output_dir = get("output_dir").value_or(cfg.output_dir);
    if (const auto s = get("seed")) cfg.seed = parse_int("seed", *s);
    return cfg;
}

inline ExperimentConfig load_experiment(const std::string& path) {
    return experiment_from_key_values(parse_config_text(read_text_file(path)));
}

/**
 * Checks the spec, the stepping controls and every enabled check's
 * preconditions before anything runs. Throws ConfigError listing all
 * violations.
 */
inline void validate_experiment(const ExperimentConfig& cfg) {
    std::vector<std::string> v = validate_spec(cfg.spec).violations;
    for (auto& m : validate_control(cfg.control, cfg.spec.horizon).violations) v.push_back(m);
    if (cfg.options.trace_every < 1) v.push_back("run.trace_every must be at least 1");
    for (double r : cfg.options.ledger_r) {
        if (!(r >= 1.0)) v.push_back("ledger orders must be >= 1");
    }
    auto regime = [&](auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            v.push_back(e.what());
        }
    };
    const auto& c = cfg.checks;
    if (c.energy_ledger) {
        for (double r : c.energy_ledger->r) {
            if (std::find(cfg.options.ledger_r.begin(), cfg.options.ledger_r.end(), r) ==
                cfg.options.ledger_r.end()) {
                v.push_back("energy_ledger check needs r = " + format_double(r) + " in run.ledger_r");
            }
        }
    }
    if (c.decay_fit) {
        const auto& d = *c.decay_fit;
        if (!(d.t_begin > 0.0 && d.t_end <= cfg.spec.horizon && d.t_end >= 10.0 * d.t_begin * (1.0 - 1e-12))) {
            v.push_back("decay_fit window must lie in (0, horizon] and span a decade");
        }
        regime([&] { NormTrace{}.series(d.norm); });
    }
    if (c.gradient_bound) {
        regime([&] { require_gradient_bound_regime(cfg.spec); });
        if (cfg.datum.sign != DatumSign::Nonnegative) v.push_back("gradient bound needs nonnegative data");
    }
    if (c.far_field) {
        const auto* tail = std::get_if<datum::PowerTail>(&cfg.datum.kind);
        if (tail == nullptr) {
            v.push_back("far_field check needs datum.kind=power_tail");
        } else {
            regime([&] { require_far_field_regime(cfg.spec, tail->tail_exponent, c.far_field->r); });
        }
        if (c.far_field->t_end > cfg.spec.horizon) v.push_back("far_field window exceeds the horizon");
        if (c.far_field->samples < static_cast<int>(kMinFitSamples)) v.push_back("far_field needs >= 8 samples");
        if (!(c.far_field->t_begin > 0.0 && c.far_field->t_end >= 10.0 * c.far_field->t_begin * (1.0 - 1e-12))) {
            v.push_back("far_field window must span a decade");
        }
    }
    if (c.universal_bound) {
        if (cfg.spec.domain.mode != BoundaryMode::Dirichlet) {
            v.push_back("universal_bound check needs spec.mode=dirichlet");
        }
        regime([&] { universal_exponent(cfg.spec); });
        if (c.universal_bound->amplitudes.size() < 2) v.push_back("universal_bound needs two or more amplitudes");
        if (c.universal_bound->t_end > cfg.spec.horizon) v.push_back("universal_bound window exceeds the horizon");
    }
    if (c.monotone) {
        for (const auto& n : c.monotone->norms) regime([&] { NormTrace{}.series(n); });
    }
    if (!v.empty()) {
        ValidationReport r{v};
        throw ConfigError(r.message());
    }
}

// ---------------------------------------------------------------------------
// Running.

struct CheckOutcome {
    std::string name;
    bool passed = false;
    json report;
};

struct ExperimentOutcome {
    int exit_code = kExitOk;
    std::string message;
    std::vector<CheckOutcome> checks;
    json report;
    std::optional<RunResult> result;

    std::vector<std::string> failed_checks() const {
        std::vector<std::string> out;
        for (const auto& c : checks) {
            if (!c.passed) out.push_back(c.name);
        }
        return out;
    }
};

namespace detail {

inline std::string snapshot_name(std::size_t k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "snapshot_%03zu.csv", k);
    return buf;
}

inline void write_plots(const ExperimentConfig& cfg, const RunResult& res, const std::filesystem::path& dir) {
    for (const auto& plot : cfg.plots) {
        std::string dat = "# ";
        std::string gp = "# gnuplot script\nset datafile separator whitespace\n";
        const std::string stem = "plot_" + plot;
        if (plot == "norms") {
            dat += "t l1 l2 linf grad_lq\n";
            for (std::size_t i = 0; i < res.trace.size(); ++i) {
                if (!(res.trace.times[i] > 0.0)) continue;
                dat += format_double(res.trace.times[i]) + " " + format_double(res.trace.l1[i]) + " " +
                       format_double(res.trace.l2[i]) + " " + format_double(res.trace.linf[i]) + " " +
                       format_double(res.trace.grad_lq[i]) + "\n";
            }
            gp += "set logscale xy\nset xlabel 't'\nplot '" + stem + ".dat' u 1:2 w l t 'L1', '' u 1:3 w l t 'L2', "
                  "'' u 1:4 w l t 'Linf', '' u 1:5 w l t 'grad Lq'\n";
        } else if (plot == "ledger") {
            dat += "t mass_r diss_grad diss_visc residual (one block per ledger order)\n";
            gp += "set xlabel 't'\nplot ";
            for (std::size_t k = 0; k < res.trace.ledgers.size(); ++k) {
                const auto& l = res.trace.ledgers[k];
                if (k) {
                    dat += "\n\n";
                    gp += ", ";
                }
                for (std::size_t i = 0; i < res.trace.size(); ++i) {
                    dat += format_double(res.trace.times[i]) + " " + format_double(l.mass_r[i]) + " " +
                           format_double(l.diss_grad[i]) + " " + format_double(l.diss_visc[i]) + " " +
                           format_double(l.residual[i]) + "\n";
                }
                gp += "'" + stem + ".dat' index " + std::to_string(k) + " u 1:5 w l t 'residual r=" +
                      format_double(l.r) + "'";
            }
            gp += "\n";
        } else {
            const bool two_d = res.final_field.grid.dim() == 2;
            dat += two_d ? "x y u (one block per snapshot)\n" : "x u (one block per snapshot)\n";
            gp += two_d ? "splot " : "plot ";
            for (std::size_t k = 0; k < res.snapshots.size(); ++k) {
                const Field& f = res.snapshots[k];
                if (k) {
                    dat += "\n\n";
                    gp += ", ";
                }
                for (std::size_t i = 0; i < f.size(); ++i) {
                    const auto x = f.grid.position(i);
                    dat += format_double(x[0]) + " ";
                    if (two_d) dat += format_double(x[1]) + " ";
                    dat += format_double(f.values[i]) + "\n";
                    if (two_d && static_cast<std::size_t>(f.grid.multi_index(i)[0]) + 1 == static_cast<std::size_t>(f.grid.nodes_per_axis())) dat += "\n";
                }
                gp += "'" + stem + ".dat' index " + std::to_string(k) + (two_d ? " u 1:2:3" : " u 1:2") +
                      " w l t 't=" + format_double(f.time) + "'";
            }
            gp += "\n";
        }
        write_text_file((dir / (stem + ".dat")).string(), dat);
        write_text_file((dir / (stem + ".gp")).string(), gp);
    }
}

}  // namespace detail

inline json diagnostics_json(const RunDiagnostics& d) {
    return {{"steps", d.steps},
            {"dt_smallest", d.dt_smallest},
            {"dt_largest", d.dt_largest},
            {"support_breach", d.support_breach},
            {"max_boundary_fraction", d.max_boundary_fraction},
            {"first_breach_time", d.first_breach_time}};
}

/**
 * Validates, runs, evaluates every enabled check and (when `write` is set)
 * writes artifacts into cfg.output_dir. Never throws for configuration,
 * regime or solver problems; those become exit codes 2 and 3.
 */
inline ExperimentOutcome run_experiment(const ExperimentConfig& cfg, bool write = true) {
    ExperimentOutcome out;
    Field u0;
    StepControl control = cfg.control;
    std::vector<double> far_times;
    try {
        validate_experiment(cfg);
        std::optional<double> lr;
        if (cfg.checks.far_field) lr = cfg.checks.far_field->r;
        u0 = sample(cfg.datum, make_grid(cfg.spec), lr);
        if (cfg.checks.far_field) {
            const auto& f = *cfg.checks.far_field;
            far_times = log_spaced(f.t_begin, f.t_end, f.samples);
            auto& s = control.snapshot_times;
            s.insert(s.end(), far_times.begin(), far_times.end());
            std::sort(s.begin(), s.end());
            s.erase(std::unique(s.begin(), s.end()), s.end());
        }
    } catch (const Error& e) {
        out.exit_code = kExitConfigError;
        out.message = e.what();
        return out;
    }

    try {
        out.result = run(u0, cfg.spec, control, cfg.options);
    } catch (const SolverError& e) {
        out.exit_code = kExitSolverAbort;
        out.message = e.what();
        return out;
    } catch (const Error& e) {
        out.exit_code = kExitConfigError;
        out.message = e.what();
        return out;
    }
    const RunResult& res = *out.result;

    try {
        const auto& c = cfg.checks;
        if (c.energy_ledger) {
            json rows = json::array();
            bool ok = true;
            for (double r : c.energy_ledger->r) {
                for (const auto& l : res.ledgers) {
                    if (l.r != r) continue;
                    const double rel = l.relative_residual();
                    ok = ok && rel < c.energy_ledger->tolerance;
                    rows.push_back({{"r", r},
                                    {"mass_r0", l.mass_r0},
                                    {"mass_r", l.mass_r},
                                    {"diss_grad", l.diss_grad},
                                    {"diss_visc", l.diss_visc},
                                    {"residual", l.residual},
                                    {"relative_residual", rel}});
                }
            }
            out.checks.push_back({"energy_ledger", ok,
                                  {{"check", "energy_ledger"},
                                   {"paper_ref", "energy identity for |u|^r with gradient and viscous dissipation"},
                                   {"tolerance", c.energy_ledger->tolerance},
                                   {"ledgers", rows},
                                   {"passed", ok}}});
        }
        if (c.decay_fit) {
            const auto& d = *c.decay_fit;
            const DecayFit fit = fit_decay(res.trace, d.norm, d.t_begin, d.t_end);
            json rep{{"check", "decay_fit"},
                     {"paper_ref", "power-law decay t^{-sigma} of the chosen norm"},
                     {"norm", d.norm},
                     {"fit", to_json(fit)}};
            bool ok = true;
            if (d.expected_slope) {
                const double rel = std::abs(fit.slope - *d.expected_slope) / std::abs(*d.expected_slope);
                ok = rel <= d.tolerance;
                rep["expected_slope"] = *d.expected_slope;
                rep["relative_error"] = rel;
                rep["tolerance"] = d.tolerance;
            }
            rep["passed"] = ok;
            out.checks.push_back({"decay_fit", ok, rep});
        }
        if (c.gradient_bound) {
            const auto g = gradient_bound_check(res, cfg.spec);
            json rep = to_json(g);
            const bool ok = g.worst_ratio <= c.gradient_bound->max_ratio;
            rep["max_ratio"] = c.gradient_bound->max_ratio;
            rep["passed"] = ok;
            out.checks.push_back({"gradient_bound", ok, rep});
        }
        if (c.far_field) {
            const auto& tail = std::get<datum::PowerTail>(cfg.datum.kind);
            const auto f = far_field_report(u0, res, cfg.spec, tail.tail_exponent, c.far_field->r, far_times);
            json rep = to_json(f);
            const bool ok = f.bound_holds && f.slope_relative_error <= c.far_field->slope_tolerance;
            rep["slope_tolerance"] = c.far_field->slope_tolerance;
            rep["passed"] = ok;
            out.checks.push_back({"far_field", ok, rep});
        }
        if (c.universal_bound) {
            const auto& ub = *c.universal_bound;
            const auto rep_u = universal_bound_check(cfg.spec, u0, ub.amplitudes, ub.t_begin, ub.t_end, cfg.control);
            json rep = to_json(rep_u);
            const bool ok = rep_u.spread < ub.max_spread;
            rep["max_spread"] = ub.max_spread;
            rep["passed"] = ok;
            out.checks.push_back({"universal_bound", ok, rep});
        }
        if (c.monotone) {
            json worst = json::object();
            bool ok = true;
            for (const auto& n : c.monotone->norms) {
                const double w = max_relative_increase(res.trace.series(n));
                worst[n] = w;
                ok = ok && w <= c.monotone->tolerance;
            }
            out.checks.push_back({"monotone", ok,
                                  {{"check", "monotone"},
                                   {"paper_ref", "L^r norms of nonnegative solutions do not increase"},
                                   {"max_relative_increase", worst},
                                   {"tolerance", c.monotone->tolerance},
                                   {"passed", ok}}});
        }
    } catch (const SolverError& e) {
        out.exit_code = kExitSolverAbort;
        out.message = e.what();
        return out;
    } catch (const Error& e) {
        out.exit_code = kExitConfigError;
        out.message = e.what();
        return out;
    }

    json checks = json::array();
    for (const auto& c : out.checks) checks.push_back(c.report);
    const auto failed = out.failed_checks();
    out.report = {{"spec", to_json(cfg.spec)},
                  {"datum", kind_name(cfg.datum)},
                  {"seed", cfg.seed},
                  {"diagnostics", diagnostics_json(res.diagnostics)},
                  {"checks", checks},
                  {"failed", failed},
                  {"passed", failed.empty()}};
    if (!failed.empty()) {
        out.exit_code = kExitCheckFailed;
        std::string names;
        for (const auto& f : failed) names += (names.empty() ? "" : ", ") + f;
        out.message = "failed checks: " + names;
    }

    if (write) {
        namespace fs = std::filesystem;
        const fs::path dir(cfg.output_dir);
        fs::create_directories(dir);
        const double ledger_r = res.ledgers.empty() ? 0.0 : res.ledgers.front().r;
        write_text_file((dir / "trace.csv").string(), trace_to_csv(res.trace, ledger_r));
        for (std::size_t k = 0; k < res.snapshots.size(); ++k) {
            write_text_file((dir / detail::snapshot_name(k)).string(), field_to_csv(res.snapshots[k]));
        }
        write_text_file((dir / "checks.json").string(), out.report.dump(2) + "\n");
        detail::write_plots(cfg, res, dir);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sweeps.

struct SweepRow {
    std::string value;
    int exit_code = kExitOk;
    std::string message;
    std::optional<double> slope;
    std::optional<double> worst_ratio;
    std::optional<double> max_residual;
    std::optional<double> weighted_sup;

    std::string status() const {
        switch (exit_code) {
            case kExitOk: return "ok";
            case kExitCheckFailed: return "check_failed";
            case kExitConfigError: return "config_error";
            default: return "solver_abort";
        }
    }
};

struct SweepResult {
    std::string axis;
    std::vector<SweepRow> rows;
    std::optional<double> spread;  ///< max/min of weighted_sup when every row has one

    bool all_ok() const {
        return std::all_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.exit_code == kExitOk; });
    }
};

/// HJLAB_THREADS when set and positive, else the hardware concurrency.
inline unsigned thread_budget() {
    if (const char* env = std::getenv("HJLAB_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return static_cast<unsigned>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs `body(i)` for i in [0, count) on at most thread_budget() threads.
template <class Body>
void parallel_for(std::size_t count, Body&& body) {
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(thread_budget(), count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

/**
 * One run per axis value, each in <output_dir>/row_<k>. The row summary holds
 * the fitted slope, the worst gradient ratio, the largest relative ledger
 * residual and sup_t t^kappa ||u||_inf over the universal window (or the
 * decay window) where kappa is defined.
 */
inline SweepResult run_sweep(const KeyValues& base, const std::string& axis, const std::vector<std::string>& values) {
    if (values.empty()) throw ConfigError("sweep needs at least one value");
    if (!is_numeric_config_key(axis)) throw ConfigError("sweep axis '" + axis + "' is not a numeric config field");
    for (const auto& v : values) parse_double(axis, v);

    SweepResult out;
    out.axis = axis;
    out.rows.resize(values.size());
    std::vector<ExperimentConfig> configs(values.size());
    const std::string root = base.count("output_dir") ? base.at("output_dir") : ExperimentConfig{}.output_dir;
    for (std::size_t k = 0; k < values.size(); ++k) {
        KeyValues kv = base;
        kv[axis] = values[k];
        kv["output_dir"] = (std::filesystem::path(root) / ("row_" + std::to_string(k))).string();
        configs[k] = experiment_from_key_values(kv);
    }

    parallel_for(values.size(), [&](std::size_t k) {
        const ExperimentConfig& cfg = configs[k];
        SweepRow& row = out.rows[k];
        row.value = values[k];
        const ExperimentOutcome o = run_experiment(cfg);
        row.exit_code = o.exit_code;
        row.message = o.message;
        for (const auto& c : o.checks) {
            if (c.name == "decay_fit") row.slope = c.report["fit"]["slope"].get<double>();
            if (c.name == "far_field" && !row.slope) row.slope = c.report["mass_fit"]["slope"].get<double>();
            if (c.name == "gradient_bound") row.worst_ratio = c.report["worst_ratio"].get<double>();
        }
        if (!o.result) return;
        const RunResult& res = *o.result;
        for (const auto& l : res.ledgers) {
            row.max_residual = std::max(row.max_residual.value_or(0.0), l.relative_residual());
        }
        std::optional<std::pair<double, double>> window;
        if (cfg.checks.universal_bound) window = {{cfg.checks.universal_bound->t_begin, cfg.checks.universal_bound->t_end}};
        else if (cfg.checks.decay_fit) window = {{cfg.checks.decay_fit->t_begin, cfg.checks.decay_fit->t_end}};
        if (window) {
            try {
                row.weighted_sup = weighted_sup(res.trace, universal_exponent(cfg.spec), window->first, window->second);
            } catch (const RegimeError&) {
            }
        }
    });

    if (std::all_of(out.rows.begin(), out.rows.end(), [](const SweepRow& r) { return r.weighted_sup && *r.weighted_sup > 0.0; }) &&
        out.rows.size() > 1) {
        double lo = kInfinity, hi = 0.0;
        for (const auto& r : out.rows) {
            lo = std::min(lo, *r.weighted_sup);
            hi = std::max(hi, *r.weighted_sup);
        }
        out.spread = hi / lo;
    }
    return out;
}

inline std::string sweep_to_csv(const SweepResult& s) {
    auto cell = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    std::string out = "row,axis,value,status,exit_code,slope,worst_ratio,max_residual,weighted_sup\n";
    for (std::size_t k = 0; k < s.rows.size(); ++k) {
        const auto& r = s.rows[k];
        out += std::to_string(k) + "," + s.axis + "," + r.value + "," + r.status() + "," +
               std::to_string(r.exit_code) + "," + cell(r.slope) + "," + cell(r.worst_ratio) + "," +
               cell(r.max_residual) + "," + cell(r.weighted_sup) + "\n";
    }
    return out;
}

}  // namespace hjlab
