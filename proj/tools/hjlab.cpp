// hjlab: run, sweep, exponents, verify and fit subcommands.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hjlab/acceptance.hpp"
#include "hjlab/experiment.hpp"
#include "hjlab/moser_exponents.hpp"

namespace {

using namespace hjlab;

int cmd_run(const std::string& path) {
    ExperimentConfig cfg;
    try {
        cfg = load_experiment(path);
    } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    }
    const ExperimentOutcome out = run_experiment(cfg);
    switch (out.exit_code) {
        case kExitConfigError: std::cerr << "config error: " << out.message << "\n"; break;
        case kExitSolverAbort: std::cerr << "solver abort: " << out.message << "\n"; break;
        default: break;
    }
    if (out.result) {
        const auto& d = out.result->diagnostics;
        std::cout << "steps " << d.steps << ", dt in [" << format_double(d.dt_smallest) << ", "
                  << format_double(d.dt_largest) << "]";
        if (d.support_breach) std::cout << ", support reached the box rim at t=" << format_double(d.first_breach_time);
        std::cout << "\n";
    }
    for (const auto& c : out.checks) std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << "\n";
    if (out.exit_code == kExitCheckFailed) std::cerr << out.message << "\n";
    if (out.exit_code == kExitOk || out.exit_code == kExitCheckFailed) {
        std::cout << "artifacts in " << cfg.output_dir << "\n";
    }
    return out.exit_code;
}

int cmd_sweep(const std::string& path, const std::string& axis, const std::vector<std::string>& values) {
    try {
        const KeyValues base = parse_config_text(read_text_file(path));
        const SweepResult s = run_sweep(base, axis, values);
        const std::string csv = sweep_to_csv(s);
        const std::string root = base.count("output_dir") ? base.at("output_dir") : ExperimentConfig{}.output_dir;
        std::filesystem::create_directories(root);
        write_text_file((std::filesystem::path(root) / "sweep_summary.csv").string(), csv);
        std::cout << csv;
        if (s.spread) std::cout << "spread factor " << format_double(*s.spread) << "\n";
        for (std::size_t k = 0; k < s.rows.size(); ++k) {
            if (s.rows[k].exit_code != kExitOk) {
                std::cerr << "row " << k << " (" << axis << "=" << s.rows[k].value << "): " << s.rows[k].message
                          << "\n";
            }
        }
        return s.all_ok() ? kExitOk : kExitCheckFailed;
    } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    }
}

int cmd_exponents(int n, double q, double p, double lambda, const std::vector<double>& r_list, bool csv) {
    try {
        const auto table = moser::exponent_table(n, q, p, lambda, r_list);
        std::cout << (csv ? moser::exponent_table_csv(table) : moser::exponent_table_text(table));
        return kExitOk;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfigError;
    }
}

int cmd_verify(const std::vector<std::string>& only, const std::vector<std::string>& overrides) {
    acceptance::Tolerances tol = acceptance::default_tolerances();
    std::vector<acceptance::Criterion> selected;
    try {
        for (const auto& o : overrides) {
            const auto eq = o.find('=');
            if (eq == std::string::npos) throw ConfigError("--tolerance expects key=value, got '" + o + "'");
            const std::string key = trim(o.substr(0, eq));
            if (!tol.count(key)) throw ConfigError("unknown tolerance '" + key + "'");
            tol[key] = parse_double(key, trim(o.substr(eq + 1)));
        }
        selected = acceptance::select(only);
    } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    }
    const auto results = acceptance::run_suite(selected, tol);
    int failed = 0;
    for (const auto& r : results) {
        std::cout << acceptance::format_line(r) << "\n";
        if (!r.passed) ++failed;
    }
    std::cout << results.size() - failed << "/" << results.size() << " criteria passed\n";
    for (const auto& r : results) {
        if (!r.passed) std::cerr << "failed criterion " << r.id << " (" << r.name << ")\n";
    }
    return failed == 0 ? kExitOk : kExitCheckFailed;
}

int cmd_fit(const std::string& path, const std::string& norm, double t_begin, double t_end) {
    try {
        const CsvTable table = parse_csv(read_text_file(path));
        const DecayFit f = fit_decay(table.column("t"), table.column(norm), t_begin, t_end);
        std::cout << to_json(f).dump(2) << "\n";
        return kExitOk;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfigError;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical laboratory for viscous Hamilton-Jacobi decay estimates"};
    app.require_subcommand(1);

    std::string config;
    auto* run = app.add_subcommand("run", "Run one experiment from a config file");
    run->add_option("config", config, "key=value or JSON config")->required();

    std::string axis;
    std::vector<std::string> values;
    auto* sweep = app.add_subcommand("sweep", "Repeat an experiment over values of one numeric key");
    sweep->add_option("config", config, "base config")->required();
    sweep->add_option("--axis", axis, "dotted config key, e.g. datum.amplitude")->required();
    sweep->add_option("--values", values, "comma-separated values")->delimiter(',');

    int n_dim = 1;
    double q = 1.5, p = 2.0, lambda = 0.0;
    std::vector<double> r_list{1.0};
    bool csv = false;
    auto* exps = app.add_subcommand("exponents", "Print the decay and smoothing exponents");
    exps->add_option("--N", n_dim, "space dimension");
    exps->add_option("--q", q, "gradient exponent");
    exps->add_option("--p", p, "p-Laplacian exponent");
    exps->add_option("--lambda", lambda, "absorption power of |u|");
    exps->add_option("--r", r_list, "Lebesgue orders")->delimiter(',');
    exps->add_flag("--csv", csv, "CSV instead of an aligned table");

    std::vector<std::string> only, overrides;
    bool list = false;
    auto* verify = app.add_subcommand("verify", "Run the acceptance suite");
    verify->add_option("--only", only, "criteria by number or name")->delimiter(',');
    verify->add_option("--tolerance", overrides, "override a tolerance, key=value");
    verify->add_flag("--list", list, "list criteria and tolerances");

    std::string trace, norm = "linf";
    double t_begin = 0.0, t_end = 0.0;
    auto* fit = app.add_subcommand("fit", "Fit a power law to one column of a trace CSV");
    fit->add_option("trace", trace, "trace CSV")->required();
    fit->add_option("--norm", norm, "column name (default linf)");
    fit->add_option("--t-begin", t_begin, "window start")->required();
    fit->add_option("--t-end", t_end, "window end")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfigError;
    }

    if (run->parsed()) return cmd_run(config);
    if (sweep->parsed()) return cmd_sweep(config, axis, values);
    if (exps->parsed()) return cmd_exponents(n_dim, q, p, lambda, r_list, csv);
    if (verify->parsed()) {
        if (list) {
            for (const auto& c : acceptance::criteria()) {
                std::printf("%2d %-14s budget %.0fs\n", c.id, c.name.c_str(), c.budget);
            }
            for (const auto& [k, v] : acceptance::default_tolerances()) {
                std::printf("   %-16s %s\n", k.c_str(), format_double(v).c_str());
            }
            return 0;
        }
        return cmd_verify(only, overrides);
    }
    if (fit->parsed()) return cmd_fit(trace, norm, t_begin, t_end);
    return kExitConfigError;
}
