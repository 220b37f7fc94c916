#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "hjlab/initial_data.hpp"
#include "hjlab/time_integrator.hpp"

using namespace hjlab;

namespace {

ProblemSpec standard_spec() {
    ProblemSpec s;
    s.domain.half_width = 8.0;
    s.domain.cells_per_axis = 512;
    return s;
}

Field standard_datum(const ProblemSpec& s) {
    InitialDatum d;
    d.kind = datum::Gaussian{1.0, {0.0, 0.0}, 0.25};
    return sample(d, make_grid(s));
}

}  // namespace

TEST(LrNorm, UnitFieldOnTheBox) {
    const Grid g(1, 200, 1.0);
    Field u(g);
    g.for_each_interior([&](std::size_t i) { u.values[i] = 1.0; });
    for (double r : {1.0, 2.0, 3.5}) {
        EXPECT_NEAR(lr_norm(u, r), std::pow(2.0, 1.0 / r), 2.0 * g.spacing());
    }
    EXPECT_EQ(lr_norm(u, kInfinity), 1.0);
}

TEST(LrNorm, ZeroField) {
    const Field u(Grid(2, 16, 1.0));
    for (double r : {1.0, 2.0, 7.0, kInfinity}) EXPECT_EQ(lr_norm(u, r), 0.0);
}

TEST(LrNorm, GaussianMatchesClosedForm) {
    const double s = 0.5;
    for (int dim : {1, 2}) {
        const Grid g(dim, dim == 1 ? 1024 : 256, 5.0);
        InitialDatum d;
        d.kind = datum::Gaussian{1.0, {0.0, 0.0}, s};
        // int exp(-|x|^2 / s^2) dx = (s sqrt(pi))^N
        const double exact = std::pow(s * std::sqrt(std::numbers::pi), dim / 2.0);
        EXPECT_NEAR(lr_norm(sample(d, g), 2.0) / exact, 1.0, 1e-3);
    }
}

TEST(LrNorm, RejectsOrdersBelowOne) {
    EXPECT_THROW(lr_norm(Field(Grid(1, 8, 1.0)), 0.5), ConfigError);
}

TEST(Ledger, NoDynamicsKeepsZeroResidual) {
    ProblemSpec s = standard_spec();
    s.nu = 0.0;
    s.gamma = 0.0;
    const Field u = standard_datum(s);
    for (double r : {1.0, 2.0}) {
        EnergyLedger l = EnergyLedger::start(u, r);
        Field v = u;
        for (int k = 0; k < 10; ++k) {
            const Field next = step(v, s, 0.01);
            update_ledger(l, v, next, 0.01, s);
            v = next;
        }
        EXPECT_EQ(l.residual, 0.0);
    }
}

TEST(Ledger, InlineLedgerMatchesStepwiseUpdate) {
    ProblemSpec s = standard_spec();
    s.domain.cells_per_axis = 128;
    s.horizon = 0.05;
    const Field u0 = standard_datum(s);
    RunOptions o;
    o.ledger_r = {1.0, 2.0};
    const RunResult r = run(u0, s, StepControl{}, o);

    std::vector<EnergyLedger> manual{EnergyLedger::start(u0, 1.0), EnergyLedger::start(u0, 2.0)};
    Field u = u0;
    for (double dt : r.diagnostics.dt_history) {
        const Field next = step(u, s, dt);
        for (auto& l : manual) update_ledger(l, u, next, dt, s);
        u = next;
    }
    for (std::size_t k = 0; k < 2; ++k) {
        EXPECT_NEAR(manual[k].residual, r.ledgers[k].residual, 1e-14);
        EXPECT_NEAR(manual[k].diss_grad, r.ledgers[k].diss_grad, 1e-14);
    }
}

TEST(Ledger, StandardRunResidualsAndOrder) {
    const ProblemSpec s = standard_spec();
    const Field u0 = standard_datum(s);
    std::vector<double> r1, r2;
    for (double cfl : {0.4, 0.2}) {
        StepControl c;
        c.cfl_safety = cfl;
        RunOptions o;
        o.ledger_r = {1.0, 2.0};
        o.keep_dt_history = false;
        const RunResult r = run(u0, s, c, o);
        r1.push_back(r.ledgers[0].relative_residual());
        r2.push_back(r.ledgers[1].relative_residual());
    }
    EXPECT_LT(r1[0], 1e-3);
    EXPECT_LT(r1[1], 1e-3);
    EXPECT_NEAR(r2[0] / r2[1], 2.0, 0.1);
}

TEST(FitDecay, ExactPowerLaw) {
    std::vector<double> t, y;
    for (int k = 0; k <= 40; ++k) {
        t.push_back(0.01 * std::pow(10.0, k / 20.0));
        y.push_back(5.0 * std::pow(t.back(), -0.8));
    }
    const DecayFit f = fit_decay(t, y, 0.01, 1.0);
    EXPECT_NEAR(f.slope, -0.8, 1e-12);
    EXPECT_NEAR(std::exp(f.intercept), 5.0, 1e-10);
    EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
    EXPECT_GE(f.samples, kMinFitSamples);
}

TEST(FitDecay, InvariantUnderTimeRescaling) {
    std::vector<double> t, ts, y;
    for (int k = 1; k <= 300; ++k) {
        const double time = 0.01 * k;
        t.push_back(time);
        ts.push_back(7.0 * time);
        y.push_back(std::pow(time, -0.6) * (1.0 + 0.1 * std::sin(time)));
    }
    const DecayFit a = fit_decay(t, y, 0.1, 3.0);
    const DecayFit b = fit_decay(ts, y, 0.7, 21.0);
    EXPECT_NEAR(a.slope, b.slope, 1e-12);
    EXPECT_NEAR(a.r_squared, b.r_squared, 1e-12);
}

TEST(FitDecay, RejectsDegenerateWindows) {
    std::vector<double> t, y;
    for (int k = 1; k <= 100; ++k) {
        t.push_back(0.01 * k);
        y.push_back(1.0 / t.back());
    }
    EXPECT_THROW(fit_decay(t, y, 0.2, 1.0), FitError);
    std::vector<double> sparse_t, sparse_y;
    for (int k = 0; k <= 6; ++k) {
        sparse_t.push_back(0.01 * std::pow(10.0, k / 6.0));
        sparse_y.push_back(1.0 / sparse_t.back());
    }
    EXPECT_THROW(fit_decay(sparse_t, sparse_y, 0.01, 0.1), FitError);
    y[50] = 0.0;
    EXPECT_THROW(fit_decay(t, y, 0.05, 1.0), FitError);
}

TEST(TraceCsv, RoundTripsThroughTheParser) {
    ProblemSpec s = standard_spec();
    s.domain.cells_per_axis = 64;
    s.horizon = 0.1;
    RunOptions o;
    o.extra_r = {3.0};
    const RunResult r = run(standard_datum(s), s, StepControl{}, o);
    const CsvTable t = parse_csv(trace_to_csv(r.trace, 2.0));
    EXPECT_EQ(t.header.front(), "t");
    EXPECT_EQ(t.header.back(), "l3");
    EXPECT_EQ(t.column("linf"), r.trace.linf);
    EXPECT_EQ(t.column("residual"), r.trace.series("residual@2"));
    EXPECT_EQ(t.column("l3"), r.trace.series("l3"));
}
