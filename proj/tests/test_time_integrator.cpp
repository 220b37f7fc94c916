#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hjlab/initial_data.hpp"
#include "hjlab/time_integrator.hpp"

using namespace hjlab;

namespace {

ProblemSpec spec_1d(double L, int n) {
    ProblemSpec s;
    s.domain.half_width = L;
    s.domain.cells_per_axis = n;
    return s;
}

Field random_nonnegative(const Grid& g, std::mt19937& rng) {
    std::uniform_real_distribution<double> d(0.0, 1.0);
    Field u(g);
    g.for_each_interior([&](std::size_t i) { u.values[i] = d(rng); });
    return u;
}

}  // namespace

TEST(StableDt, ParabolicLimit) {
    ProblemSpec s = spec_1d(1.0, 8);
    s.gamma = 0.0;
    StepControl c;
    c.dt_max = 1.0;
    const Field u = sample(InitialDatum{}, make_grid(s));
    EXPECT_DOUBLE_EQ(stable_dt(u, s, c), 0.4 * 0.25 * 0.25 / 2.0);
}

TEST(StableDt, ConstantFieldWithoutViscosityHitsDtMax) {
    ProblemSpec s = spec_1d(1.0, 8);
    s.nu = 0.0;
    Field u(make_grid(s));
    std::fill(u.values.begin(), u.values.end(), 2.0);
    StepControl c;
    EXPECT_EQ(stable_dt(u, s, c), c.dt_max);
}

TEST(StableDt, HamiltonianLimit) {
    ProblemSpec s = spec_1d(1.0, 20);
    s.nu = 0.0;
    s.q = 2.0;
    const Grid g = make_grid(s);
    Field u(g);
    for (std::size_t i = 0; i < g.size(); ++i) u.values[i] = 4.0 * g.position(i)[0] + 10.0;
    StepControl c;
    c.dt_max = 1.0;
    const auto lim = stability_limits(u, s, 0.0);
    EXPECT_NEAR(lim.hamiltonian, 0.0125, 1e-12);
    EXPECT_NEAR(stable_dt(u, s, c), 0.005, 1e-12);
}

TEST(StableDt, CollapseIsReported) {
    ProblemSpec s = spec_1d(1.0, 64);
    const Field u = sample(InitialDatum{}, make_grid(s));
    StepControl c;
    c.dt_min = 1.0;
    c.dt_max = 1.0;
    EXPECT_THROW(stable_dt(u, s, c), SolverError);
}

TEST(Step, NoDynamicsLeavesFieldUnchanged) {
    ProblemSpec s = spec_1d(1.0, 16);
    s.nu = 0.0;
    s.gamma = 0.0;
    const Field u = sample(InitialDatum{}, make_grid(s));
    EXPECT_EQ(step(u, s, 0.01).values, u.values);
}

TEST(Step, ZeroIsASolution) {
    ProblemSpec s = spec_1d(1.0, 16);
    const Field u(make_grid(s));
    for (double v : step(u, s, 0.001).values) EXPECT_EQ(v, 0.0);
}

TEST(Step, PreservesPositivity) {
    std::mt19937 rng(3);
    for (int dim : {1, 2}) {
        ProblemSpec s = spec_1d(1.0, 32);
        s.dim = dim;
        s.q = 1.5;
        const Grid g = make_grid(s);
        for (int trial = 0; trial < 50; ++trial) {
            const Field u = random_nonnegative(g, rng);
            const Field next = step(u, s, stable_dt(u, s, StepControl{}));
            EXPECT_GE(*std::min_element(next.values.begin(), next.values.end()), -1e-12);
        }
    }
}

TEST(Step, ComparisonPrinciple) {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> bump(0.0, 0.5);
    for (int dim : {1, 2}) {
        ProblemSpec s = spec_1d(1.0, 32);
        s.dim = dim;
        const Grid g = make_grid(s);
        for (int trial = 0; trial < 30; ++trial) {
            const Field u = random_nonnegative(g, rng);
            Field v = u;
            g.for_each_interior([&](std::size_t i) { v.values[i] += bump(rng); });
            const double dt = std::min(stable_dt(u, s, StepControl{}), stable_dt(v, s, StepControl{}));
            const Field su = step(u, s, dt);
            const Field sv = step(v, s, dt);
            for (std::size_t i = 0; i < g.size(); ++i) EXPECT_LE(su.values[i], sv.values[i] + 1e-12);
        }
    }
}

TEST(Step, NonFiniteValuesAbort) {
    ProblemSpec s = spec_1d(1.0, 16);
    s.q = 2.0;
    Field u(make_grid(s));
    u.values[8] = 1e300;
    EXPECT_THROW(step(u, s, 1.0), SolverError);
}

TEST(Run, ZeroHorizonReturnsInitialField) {
    ProblemSpec s = spec_1d(4.0, 64);
    s.horizon = 0.0;
    const Field u0 = sample(InitialDatum{}, make_grid(s));
    const RunResult r = run(u0, s, StepControl{});
    ASSERT_EQ(r.snapshots.size(), 1u);
    EXPECT_EQ(r.snapshots[0].values, u0.values);
    EXPECT_EQ(r.diagnostics.steps, 0);
}

TEST(Run, MatchesHeatKernel) {
    ProblemSpec s = spec_1d(8.0, 512);
    s.gamma = 0.0;
    const double w = 0.5;
    InitialDatum d;
    d.kind = datum::Gaussian{1.0, {0.0, 0.0}, w};
    const RunResult r = run(sample(d, make_grid(s)), s, StepControl{});
    const Field& u = r.final_field;
    const double var = w * w + 2.0;
    const double amp = w / std::sqrt(var);
    double err = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double x = u.grid.position(i)[0];
        err = std::max(err, std::abs(u.values[i] - amp * std::exp(-x * x / (2.0 * var))));
    }
    EXPECT_LT(err / amp, 0.01);
}

TEST(Run, MassDoesNotIncrease) {
    for (int dim : {1, 2}) {
        ProblemSpec s = spec_1d(4.0, dim == 1 ? 128 : 48);
        s.dim = dim;
        s.horizon = 0.5;
        InitialDatum d;
        d.kind = datum::Indicator{1.0, 1.0};
        const RunResult r = run(sample(d, make_grid(s)), s, StepControl{});
        for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_LE(r.trace.l1[i], r.trace.l1[i - 1]);
    }
}

TEST(Run, LandsOnSnapshotTimes) {
    ProblemSpec s = spec_1d(4.0, 64);
    s.horizon = 0.3;
    StepControl c;
    c.snapshot_times = {0.0, 0.0123, 0.1, 0.3};
    const RunResult r = run(sample(InitialDatum{}, make_grid(s)), s, c);
    ASSERT_EQ(r.snapshots.size(), 4u);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(r.snapshots[k].time, c.snapshot_times[k]);
    EXPECT_EQ(r.final_field.time, 0.3);
}

TEST(Run, RejectsBadSnapshotSchedule) {
    ProblemSpec s = spec_1d(4.0, 64);
    StepControl c;
    c.snapshot_times = {0.5, 0.2};
    EXPECT_THROW(run(sample(InitialDatum{}, make_grid(s)), s, c), ConfigError);
    c.snapshot_times = {2.0};
    EXPECT_THROW(run(sample(InitialDatum{}, make_grid(s)), s, c), ConfigError);
}

TEST(Run, IsDeterministic) {
    ProblemSpec s = spec_1d(4.0, 64);
    s.horizon = 0.2;
    const Field u0 = sample(InitialDatum{}, make_grid(s));
    const RunResult a = run(u0, s, StepControl{});
    const RunResult b = run(u0, s, StepControl{});
    EXPECT_EQ(a.final_field.values, b.final_field.values);
    EXPECT_EQ(trace_to_csv(a.trace), trace_to_csv(b.trace));
}

TEST(Run, SupportMonitorFlagsMassAtTheRim) {
    ProblemSpec s = spec_1d(1.0, 32);
    s.horizon = 0.1;
    InitialDatum d;
    d.kind = datum::Gaussian{1.0, {0.0, 0.0}, 1.0};
    const Field u0 = sample(d, make_grid(s));
    EXPECT_TRUE(run(u0, s, StepControl{}).diagnostics.support_breach);
    s.domain.mode = BoundaryMode::Dirichlet;
    EXPECT_FALSE(run(u0, s, StepControl{}).diagnostics.support_breach);
    s.domain.mode = BoundaryMode::WholeSpaceProxy;
    s.domain.half_width = 8.0;
    s.domain.cells_per_axis = 256;
    d.kind = datum::Gaussian{1.0, {0.0, 0.0}, 0.25};
    EXPECT_FALSE(run(sample(d, make_grid(s)), s, StepControl{}).diagnostics.support_breach);
}
