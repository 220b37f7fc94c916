#include <gtest/gtest.h>

#include <cmath>

#include "hjlab/estimate_checks.hpp"

using namespace hjlab;

namespace {

ProblemSpec gradient_spec() {
    ProblemSpec s;
    s.q = 1.5;
    s.domain.half_width = 8.0;
    s.domain.cells_per_axis = 256;
    return s;
}

}  // namespace

TEST(GradientBound, ZeroRunHasZeroRatio) {
    const ProblemSpec s = gradient_spec();
    StepControl c;
    c.snapshot_times = {0.5, 1.0};
    const RunResult r = run(Field(make_grid(s)), s, c);
    EXPECT_EQ(gradient_bound_check(r, s).worst_ratio, 0.0);
}

TEST(GradientBound, GaussianRunStaysBelowAllowance) {
    const ProblemSpec s = gradient_spec();
    StepControl c;
    for (int k = 1; k <= 10; ++k) c.snapshot_times.push_back(0.1 * k);
    c.snapshot_times.back() = 1.0;
    InitialDatum d;
    d.kind = datum::Gaussian{1.0, {0.0, 0.0}, 0.25};
    const auto rep = gradient_bound_check(run(sample(d, make_grid(s)), s, c), s);
    EXPECT_LE(rep.worst_ratio, 1.1);
    EXPECT_EQ(rep.ratios.size(), 10u);
}

TEST(GradientBound, RefusesOtherRegimes) {
    ProblemSpec s = gradient_spec();
    s.q = 2.5;
    EXPECT_THROW(gradient_bound_check(RunResult{}, s), RegimeError);
    s.q = 1.5;
    s.nu = 0.5;
    EXPECT_THROW(gradient_bound_check(RunResult{}, s), RegimeError);
}

TEST(FarField, ExponentArithmetic) {
    EXPECT_DOUBLE_EQ(far_field_exponent_a(1.2), 4.0);
    ProblemSpec s;
    s.q = 1.2;
    s.domain.half_width = 20.0;
    s.domain.cells_per_axis = 200;
    s.horizon = 10.0;
    InitialDatum d;
    d.kind = datum::PowerTail{1.0, 1.5};
    const Field u0 = sample(d, make_grid(s), 1.0);
    const auto times = log_spaced(1.0, 10.0, 8);
    StepControl c;
    c.snapshot_times = times;
    const auto rep = far_field_report(u0, run(u0, s, c), s, 1.5, 1.0, times);
    EXPECT_DOUBLE_EQ(rep.bound_exponent, 1.5);
    EXPECT_DOUBLE_EQ(rep.tail_slope_prediction, -0.25);
    EXPECT_NEAR(rep.mass[0] / (rep.fitted_constant * rep.bound[0]), 1.0, 1e-14);
}

TEST(FarField, CompactDataHaveNoTailBeyondTheSupport) {
    const Grid g(1, 64, 4.0);
    InitialDatum d;
    d.kind = datum::Indicator{1.0, 1.0};
    const Field u0 = sample(d, g);
    EXPECT_GT(tail_integral(u0, 1.0, 0.25), 0.0);
    EXPECT_EQ(tail_integral(u0, 1.0, 1.5 * 1.5), 0.0);
}

TEST(FarField, RejectsSupercriticalQ) {
    ProblemSpec s;
    s.q = 1.7;  // (N+2r)/(N+r) = 1.5 for N = r = 1
    EXPECT_THROW(require_far_field_regime(s, 1.5, 1.0), RegimeError);
    s.q = 1.2;
    EXPECT_THROW(require_far_field_regime(s, 0.9, 1.0), RegimeError);
}

TEST(Universal, ExponentSelection) {
    ProblemSpec s;
    s.q = 1.5;
    EXPECT_DOUBLE_EQ(universal_exponent(s), 2.0);
    s.lambda = 1.0;
    EXPECT_DOUBLE_EQ(universal_exponent(s), 1.0 / 1.5);
    s.gamma = 0.0;
    s.p = 3.0;
    EXPECT_DOUBLE_EQ(universal_exponent(s), 1.0);
    s.p = 2.0;
    EXPECT_THROW(universal_exponent(s), RegimeError);
}

TEST(Universal, RequiresBoundedDomain) {
    ProblemSpec s;
    const Field base(make_grid(s));
    EXPECT_THROW(universal_bound_check(s, base, {1.0, 10.0}, 0.1, 1.0, StepControl{}), RegimeError);
}

TEST(Universal, WeightedSupOverWindow) {
    NormTrace t;
    t.times = {0.05, 0.1, 0.5, 1.0, 2.0};
    t.linf = {100.0, 50.0, 2.0, 1.0, 0.1};
    EXPECT_DOUBLE_EQ(weighted_sup(t, 1.0, 0.1, 1.0), 5.0);
}

TEST(Monotone, RelativeIncrease) {
    EXPECT_EQ(max_relative_increase({3.0, 2.0, 2.0, 1.0}), 0.0);
    EXPECT_DOUBLE_EQ(max_relative_increase({2.0, 1.0, 1.5}), 0.5);
}

TEST(Reports, NameTheEstimateTheyTest) {
    for (const json& j : {to_json(GradientBoundReport{}), to_json(FarFieldReport{}), to_json(UniversalBoundReport{})}) {
        ASSERT_TRUE(j.contains("paper_ref"));
        EXPECT_FALSE(j["paper_ref"].get<std::string>().empty());
    }
}
