#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hjlab/moser_exponents.hpp"

using namespace hjlab;
using namespace hjlab::moser;

TEST(SigmaVarpi, TwoDimensionalGradientCase) {
    const auto e = sigma_varpi(1.0, 1.5, 0.0, 4.0);
    EXPECT_NEAR(e.theta_conj, 4.0 / 3.0, 1e-15);
    EXPECT_NEAR(e.sigma, 0.8, 1e-15);
    EXPECT_NEAR(e.varpi, 0.6, 1e-15);
}

TEST(SigmaVarpi, RecoversHeatExponent) {
    for (int n : {3, 4, 5}) {
        for (double r : {1.0, 2.0, 3.0}) {
            const auto e = sigma_varpi(r, 2.0, -1.0, n / (n - 2.0));
            EXPECT_NEAR(e.sigma, n / (2.0 * r), 1e-14);
            EXPECT_NEAR(e.varpi, 1.0, 1e-14);
        }
    }
}

TEST(SigmaVarpi, RecoversPLaplacianExponent) {
    for (int n : {3, 4}) {
        for (double p : {1.8, 2.5}) {
            if (!(p < n)) continue;
            for (double r : {1.0, 2.0}) {
                const auto e = sigma_varpi(r, p, -1.0, n / (n - p));
                EXPECT_NEAR(e.sigma, 1.0 / (r * p / n + p - 2.0), 1e-13);
            }
        }
    }
}

TEST(SigmaVarpi, InfiniteThetaGivesSupercriticalExponent) {
    const auto e = sigma_varpi(2.0, 3.0, 0.0, std::numeric_limits<double>::infinity());
    EXPECT_NEAR(e.sigma, 0.25, 1e-15);  // 1/(q + r - 1)
    EXPECT_NEAR(e.varpi, 0.5, 1e-15);
}

TEST(SigmaVarpi, RejectsNonPositiveDenominator) {
    EXPECT_THROW(sigma_varpi(1.0, 1.2, -5.0, 2.0), RegimeError);
}

TEST(Admissibility, MatchesDefinition) {
    EXPECT_TRUE(admissible(1.0, 1.5, 0.0, 2));
    EXPECT_FALSE(admissible(1.0, 1.1, -1.0, 4));
}

TEST(Bootstrap, ClosedFormValues) {
    EXPECT_NEAR(bootstrap_bound({0.5, 1.0, 1.0, 1.0}), 16.0, 1e-12);
    EXPECT_NEAR(bootstrap_bound({0.5, 1.0, 1.0, 2.0}), 4.0, 1e-12);
}

TEST(Bootstrap, MonotoneInKAndVanishingAtZero) {
    double prev = 0.0;
    for (double k : {1e-12, 1e-6, 1e-3, 1.0, 10.0}) {
        const double b = bootstrap_bound({0.3, 0.7, k, 1.5});
        EXPECT_GT(b, prev);
        prev = b;
    }
    EXPECT_LT(bootstrap_bound({0.3, 0.7, 1e-30, 1.5}), 1e-30);
    EXPECT_THROW(bootstrap_bound({1.0, 0.7, 1.0, 1.0}), ConfigError);
}

TEST(Recursion, HandIteratedTerms) {
    const auto tr = simulate_recursion(1.0, 1.5, 0.0, 4.0, 200);
    EXPECT_DOUBLE_EQ(tr.r[1], 6.0);
    EXPECT_DOUBLE_EQ(tr.r[2], 26.0);
    EXPECT_DOUBLE_EQ(tr.r[3], 106.0);
    EXPECT_NEAR(tr.varpi_seq[0], 4.0 / 6.0, 1e-15);
    EXPECT_NEAR(tr.varpi_seq[1], 16.0 / 26.0, 1e-15);
    EXPECT_NEAR(tr.varpi_seq[2], 64.0 / 106.0, 1e-15);
    EXPECT_NEAR(tr.varpi_seq.back(), 0.6, 1e-12);
    EXPECT_NEAR(tr.sigma_seq.back(), 0.8, 1e-12);
    EXPECT_NEAR(tr.series_seq.back(), 16.0 / 9.0, 1e-12);
    EXPECT_TRUE(tr.converged);
}

TEST(Recursion, PartialSumsMatchDirectSummation) {
    const double r = 1.3, m = 2.2, l = 0.4, th = 2.5;
    const auto tr = simulate_recursion(r, m, l, th, 20);
    double rn = r;
    for (int n = 0; n <= 8; ++n) {
        rn = (rn + l + m - 1.0) * th;
        double sum = 0.0;
        for (int k = 1; k <= n + 1; ++k) sum += std::pow(th, n + 2 - k);
        EXPECT_NEAR(tr.sigma_seq[n], sum / rn, 1e-12);
        EXPECT_NEAR(tr.varpi_seq[n], std::pow(th, n + 1) * r / rn, 1e-12);
    }
}

TEST(Recursion, RandomAdmissibleDraws) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> ur(1.0, 5.0), um(1.1, 3.0), ul(0.0, 2.0), uth(1.5, 8.0);
    for (int k = 0; k < 100; ++k) {
        const double r = ur(rng), m = um(rng), l = ul(rng), th = uth(rng);
        const auto tr = simulate_recursion(r, m, l, th, 200);
        EXPECT_LT(tr.sigma_error, 1e-6);
        EXPECT_LT(tr.varpi_error, 1e-6);
        EXPECT_LT(tr.series_error, 1e-6);
        EXPECT_TRUE(std::isfinite(tr.ell));
    }
}

TEST(Recursion, RejectsShortRuns) { EXPECT_THROW(simulate_recursion(1.0, 1.5, 0.0, 4.0, 5), ConfigError); }

TEST(ExponentTable, OneDimensionalGradientRow) {
    const auto t = exponent_table(1, 1.5, 2.0, 0.0, {1.0});
    const auto& row = t.find("sigma_rqN", 1.0);
    EXPECT_NEAR(row.value, 0.5, 1e-15);
    EXPECT_NEAR(row.varpi, 0.75, 1e-15);
}

TEST(ExponentTable, PLaplacianAndUniversalRows) {
    const auto t = exponent_table(2, 1.5, 3.0, 0.0, {1.0});
    EXPECT_NEAR(t.find("sigma_rp", 1.0).value, 0.4, 1e-15);
    EXPECT_NEAR(t.find("universal_p", 1.0).value, 1.0, 1e-15);
}

TEST(ExponentTable, SupercriticalRowIsVoidWithFallback) {
    const auto t = exponent_table(1, 3.0, 2.0, 0.0, {2.0});
    const auto& row = t.find("sigma_rqN", 2.0);
    EXPECT_FALSE(row.valid);
    ASSERT_TRUE(row.fallback.has_value());
    EXPECT_NEAR(*row.fallback, 0.25, 1e-15);
    EXPECT_NE(exponent_table_text(t).find("VOID"), std::string::npos);
    EXPECT_NE(exponent_table_csv(t).find(",0.25,"), std::string::npos);
}

TEST(ExponentTable, HeatRowMatchesSobolevLimit) {
    for (int n : {3, 4}) {
        const auto t = exponent_table(n, 1.5, 2.0, 0.0, {1.0, 2.0});
        for (double r : {1.0, 2.0}) {
            EXPECT_NEAR(t.find("heat", r).value, sigma_varpi(r, 2.0, -1.0, *sobolev_theta(n, 2.0)).sigma, 1e-14);
        }
    }
}
