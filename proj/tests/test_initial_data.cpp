#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "hjlab/initial_data.hpp"

using namespace hjlab;

TEST(Sample, MollifiedDiracCarriesExactMass) {
    for (int dim : {1, 2}) {
        const Grid g(dim, 64, 1.0);
        InitialDatum d;
        d.kind = datum::MollifiedDirac{1.0, 0.1, {0.0, 0.0}};
        const Field u = sample(d, g);
        EXPECT_NEAR(lr_mass(u, 1.0), 1.0, 1e-14) << "dim=" << dim;
        u.grid.for_each_interior([&](std::size_t i) {
            if (g.radius(i) >= 0.1) {
                EXPECT_EQ(u.values[i], 0.0);
            }
        });
    }
}

TEST(Sample, MollifierNarrowerThanGridIsRejected) {
    InitialDatum d;
    d.kind = datum::MollifiedDirac{1.0, 1e-6, {0.05, 0.0}};
    EXPECT_THROW(sample(d, Grid(1, 16, 1.0)), ConfigError);
}

TEST(Sample, GaussianPeaksAtCentreNode) {
    const Grid g(1, 64, 2.0);
    InitialDatum d;
    d.kind = datum::Gaussian{1.0, {0.0, 0.0}, 0.3};
    const Field u = sample(d, g);
    EXPECT_EQ(u.values[32], 1.0);
    EXPECT_EQ(*std::max_element(u.values.begin(), u.values.end()), 1.0);
    EXPECT_EQ(u.values.front(), 0.0);
}

TEST(Sample, PowerTailMassMatchesAnalyticIntegral) {
    const double L = 100.0;
    const Grid g(1, 20000, L);
    InitialDatum d;
    d.kind = datum::PowerTail{1.0, 1.5};
    const Field u = sample(d, g, 1.0);
    // 2 (1 + int_1^L x^{-3/2} dx)
    const double exact = 2.0 * (1.0 + 2.0 * (1.0 - 1.0 / std::sqrt(L)));
    EXPECT_NEAR(lr_mass(u, 1.0) / exact, 1.0, 1e-4);
}

TEST(Sample, PowerTailOutsideLrIsRejected) {
    InitialDatum d;
    d.kind = datum::PowerTail{1.0, 0.8};
    EXPECT_THROW(sample(d, Grid(1, 16, 10.0), 1.0), ConfigError);
    EXPECT_NO_THROW(sample(d, Grid(1, 16, 10.0), 2.0));
    d.kind = datum::PowerTail{1.0, 1.5};
    EXPECT_THROW(sample(d, Grid(2, 16, 10.0), 1.0), ConfigError);
}

TEST(Sample, SignRestrictionIsEnforced) {
    InitialDatum d;
    d.kind = datum::Gaussian{-1.0, {0.0, 0.0}, 0.3};
    EXPECT_THROW(sample(d, Grid(1, 16, 1.0)), ConfigError);
    d.sign = DatumSign::Signed;
    EXPECT_LT(sample(d, Grid(1, 16, 1.0)).values[8], 0.0);
}

TEST(Sample, IndicatorCoversTheBox) {
    InitialDatum d;
    d.kind = datum::Indicator{0.5, 2.0};
    const Field u = sample(d, Grid(2, 16, 1.0));
    EXPECT_EQ(u.values[u.grid.index({8, 8})], 2.0);
    EXPECT_EQ(u.values[u.grid.index({2, 8})], 0.0);
}

TEST(FieldCsv, RoundTripsInBothDimensions) {
    for (int dim : {1, 2}) {
        const Grid g(dim, 8, 1.0);
        InitialDatum d;
        d.kind = datum::Gaussian{1.0, {0.1, -0.2}, 0.3};
        const Field u = sample(d, g);
        const Field back = field_from_csv(field_to_csv(u), g);
        EXPECT_EQ(back.values, u.values);
    }
}

TEST(FieldCsv, RejectsMismatchedFiles) {
    const Grid g(1, 8, 1.0);
    EXPECT_THROW(field_from_csv("x,y,u\n0,0,1\n", g), ConfigError);
    EXPECT_THROW(field_from_csv("x,u\n0,1\n", g), ConfigError);
    const Field wrong(Grid(1, 8, 2.0));
    EXPECT_THROW(field_from_csv(field_to_csv(wrong), g), ConfigError);
}

TEST(FieldCsv, FromFileDatum) {
    const Grid g(1, 8, 1.0);
    InitialDatum src;
    src.kind = datum::Gaussian{2.0, {0.0, 0.0}, 0.4};
    const Field u = sample(src, g);
    const auto path = std::filesystem::temp_directory_path() / "hjlab_datum_test.csv";
    write_text_file(path.string(), field_to_csv(u));
    InitialDatum d;
    d.kind = datum::FromFile{path.string()};
    EXPECT_EQ(sample(d, g).values, u.values);
    std::filesystem::remove(path);
}

TEST(Truncation, BelowThreshold) {
    EXPECT_EQ(truncate(0.5, 1.0), 0.5);
    EXPECT_EQ(theta_k(0.5, 1.0), 0.125);
}

TEST(Truncation, AboveThreshold) {
    EXPECT_EQ(truncate(3.0, 1.0), 1.0);
    EXPECT_EQ(theta_k(3.0, 1.0), 2.5);
}

TEST(Truncation, EvenPrimitive) {
    EXPECT_EQ(truncate(-3.0, 1.0), -1.0);
    EXPECT_EQ(theta_k(-3.0, 1.0), 2.5);
}

TEST(Truncation, PrimitiveMatchesQuadrature) {
    // Theta_k(u) = int_0^u T_k(s) ds, checked by the midpoint rule.
    for (double u : {-2.7, -0.4, 0.9, 1.0, 4.2}) {
        const int n = 100000;
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += truncate((j + 0.5) * u / n, 1.5);
        EXPECT_NEAR(theta_k(u, 1.5), acc * u / n, 1e-8);
    }
}

TEST(Truncation, RejectsNonPositiveLevel) {
    EXPECT_THROW(truncate(1.0, 0.0), ConfigError);
    EXPECT_THROW(theta_k(1.0, -1.0), ConfigError);
}
