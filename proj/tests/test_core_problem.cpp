#include <gtest/gtest.h>

#include "hjlab/core_problem.hpp"

using namespace hjlab;

namespace {

bool mentions(const ValidationReport& r, const std::string& text) {
    for (const auto& v : r.violations) {
        if (v.find(text) != std::string::npos) return true;
    }
    return false;
}

}  // namespace

TEST(ValidateSpec, DefaultProblemIsValid) {
    ProblemSpec s;
    s.q = 1.5;
    s.p = 2;
    s.lambda = 0;
    s.gamma = 1;
    s.nu = 1;
    s.dim = 1;
    EXPECT_TRUE(validate_spec(s).ok());
}

TEST(ValidateSpec, RejectsSmallQ) {
    ProblemSpec s;
    s.q = 0.9;
    const auto r = validate_spec(s);
    EXPECT_FALSE(r.ok());
    EXPECT_TRUE(mentions(r, "q must exceed 1"));
}

TEST(ValidateSpec, RejectsDegenerateProblem) {
    ProblemSpec s;
    s.nu = 0;
    s.gamma = 0;
    EXPECT_TRUE(mentions(validate_spec(s), "degenerate: no diffusion and no absorption"));
}

TEST(ValidateSpec, CollectsEveryViolation) {
    ProblemSpec s;
    s.q = 0.5;
    s.horizon = -1;
    s.domain.cells_per_axis = 2;
    EXPECT_GE(validate_spec(s).violations.size(), 3u);
}

TEST(ValidateSpec, NonQuadraticDiffusionNeedsViscosity) {
    ProblemSpec s;
    s.p = 3;
    s.nu = 0;
    EXPECT_FALSE(validate_spec(s).ok());
}

TEST(Grid, OneDimensionalSpacingAndNodes) {
    const Grid g = make_grid(DomainSpec{1.0, BoundaryMode::WholeSpaceProxy, 8}, 1);
    EXPECT_DOUBLE_EQ(g.spacing(), 0.25);
    EXPECT_EQ(g.size(), 9u);
    EXPECT_EQ(g.interior_count(), 7u);
}

TEST(Grid, TwoDimensionalSpacingAndNodes) {
    const Grid g = make_grid(DomainSpec{2.0, BoundaryMode::WholeSpaceProxy, 16}, 2);
    EXPECT_DOUBLE_EQ(g.spacing(), 0.25);
    EXPECT_EQ(g.nodes_per_axis(), 17u);
    EXPECT_EQ(g.size(), 17u * 17u);
}

TEST(Grid, RejectsCoarseResolution) {
    EXPECT_THROW(make_grid(DomainSpec{1.0, BoundaryMode::WholeSpaceProxy, 4}, 1), ConfigError);
}

TEST(Grid, IndexRoundTripsAndBoundaryFlags) {
    const Grid g(2, 8, 1.0);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(g.index(g.multi_index(i)), i);
    EXPECT_TRUE(g.is_boundary(g.index({0, 4})));
    EXPECT_TRUE(g.is_boundary(g.index({4, 8})));
    EXPECT_FALSE(g.is_boundary(g.index({4, 4})));
    EXPECT_DOUBLE_EQ(g.radius(g.index({4, 4})), 0.0);
    std::size_t interior = 0;
    g.for_each_interior([&](std::size_t i) {
        EXPECT_FALSE(g.is_boundary(i));
        ++interior;
    });
    EXPECT_EQ(interior, g.interior_count());
}

TEST(Field, ZeroBoundaryClearsRimOnly) {
    Field f(Grid(1, 8, 1.0));
    std::fill(f.values.begin(), f.values.end(), 1.0);
    f.zero_boundary();
    EXPECT_EQ(f.values.front(), 0.0);
    EXPECT_EQ(f.values.back(), 0.0);
    EXPECT_EQ(f.values[4], 1.0);
}

TEST(Serialization, KeyValueRoundTrip) {
    ProblemSpec s;
    s.q = 1.25;
    s.lambda = 0.5;
    s.domain.mode = BoundaryMode::Dirichlet;
    s.domain.cells_per_axis = 96;
    s.horizon = 0.1;
    const ProblemSpec back = problem_spec_from_key_values(parse_key_values(write_key_values(to_key_values(s))));
    EXPECT_EQ(to_key_values(back), to_key_values(s));
}

TEST(Serialization, JsonRoundTrip) {
    ProblemSpec s;
    s.q = 1.7;
    s.p = 3;
    s.dim = 2;
    EXPECT_EQ(to_key_values(problem_spec_from_json(to_json(s))), to_key_values(s));
}

TEST(Serialization, RejectsUnknownKeys) {
    KeyValues kv{{"q", "1.5"}, {"bogus", "1"}};
    EXPECT_THROW(problem_spec_from_key_values(kv), ConfigError);
}

TEST(Serialization, ParsesCommentsAndWhitespace) {
    const auto kv = parse_key_values("# comment\n q = 1.5 \n\nnu=0 # trailing\n");
    EXPECT_EQ(kv.at("q"), "1.5");
    EXPECT_EQ(kv.at("nu"), "0");
}

TEST(Serialization, FormatDoubleRoundTrips) {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456.789, -2.5}) {
        EXPECT_EQ(std::stod(format_double(v)), v);
    }
    EXPECT_EQ(format_double(0.5), "0.5");
}
