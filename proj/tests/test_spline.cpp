#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include <graphkan/spline.hpp>

#include "oracles.hpp"

namespace gk = graphkan;

TEST(SplineGrid, KnotLayout) {
    const gk::spline_grid g(3, 5, -2.0, 2.0);
    ASSERT_EQ(g.knots.size(), 5u + 2 * 3 + 1);
    EXPECT_EQ(g.num_basis(), 8u);
    EXPECT_EQ(g.knots[3], -2.0);
    EXPECT_EQ(g.knots[8], 2.0);
    const auto ref = oracle::knots(3, 5, -2.0, 2.0);
    for (std::size_t j = 0; j < ref.size(); ++j) EXPECT_NEAR(g.knots[j], ref[j], 1e-15);
}

TEST(SplineGrid, RejectsBadParameters) {
    EXPECT_THROW(gk::spline_grid(-1, 5, 0, 1), gk::input_error);
    EXPECT_THROW(gk::spline_grid(3, 0, 0, 1), gk::input_error);
    EXPECT_THROW(gk::spline_grid(3, 5, 1, 1), gk::input_error);
    EXPECT_THROW(gk::spline_grid(3, 5, 2, 1), gk::input_error);
}

TEST(Basis, DegreeZeroIsIndicator) {
    const gk::spline_grid g(0, 4, 0.0, 1.0);
    EXPECT_EQ(gk::basis(g, 0.3), (std::vector<double>{0, 1, 0, 0}));
}

TEST(Basis, MatchesNaiveRecursionAtFixedPoint) {
    const gk::spline_grid g(3, 5, -1.0, 1.0);
    const auto b = gk::basis(g, 0.37);
    const auto t = oracle::knots(3, 5, -1.0, 1.0);
    for (std::size_t i = 0; i < b.size(); ++i) EXPECT_NEAR(b[i], oracle::bspline(t, i, 3, 0.37), 1e-12) << i;
}

TEST(Basis, MatchesNaiveRecursionEverywhere) {
    gk::rng gen(21);
    for (int k = 0; k <= 5; ++k)
        for (int G : {1, 3, 5, 9}) {
            const gk::spline_grid g(k, G, -1.5, 2.5);
            const auto t = oracle::knots(k, G, -1.5, 2.5);
            for (int p = 0; p < 200; ++p) {
                const double x = gen.uniform(-1.5, 2.5);
                const auto b = gk::basis(g, x);
                for (std::size_t i = 0; i < b.size(); ++i)
                    ASSERT_NEAR(b[i], oracle::bspline(t, i, k, x), 1e-12) << "k=" << k << " G=" << G << " x=" << x;
            }
        }
}

TEST(Basis, PartitionOfUnityAndNonnegative) {
    gk::rng gen(22);
    for (int k = 0; k <= 5; ++k) {
        const gk::spline_grid g(k, 5, -2.0, 2.0);
        for (int p = 0; p < 1000; ++p) {
            const auto b = gk::basis(g, gen.uniform(-2.0, 2.0));
            EXPECT_LT(std::abs(std::accumulate(b.begin(), b.end(), 0.0) - 1.0), 1e-12);
            for (double v : b) EXPECT_GE(v, -1e-15);
        }
    }
}

TEST(Basis, AtMostDegreePlusOneNonzero) {
    const gk::spline_grid g(3, 5, -2.0, 2.0);
    gk::rng gen(23);
    for (int p = 0; p < 100; ++p) {
        const auto b = gk::basis(g, gen.uniform(-2.0, 2.0));
        EXPECT_LE(std::count_if(b.begin(), b.end(), [](double v) { return v != 0.0; }), 4);
    }
}

TEST(Basis, RightEndpointIsLeftLimit) {
    const gk::spline_grid g(3, 5, -2.0, 2.0);
    const auto at = gk::basis(g, 2.0);
    const auto near = gk::basis(g, std::nextafter(2.0, 0.0));
    for (std::size_t i = 0; i < at.size(); ++i) EXPECT_NEAR(at[i], near[i], 1e-12);
    EXPECT_NEAR(std::accumulate(at.begin(), at.end(), 0.0), 1.0, 1e-12);
}

TEST(Basis, ClampsOutsideDomain) {
    const gk::spline_grid g(3, 5, -2.0, 2.0);
    EXPECT_EQ(gk::basis(g, 7.0), gk::basis(g, 2.0));
    EXPECT_EQ(gk::basis(g, -3.5), gk::basis(g, -2.0));
    EXPECT_EQ(gk::basis_deriv(g, 7.0), gk::basis_deriv(g, 2.0));
}

TEST(BasisDeriv, HatSlopes) {
    const gk::spline_grid g(1, 2, 0.0, 1.0);
    const auto d = gk::basis_deriv(g, 0.25);
    EXPECT_EQ(d, (std::vector<double>{-2, 2, 0}));
}

TEST(BasisDeriv, DegreeZeroIsFlat) {
    const gk::spline_grid g(0, 4, 0.0, 1.0);
    for (double v : gk::basis_deriv(g, 0.6)) EXPECT_EQ(v, 0.0);
}

TEST(BasisDeriv, MatchesCentralDifferences) {
    gk::rng gen(24);
    const double h = 1e-6;
    for (int k = 1; k <= 5; ++k) {
        const gk::spline_grid g(k, 5, -2.0, 2.0);
        for (int p = 0; p < 300; ++p) {
            const double x = gen.uniform(-2.0 + 2 * h, 2.0 - 2 * h);
            const auto d = gk::basis_deriv(g, x);
            const auto bp = gk::basis(g, x + h), bm = gk::basis(g, x - h);
            for (std::size_t i = 0; i < d.size(); ++i) ASSERT_NEAR(d[i], (bp[i] - bm[i]) / (2 * h), 1e-6);
        }
    }
}

TEST(BasisDeriv, BoundaryIsOneSidedFromInside) {
    const gk::spline_grid g(3, 5, -2.0, 2.0);
    const double h = 1e-6;
    for (double x : {-2.0, 2.0}) {
        const double s = x < 0 ? 1.0 : -1.0;
        const auto d = gk::basis_deriv(g, x);
        const auto b0 = gk::basis(g, x), b1 = gk::basis(g, x + s * h), b2 = gk::basis(g, x + 2 * s * h);
        for (std::size_t i = 0; i < d.size(); ++i)
            EXPECT_NEAR(d[i], s * (-3 * b0[i] + 4 * b1[i] - b2[i]) / (2 * h), 1e-5);
    }
}

TEST(BasisDeriv, SumsToZero) {
    gk::rng gen(25);
    const gk::spline_grid g(3, 7, -1.0, 1.0);
    for (int p = 0; p < 100; ++p) {
        const auto d = gk::basis_deriv(g, gen.uniform(-1.0, 1.0));
        EXPECT_NEAR(std::accumulate(d.begin(), d.end(), 0.0), 0.0, 1e-11);
    }
}
