#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <span>
#include <vector>

#include <gtest/gtest.h>

#include <graphkan/numerics.hpp>

namespace gk = graphkan;

TEST(Rng, EngineMatchesStandardSequence) {
    // The standard fixes the 10000th output of a default-seeded mt19937_64.
    gk::rng gen(5489);
    std::uint64_t x = 0;
    for (int i = 0; i < 10000; ++i) x = gen.next_u64();
    EXPECT_EQ(x, 9981545732273789042ULL);
}

TEST(Rng, SameSeedSameStream) {
    gk::rng a(42), b(42), c(43);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const double x = a.normal(), y = b.normal(), z = c.normal();
        EXPECT_EQ(x, y);
        differs = differs || x != z;
    }
    EXPECT_TRUE(differs);
}

TEST(Rng, UniformStaysInRange) {
    gk::rng gen(1);
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double u = gen.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    EXPECT_LT(lo, 1e-3);
    EXPECT_GT(hi, 1.0 - 1e-3);
}

TEST(Rng, NormalMoments) {
    gk::rng gen(3);
    const int n = 200000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = gen.normal();
        s += z;
        s2 += z * z;
    }
    EXPECT_NEAR(s / n, 0.0, 0.01);
    EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, BelowCoversRangeAndRejectsEmpty) {
    gk::rng gen(9);
    std::vector<int> hits(7, 0);
    for (int i = 0; i < 7000; ++i) ++hits[gen.below(7)];
    for (int h : hits) EXPECT_GT(h, 800);
    EXPECT_THROW(gen.below(0), gk::input_error);
}

TEST(Rng, ShuffleIsPermutation) {
    gk::rng gen(11);
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    auto w = v;
    gen.shuffle(w);
    EXPECT_NE(v, w);
    std::sort(w.begin(), w.end());
    EXPECT_EQ(v, w);
}

TEST(Rng, MixSeparatesStreams) {
    std::set<std::uint64_t> seen;
    for (std::uint64_t s = 0; s < 100; ++s)
        for (std::uint64_t salt : {1u, 2u, 3u}) seen.insert(gk::rng::mix(s, salt));
    EXPECT_EQ(seen.size(), 300u);
}

TEST(Matrix, MatmulVariantsAgreeWithLoops) {
    gk::rng gen(2);
    gk::matrix a(4, 3), b(3, 5), c(4, 5);
    for (double& x : a.flat()) x = gen.uniform(-1, 1);
    for (double& x : b.flat()) x = gen.uniform(-1, 1);
    for (double& x : c.flat()) x = gen.uniform(-1, 1);
    const gk::matrix ab = gk::matmul(a, b);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 5; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < 3; ++k) s += a(i, k) * b(k, j);
            EXPECT_NEAR(ab(i, j), s, 1e-15);
        }
    EXPECT_EQ(gk::matmul_tn(a, c), gk::matmul(gk::transpose(a), c));
    EXPECT_EQ(gk::matmul_nt(c, b), gk::matmul(c, gk::transpose(b)));
    EXPECT_THROW(gk::matmul(a, c), gk::input_error);
}

TEST(Matrix, IdentityAndFiniteness) {
    gk::matrix m = gk::matrix::identity(3);
    EXPECT_EQ(m(1, 1), 1.0);
    EXPECT_EQ(m(0, 1), 0.0);
    EXPECT_TRUE(m.all_finite());
    m(2, 0) = std::nan("");
    EXPECT_FALSE(m.all_finite());
    EXPECT_THROW(gk::require_finite(m, "m"), gk::numeric_error);
}

TEST(Init, ShapesAndRanges) {
    gk::rng gen(4);
    const gk::matrix u = gk::init_params(gen, 30, 20, gk::uniform_init{0.25});
    EXPECT_EQ(u.rows(), 30u);
    EXPECT_EQ(u.cols(), 20u);
    for (double x : u.flat()) {
        EXPECT_GE(x, -0.25);
        EXPECT_LT(x, 0.25);
    }
    EXPECT_EQ(gk::init_params(gen, 2, 2, gk::zeros_init{}), gk::matrix(2, 2, 0.0));
    EXPECT_EQ(gk::init_params(gen, 2, 2, gk::constant_init{1.5}), gk::matrix(2, 2, 1.5));
    EXPECT_THROW(gk::init_params(gen, 0, 2, gk::zeros_init{}), gk::input_error);
}

TEST(FiniteDiff, RecoversQuadraticGradient) {
    auto f = [](std::span<const double> x) { return 3.0 * x[0] * x[0] + x[0] * x[1] - 2.0 * x[1]; };
    const auto g = gk::finite_diff_grad(f, {0.5, -1.0}, 1e-5);
    EXPECT_NEAR(g[0], 3.0 * 2 * 0.5 - 1.0, 1e-9);
    EXPECT_NEAR(g[1], 0.5 - 2.0, 1e-9);
}

TEST(FiniteDiff, RejectsNonFiniteValues) {
    auto f = [](std::span<const double> x) { return std::log(x[0]); };
    EXPECT_THROW(gk::finite_diff_grad(f, {0.0}, 1e-3), gk::numeric_error);
}

TEST(RelativeError, UsesFloor) {
    EXPECT_NEAR(gk::relative_error(1.0, 1.1), 0.1 / 1.1, 1e-15);
    EXPECT_DOUBLE_EQ(gk::relative_error(0.0, 1e-12), 1e-12 / 1e-8);
    EXPECT_EQ(gk::relative_error(0.0, 0.0), 0.0);
}

TEST(Silu, DerivativeMatchesDifferences) {
    for (double x : {-4.0, -1.0, -0.1, 0.0, 0.3, 2.5}) {
        const double h = 1e-6;
        const double fd = (gk::silu(x + h) - gk::silu(x - h)) / (2 * h);
        EXPECT_NEAR(gk::silu_grad(x), fd, 1e-9) << x;
    }
    EXPECT_EQ(gk::silu(0.0), 0.0);
}
