#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include <graphkan/gradcheck.hpp>
#include <graphkan/layers.hpp>

namespace gk = graphkan;

namespace {

gk::matrix random_matrix(gk::rng& gen, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
    gk::matrix m(r, c);
    for (double& v : m.flat()) v = gen.uniform(lo, hi);
    return m;
}

}  // namespace

TEST(LayerNorm, RowsHaveZeroMeanUnitVariance) {
    gk::rng gen(1);
    const gk::layer_norm p(6, 1e-12);
    const gk::matrix y = gk::layernorm_forward(p, random_matrix(gen, 4, 6, -3.0, 5.0)).first;
    for (std::size_t r = 0; r < 4; ++r) {
        double m = 0.0, v = 0.0;
        for (double x : y.row(r)) m += x;
        m /= 6;
        for (double x : y.row(r)) v += (x - m) * (x - m);
        EXPECT_NEAR(m, 0.0, 1e-12);
        EXPECT_NEAR(v / 6, 1.0, 1e-9);
    }
}

TEST(LayerNorm, AffineMatchesDirectFormula) {
    gk::rng gen(2);
    gk::layer_norm p(3);
    p.gamma = {2.0, -1.0, 0.5};
    p.beta = {0.1, 0.2, 0.3};
    gk::matrix x(1, 3);
    x(0, 0) = 1.0;
    x(0, 1) = 2.0;
    x(0, 2) = 4.0;
    const double mean = 7.0 / 3.0;
    const double var = ((1 - mean) * (1 - mean) + (2 - mean) * (2 - mean) + (4 - mean) * (4 - mean)) / 3.0;
    const gk::matrix y = gk::layernorm_forward(p, x).first;
    for (std::size_t k = 0; k < 3; ++k)
        EXPECT_NEAR(y(0, k), p.gamma[k] * (x(0, k) - mean) / std::sqrt(var + 1e-5) + p.beta[k], 1e-14);
}

TEST(LayerNorm, ConstantRowMapsToBeta) {
    gk::layer_norm p(4);
    p.beta = {1, 2, 3, 4};
    gk::matrix x(1, 4);
    for (double& v : x.flat()) v = 3.7;
    const gk::matrix y = gk::layernorm_forward(p, x).first;
    for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(y(0, k), p.beta[k]);
}

TEST(LayerNorm, BackwardMatchesFiniteDifferences) {
    for (auto e : gk::gradcheck_layernorm(gk::gradcheck_options{})) EXPECT_LT(e.worst_rel_err, 1e-6) << e.param;
}

TEST(LayerNorm, RejectsBadInput) {
    EXPECT_THROW(gk::layer_norm(3, 0.0), gk::input_error);
    EXPECT_THROW(gk::layernorm_forward(gk::layer_norm(3), gk::matrix(2, 4)), gk::input_error);
}

TEST(Relu, ForwardAndBackward) {
    gk::matrix x(1, 4);
    x(0, 0) = -1.0;
    x(0, 1) = 0.0;
    x(0, 2) = 0.5;
    x(0, 3) = 3.0;
    const gk::matrix y = gk::relu_forward(x);
    EXPECT_EQ(y(0, 0), 0.0);
    EXPECT_EQ(y(0, 1), 0.0);
    EXPECT_EQ(y(0, 3), 3.0);
    gk::matrix dy(1, 4);
    for (double& v : dy.flat()) v = 2.0;
    const gk::matrix dx = gk::relu_backward(x, dy);
    EXPECT_EQ(dx(0, 0), 0.0);
    EXPECT_EQ(dx(0, 1), 0.0);
    EXPECT_EQ(dx(0, 2), 2.0);
    for (auto e : gk::gradcheck_relu(gk::gradcheck_options{})) EXPECT_LT(e.worst_rel_err, 1e-6);
}

TEST(Dense, ForwardIsAffine) {
    gk::rng gen(3);
    const gk::dense_layer l = gk::make_dense_layer(gen, 3, 2);
    for (double w : l.weight.flat()) EXPECT_LT(std::abs(w), 1.0 / std::sqrt(3.0));
    for (double b : l.bias) EXPECT_EQ(b, 0.0);
    gk::dense_layer m = l;
    m.bias = {0.5, -0.5};
    const gk::matrix x = random_matrix(gen, 4, 3);
    const gk::matrix y = gk::dense_forward(m, x);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t j = 0; j < 2; ++j) {
            double s = m.bias[j];
            for (std::size_t i = 0; i < 3; ++i) s += x(r, i) * m.weight(i, j);
            EXPECT_NEAR(y(r, j), s, 1e-15);
        }
}

TEST(Dense, BackwardMatchesFiniteDifferences) {
    for (auto e : gk::gradcheck_dense(gk::gradcheck_options{})) EXPECT_LT(e.worst_rel_err, 1e-6) << e.param;
}

TEST(CrossEntropy, MatchesDirectSoftmax) {
    gk::rng gen(4);
    const gk::matrix z = random_matrix(gen, 3, 4, -2.0, 2.0);
    const std::vector<int> labels{1, 3, 0};
    const std::vector<char> mask{1, 0, 1};
    const auto res = gk::cross_entropy(z, labels, mask);
    double loss = 0.0;
    for (std::size_t r : {0u, 2u}) {
        double s = 0.0;
        for (double v : z.row(r)) s += std::exp(v);
        loss += -std::log(std::exp(z(r, static_cast<std::size_t>(labels[r]))) / s) / 2.0;
        for (std::size_t k = 0; k < 4; ++k)
            EXPECT_NEAR(res.dlogits(r, k),
                        (std::exp(z(r, k)) / s - (k == static_cast<std::size_t>(labels[r]) ? 1.0 : 0.0)) / 2.0, 1e-15);
    }
    EXPECT_NEAR(res.loss, loss, 1e-14);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(res.dlogits(1, k), 0.0);
}

TEST(CrossEntropy, UniformLogitsGiveLogClasses) {
    const gk::matrix z(2, 6);
    EXPECT_NEAR(gk::cross_entropy(z, {0, 5}, {1, 1}).loss, std::log(6.0), 1e-15);
}

TEST(CrossEntropy, StableForLargeLogits) {
    gk::matrix z(1, 3);
    z(0, 0) = 1000.0;
    z(0, 1) = -1000.0;
    z(0, 2) = 999.0;
    const auto res = gk::cross_entropy(z, {2}, {1});
    EXPECT_NEAR(res.loss, std::log1p(std::exp(-1.0)) + 1.0, 1e-12);
    EXPECT_TRUE(res.dlogits.all_finite());
}

TEST(CrossEntropy, BackwardMatchesFiniteDifferences) {
    for (auto e : gk::gradcheck_cross_entropy(gk::gradcheck_options{})) EXPECT_LT(e.worst_rel_err, 1e-6);
}

TEST(CrossEntropy, RejectsBadMasksAndLabels) {
    const gk::matrix z(2, 3);
    EXPECT_THROW(gk::cross_entropy(z, {0, 1}, {0, 0}), gk::input_error);
    EXPECT_THROW(gk::cross_entropy(z, {0, 3}, {1, 1}), gk::input_error);
    EXPECT_THROW(gk::cross_entropy(z, {0, -1}, {1, 1}), gk::input_error);
    EXPECT_NO_THROW(gk::cross_entropy(z, {0, -1}, {1, 0}));
    EXPECT_THROW(gk::cross_entropy(z, {0}, {1}), gk::input_error);
}
