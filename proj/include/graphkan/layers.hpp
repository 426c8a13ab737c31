#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "numerics.hpp"

namespace graphkan {

// ---------------------------------------------------------------------------
// LayerNorm

struct layer_norm {
    std::vector<double> gamma;
    std::vector<double> beta;
    double eps = 1e-5;

    layer_norm() = default;
    explicit layer_norm(std::size_t d, double eps_ = 1e-5) : gamma(d, 1.0), beta(d, 0.0), eps(eps_) {
        if (!(eps > 0.0)) throw input_error("layer_norm: eps must be positive");
    }
    std::size_t dim() const noexcept { return gamma.size(); }
};

struct layer_norm_cache {
    matrix xhat;
    std::vector<double> inv_std;
};

struct layer_norm_grads {
    std::vector<double> gamma;
    std::vector<double> beta;
};

/// Per-row standardization with population variance, then gamma * xhat + beta.
template <class T>
basic_matrix<T> layernorm_apply(const layer_norm& p, const basic_matrix<T>& x, layer_norm_cache* cache) {
    using std::sqrt;
    if (x.cols() != p.dim())
        throw input_error("layernorm_forward: input has " + std::to_string(x.cols()) +
                          " columns, expected " + std::to_string(p.dim()));
    const std::size_t d = x.cols();
    basic_matrix<T> y(x.rows(), d);
    if (cache) *cache = {matrix(x.rows(), d), std::vector<double>(x.rows())};
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto xr = x.row(r);
        T mean = 0;
        for (T v : xr) mean += v;
        mean /= static_cast<T>(d);
        T var = 0;
        for (T v : xr) var += (v - mean) * (v - mean);
        var /= static_cast<T>(d);
        const T inv = T(1) / sqrt(var + static_cast<T>(p.eps));
        if (cache) cache->inv_std[r] = static_cast<double>(inv);
        for (std::size_t k = 0; k < d; ++k) {
            const T xh = (xr[k] - mean) * inv;
            if (cache) cache->xhat(r, k) = static_cast<double>(xh);
            y(r, k) = p.gamma[k] * xh + p.beta[k];
        }
    }
    return y;
}

inline std::pair<matrix, layer_norm_cache> layernorm_forward(const layer_norm& p, const matrix& x) {
    layer_norm_cache c;
    matrix y = layernorm_apply(p, x, &c);
    return {std::move(y), std::move(c)};
}

inline std::pair<matrix, layer_norm_grads> layernorm_backward(const layer_norm& p,
                                                              const layer_norm_cache& c,
                                                              const matrix& dy) {
    if (dy.rows() != c.xhat.rows() || dy.cols() != p.dim())
        throw input_error("layernorm_backward: gradient shape does not match cache");
    const std::size_t d = p.dim();
    const double dd = static_cast<double>(d);
    matrix dx(dy.rows(), d);
    layer_norm_grads g{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
    std::vector<double> dxhat(d);
    for (std::size_t r = 0; r < dy.rows(); ++r) {
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            const double xh = c.xhat(r, k);
            g.gamma[k] += dy(r, k) * xh;
            g.beta[k] += dy(r, k);
            dxhat[k] = dy(r, k) * p.gamma[k];
            sum_dxhat += dxhat[k];
            sum_dxhat_xhat += dxhat[k] * xh;
        }
        const double scale = c.inv_std[r] / dd;
        for (std::size_t k = 0; k < d; ++k)
            dx(r, k) = scale * (dd * dxhat[k] - sum_dxhat - c.xhat(r, k) * sum_dxhat_xhat);
    }
    return {std::move(dx), std::move(g)};
}

// ---------------------------------------------------------------------------
// ReLU

template <class T>
basic_matrix<T> relu_forward(const basic_matrix<T>& x) {
    basic_matrix<T> y = x;
    for (T& v : y.flat()) v = v > T(0) ? v : T(0);
    return y;
}

/// Masks dy by x > 0, where x is the forward input.
inline matrix relu_backward(const matrix& x, const matrix& dy) {
    if (x.rows() != dy.rows() || x.cols() != dy.cols())
        throw input_error("relu_backward: shape mismatch");
    matrix dx = dy;
    const auto xs = x.flat();
    auto ds = dx.flat();
    for (std::size_t k = 0; k < xs.size(); ++k)
        if (!(xs[k] > 0.0)) ds[k] = 0.0;
    return dx;
}

// ---------------------------------------------------------------------------
// Dense

/// y = x W + b, with W stored in_dim x out_dim.
struct dense_layer {
    matrix weight;
    std::vector<double> bias;

    std::size_t in_dim() const noexcept { return weight.rows(); }
    std::size_t out_dim() const noexcept { return weight.cols(); }
};

/// Weights uniform in (-1/sqrt(in), 1/sqrt(in)), zero bias.
inline dense_layer make_dense_layer(rng& gen, std::size_t in, std::size_t out) {
    const double s = 1.0 / std::sqrt(static_cast<double>(in));
    return {init_params(gen, in, out, uniform_init{s}), std::vector<double>(out, 0.0)};
}

struct dense_grads {
    matrix weight;
    std::vector<double> bias;
};

template <class T>
basic_matrix<T> dense_forward(const dense_layer& layer, const basic_matrix<T>& x) {
    if (x.cols() != layer.in_dim())
        throw input_error("dense_forward: input has " + std::to_string(x.cols()) +
                          " columns, expected " + std::to_string(layer.in_dim()));
    basic_matrix<T> y = matmul(x, layer.weight);
    for (std::size_t r = 0; r < y.rows(); ++r)
        for (std::size_t k = 0; k < y.cols(); ++k) y(r, k) += layer.bias[k];
    return y;
}

inline std::pair<matrix, dense_grads> dense_backward(const dense_layer& layer, const matrix& x,
                                                     const matrix& dy) {
    if (dy.rows() != x.rows() || dy.cols() != layer.out_dim())
        throw input_error("dense_backward: gradient shape mismatch");
    dense_grads g{matmul_tn(x, dy), std::vector<double>(layer.out_dim(), 0.0)};
    for (std::size_t r = 0; r < dy.rows(); ++r)
        for (std::size_t k = 0; k < dy.cols(); ++k) g.bias[k] += dy(r, k);
    return {matmul_nt(dy, layer.weight), std::move(g)};
}

// ---------------------------------------------------------------------------
// Loss

template <class T>
struct basic_loss_result {
    T loss = 0;
    basic_matrix<T> dlogits;
};

using loss_result = basic_loss_result<double>;

/// Mean softmax cross-entropy over masked nodes. Rows outside the mask get
/// zero gradient.
template <class T>
basic_loss_result<T> cross_entropy(const basic_matrix<T>& logits, const std::vector<int>& labels,
                                   const std::vector<char>& mask) {
    using std::exp;
    using std::log1p;
    if (labels.size() != logits.rows() || mask.size() != logits.rows())
        throw input_error("cross_entropy: labels/mask length does not match logits rows");
    std::size_t n = 0;
    for (std::size_t r = 0; r < mask.size(); ++r) {
        if (!mask[r]) continue;
        if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= logits.cols())
            throw input_error("cross_entropy: node " + std::to_string(r) + " has label outside [0, classes)");
        ++n;
    }
    if (n == 0) throw input_error("cross_entropy: mask selects no nodes");
    basic_loss_result<T> res{T(0), basic_matrix<T>(logits.rows(), logits.cols())};
    const T inv_n = T(1) / static_cast<T>(n);
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        if (!mask[r]) continue;
        const auto z = logits.row(r);
        const auto top = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
        const T zmax = z[top];
        // log(sum exp(z - zmax)) = log1p(sum over non-max terms), accurate near saturation.
        T rest = 0;
        for (std::size_t k = 0; k < z.size(); ++k)
            if (k != top) rest += exp(z[k] - zmax);
        const T log_sum = log1p(rest);
        const auto y = static_cast<std::size_t>(labels[r]);
        res.loss += (log_sum - (z[y] - zmax)) * inv_n;
        for (std::size_t k = 0; k < z.size(); ++k) {
            const T p = exp(z[k] - zmax - log_sum);
            res.dlogits(r, k) = (p - (k == y ? T(1) : T(0))) * inv_n;
        }
    }
    return res;
}

}  // namespace graphkan
