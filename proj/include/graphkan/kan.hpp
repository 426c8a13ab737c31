#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "numerics.hpp"
#include "spline.hpp"

namespace graphkan {

/// Base term of each edge function.
enum class kan_base { silu, none };

/// A layer of learnable univariate edge functions.
///
/// Output j is the sum over inputs i of
///     phi_{j,i}(x) = base_w(j,i) * silu(x) + spline_w(j,i) * sum_g coeff(j,i,g) * B_g(x)
/// with all B_g drawn from one grid shared by every edge. Both terms are
/// evaluated at x clamped to the grid domain, so phi is constant outside it.
struct kan_layer {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    spline_grid grid;
    kan_base base = kan_base::silu;
    /// out_dim x in_dim x num_basis, row-major (j, i, g).
    std::vector<double> coeffs;
    matrix base_w;    // out_dim x in_dim
    matrix spline_w;  // out_dim x in_dim

    kan_layer() = default;
    kan_layer(std::size_t in, std::size_t out, spline_grid g, kan_base b = kan_base::silu)
        : in_dim(in),
          out_dim(out),
          grid(std::move(g)),
          base(b),
          coeffs(in * out * grid.num_basis(), 0.0),
          base_w(out, in),
          spline_w(out, in) {
        if (in == 0 || out == 0) throw input_error("kan_layer: dimensions must be positive");
    }

    std::size_t num_basis() const noexcept { return grid.num_basis(); }

    double& coeff(std::size_t j, std::size_t i, std::size_t g) noexcept {
        return coeffs[(j * in_dim + i) * num_basis() + g];
    }
    double coeff(std::size_t j, std::size_t i, std::size_t g) const noexcept {
        return coeffs[(j * in_dim + i) * num_basis() + g];
    }

    /// Evaluates a single edge function. Used by tests and diagnostics; the
    /// batched forward pass does not go through here.
    double edge(std::size_t j, std::size_t i, double x) const {
        const double xc = grid.clamp(x);
        const local_basis<double> lb = basis_local(grid, xc);
        double spline = 0.0;
        for (int r = 0; r <= grid.degree; ++r)
            spline += coeff(j, i, lb.first + static_cast<std::size_t>(r)) * lb.values[static_cast<std::size_t>(r)];
        const double b = base == kan_base::silu ? silu(xc) : 0.0;
        return base_w(j, i) * b + spline_w(j, i) * spline;
    }
};

/// Initializes a layer for training: coefficients uniform in (-0.1, 0.1),
/// base weights uniform in (-1/sqrt(in), 1/sqrt(in)), spline scales 1.
inline kan_layer make_kan_layer(rng& gen, std::size_t in, std::size_t out, const spline_grid& g,
                                kan_base base = kan_base::silu) {
    kan_layer layer(in, out, g, base);
    for (double& c : layer.coeffs) c = gen.uniform(-0.1, 0.1);
    const double s = 1.0 / std::sqrt(static_cast<double>(in));
    layer.base_w = init_params(gen, out, in, uniform_init{s});
    layer.spline_w = init_params(gen, out, in, constant_init{1.0});
    return layer;
}

/// Gradients with the same shapes as a kan_layer's parameters.
struct kan_grads {
    std::vector<double> coeffs;
    matrix base_w;
    matrix spline_w;
};

/// Per-input values saved by the forward pass.
struct kan_cache {
    std::size_t batch = 0;
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    std::size_t num_basis = 0;
    int degree = 0;
    /// batch x in_dim entries each.
    std::vector<std::size_t> first;
    std::vector<double> values;  // (degree + 1) per entry
    std::vector<double> derivs;  // (degree + 1) per entry
    std::vector<double> base;    // silu(clamped x), or 0
    std::vector<double> base_d;  // d base / dx, 0 when clamped away
    std::vector<char> inside;    // x within [lo, hi]
};

namespace detail {

/// Folds spline_w into the coefficients and transposes so that, for one input
/// i and one basis slot g, the weights over all outputs j are contiguous:
/// eff[(i * (G + 1) + g) * out_dim + j]. Slot G carries base_w.
template <class T = double>
std::vector<T> effective_weights(const kan_layer& layer) {
    const std::size_t nb = layer.num_basis();
    const std::size_t slots = nb + 1;
    std::vector<T> eff(layer.in_dim * slots * layer.out_dim);
    for (std::size_t j = 0; j < layer.out_dim; ++j)
        for (std::size_t i = 0; i < layer.in_dim; ++i) {
            const T sw = layer.spline_w(j, i);
            for (std::size_t g = 0; g < nb; ++g)
                eff[(i * slots + g) * layer.out_dim + j] = sw * layer.coeff(j, i, g);
            eff[(i * slots + nb) * layer.out_dim + j] = layer.base_w(j, i);
        }
    return eff;
}

template <class T>
void axpy(T a, const T* x, T* y, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) y[k] += a * x[k];
}

inline double dot(const double* x, const double* y, std::size_t n) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += x[k] * y[k];
    return s;
}

}  // namespace detail

struct kan_forward_result {
    matrix y;
    kan_cache cache;
};

/// Batched layer evaluation. Rows of x are independent samples. When `cache`
/// is non-null it receives what kan_backward needs.
template <class T>
basic_matrix<T> kan_apply(const kan_layer& layer, const basic_matrix<T>& x, kan_cache* cache) {
    if (x.cols() != layer.in_dim)
        throw input_error("kan_forward: input has " + std::to_string(x.cols()) +
                          " columns, layer expects " + std::to_string(layer.in_dim));
    const std::size_t n = layer.in_dim, m = layer.out_dim, nb = layer.num_basis();
    const std::size_t slots = nb + 1;
    const int k = layer.grid.degree;
    const std::size_t kp1 = static_cast<std::size_t>(k + 1);
    const std::size_t batch = x.rows();

    if (cache) {
        kan_cache& c = *cache;
        c.batch = batch;
        c.in_dim = n;
        c.out_dim = m;
        c.num_basis = nb;
        c.degree = k;
        const std::size_t entries = batch * n;
        c.first.resize(entries);
        c.values.resize(entries * kp1);
        c.derivs.resize(entries * kp1);
        c.base.resize(entries);
        c.base_d.resize(entries);
        c.inside.resize(entries);
    }

    basic_matrix<T> y(batch, m);
    const std::vector<T> eff = detail::effective_weights<T>(layer);
    const bool use_base = layer.base == kan_base::silu;
    for (std::size_t b = 0; b < batch; ++b) {
        T* yr = y.row(b).data();
        for (std::size_t i = 0; i < n; ++i) {
            const T xv = x(b, i);
            if (!std::isfinite(xv)) throw numeric_error("kan_forward: non-finite input");
            const T xc = layer.grid.clamp(xv);
            const local_basis<T> lb = basis_local(layer.grid, xc);
            const T base = use_base ? silu(xc) : T(0);
            if (cache) {
                const std::size_t e = b * n + i;
                const bool inside = xv >= layer.grid.lo && xv <= layer.grid.hi;
                const local_basis<double> ld = basis_deriv_local(layer.grid, static_cast<double>(xc));
                kan_cache& c = *cache;
                c.first[e] = lb.first;
                c.inside[e] = inside;
                for (std::size_t r = 0; r < kp1; ++r) {
                    c.values[e * kp1 + r] = static_cast<double>(lb.values[r]);
                    c.derivs[e * kp1 + r] = ld.values[r];
                }
                c.base[e] = static_cast<double>(base);
                c.base_d[e] = use_base && inside ? silu_grad(static_cast<double>(xc)) : 0.0;
            }
            const T* w = eff.data() + i * slots * m;
            for (std::size_t r = 0; r < kp1; ++r) detail::axpy(lb.values[r], w + (lb.first + r) * m, yr, m);
            if (use_base) detail::axpy(base, w + nb * m, yr, m);
        }
    }
    return y;
}

inline kan_forward_result kan_forward(const kan_layer& layer, const matrix& x) {
    kan_forward_result res;
    res.y = kan_apply(layer, x, &res.cache);
    return res;
}

struct kan_backward_result {
    matrix dx;
    kan_grads grads;
};

/// Gradients of sum(dy .* y) with respect to the input and every parameter.
inline kan_backward_result kan_backward(const kan_layer& layer, const kan_cache& c,
                                        const matrix& dy) {
    if (c.in_dim != layer.in_dim || c.out_dim != layer.out_dim ||
        c.num_basis != layer.num_basis() || c.degree != layer.grid.degree)
        throw input_error("kan_backward: cache does not match layer");
    if (dy.rows() != c.batch || dy.cols() != layer.out_dim)
        throw input_error("kan_backward: upstream gradient shape does not match cache");
    const std::size_t n = layer.in_dim, m = layer.out_dim, nb = layer.num_basis();
    const std::size_t slots = nb + 1;
    const std::size_t kp1 = static_cast<std::size_t>(c.degree + 1);

    const std::vector<double> eff = detail::effective_weights(layer);
    std::vector<double> deff(eff.size(), 0.0);
    kan_backward_result res;
    res.dx = matrix(c.batch, n);
    const bool use_base = layer.base == kan_base::silu;

    for (std::size_t b = 0; b < c.batch; ++b) {
        const double* g = dy.row(b).data();
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t e = b * n + i;
            const std::size_t off = i * slots * m;
            double dxv = 0.0;
            for (std::size_t r = 0; r < kp1; ++r) {
                const std::size_t slot = off + (c.first[e] + r) * m;
                const double v = c.values[e * kp1 + r];
                if (v != 0.0) detail::axpy(v, g, deff.data() + slot, m);
                const double dv = c.derivs[e * kp1 + r];
                if (c.inside[e] && dv != 0.0) dxv += dv * detail::dot(eff.data() + slot, g, m);
            }
            if (use_base) {
                const std::size_t slot = off + nb * m;
                detail::axpy(c.base[e], g, deff.data() + slot, m);
                if (c.base_d[e] != 0.0) dxv += c.base_d[e] * detail::dot(eff.data() + slot, g, m);
            }
            res.dx(b, i) = dxv;
        }
    }

    kan_grads& gr = res.grads;
    gr.coeffs.assign(layer.coeffs.size(), 0.0);
    gr.base_w = matrix(m, n);
    gr.spline_w = matrix(m, n);
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t i = 0; i < n; ++i) {
            const double sw = layer.spline_w(j, i);
            double dsw = 0.0;
            for (std::size_t gi = 0; gi < nb; ++gi) {
                const double d = deff[(i * slots + gi) * m + j];
                gr.coeffs[(j * n + i) * nb + gi] = sw * d;
                dsw += layer.coeff(j, i, gi) * d;
            }
            gr.spline_w(j, i) = dsw;
            gr.base_w(j, i) = deff[(i * slots + nb) * m + j];
        }
    return res;
}

}  // namespace graphkan
