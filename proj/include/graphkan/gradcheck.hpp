#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "graph.hpp"
#include "kan.hpp"
#include "layers.hpp"
#include "model.hpp"
#include "numerics.hpp"
#include "spline.hpp"

namespace graphkan {

/// Worst finite-difference disagreement for one parameter array.
struct gradcheck_entry {
    std::string component;
    std::string param;
    double worst_rel_err = 0.0;
    std::size_t worst_index = 0;
    std::size_t count = 0;
};

struct gradcheck_options {
    double eps = 1e-5;
    double floor = 1e-8;
    std::uint64_t seed = 7;
    std::size_t d_in = 4;
    std::vector<std::size_t> widths{8, 8, 8};
};

/// Compares `analytic` against central differences of `loss` taken by
/// perturbing `param` in place. `param` is restored afterwards.
template <class Loss>
gradcheck_entry check_array(std::string component, std::string name, std::span<double> param,
                            std::span<const double> analytic, Loss&& loss, double eps, double floor) {
    if (param.size() != analytic.size()) throw input_error("check_array: size mismatch for " + name);
    const std::vector<double> x0(param.begin(), param.end());
    auto f = [&](std::span<const double> x) {
        std::copy(x.begin(), x.end(), param.begin());
        return loss();
    };
    const auto numeric = finite_diff_grad(f, x0, eps);
    std::copy(x0.begin(), x0.end(), param.begin());
    gradcheck_entry e{std::move(component), std::move(name), 0.0, 0, param.size()};
    for (std::size_t k = 0; k < numeric.size(); ++k) {
        const double r = relative_error(analytic[k], numeric[k], floor);
        if (r > e.worst_rel_err) {
            e.worst_rel_err = r;
            e.worst_index = k;
        }
    }
    return e;
}

namespace detail {

inline matrix random_matrix(rng& gen, std::size_t r, std::size_t c, double lo, double hi) {
    matrix m(r, c);
    for (double& v : m.flat()) v = gen.uniform(lo, hi);
    return m;
}

inline double weighted_sum(const matrix& y, const matrix& w) {
    double s = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) s += y.flat()[k] * w.flat()[k];
    return s;
}

}  // namespace detail

/// basis_deriv against differences of basis at interior points.
inline std::vector<gradcheck_entry> gradcheck_spline(const gradcheck_options& opt) {
    rng gen(opt.seed);
    std::vector<gradcheck_entry> out;
    for (int degree : {1, 2, 3}) {
        const spline_grid g(degree, 5, -1.0, 1.0);
        gradcheck_entry e{"spline", "basis_deriv.degree" + std::to_string(degree), 0.0, 0, 0};
        for (int p = 0; p < 100; ++p) {
            // Stay clear of knots, where lower-degree bases have kinks.
            double x;
            do {
                x = gen.uniform(-0.999, 0.999);
            } while (std::any_of(g.knots.begin(), g.knots.end(),
                                 [&](double t) { return std::abs(x - t) < 1e-4; }));
            const auto analytic = basis_deriv(g, x);
            for (std::size_t i = 0; i < g.num_basis(); ++i) {
                const auto numeric = finite_diff_grad(
                    [&](std::span<const double> xs) { return basis(g, xs[0])[i]; }, {x}, 1e-6);
                const double r = relative_error(analytic[i], numeric[0], 1e-6);
                ++e.count;
                if (r > e.worst_rel_err) {
                    e.worst_rel_err = r;
                    e.worst_index = i;
                }
            }
        }
        out.push_back(e);
    }
    return out;
}

inline std::vector<gradcheck_entry> gradcheck_kan(const gradcheck_options& opt) {
    rng gen(opt.seed + 1);
    const spline_grid grid(3, 5, -2.0, 2.0);
    kan_layer layer = make_kan_layer(gen, 4, 3, grid);
    for (double& c : layer.coeffs) c = gen.uniform(-1.0, 1.0);
    layer.spline_w = detail::random_matrix(gen, 3, 4, 0.5, 1.5);
    matrix x = detail::random_matrix(gen, 2, 4, -1.9, 1.9);
    const matrix w = detail::random_matrix(gen, 2, 3, -1.0, 1.0);
    auto loss = [&] { return detail::weighted_sum(kan_forward(layer, x).y, w); };
    const auto fwd = kan_forward(layer, x);
    const auto bwd = kan_backward(layer, fwd.cache, w);
    return {
        check_array("kan", "coeffs", layer.coeffs, bwd.grads.coeffs, loss, opt.eps, opt.floor),
        check_array("kan", "base_w", layer.base_w.flat(), bwd.grads.base_w.flat(), loss, opt.eps, opt.floor),
        check_array("kan", "spline_w", layer.spline_w.flat(), bwd.grads.spline_w.flat(), loss, opt.eps, opt.floor),
        check_array("kan", "input", x.flat(), bwd.dx.flat(), loss, opt.eps, opt.floor),
    };
}

inline std::vector<gradcheck_entry> gradcheck_layernorm(const gradcheck_options& opt) {
    rng gen(opt.seed + 2);
    layer_norm p(5);
    for (double& v : p.gamma) v = gen.uniform(0.5, 1.5);
    for (double& v : p.beta) v = gen.uniform(-0.5, 0.5);
    matrix x = detail::random_matrix(gen, 3, 5, -2.0, 2.0);
    const matrix w = detail::random_matrix(gen, 3, 5, -1.0, 1.0);
    auto loss = [&] { return detail::weighted_sum(layernorm_forward(p, x).first, w); };
    const auto [y, cache] = layernorm_forward(p, x);
    const auto [dx, g] = layernorm_backward(p, cache, w);
    return {
        check_array("layernorm", "gamma", p.gamma, g.gamma, loss, opt.eps, opt.floor),
        check_array("layernorm", "beta", p.beta, g.beta, loss, opt.eps, opt.floor),
        check_array("layernorm", "input", x.flat(), dx.flat(), loss, opt.eps, opt.floor),
    };
}

inline std::vector<gradcheck_entry> gradcheck_dense(const gradcheck_options& opt) {
    rng gen(opt.seed + 3);
    dense_layer layer = make_dense_layer(gen, 4, 3);
    for (double& b : layer.bias) b = gen.uniform(-0.5, 0.5);
    matrix x = detail::random_matrix(gen, 3, 4, -1.0, 1.0);
    const matrix w = detail::random_matrix(gen, 3, 3, -1.0, 1.0);
    auto loss = [&] { return detail::weighted_sum(dense_forward(layer, x), w); };
    const auto [dx, g] = dense_backward(layer, x, w);
    return {
        check_array("dense", "weight", layer.weight.flat(), g.weight.flat(), loss, opt.eps, opt.floor),
        check_array("dense", "bias", layer.bias, g.bias, loss, opt.eps, opt.floor),
        check_array("dense", "input", x.flat(), dx.flat(), loss, opt.eps, opt.floor),
    };
}

inline std::vector<gradcheck_entry> gradcheck_relu(const gradcheck_options& opt) {
    rng gen(opt.seed + 4);
    matrix x(3, 4);
    for (double& v : x.flat()) {
        do {
            v = gen.uniform(-1.0, 1.0);
        } while (std::abs(v) < 1e-3);
    }
    const matrix w = detail::random_matrix(gen, 3, 4, -1.0, 1.0);
    auto loss = [&] { return detail::weighted_sum(relu_forward(x), w); };
    const matrix dx = relu_backward(x, w);
    return {check_array("relu", "input", x.flat(), dx.flat(), loss, opt.eps, opt.floor)};
}

inline std::vector<gradcheck_entry> gradcheck_cross_entropy(const gradcheck_options& opt) {
    rng gen(opt.seed + 5);
    matrix logits = detail::random_matrix(gen, 5, 6, -2.0, 2.0);
    const std::vector<int> labels{0, 3, 5, 1, 2};
    const std::vector<char> mask{1, 1, 0, 1, 1};
    auto loss = [&] { return cross_entropy(logits, labels, mask).loss; };
    const auto res = cross_entropy(logits, labels, mask);
    return {check_array("cross_entropy", "logits", logits.flat(), res.dlogits.flat(), loss, opt.eps, opt.floor)};
}

/// Six nodes, a path plus one chord and one isolated-but-self-looped node.
inline graph gradcheck_graph(const gradcheck_options& opt) {
    rng gen(opt.seed + 6);
    graph g;
    g.n_nodes = 6;
    g.edges = canonical_edges({{0, 1}, {1, 2}, {2, 3}, {3, 4}, {1, 4}});
    g.features = detail::random_matrix(gen, 6, opt.d_in, -1.5, 1.5);
    g.labels = {0, 1, 2, 3, 4, 5};
    g.train_mask = {1, 1, 1, 1, 1, 1};
    g.val_mask.assign(6, 0);
    g.test_mask.assign(6, 0);
    return g;
}

template <class Update>
std::vector<gradcheck_entry> gradcheck_model(const gradcheck_options& opt, model_kind kind) {
    const graph g = gradcheck_graph(opt);
    const norm_adjacency adj = normalize(g, true);
    model_config cfg;
    cfg.kind = kind;
    cfg.d_in = opt.d_in;
    cfg.widths = opt.widths;
    cfg.n_classes = 6;
    rng gen(opt.seed + 7);
    auto net = make_net<Update>(gen, cfg);
    // Move LayerNorm affine parameters off their identity initialization so
    // their gradients are exercised in general position.
    for (auto& n : net.norms) {
        for (double& v : n.gamma) v = gen.uniform(0.7, 1.3);
        for (double& v : n.beta) v = gen.uniform(-0.2, 0.2);
    }
    // The oracle evaluates the loss in extended precision. In double the loss
    // is quantized at about 1e-16 * |loss| / (2 eps), which swamps gradient
    // entries near the 1e-8 relative-error floor.
    const auto features = g.features.cast<long double>();
    auto loss = [&] {
        return cross_entropy(forward_pass(net, adj, features).logits, g.labels, g.train_mask).loss;
    };
    const auto out = forward_pass(net, adj, g.features);
    const auto ce = cross_entropy(out.logits, g.labels, g.train_mask);
    auto grads = backward_pass(net, out.cache, ce.dlogits);
    auto pv = param_views(net);
    auto gv = grad_views(net, grads);
    std::vector<gradcheck_entry> res;
    const std::string comp = "model." + to_string(kind);
    for (std::size_t p = 0; p < pv.size(); ++p)
        res.push_back(check_array(comp, pv[p].name, pv[p].data, gv[p].data, loss, opt.eps, opt.floor));
    return res;
}

/// Every component, in a fixed order.
inline std::vector<gradcheck_entry> gradcheck_all(const gradcheck_options& opt = {}) {
    std::vector<gradcheck_entry> all;
    auto append = [&](std::vector<gradcheck_entry> v) { all.insert(all.end(), v.begin(), v.end()); };
    append(gradcheck_spline(opt));
    append(gradcheck_kan(opt));
    append(gradcheck_layernorm(opt));
    append(gradcheck_dense(opt));
    append(gradcheck_relu(opt));
    append(gradcheck_cross_entropy(opt));
    append(gradcheck_model<kan_layer>(opt, model_kind::graphkan));
    append(gradcheck_model<dense_layer>(opt, model_kind::gcn));
    return all;
}

}  // namespace graphkan
