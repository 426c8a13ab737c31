#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "graph.hpp"
#include "kan.hpp"
#include "layers.hpp"
#include "numerics.hpp"
#include "spline.hpp"

namespace graphkan {

enum class model_kind { graphkan, gcn };

inline std::string to_string(model_kind k) { return k == model_kind::graphkan ? "graphkan" : "gcn"; }

inline model_kind parse_model_kind(const std::string& s) {
    if (s == "graphkan") return model_kind::graphkan;
    if (s == "gcn") return model_kind::gcn;
    throw input_error("unknown model kind \"" + s + "\" (expected graphkan or gcn)");
}

inline std::string to_string(kan_base b) { return b == kan_base::silu ? "silu" : "none"; }

inline kan_base parse_kan_base(const std::string& s) {
    if (s == "silu") return kan_base::silu;
    if (s == "none") return kan_base::none;
    throw input_error("unknown base \"" + s + "\" (expected silu or none)");
}

/// Architecture of either network. Hidden widths default to 512-256-128.
struct model_config {
    model_kind kind = model_kind::graphkan;
    std::size_t d_in = 64;
    std::vector<std::size_t> widths{512, 256, 128};
    std::size_t n_classes = 6;
    int spline_degree = 3;
    int spline_intervals = 5;
    double domain_lo = -2.0;
    double domain_hi = 2.0;
    kan_base base = kan_base::silu;
    /// Feed [h_v | m_v] to the update instead of m_v alone.
    bool concat_self = false;
    double ln_eps = 1e-5;

    spline_grid grid() const { return spline_grid(spline_degree, spline_intervals, domain_lo, domain_hi); }

    void validate() const {
        if (d_in == 0) throw input_error("model: d_in must be positive");
        if (widths.empty()) throw input_error("model: need at least one hidden layer");
        for (auto w : widths)
            if (w == 0) throw input_error("model: hidden widths must be positive");
        if (n_classes < 2) throw input_error("model: need at least two classes");
        if (!(ln_eps > 0.0)) throw input_error("model: layer-norm eps must be positive");
        (void)grid();
    }

    friend bool operator==(const model_config&, const model_config&) = default;
};

inline void to_json(nlohmann::json& j, const model_config& c) {
    j = nlohmann::json{{"kind", to_string(c.kind)},
                       {"d_in", c.d_in},
                       {"widths", c.widths},
                       {"n_classes", c.n_classes},
                       {"spline_degree", c.spline_degree},
                       {"spline_intervals", c.spline_intervals},
                       {"domain", {c.domain_lo, c.domain_hi}},
                       {"base", to_string(c.base)},
                       {"concat_self", c.concat_self},
                       {"ln_eps", c.ln_eps}};
}

inline void from_json(const nlohmann::json& j, model_config& c) {
    c.kind = parse_model_kind(j.at("kind").get<std::string>());
    c.d_in = j.at("d_in").get<std::size_t>();
    c.widths = j.at("widths").get<std::vector<std::size_t>>();
    c.n_classes = j.at("n_classes").get<std::size_t>();
    c.spline_degree = j.at("spline_degree").get<int>();
    c.spline_intervals = j.at("spline_intervals").get<int>();
    const auto dom = j.at("domain").get<std::vector<double>>();
    if (dom.size() != 2) throw input_error("model config: domain must be [lo, hi]");
    c.domain_lo = dom[0];
    c.domain_hi = dom[1];
    c.base = parse_kan_base(j.at("base").get<std::string>());
    c.concat_self = j.at("concat_self").get<bool>();
    c.ln_eps = j.at("ln_eps").get<double>();
}

/// A named, shaped view of one parameter or gradient array.
template <class T>
struct param_view {
    std::string name;
    std::span<T> data;
    std::vector<std::size_t> shape;
};

// ---------------------------------------------------------------------------
// Update functions. Each specialization says how to build, run, differentiate
// and enumerate the parameters of one node-update type.

template <class Update>
struct update_traits;

template <>
struct update_traits<kan_layer> {
    using cache = kan_cache;
    using grads = kan_grads;
    static constexpr bool hidden_relu = false;
    static constexpr const char* tag = "kan";

    static kan_layer make(rng& gen, std::size_t in, std::size_t out, const model_config& cfg) {
        return make_kan_layer(gen, in, out, cfg.grid(), cfg.base);
    }
    template <class T>
    static basic_matrix<T> apply(const kan_layer& u, const basic_matrix<T>& x, cache* c) {
        return kan_apply(u, x, c);
    }
    static std::pair<matrix, grads> backward(const kan_layer& u, const cache& c, const matrix&,
                                             const matrix& dy) {
        auto r = kan_backward(u, c, dy);
        return {std::move(r.dx), std::move(r.grads)};
    }
    template <class L, class F>
    static void visit(L& u, const std::string& prefix, F&& fn) {
        const std::size_t m = u.out_dim, n = u.in_dim;
        fn(prefix + ".coeffs", std::span(u.coeffs), std::vector<std::size_t>{m, n, u.num_basis()});
        fn(prefix + ".base_w", u.base_w.flat(), std::vector<std::size_t>{m, n});
        fn(prefix + ".spline_w", u.spline_w.flat(), std::vector<std::size_t>{m, n});
    }
    template <class G, class F>
    static void visit_grads(G& g, const kan_layer& u, const std::string& prefix, F&& fn) {
        const std::size_t m = u.out_dim, n = u.in_dim;
        fn(prefix + ".coeffs", std::span(g.coeffs), std::vector<std::size_t>{m, n, u.num_basis()});
        fn(prefix + ".base_w", g.base_w.flat(), std::vector<std::size_t>{m, n});
        fn(prefix + ".spline_w", g.spline_w.flat(), std::vector<std::size_t>{m, n});
    }
};

template <>
struct update_traits<dense_layer> {
    using cache = matrix;  // unused; the input is kept by the network cache
    using grads = dense_grads;
    static constexpr bool hidden_relu = true;
    static constexpr const char* tag = "dense";

    static dense_layer make(rng& gen, std::size_t in, std::size_t out, const model_config&) {
        return make_dense_layer(gen, in, out);
    }
    template <class T>
    static basic_matrix<T> apply(const dense_layer& u, const basic_matrix<T>& x, cache*) {
        return dense_forward(u, x);
    }
    static std::pair<matrix, grads> backward(const dense_layer& u, const cache&, const matrix& x,
                                             const matrix& dy) {
        return dense_backward(u, x, dy);
    }
    template <class L, class F>
    static void visit(L& u, const std::string& prefix, F&& fn) {
        fn(prefix + ".weight", u.weight.flat(), std::vector<std::size_t>{u.in_dim(), u.out_dim()});
        fn(prefix + ".bias", std::span(u.bias), std::vector<std::size_t>{u.out_dim()});
    }
    template <class G, class F>
    static void visit_grads(G& g, const dense_layer& u, const std::string& prefix, F&& fn) {
        fn(prefix + ".weight", g.weight.flat(), std::vector<std::size_t>{u.in_dim(), u.out_dim()});
        fn(prefix + ".bias", std::span(g.bias), std::vector<std::size_t>{u.out_dim()});
    }
};

// ---------------------------------------------------------------------------
// Networks

/// Message-passing stack: every hidden layer aggregates with the normalized
/// adjacency, applies the update (plus ReLU for the dense baseline), then
/// LayerNorm. The head maps the last hidden features to class logits without
/// aggregation.
template <class Update>
struct graph_net {
    model_config config;
    std::vector<Update> updates;
    std::vector<layer_norm> norms;
    Update head;
};

using graphkan_net = graph_net<kan_layer>;
using gcn_net = graph_net<dense_layer>;

template <class Update>
struct graph_net_grads {
    std::vector<typename update_traits<Update>::grads> updates;
    std::vector<layer_norm_grads> norms;
    typename update_traits<Update>::grads head;
};

template <class Update>
graph_net<Update> make_net(rng& gen, const model_config& cfg) {
    cfg.validate();
    using T = update_traits<Update>;
    graph_net<Update> net;
    net.config = cfg;
    std::size_t prev = cfg.d_in;
    for (std::size_t w : cfg.widths) {
        const std::size_t in = cfg.concat_self ? 2 * prev : prev;
        net.updates.push_back(T::make(gen, in, w, cfg));
        net.norms.emplace_back(w, cfg.ln_eps);
        prev = w;
    }
    net.head = T::make(gen, prev, cfg.n_classes, cfg);
    return net;
}

/// Visits (name, span<double>, shape) for every parameter array in a fixed order.
template <class Net, class F>
void visit_params(Net& net, F&& fn) {
    using Update = std::remove_cvref_t<decltype(net.head)>;
    using T = update_traits<Update>;
    for (std::size_t l = 0; l < net.updates.size(); ++l) {
        const std::string p = "layers." + std::to_string(l);
        T::visit(net.updates[l], p + "." + T::tag, fn);
        fn(p + ".norm.gamma", std::span(net.norms[l].gamma), std::vector<std::size_t>{net.norms[l].dim()});
        fn(p + ".norm.beta", std::span(net.norms[l].beta), std::vector<std::size_t>{net.norms[l].dim()});
    }
    T::visit(net.head, std::string("head.") + T::tag, fn);
}

/// Same order and names as visit_params, over a gradient object.
template <class Update, class G, class F>
void visit_grads(const graph_net<Update>& net, G& grads, F&& fn) {
    using T = update_traits<Update>;
    for (std::size_t l = 0; l < net.updates.size(); ++l) {
        const std::string p = "layers." + std::to_string(l);
        T::visit_grads(grads.updates[l], net.updates[l], p + "." + T::tag, fn);
        const std::size_t d = net.norms[l].dim();
        fn(p + ".norm.gamma", std::span(grads.norms[l].gamma), std::vector<std::size_t>{d});
        fn(p + ".norm.beta", std::span(grads.norms[l].beta), std::vector<std::size_t>{d});
    }
    T::visit_grads(grads.head, net.head, std::string("head.") + T::tag, fn);
}

template <class Net>
std::vector<param_view<double>> param_views(Net& net) {
    std::vector<param_view<double>> out;
    visit_params(net, [&](std::string name, std::span<double> s, std::vector<std::size_t> shape) {
        out.push_back({std::move(name), s, std::move(shape)});
    });
    return out;
}

template <class Update>
std::vector<param_view<double>> grad_views(const graph_net<Update>& net, graph_net_grads<Update>& g) {
    std::vector<param_view<double>> out;
    visit_grads(net, g, [&](std::string name, std::span<double> s, std::vector<std::size_t> shape) {
        out.push_back({std::move(name), s, std::move(shape)});
    });
    return out;
}

template <class Net>
std::size_t parameter_count(const Net& net) {
    std::size_t n = 0;
    visit_params(const_cast<Net&>(net), [&](const std::string&, auto s, const auto&) { n += s.size(); });
    return n;
}

template <class Update>
struct layer_cache {
    matrix h_in;      // features entering the layer
    matrix upd_in;    // aggregated message, or [h | m] with concat_self
    typename update_traits<Update>::cache upd;
    matrix pre_act;   // update output before ReLU (baseline only)
    layer_norm_cache norm;
};

template <class Update>
struct forward_cache {
    const norm_adjacency* adj = nullptr;
    std::size_t n_nodes = 0;
    std::vector<layer_cache<Update>> layers;
    matrix head_in;
    typename update_traits<Update>::cache head;
};

template <class Update, class T = double>
struct forward_output {
    basic_matrix<T> logits;
    /// Post-LayerNorm output of every hidden layer.
    std::vector<basic_matrix<T>> features;
    /// Filled only for the double-precision instantiation.
    forward_cache<Update> cache;
};

namespace detail {

template <class T>
basic_matrix<T> hconcat(const basic_matrix<T>& a, const basic_matrix<T>& b) {
    basic_matrix<T> out(a.rows(), a.cols() + b.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        std::copy(a.row(r).begin(), a.row(r).end(), out.row(r).begin());
        std::copy(b.row(r).begin(), b.row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(a.cols()));
    }
    return out;
}

inline std::pair<matrix, matrix> hsplit(const matrix& x, std::size_t left) {
    matrix a(x.rows(), left), b(x.rows(), x.cols() - left);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto row = x.row(r);
        std::copy(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(left), a.row(r).begin());
        std::copy(row.begin() + static_cast<std::ptrdiff_t>(left), row.end(), b.row(r).begin());
    }
    return {std::move(a), std::move(b)};
}

inline void add_into(matrix& dst, const matrix& src) {
    auto d = dst.flat();
    const auto s = src.flat();
    for (std::size_t k = 0; k < d.size(); ++k) d[k] += s[k];
}

}  // namespace detail

/// Runs the full network over all nodes. The adjacency must outlive the cache.
/// Instantiating with T = long double evaluates the same computation in
/// extended precision and records no cache.
template <class Update, class T = double>
forward_output<Update, T> forward_pass(const graph_net<Update>& net, const norm_adjacency& adj,
                                       const basic_matrix<T>& x) {
    using U = update_traits<Update>;
    constexpr bool record = std::is_same_v<T, double>;
    if (x.cols() != net.config.d_in)
        throw input_error("forward_pass: input has " + std::to_string(x.cols()) +
                          " features, model expects " + std::to_string(net.config.d_in));
    if (x.rows() != adj.n_nodes) throw input_error("forward_pass: input rows do not match adjacency");
    forward_output<Update, T> out;
    out.cache.adj = &adj;
    out.cache.n_nodes = x.rows();
    basic_matrix<T> h = x;
    for (std::size_t l = 0; l < net.updates.size(); ++l) {
        layer_cache<Update> lc;
        basic_matrix<T> m = aggregate(adj, h);
        basic_matrix<T> in = net.config.concat_self ? detail::hconcat(h, m) : std::move(m);
        basic_matrix<T> u = U::apply(net.updates[l], in, record ? &lc.upd : nullptr);
        if constexpr (U::hidden_relu) {
            basic_matrix<T> a = relu_forward(u);
            if constexpr (record) lc.pre_act = std::move(u);
            u = std::move(a);
        }
        basic_matrix<T> y = layernorm_apply(net.norms[l], u, record ? &lc.norm : nullptr);
        out.features.push_back(y);
        if constexpr (record) {
            lc.h_in = std::move(h);
            lc.upd_in = std::move(in);
            out.cache.layers.push_back(std::move(lc));
        }
        h = std::move(y);
    }
    out.logits = U::apply(net.head, h, record ? &out.cache.head : nullptr);
    if constexpr (record) out.cache.head_in = std::move(h);
    return out;
}

template <class Update>
graph_net_grads<Update> backward_pass(const graph_net<Update>& net, const forward_cache<Update>& cache,
                                      const matrix& dlogits) {
    using T = update_traits<Update>;
    if (cache.adj == nullptr || cache.layers.size() != net.updates.size())
        throw input_error("backward_pass: cache does not come from this network");
    if (dlogits.rows() != cache.n_nodes || dlogits.cols() != net.config.n_classes)
        throw input_error("backward_pass: logit gradient shape does not match cache");
    graph_net_grads<Update> g;
    g.updates.resize(net.updates.size());
    g.norms.resize(net.updates.size());
    auto [dh, hg] = T::backward(net.head, cache.head, cache.head_in, dlogits);
    g.head = std::move(hg);
    for (std::size_t l = net.updates.size(); l-- > 0;) {
        const auto& lc = cache.layers[l];
        auto [du, ng] = layernorm_backward(net.norms[l], lc.norm, dh);
        g.norms[l] = std::move(ng);
        if constexpr (T::hidden_relu) du = relu_backward(lc.pre_act, du);
        auto [din, ug] = T::backward(net.updates[l], lc.upd, lc.upd_in, du);
        g.updates[l] = std::move(ug);
        if (l == 0) break;  // no gradient needed for the raw input features
        if (net.config.concat_self) {
            auto [dself, dmsg] = detail::hsplit(din, lc.h_in.cols());
            dh = aggregate(*cache.adj, dmsg);
            detail::add_into(dh, dself);
        } else {
            dh = aggregate(*cache.adj, din);
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Checkpoints

template <class Update>
nlohmann::json checkpoint_to_json(const graph_net<Update>& net) {
    nlohmann::json j;
    j["format"] = "graphkan-checkpoint";
    j["version"] = 1;
    j["config"] = net.config;
    auto& params = j["params"] = nlohmann::json::object();
    visit_params(const_cast<graph_net<Update>&>(net),
                 [&](const std::string& name, std::span<double> s, const std::vector<std::size_t>& shape) {
                     params[name] = {{"shape", shape}, {"data", std::vector<double>(s.begin(), s.end())}};
                 });
    return j;
}

template <class Update>
graph_net<Update> checkpoint_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "graphkan-checkpoint") throw input_error("not a graphkan checkpoint");
    const auto cfg = j.at("config").get<model_config>();
    const model_kind expected = std::is_same_v<Update, kan_layer> ? model_kind::graphkan : model_kind::gcn;
    if (cfg.kind != expected) throw input_error("checkpoint holds a " + to_string(cfg.kind) + " model");
    rng gen(0);
    auto net = make_net<Update>(gen, cfg);
    const auto& params = j.at("params");
    visit_params(net, [&](const std::string& name, std::span<double> s, const std::vector<std::size_t>& shape) {
        if (!params.contains(name)) throw input_error("checkpoint: missing parameter " + name);
        const auto& p = params.at(name);
        if (p.at("shape").get<std::vector<std::size_t>>() != shape)
            throw input_error("checkpoint: shape mismatch for " + name);
        const auto data = p.at("data").get<std::vector<double>>();
        if (data.size() != s.size()) throw input_error("checkpoint: size mismatch for " + name);
        std::copy(data.begin(), data.end(), s.begin());
    });
    return net;
}

}  // namespace graphkan
