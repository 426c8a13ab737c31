#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iostream>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "numerics.hpp"

namespace graphkan {

inline constexpr int unlabeled = -1;

/// Undirected node-classification graph.
///
/// Edges are stored once each as (u, w) with u < w. Labels of test nodes are
/// kept for scoring; training code reads labels only through the train and
/// validation masks.
struct graph {
    std::size_t n_nodes = 0;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    matrix features;
    std::vector<int> labels;
    std::vector<char> train_mask;
    std::vector<char> val_mask;
    std::vector<char> test_mask;
    nlohmann::json meta = nlohmann::json::object();

    std::size_t d_in() const noexcept { return features.cols(); }

    int num_classes() const noexcept {
        int c = 0;
        for (int l : labels) c = std::max(c, l + 1);
        return c;
    }

    friend bool operator==(const graph&, const graph&) = default;
};

inline std::size_t count(const std::vector<char>& mask) {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), char{1}));
}

/// Throws input_error describing the first violated invariant.
inline void validate(const graph& g) {
    const std::size_t n = g.n_nodes;
    if (g.features.rows() != n)
        throw input_error("graph: features have " + std::to_string(g.features.rows()) +
                          " rows, expected " + std::to_string(n));
    if (!g.features.all_finite()) throw input_error("graph: non-finite feature value");
    if (g.labels.size() != n || g.train_mask.size() != n || g.val_mask.size() != n ||
        g.test_mask.size() != n)
        throw input_error("graph: labels and masks must have one entry per node");
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        const auto [u, w] = g.edges[e];
        if (u >= n || w >= n)
            throw input_error("graph: edge " + std::to_string(e) + " (" + std::to_string(u) + ", " +
                              std::to_string(w) + ") has endpoint >= n_nodes " + std::to_string(n));
        if (u == w) throw input_error("graph: edge " + std::to_string(e) + " is a self-edge");
        if (u > w)
            throw input_error("graph: edge " + std::to_string(e) + " is not stored as (min, max)");
    }
    auto sorted = g.edges;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw input_error("graph: duplicate edge");
    for (std::size_t v = 0; v < n; ++v) {
        const int masks = g.train_mask[v] + g.val_mask[v] + g.test_mask[v];
        if (masks > 1) throw input_error("graph: node " + std::to_string(v) + " is in more than one mask");
        if ((g.train_mask[v] || g.val_mask[v]) && g.labels[v] == unlabeled)
            throw input_error("graph: train/val node " + std::to_string(v) + " has no label");
        if (g.labels[v] < unlabeled)
            throw input_error("graph: node " + std::to_string(v) + " has a negative label");
    }
}

/// Deduplicates and orients an arbitrary edge list; drops self-edges.
inline std::vector<std::pair<std::size_t, std::size_t>> canonical_edges(
    std::vector<std::pair<std::size_t, std::size_t>> edges) {
    std::erase_if(edges, [](const auto& e) { return e.first == e.second; });
    for (auto& [u, w] : edges)
        if (u > w) std::swap(u, w);
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

/// Symmetric-normalized adjacency in compressed row form.
/// coeff(v, w) = (deg(v) deg(w))^{-1/2}, degrees counting the self-loop when present.
struct norm_adjacency {
    std::size_t n_nodes = 0;
    bool self_loops = true;
    std::vector<std::size_t> offsets;  // n_nodes + 1
    std::vector<std::size_t> neighbors;
    std::vector<double> coeffs;
    std::vector<double> degree;

    /// Coefficient for (v, w), or 0 when not adjacent.
    double coeff(std::size_t v, std::size_t w) const {
        const auto begin = neighbors.begin() + static_cast<std::ptrdiff_t>(offsets[v]);
        const auto end = neighbors.begin() + static_cast<std::ptrdiff_t>(offsets[v + 1]);
        const auto it = std::lower_bound(begin, end, w);
        if (it == end || *it != w) return 0.0;
        return coeffs[static_cast<std::size_t>(it - neighbors.begin())];
    }
};

inline norm_adjacency normalize(const graph& g, bool self_loops) {
    const std::size_t n = g.n_nodes;
    std::vector<std::vector<std::size_t>> adj(n);
    for (const auto& [u, w] : g.edges) {
        if (u >= n || w >= n) throw input_error("normalize: edge endpoint out of range");
        adj[u].push_back(w);
        adj[w].push_back(u);
    }
    norm_adjacency a;
    a.n_nodes = n;
    a.self_loops = self_loops;
    a.degree.resize(n);
    for (std::size_t v = 0; v < n; ++v) {
        if (self_loops) adj[v].push_back(v);
        std::sort(adj[v].begin(), adj[v].end());
        a.degree[v] = static_cast<double>(adj[v].size());
        if (adj[v].empty())
            throw input_error("normalize: node " + std::to_string(v) +
                              " is isolated; its degree is zero without self-loops");
    }
    a.offsets.resize(n + 1, 0);
    for (std::size_t v = 0; v < n; ++v) {
        a.offsets[v + 1] = a.offsets[v] + adj[v].size();
        for (std::size_t w : adj[v]) {
            a.neighbors.push_back(w);
            a.coeffs.push_back(1.0 / std::sqrt(a.degree[v] * a.degree[w]));
        }
    }
    return a;
}

/// M[v] = sum over w in N(v) of coeff(v, w) * H[w]. Because the coefficients
/// are symmetric this is also its own adjoint, so the backward pass of an
/// aggregation is another call to aggregate.
template <class T>
basic_matrix<T> aggregate(const norm_adjacency& adj, const basic_matrix<T>& h) {
    if (h.rows() != adj.n_nodes)
        throw input_error("aggregate: feature rows " + std::to_string(h.rows()) +
                          " != n_nodes " + std::to_string(adj.n_nodes));
    const std::size_t d = h.cols();
    basic_matrix<T> out(h.rows(), d);
    for (std::size_t v = 0; v < adj.n_nodes; ++v) {
        T* o = out.row(v).data();
        for (std::size_t e = adj.offsets[v]; e < adj.offsets[v + 1]; ++e) {
            const T c = adj.coeffs[e];
            const T* src = h.row(adj.neighbors[e]).data();
            for (std::size_t k = 0; k < d; ++k) o[k] += c * src[k];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic basic graphs

inline constexpr int bg_num_classes = 6;
inline constexpr std::size_t bg_label0_count = 200;
inline constexpr std::size_t bg_unlabeled_count = 700;

/// Labeled nodes per class for labels 1..5 of basic graphs 1..4.
inline std::size_t bg_minority_count(int graph_id) {
    switch (graph_id) {
        case 1: return 100;
        case 2: return 80;
        case 3: return 60;
        case 4: return 40;
        default: throw input_error("graph_id must be in 1..4, got " + std::to_string(graph_id));
    }
}

/// Node total for a basic graph: label-0 budget + five minority budgets + test nodes.
inline std::size_t bg_node_count(int graph_id) {
    return bg_label0_count + 5 * bg_minority_count(graph_id) + bg_unlabeled_count;
}

struct bg_config {
    int graph_id = 1;
    std::size_t d_in = 64;
    /// Scales how far apart the class signal signatures are. 1 is the default regime.
    double class_separation = 1.0;
    std::size_t knn_k = 8;
    /// Standard deviation of additive Gaussian sample noise.
    double noise = 0.6;

    friend bool operator==(const bg_config&, const bg_config&) = default;
};

inline void to_json(nlohmann::json& j, const bg_config& c) {
    j = nlohmann::json{{"graph_id", c.graph_id},
                       {"d_in", c.d_in},
                       {"class_separation", c.class_separation},
                       {"knn_k", c.knn_k},
                       {"noise", c.noise}};
}

namespace detail {

/// Signal signature of one class. Each class has its own tone; frequency
/// and amplitude both climb with the label, spaced by `separation`. Label 0
/// plays the role of the healthy machine state.
struct class_signature {
    double freq;
    double amp;
};

inline class_signature signature(int cls, double separation) {
    return {3.0 + separation * cls, 1.0 + 0.12 * separation * cls};
}

/// Class-independent low-frequency component shared by every node.
inline constexpr double drift_freq = 1.0;
inline constexpr double drift_amp = 0.5;

}  // namespace detail

/// Samples one 1-D signal window of class `cls` into `out`: the class tone
/// plus a shared drift tone, each at a random phase (windows start at random
/// times), an overall amplitude jitter and i.i.d. Gaussian sample noise.
inline void sample_signal(rng& gen, int cls, const bg_config& cfg, std::span<double> out) {
    const detail::class_signature s = detail::signature(cls, cfg.class_separation);
    const double phase = gen.uniform(0.0, 2.0 * std::numbers::pi);
    const double drift_phase = gen.uniform(0.0, 2.0 * std::numbers::pi);
    const double amp = s.amp * (1.0 + gen.normal(0.0, 0.1));
    const double d = static_cast<double>(out.size());
    for (std::size_t t = 0; t < out.size(); ++t) {
        const double tau = 2.0 * std::numbers::pi * static_cast<double>(t) / d;
        const double v = amp * std::sin(s.freq * tau + phase) +
                         detail::drift_amp * std::sin(detail::drift_freq * tau + drift_phase);
        out[t] = v + gen.normal(0.0, cfg.noise);
    }
}

/// k-nearest-neighbour edges in Euclidean feature space, symmetrized.
/// Ties are broken by lower node index.
inline std::vector<std::pair<std::size_t, std::size_t>> knn_edges(const matrix& x, std::size_t k) {
    const std::size_t n = x.rows();
    if (k == 0 || k >= n)
        throw input_error("knn: k must satisfy 1 <= k < n_nodes (k=" + std::to_string(k) +
                          ", n=" + std::to_string(n) + ")");
    std::vector<double> sq(n);
    for (std::size_t v = 0; v < n; ++v) {
        double s = 0.0;
        for (double f : x.row(v)) s += f * f;
        sq[v] = s;
    }
    const matrix gram = matmul_nt(x, x);
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    edges.reserve(n * k);
    std::vector<std::pair<double, std::size_t>> dist(n - 1);
    for (std::size_t v = 0; v < n; ++v) {
        std::size_t m = 0;
        for (std::size_t w = 0; w < n; ++w) {
            if (w == v) continue;
            dist[m++] = {sq[v] + sq[w] - 2.0 * gram(v, w), w};
        }
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
        for (std::size_t r = 0; r < k; ++r) edges.emplace_back(v, dist[r].second);
    }
    return canonical_edges(std::move(edges));
}

/// Generates basic graph `cfg.graph_id`: six classes, 200 labeled nodes of
/// label 0, the graph's per-class budget for labels 1..5, and 700 test nodes
/// spread evenly over the classes. Labeled nodes land in the train mask; use
/// split_validation to carve out the validation set.
inline graph gen_bg(const bg_config& cfg, std::uint64_t seed) {
    const std::size_t minority = bg_minority_count(cfg.graph_id);
    if (cfg.d_in == 0) throw input_error("gen_bg: d_in must be positive");
    if (!(cfg.noise >= 0.0) || !std::isfinite(cfg.noise)) throw input_error("gen_bg: noise must be >= 0");
    if (!(cfg.class_separation >= 0.0) || !std::isfinite(cfg.class_separation))
        throw input_error("gen_bg: class_separation must be >= 0");
    const std::size_t n = bg_node_count(cfg.graph_id);
    if (cfg.knn_k == 0 || cfg.knn_k >= n)
        throw input_error("gen_bg: knn_k must satisfy 1 <= knn_k < n_nodes (" + std::to_string(n) + ")");

    struct node_spec {
        int label;
        bool labeled;
    };
    std::vector<node_spec> specs;
    specs.reserve(n);
    for (std::size_t i = 0; i < bg_label0_count; ++i) specs.push_back({0, true});
    for (int c = 1; c < bg_num_classes; ++c)
        for (std::size_t i = 0; i < minority; ++i) specs.push_back({c, true});
    for (std::size_t i = 0; i < bg_unlabeled_count; ++i)
        specs.push_back({static_cast<int>(i % bg_num_classes), false});

    rng gen(seed);
    gen.shuffle(specs);

    graph g;
    g.n_nodes = n;
    g.features = matrix(n, cfg.d_in);
    g.labels.resize(n);
    g.train_mask.assign(n, 0);
    g.val_mask.assign(n, 0);
    g.test_mask.assign(n, 0);
    for (std::size_t v = 0; v < n; ++v) {
        sample_signal(gen, specs[v].label, cfg, g.features.row(v));
        g.labels[v] = specs[v].label;
        (specs[v].labeled ? g.train_mask : g.test_mask)[v] = 1;
    }
    g.edges = knn_edges(g.features, cfg.knn_k);
    g.meta = {{"generator", "bg"}, {"config", cfg}, {"seed", seed}};
    return g;
}

/// Moves floor(fraction * count) labeled nodes of each class from train to
/// validation, choosing them uniformly at random. Classes with fewer than two
/// labeled nodes stay entirely in train.
inline graph split_validation(graph g, double fraction, rng& gen, std::ostream* warn = &std::cerr) {
    if (!(fraction >= 0.0 && fraction < 1.0))
        throw input_error("split_validation: fraction must be in [0, 1)");
    if (count(g.val_mask) != 0) throw input_error("split_validation: graph already has a validation mask");
    const int classes = g.num_classes();
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(classes));
    for (std::size_t v = 0; v < g.n_nodes; ++v)
        if (g.train_mask[v] && g.labels[v] != unlabeled)
            by_class[static_cast<std::size_t>(g.labels[v])].push_back(v);
    if (std::all_of(by_class.begin(), by_class.end(), [](const auto& c) { return c.empty(); }))
        throw input_error("split_validation: graph has no labeled training nodes");
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& nodes = by_class[c];
        if (nodes.empty()) continue;
        if (nodes.size() < 2) {
            if (warn)
                *warn << "warning: class " << c << " has " << nodes.size()
                      << " labeled node; kept in train\n";
            continue;
        }
        gen.shuffle(nodes);
        const auto take = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(nodes.size()) + 1e-9));
        for (std::size_t r = 0; r < take; ++r) {
            g.train_mask[nodes[r]] = 0;
            g.val_mask[nodes[r]] = 1;
        }
    }
    return g;
}

}  // namespace graphkan
