#pragma once

#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "graph.hpp"

namespace graphkan {

/// Malformed graph or config file. The message names the line or field.
class parse_error : public input_error {
public:
    using input_error::input_error;
};

class io_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

/// Non-negative integer that fits in an int. Documents built in memory hold
/// signed numbers while parsed text holds unsigned ones.
inline bool is_index(const nlohmann::json& v) {
    return v.is_number_integer() && v.get<std::int64_t>() >= 0 &&
           v.get<std::int64_t>() <= std::numeric_limits<int>::max();
}

inline std::size_t line_of_offset(const std::string& text, std::size_t offset) {
    offset = std::min(offset, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

inline nlohmann::json parse_json_text(const std::string& text, const std::string& source) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw parse_error(source + ":" + std::to_string(line_of_offset(text, e.byte)) +
                          ": invalid JSON: " + e.what());
    }
}

inline const nlohmann::json& field(const nlohmann::json& j, const char* key, const std::string& source) {
    if (!j.is_object()) throw parse_error(source + ": top level must be a JSON object");
    const auto it = j.find(key);
    if (it == j.end()) throw parse_error(source + ": missing field \"" + key + "\"");
    return *it;
}

inline std::vector<char> read_mask(const nlohmann::json& j, const char* key, std::size_t n,
                                   const std::string& source) {
    const auto& arr = field(j, key, source);
    if (!arr.is_array() || arr.size() != n)
        throw parse_error(source + ": field \"" + key + "\" must be an array of " + std::to_string(n) + " booleans");
    std::vector<char> mask(n);
    for (std::size_t v = 0; v < n; ++v) {
        if (!arr[v].is_boolean())
            throw parse_error(source + ": " + key + "[" + std::to_string(v) + "] is not a boolean");
        mask[v] = arr[v].get<bool>() ? 1 : 0;
    }
    return mask;
}

}  // namespace detail

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path);
    out << text;
    if (!out) throw io_error("write failed for " + path);
}

inline nlohmann::json graph_to_json(const graph& g) {
    nlohmann::json j;
    j["n_nodes"] = g.n_nodes;
    j["d_in"] = g.d_in();
    auto& feats = j["features"] = nlohmann::json::array();
    for (std::size_t v = 0; v < g.n_nodes; ++v) {
        const auto r = g.features.row(v);
        feats.push_back(std::vector<double>(r.begin(), r.end()));
    }
    auto& edges = j["edges"] = nlohmann::json::array();
    for (const auto& [u, w] : g.edges) edges.push_back({u, w});
    auto& labels = j["labels"] = nlohmann::json::array();
    for (int l : g.labels) labels.push_back(l == unlabeled ? nlohmann::json(nullptr) : nlohmann::json(l));
    auto mask_json = [](const std::vector<char>& m) {
        auto a = nlohmann::json::array();
        for (char c : m) a.push_back(c != 0);
        return a;
    };
    j["train_mask"] = mask_json(g.train_mask);
    j["val_mask"] = mask_json(g.val_mask);
    j["test_mask"] = mask_json(g.test_mask);
    j["meta"] = g.meta;
    return j;
}

/// Parses and validates a graph document. `source` names the input in errors.
inline graph graph_from_json(const nlohmann::json& j, const std::string& source = "<graph>") {
    using detail::field;
    graph g;
    const auto& nn = field(j, "n_nodes", source);
    if (!detail::is_index(nn)) throw parse_error(source + ": n_nodes must be a non-negative integer");
    g.n_nodes = nn.get<std::size_t>();
    const auto& dd = field(j, "d_in", source);
    if (!detail::is_index(dd)) throw parse_error(source + ": d_in must be a non-negative integer");
    const auto d = dd.get<std::size_t>();

    const auto& feats = field(j, "features", source);
    if (!feats.is_array() || feats.size() != g.n_nodes)
        throw parse_error(source + ": features must be an array of n_nodes rows");
    g.features = matrix(g.n_nodes, d);
    for (std::size_t v = 0; v < g.n_nodes; ++v) {
        const auto& row = feats[v];
        if (!row.is_array() || row.size() != d)
            throw parse_error(source + ": features[" + std::to_string(v) + "] must have d_in=" +
                              std::to_string(d) + " numbers");
        for (std::size_t k = 0; k < d; ++k) {
            if (!row[k].is_number())
                throw parse_error(source + ": features[" + std::to_string(v) + "][" + std::to_string(k) + "] is not a number");
            g.features(v, k) = row[k].get<double>();
        }
    }

    const auto& edges = field(j, "edges", source);
    if (!edges.is_array()) throw parse_error(source + ": edges must be an array");
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const auto& pair = edges[e];
        if (!pair.is_array() || pair.size() != 2 || !detail::is_index(pair[0]) || !detail::is_index(pair[1]))
            throw parse_error(source + ": edges[" + std::to_string(e) + "] must be a pair of node ids");
        const auto u = pair[0].get<std::size_t>(), w = pair[1].get<std::size_t>();
        if (u >= g.n_nodes || w >= g.n_nodes)
            throw parse_error(source + ": edges[" + std::to_string(e) + "] = [" + std::to_string(u) + ", " +
                              std::to_string(w) + "] has endpoint >= n_nodes " + std::to_string(g.n_nodes));
        if (u == w) throw parse_error(source + ": edges[" + std::to_string(e) + "] is a self-edge");
        g.edges.emplace_back(std::min(u, w), std::max(u, w));
    }

    const auto& labels = field(j, "labels", source);
    if (!labels.is_array() || labels.size() != g.n_nodes)
        throw parse_error(source + ": labels must be an array of n_nodes entries");
    g.labels.resize(g.n_nodes);
    for (std::size_t v = 0; v < g.n_nodes; ++v) {
        if (labels[v].is_null()) {
            g.labels[v] = unlabeled;
        } else if (detail::is_index(labels[v])) {
            g.labels[v] = labels[v].get<int>();
        } else {
            throw parse_error(source + ": labels[" + std::to_string(v) + "] must be a non-negative integer or null");
        }
    }
    g.train_mask = detail::read_mask(j, "train_mask", g.n_nodes, source);
    g.val_mask = detail::read_mask(j, "val_mask", g.n_nodes, source);
    g.test_mask = detail::read_mask(j, "test_mask", g.n_nodes, source);
    if (j.contains("meta")) g.meta = j["meta"];

    try {
        validate(g);
    } catch (const input_error& e) {
        throw parse_error(source + ": " + e.what());
    }
    return g;
}

inline graph read_graph(const std::string& path) {
    const std::string text = read_text_file(path);
    return graph_from_json(detail::parse_json_text(text, path), path);
}

inline void write_graph(const graph& g, const std::string& path) {
    validate(g);
    write_text_file(path, graph_to_json(g).dump() + "\n");
}

}  // namespace graphkan
