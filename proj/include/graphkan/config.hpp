#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "graph.hpp"
#include "graph_io.hpp"
#include "train.hpp"

namespace graphkan {

/// Everything a run needs: generator settings, training protocol, model
/// architecture and where to write results. Every key is optional in the file
/// form; missing keys keep their defaults and unknown keys are rejected.
struct run_config {
    bg_config graph;
    std::uint64_t graph_seed = 0;
    train_config train;
    std::string out_dir = ".";
    /// Directory for per-trial feature CSVs; empty disables export.
    std::string features_dir;

    void validate() const {
        (void)bg_node_count(graph.graph_id);
        if (graph.d_in == 0) throw input_error("config: graph.d_in must be positive");
        if (!(graph.noise >= 0.0)) throw input_error("config: graph.noise must be >= 0");
        if (!(graph.class_separation >= 0.0)) throw input_error("config: graph.class_separation must be >= 0");
        train.validate();
        model_config m = train.model;
        m.d_in = graph.d_in;
        m.validate();
    }
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::string& where, const std::set<std::string>& known) {
    if (!j.is_object()) throw input_error("config: " + where + " must be an object");
    for (const auto& [key, value] : j.items())
        if (!known.count(key)) throw input_error("config: unknown key \"" + (where.empty() ? key : where + "." + key) + "\"");
}

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw input_error("config: " + where + "." + key + " has the wrong type");
    }
}

}  // namespace detail

inline run_config run_config_from_json(const nlohmann::json& j) {
    using detail::read_opt;
    run_config c;
    detail::reject_unknown(j, "", {"graph", "train", "model", "output"});
    if (j.contains("graph")) {
        const auto& g = j["graph"];
        detail::reject_unknown(g, "graph", {"graph_id", "d_in", "class_separation", "knn_k", "noise", "seed"});
        read_opt(g, "graph_id", c.graph.graph_id, "graph");
        read_opt(g, "d_in", c.graph.d_in, "graph");
        read_opt(g, "class_separation", c.graph.class_separation, "graph");
        read_opt(g, "knn_k", c.graph.knn_k, "graph");
        read_opt(g, "noise", c.graph.noise, "graph");
        read_opt(g, "seed", c.graph_seed, "graph");
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        detail::reject_unknown(t, "train", {"epochs", "lr_max", "lr_min", "seed", "trials", "val_fraction", "models",
                                            "self_loops", "workers"});
        read_opt(t, "epochs", c.train.epochs, "train");
        read_opt(t, "lr_max", c.train.lr_max, "train");
        read_opt(t, "lr_min", c.train.lr_min, "train");
        read_opt(t, "seed", c.train.seed, "train");
        read_opt(t, "trials", c.train.trials, "train");
        read_opt(t, "val_fraction", c.train.val_fraction, "train");
        read_opt(t, "self_loops", c.train.self_loops, "train");
        read_opt(t, "workers", c.train.workers, "train");
        if (t.contains("models")) {
            std::vector<std::string> names;
            read_opt(t, "models", names, "train");
            c.train.models.clear();
            for (const auto& n : names) c.train.models.push_back(parse_model_kind(n));
        }
    }
    if (j.contains("model")) {
        const auto& m = j["model"];
        auto& mc = c.train.model;
        detail::reject_unknown(m, "model", {"widths", "spline", "base", "concat_self", "ln_eps"});
        read_opt(m, "widths", mc.widths, "model");
        read_opt(m, "concat_self", mc.concat_self, "model");
        read_opt(m, "ln_eps", mc.ln_eps, "model");
        if (m.contains("base")) {
            std::string b;
            read_opt(m, "base", b, "model");
            mc.base = parse_kan_base(b);
        }
        if (m.contains("spline")) {
            const auto& s = m["spline"];
            detail::reject_unknown(s, "model.spline", {"degree", "grid", "domain"});
            read_opt(s, "degree", mc.spline_degree, "model.spline");
            read_opt(s, "grid", mc.spline_intervals, "model.spline");
            if (s.contains("domain")) {
                std::vector<double> dom;
                read_opt(s, "domain", dom, "model.spline");
                if (dom.size() != 2) throw input_error("config: model.spline.domain must be [lo, hi]");
                mc.domain_lo = dom[0];
                mc.domain_hi = dom[1];
            }
        }
    }
    if (j.contains("output")) {
        const auto& o = j["output"];
        detail::reject_unknown(o, "output", {"dir", "features_dir"});
        read_opt(o, "dir", c.out_dir, "output");
        read_opt(o, "features_dir", c.features_dir, "output");
    }
    return c;
}

inline nlohmann::json run_config_to_json(const run_config& c) {
    const auto t = train_config_to_json(c.train);
    nlohmann::json train{{"epochs", t["epochs"]},     {"lr_max", t["lr_max"]},
                         {"lr_min", t["lr_min"]},     {"seed", t["seed"]},
                         {"trials", t["trials"]},     {"val_fraction", t["val_fraction"]},
                         {"models", t["models"]},     {"self_loops", t["self_loops"]},
                         {"workers", t["workers"]}};
    nlohmann::json model{{"widths", t["widths"]},
                         {"spline", t["spline"]},
                         {"base", t["base"]},
                         {"concat_self", t["concat_self"]},
                         {"ln_eps", t["ln_eps"]}};
    nlohmann::json graph = c.graph;
    graph["seed"] = c.graph_seed;
    return {{"graph", graph},
            {"train", train},
            {"model", model},
            {"output", {{"dir", c.out_dir}, {"features_dir", c.features_dir}}}};
}

inline run_config read_run_config(const std::string& path) {
    const std::string text = read_text_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw parse_error(path + ": " + e.what());
    }
    return run_config_from_json(j);
}

/// Resolves a relative output path against `dir`.
inline std::string output_path(const std::string& dir, const std::string& path) {
    const std::filesystem::path p(path);
    if (p.is_absolute() || dir.empty()) return p.string();
    return (std::filesystem::path(dir) / p).string();
}

}  // namespace graphkan
