#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "graph.hpp"
#include "layers.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "optim.hpp"

namespace graphkan {

struct train_config {
    std::size_t epochs = 200;
    double lr_max = 1e-2;
    double lr_min = 1e-4;
    std::uint64_t seed = 0;
    std::size_t trials = 10;
    double val_fraction = 0.2;
    std::vector<model_kind> models{model_kind::graphkan, model_kind::gcn};
    /// Architecture shared by both models; kind, d_in and n_classes are filled
    /// in per run from the model list and the graph.
    model_config model;
    bool self_loops = true;
    std::size_t workers = 1;

    void validate() const {
        if (!(lr_min > 0.0 && lr_min <= lr_max)) throw input_error("train: need 0 < lr_min <= lr_max");
        if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw input_error("train: val_fraction must be in [0, 1)");
        if (trials == 0) throw input_error("train: trials must be >= 1");
        if (models.empty()) throw input_error("train: no models requested");
        if (workers == 0) throw input_error("train: workers must be >= 1");
    }
};

inline double cosine_lr(const train_config& cfg, std::size_t t) {
    return cosine_lr(cfg.lr_max, cfg.lr_min, cfg.epochs, t);
}

struct trial_result {
    model_kind kind = model_kind::graphkan;
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    bool failed = false;
    std::string failure;
    std::size_t best_epoch = 0;
    double best_val_acc = 0.0;
    double test_acc = 0.0;
    double wall_time_seconds = 0.0;
    /// Training loss at the start of every epoch (epochs + 1 points).
    std::vector<double> loss_curve;
    std::vector<double> val_curve;
    /// Hidden-layer outputs for all nodes at the selected epoch.
    std::vector<matrix> features;
    std::vector<silhouette_result> silhouette;
};

/// Trains one model on a graph that already carries train/val/test masks.
///
/// Every epoch evaluates the current parameters, then takes one Adam step
/// with the cosine-annealed rate. Parameters after `epochs` steps are
/// evaluated as well, so epochs = 0 scores the untrained model. The reported
/// test accuracy and features come from the evaluated parameters with the
/// highest validation accuracy (earliest on ties). Wall time covers the loop
/// only, not graph loading or normalization.
template <class Update>
trial_result train_trial(const train_config& cfg, const model_config& mcfg, const graph& g,
                         const norm_adjacency& adj, std::uint64_t seed) {
    if (count(g.train_mask) == 0) throw input_error("train_trial: empty train mask");
    const bool has_val = count(g.val_mask) > 0;
    const bool has_test = count(g.test_mask) > 0;
    trial_result res;
    res.kind = mcfg.kind;
    res.seed = seed;
    rng gen(seed);
    auto net = make_net<Update>(gen, mcfg);
    adam_state opt;
    const auto params = param_views(net);

    const auto start = std::chrono::steady_clock::now();
    double best_val = -1.0;
    for (std::size_t epoch = 0; epoch <= cfg.epochs; ++epoch) {
        auto out = forward_pass(net, adj, g.features);
        const auto loss = cross_entropy(out.logits, g.labels, g.train_mask);
        res.loss_curve.push_back(loss.loss);
        if (!std::isfinite(loss.loss) || !out.logits.all_finite()) {
            res.failed = true;
            res.failure = "non-finite loss at epoch " + std::to_string(epoch);
            break;
        }
        // Without a validation set, selection falls back to training accuracy.
        const double val = accuracy(out.logits, g.labels, has_val ? g.val_mask : g.train_mask);
        res.val_curve.push_back(val);
        if (val > best_val) {
            best_val = val;
            res.best_epoch = epoch;
            res.best_val_acc = val;
            res.test_acc = has_test ? accuracy(out.logits, g.labels, g.test_mask) : 0.0;
            res.features = out.features;
        }
        if (epoch == cfg.epochs) break;
        auto grads = backward_pass(net, out.cache, loss.dlogits);
        try {
            adam_step(opt, params, grad_views(net, grads), cosine_lr(cfg, epoch));
        } catch (const numeric_error& e) {
            res.failed = true;
            res.failure = std::string(e.what()) + " at epoch " + std::to_string(epoch);
            break;
        }
    }
    const auto stop = std::chrono::steady_clock::now();
    res.wall_time_seconds = std::chrono::duration<double>(stop - start).count();
    if (!res.failed && has_test) {
        for (const auto& f : res.features) res.silhouette.push_back(silhouette(f, g.labels, g.test_mask));
    }
    return res;
}

/// Dispatches train_trial on the model kind.
inline trial_result train_trial(const train_config& cfg, const model_config& mcfg, const graph& g,
                                const norm_adjacency& adj, std::uint64_t seed) {
    if (mcfg.kind == model_kind::graphkan) return train_trial<kan_layer>(cfg, mcfg, g, adj, seed);
    return train_trial<dense_layer>(cfg, mcfg, g, adj, seed);
}

struct summary_stats {
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t n = 0;
};

/// Mean and population standard deviation.
inline summary_stats summarize(const std::vector<double>& xs) {
    summary_stats s;
    s.n = xs.size();
    if (xs.empty()) return s;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(var / static_cast<double>(xs.size()));
    return s;
}

struct model_report {
    model_kind kind = model_kind::graphkan;
    std::vector<trial_result> trials;

    std::vector<const trial_result*> succeeded() const {
        std::vector<const trial_result*> ok;
        for (const auto& t : trials)
            if (!t.failed) ok.push_back(&t);
        return ok;
    }
    template <class F>
    summary_stats stat(F&& field) const {
        std::vector<double> xs;
        for (const auto* t : succeeded()) xs.push_back(field(*t));
        return summarize(xs);
    }
    summary_stats test_acc() const { return stat([](const trial_result& t) { return t.test_acc; }); }
    summary_stats val_acc() const { return stat([](const trial_result& t) { return t.best_val_acc; }); }
    summary_stats wall_time() const { return stat([](const trial_result& t) { return t.wall_time_seconds; }); }
    summary_stats silhouette_layer(std::size_t l) const {
        return stat([l](const trial_result& t) { return l < t.silhouette.size() ? t.silhouette[l].score : 0.0; });
    }
    std::size_t failures() const { return trials.size() - succeeded().size(); }
};

struct experiment_report {
    train_config config;
    nlohmann::json graph_meta;
    std::size_t n_nodes = 0;
    std::size_t workers = 1;
    std::vector<model_report> models;

    const model_report& model(model_kind k) const {
        for (const auto& m : models)
            if (m.kind == k) return m;
        throw input_error("report has no " + to_string(k) + " rows");
    }
};

/// Seed of trial i. Both models share it, so trial i of each model sees the
/// same validation split.
inline std::uint64_t trial_seed(std::uint64_t base, std::size_t i) { return base + i; }

inline std::uint64_t split_stream(std::uint64_t trial_seed) { return rng::mix(trial_seed, 0x5b1); }
inline std::uint64_t init_stream(std::uint64_t trial_seed) { return rng::mix(trial_seed, 0x1417); }

inline model_config resolve_model_config(const train_config& cfg, model_kind kind, const graph& g) {
    model_config m = cfg.model;
    m.kind = kind;
    m.d_in = g.d_in();
    m.n_classes = static_cast<std::size_t>(std::max(2, g.num_classes()));
    return m;
}

/// Runs cfg.trials paired trials for every requested model. `g` carries the
/// labeled nodes in its train mask; each trial draws its own stratified
/// validation split. Trials run on cfg.workers threads; results are stored by
/// trial index, so summaries do not depend on scheduling.
inline experiment_report run_experiment(const train_config& cfg, const graph& g) {
    cfg.validate();
    validate(g);
    experiment_report rep;
    rep.config = cfg;
    rep.graph_meta = g.meta;
    rep.n_nodes = g.n_nodes;
    rep.workers = cfg.workers;
    const norm_adjacency adj = normalize(g, cfg.self_loops);

    std::vector<graph> splits;
    splits.reserve(cfg.trials);
    for (std::size_t i = 0; i < cfg.trials; ++i) {
        rng split_gen(split_stream(trial_seed(cfg.seed, i)));
        splits.push_back(split_validation(g, cfg.val_fraction, split_gen, i == 0 ? &std::cerr : nullptr));
    }

    for (model_kind k : cfg.models) {
        model_report mr;
        mr.kind = k;
        mr.trials.resize(cfg.trials);
        rep.models.push_back(std::move(mr));
    }
    const std::size_t jobs = cfg.trials * cfg.models.size();
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t job = next++; job < jobs; job = next++) {
            const std::size_t mi = job / cfg.trials, ti = job % cfg.trials;
            const model_kind kind = cfg.models[mi];
            const auto mcfg = resolve_model_config(cfg, kind, g);
            const std::uint64_t seed = trial_seed(cfg.seed, ti);
            trial_result r;
            try {
                r = train_trial(cfg, mcfg, splits[ti], adj, init_stream(seed));
            } catch (const std::exception& e) {
                r.failed = true;
                r.failure = e.what();
            }
            r.kind = kind;
            r.trial = ti;
            r.seed = seed;
            rep.models[mi].trials[ti] = std::move(r);
        }
    };
    if (cfg.workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < std::min(cfg.workers, jobs); ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json train_config_to_json(const train_config& c) {
    nlohmann::json models = nlohmann::json::array();
    for (auto k : c.models) models.push_back(to_string(k));
    const auto& m = c.model;
    return {{"epochs", c.epochs},
            {"lr_max", c.lr_max},
            {"lr_min", c.lr_min},
            {"seed", c.seed},
            {"trials", c.trials},
            {"val_fraction", c.val_fraction},
            {"models", models},
            {"widths", m.widths},
            {"spline", {{"degree", m.spline_degree}, {"grid", m.spline_intervals}, {"domain", {m.domain_lo, m.domain_hi}}}},
            {"base", to_string(m.base)},
            {"concat_self", m.concat_self},
            {"ln_eps", m.ln_eps},
            {"self_loops", c.self_loops},
            {"workers", c.workers}};
}

inline nlohmann::json stats_json(const summary_stats& s) {
    return {{"mean", s.mean}, {"std", s.stddev}, {"n", s.n}};
}

/// Deterministic part of a report: everything except wall-clock timing.
inline nlohmann::json report_to_json(const experiment_report& rep, bool with_timing) {
    nlohmann::json j;
    j["format"] = "graphkan-report";
    j["version"] = 1;
    j["config"] = train_config_to_json(rep.config);
    j["graph"] = {{"n_nodes", rep.n_nodes}, {"meta", rep.graph_meta}};
    j["workers"] = rep.workers;
    auto& models = j["models"] = nlohmann::json::array();
    for (const auto& mr : rep.models) {
        nlohmann::json mj;
        mj["model"] = to_string(mr.kind);
        mj["failed_trials"] = mr.failures();
        mj["test_acc"] = stats_json(mr.test_acc());
        mj["best_val_acc"] = stats_json(mr.val_acc());
        const std::size_t layers = rep.config.model.widths.size();
        auto& sil = mj["silhouette"] = nlohmann::json::array();
        for (std::size_t l = 0; l < layers; ++l) sil.push_back(stats_json(mr.silhouette_layer(l)));
        if (with_timing) mj["wall_time_seconds"] = stats_json(mr.wall_time());
        auto& trials = mj["trials"] = nlohmann::json::array();
        for (const auto& t : mr.trials) {
            nlohmann::json tj{{"trial", t.trial}, {"seed", t.seed}, {"failed", t.failed}};
            if (t.failed) tj["failure"] = t.failure;
            tj["best_epoch"] = t.best_epoch;
            tj["best_val_acc"] = t.best_val_acc;
            tj["test_acc"] = t.test_acc;
            tj["silhouette"] = t.silhouette;
            tj["loss_curve"] = t.loss_curve;
            if (with_timing) tj["wall_time_seconds"] = t.wall_time_seconds;
            trials.push_back(std::move(tj));
        }
        models.push_back(std::move(mj));
    }
    return j;
}

/// Wall-clock timings only, keyed like report_to_json.
inline nlohmann::json timing_to_json(const experiment_report& rep) {
    nlohmann::json j;
    j["workers"] = rep.workers;
    j["timed"] = "training loop only";
    auto& models = j["models"] = nlohmann::json::array();
    for (const auto& mr : rep.models) {
        std::vector<double> per_trial;
        for (const auto& t : mr.trials) per_trial.push_back(t.wall_time_seconds);
        models.push_back({{"model", to_string(mr.kind)},
                          {"wall_time_seconds", stats_json(mr.wall_time())},
                          {"per_trial", per_trial}});
    }
    return j;
}

inline std::string format_pm(const summary_stats& s, int precision = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << s.mean << " +- " << s.stddev;
    return os.str();
}

/// One row per model in aligned plain text.
inline std::string report_table(const experiment_report& rep, const std::string& graph_label = "") {
    std::ostringstream os;
    os << std::left << std::setw(8) << "graph" << std::setw(10) << "model" << std::setw(8) << "trials"
       << std::setw(22) << "test_acc" << std::setw(12) << "time_s" << "silhouette(layers)\n";
    for (const auto& mr : rep.models) {
        std::ostringstream sil;
        sil << std::fixed << std::setprecision(3);
        for (std::size_t l = 0; l < rep.config.model.widths.size(); ++l)
            sil << (l ? " " : "") << mr.silhouette_layer(l).mean;
        std::ostringstream t;
        t << std::fixed << std::setprecision(2) << mr.wall_time().mean;
        std::ostringstream trials;
        trials << mr.succeeded().size() << "/" << mr.trials.size();
        os << std::left << std::setw(8) << graph_label << std::setw(10) << to_string(mr.kind) << std::setw(8)
           << trials.str() << std::setw(22) << format_pm(mr.test_acc()) << std::setw(12) << t.str() << sil.str()
           << "\n";
    }
    return os.str();
}

}  // namespace graphkan
