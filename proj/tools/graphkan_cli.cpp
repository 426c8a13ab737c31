// Command-line driver: generate graphs, train and compare models, check gradients.
//
// Exit codes: 0 success, 1 runtime or data failure, 2 usage error.

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <graphkan/config.hpp>
#include <graphkan/gradcheck.hpp>
#include <graphkan/graph.hpp>
#include <graphkan/graph_io.hpp>
#include <graphkan/metrics.hpp>
#include <graphkan/train.hpp>

namespace gk = graphkan;
namespace fs = std::filesystem;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_runtime = 1;
constexpr int exit_usage = 2;

struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Flags shared by train and compare; unset ones leave the config alone.
struct train_flags {
    std::string config;
    std::optional<std::size_t> trials, epochs, workers;
    std::optional<std::uint64_t> seed;
    std::vector<std::size_t> widths;
    std::string features_dir;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--config", config, "JSON run config; flags override it");
        cmd->add_option("--trials", trials, "Number of paired trials");
        cmd->add_option("--seed", seed, "Base seed; trial i uses seed + i");
        cmd->add_option("--epochs", epochs, "Training epochs");
        cmd->add_option("--workers", workers, "Concurrent trials");
        cmd->add_option("--widths", widths, "Hidden widths, e.g. --widths 64 32 16");
    }
};

/// Loads the config file (if any), applies flag overrides and validates.
/// Unreadable files are runtime failures; bad contents are usage errors.
gk::run_config build_config(const train_flags& f) {
    gk::run_config c;
    if (!f.config.empty()) {
        try {
            c = gk::read_run_config(f.config);
        } catch (const gk::io_error&) {
            throw;
        } catch (const std::exception& e) {
            throw usage_error(e.what());
        }
    }
    if (f.trials) c.train.trials = *f.trials;
    if (f.epochs) c.train.epochs = *f.epochs;
    if (f.workers) c.train.workers = *f.workers;
    if (f.seed) c.train.seed = *f.seed;
    if (!f.widths.empty()) c.train.model.widths = f.widths;
    if (!f.features_dir.empty()) c.features_dir = f.features_dir;
    if (const char* env = std::getenv("GRAPHKAN_OUT_DIR"); env && *env) c.out_dir = env;
    try {
        c.validate();
    } catch (const std::exception& e) {
        throw usage_error(e.what());
    }
    return c;
}

void ensure_parent(const std::string& path) {
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
}

void write_json(const std::string& path, const nlohmann::json& j) {
    ensure_parent(path);
    gk::write_text_file(path, j.dump(2) + "\n");
}

std::string graph_label(const gk::graph& g, const std::string& path) {
    if (g.meta.contains("config") && g.meta["config"].contains("graph_id"))
        return "BG" + std::to_string(g.meta["config"]["graph_id"].get<int>());
    return fs::path(path).stem().string();
}

void export_trial_features(const gk::experiment_report& rep, const gk::graph& g, const std::string& dir) {
    fs::create_directories(dir);
    for (const auto& mr : rep.models)
        for (const auto& t : mr.trials)
            for (std::size_t l = 0; l < t.features.size(); ++l) {
                const std::string name = gk::to_string(mr.kind) + "_trial" + std::to_string(t.trial) + "_layer" +
                                         std::to_string(l + 1) + ".csv";
                gk::export_features(t.features[l], g.labels, g.test_mask, (fs::path(dir) / name).string());
            }
}

void print_failures(const gk::experiment_report& rep) {
    for (const auto& mr : rep.models)
        for (const auto& t : mr.trials)
            if (t.failed)
                std::cerr << "warning: " << gk::to_string(mr.kind) << " trial " << t.trial << " failed: " << t.failure
                          << "\n";
}

// ---------------------------------------------------------------------------

struct gen_flags {
    int graph_id = 0;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<std::size_t> d_in, knn_k;
    std::optional<double> separation, noise;
    std::string config;
};

int cmd_gen(const gen_flags& f) {
    gk::run_config c;
    if (!f.config.empty()) {
        try {
            c = gk::read_run_config(f.config);
        } catch (const gk::io_error&) {
            throw;
        } catch (const std::exception& e) {
            throw usage_error(e.what());
        }
    }
    gk::bg_config bg = c.graph;
    bg.graph_id = f.graph_id;
    if (f.d_in) bg.d_in = *f.d_in;
    if (f.knn_k) bg.knn_k = *f.knn_k;
    if (f.separation) bg.class_separation = *f.separation;
    if (f.noise) bg.noise = *f.noise;
    gk::graph g;
    try {
        g = gk::gen_bg(bg, f.seed.value_or(c.graph_seed));
    } catch (const gk::input_error& e) {
        throw usage_error(e.what());
    }
    std::string out = f.out;
    if (const char* env = std::getenv("GRAPHKAN_OUT_DIR"); env && *env) out = gk::output_path(env, out);
    ensure_parent(out);
    gk::write_graph(g, out);

    std::vector<std::size_t> labeled(gk::bg_num_classes, 0);
    for (std::size_t v = 0; v < g.n_nodes; ++v)
        if (g.train_mask[v]) ++labeled[static_cast<std::size_t>(g.labels[v])];
    std::cout << "BG" << bg.graph_id << ": " << g.n_nodes << " nodes, " << g.edges.size() << " edges, d_in "
              << g.d_in() << "\nlabeled:";
    for (std::size_t c2 = 0; c2 < labeled.size(); ++c2) std::cout << " label" << c2 << "=" << labeled[c2];
    std::cout << " (total " << gk::count(g.train_mask) << ")\nunlabeled test nodes: " << gk::count(g.test_mask)
              << "\nwrote " << out << "\n";
    return exit_ok;
}

int cmd_train(const train_flags& f, const std::string& graph_path, const std::string& model,
              const std::string& out_report) {
    gk::run_config c = build_config(f);
    if (model != "both") c.train.models = {gk::parse_model_kind(model)};
    const gk::graph g = gk::read_graph(graph_path);

    const gk::experiment_report rep = gk::run_experiment(c.train, g);
    print_failures(rep);

    const std::string report = gk::output_path(c.out_dir, out_report);
    nlohmann::json j = gk::report_to_json(rep, false);
    j["run_config"] = gk::run_config_to_json(c);
    j["graph"]["source"] = fs::path(graph_path).filename().string();
    write_json(report, j);
    write_json(report + ".timing.json", gk::timing_to_json(rep));
    const std::string table = gk::report_table(rep, graph_label(g, graph_path));
    gk::write_text_file(report + ".table.txt", table);
    if (!c.features_dir.empty()) export_trial_features(rep, g, gk::output_path(c.out_dir, c.features_dir));
    std::cout << table << "wrote " << report << "\n";

    for (const auto& mr : rep.models)
        if (!mr.succeeded().empty()) return exit_ok;
    std::cerr << "error: every trial failed\n";
    return exit_runtime;
}

int cmd_compare(const train_flags& f, const std::vector<std::string>& graphs, const std::string& out_path) {
    gk::run_config c = build_config(f);
    c.train.models = {gk::model_kind::graphkan, gk::model_kind::gcn};
    nlohmann::json j;
    j["format"] = "graphkan-compare";
    j["version"] = 1;
    j["run_config"] = gk::run_config_to_json(c);
    auto& rows = j["graphs"] = nlohmann::json::array();
    std::ostringstream table;
    bool header = true;
    bool any_failed = false;
    for (const auto& path : graphs) {
        nlohmann::json row{{"source", path}};
        try {
            const gk::graph g = gk::read_graph(path);
            const std::string label = graph_label(g, path);
            row["label"] = label;
            const gk::experiment_report rep = gk::run_experiment(c.train, g);
            print_failures(rep);
            row["report"] = gk::report_to_json(rep, true);
            std::string t = gk::report_table(rep, label);
            if (!header) t = t.substr(t.find('\n') + 1);
            header = false;
            table << t;
            std::cerr << "finished " << label << "\n";
        } catch (const std::exception& e) {
            any_failed = true;
            row["error"] = e.what();
            std::cerr << "error: " << path << ": " << e.what() << "\n";
        }
        rows.push_back(std::move(row));
    }
    const std::string out = gk::output_path(c.out_dir, out_path);
    write_json(out, j);
    gk::write_text_file(out + ".table.txt", table.str());
    std::cout << table.str() << "wrote " << out << "\n";
    return any_failed ? exit_runtime : exit_ok;
}

int cmd_gradcheck(double tolerance, std::uint64_t seed, const std::vector<std::size_t>& sizes) {
    if (!(tolerance > 0.0)) throw usage_error("--tolerance must be positive");
    gk::gradcheck_options opt;
    opt.seed = seed;
    if (!sizes.empty()) opt.widths = sizes;
    const auto entries = gk::gradcheck_all(opt);
    std::cout << std::left << std::setw(16) << "component" << std::setw(28) << "parameter" << std::setw(8) << "count"
              << "worst_rel_err\n";
    bool ok = true;
    for (const auto& e : entries) {
        const bool pass = e.worst_rel_err < tolerance;
        ok = ok && pass;
        std::ostringstream err;
        err << std::scientific << std::setprecision(3) << e.worst_rel_err;
        std::cout << std::left << std::setw(16) << e.component << std::setw(28) << e.param << std::setw(8) << e.count
                  << err.str() << (pass ? "" : "  FAIL") << "\n";
    }
    if (!ok) {
        for (const auto& e : entries)
            if (!(e.worst_rel_err < tolerance))
                std::cerr << "gradcheck failed: " << e.component << " " << e.param << " (index " << e.worst_index
                          << ", rel err " << e.worst_rel_err << ")\n";
        return exit_runtime;
    }
    std::cout << "all " << entries.size() << " checks below " << tolerance << "\n";
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GraphKAN: graph networks with spline-based KAN updates, plus a GCN baseline"};
    app.require_subcommand(1);

    gen_flags gf;
    auto* gen = app.add_subcommand("gen", "Generate a synthetic basic graph (BG1..BG4)");
    gen->add_option("--graph-id", gf.graph_id, "Graph id")->required()->check(CLI::Range(1, 4));
    gen->add_option("--seed", gf.seed, "Generator seed; defaults to graph.seed of --config");
    gen->add_option("--out", gf.out, "Output graph file")->required();
    gen->add_option("--d-in", gf.d_in, "Samples per signal window");
    gen->add_option("--knn-k", gf.knn_k, "Neighbours per node before symmetrization");
    gen->add_option("--separation", gf.separation, "Class separation");
    gen->add_option("--noise", gf.noise, "Sample noise standard deviation");
    gen->add_option("--config", gf.config, "JSON run config supplying generator defaults");

    train_flags tf;
    std::string graph_path, model = "both", out_report;
    auto* train = app.add_subcommand("train", "Train models on a graph file over paired trials");
    train->add_option("--graph", graph_path, "Graph file")->required();
    train->add_option("--model", model, "graphkan, gcn or both")
        ->check(CLI::IsMember({"graphkan", "gcn", "both"}));
    train->add_option("--out-report", out_report, "Report JSON path")->required();
    train->add_option("--features-dir", tf.features_dir, "Export per-layer test features as CSV");
    tf.add_to(train);

    train_flags cf;
    std::vector<std::string> graphs;
    std::string compare_out;
    auto* compare = app.add_subcommand("compare", "Train both models on each graph and tabulate");
    compare->add_option("--graphs", graphs, "Graph files")->required();
    compare->add_option("--out", compare_out, "Comparison JSON path")->required();
    cf.add_to(compare);

    double tolerance = 1e-4;
    std::uint64_t gc_seed = 7;
    std::vector<std::size_t> sizes;
    auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
    gradcheck->add_option("--tolerance", tolerance, "Largest accepted relative error");
    gradcheck->add_option("--seed", gc_seed, "Seed for the random test instances");
    gradcheck->add_option("--sizes", sizes, "Hidden widths of the whole-model check");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_usage;
    }

    try {
        if (*gen) return cmd_gen(gf);
        if (*train) return cmd_train(tf, graph_path, model, out_report);
        if (*compare) return cmd_compare(cf, graphs, compare_out);
        if (*gradcheck) return cmd_gradcheck(tolerance, gc_seed, sizes);
    } catch (const usage_error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_runtime;
    }
    return exit_usage;
}
