#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <graphkan/graph_io.hpp>

namespace gk = graphkan;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("graphkan_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    /// Runs the CLI with `args`; returns its exit code.
    int run(const std::string& args, const std::string& env = "") const {
        const std::string cmd = "cd '" + dir_.string() + "' && " + env + " '" GRAPHKAN_CLI "' " + args +
                                " > out.txt 2> err.txt";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }
    std::string read(const std::string& name) const { return gk::read_text_file(path(name)); }

    void small_config() const {
        gk::write_text_file(path("cfg.json"),
                            R"({"train": {"epochs": 3}, "model": {"widths": [8, 8, 8]}})");
    }

    fs::path dir_;
};

}  // namespace

TEST_F(Cli, GenWritesTableBudgets) {
    ASSERT_EQ(run("gen --graph-id 1 --seed 7 --out bg1.json"), 0) << read("err.txt");
    const gk::graph g = gk::read_graph(path("bg1.json"));
    EXPECT_EQ(g.n_nodes, 1400u);
    EXPECT_NE(read("out.txt").find("total 700"), std::string::npos);
    ASSERT_EQ(run("gen --graph-id 1 --seed 7 --out again.json"), 0);
    EXPECT_EQ(read("bg1.json"), read("again.json"));
}

TEST_F(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(run("gen --graph-id 9 --seed 1 --out x.json"), 2);
    EXPECT_EQ(run("gen --seed 1"), 2);
    EXPECT_EQ(run("frobnicate"), 2);
    EXPECT_EQ(run(""), 2);
    EXPECT_EQ(run("gen --graph-id 1 --out x.json --noise -1"), 2);
    EXPECT_EQ(run("train --graph g.json --out-report r.json --model mlp"), 2);
}

TEST_F(Cli, MissingGraphExitsOne) {
    EXPECT_EQ(run("train --graph nowhere.json --out-report r.json"), 1);
    EXPECT_NE(read("err.txt").find("nowhere.json"), std::string::npos);
}

TEST_F(Cli, ConfigProblems) {
    gk::write_text_file(path("bad.json"), R"({"train": {"epoch": 3}})");
    ASSERT_EQ(run("gen --graph-id 4 --seed 1 --out g.json --d-in 8"), 0);
    EXPECT_EQ(run("train --graph g.json --out-report r.json --config bad.json"), 2);
    EXPECT_NE(read("err.txt").find("train.epoch"), std::string::npos);
    EXPECT_EQ(run("train --graph g.json --out-report r.json --config missing.json"), 1);
}

TEST_F(Cli, TrainIsByteReproducible) {
    small_config();
    ASSERT_EQ(run("gen --graph-id 4 --seed 3 --out g.json --d-in 16"), 0);
    const std::string args = "train --graph g.json --config cfg.json --trials 1 --seed 42 --workers 1 --out-report ";
    ASSERT_EQ(run(args + "a.json"), 0) << read("err.txt");
    ASSERT_EQ(run(args + "b.json"), 0) << read("err.txt");
    EXPECT_EQ(read("a.json"), read("b.json"));
    const auto j = nlohmann::json::parse(read("a.json"));
    EXPECT_EQ(j["models"].size(), 2u);
    EXPECT_EQ(j["run_config"]["train"]["seed"], 42);
    EXPECT_EQ(j["run_config"]["train"]["epochs"], 3);
    EXPECT_EQ(read("a.json").find("wall_time"), std::string::npos);
    const auto t = nlohmann::json::parse(read("a.json.timing.json"));
    EXPECT_GT(t["models"][0]["wall_time_seconds"]["mean"].get<double>(), 0.0);
    EXPECT_NE(read("out.txt").find("graphkan"), std::string::npos);
}

TEST_F(Cli, TrainSingleModelAndFeatureExport) {
    small_config();
    ASSERT_EQ(run("gen --graph-id 4 --seed 3 --out g.json --d-in 8"), 0);
    ASSERT_EQ(run("train --graph g.json --config cfg.json --trials 2 --model gcn --features-dir feats "
                  "--out-report r.json"),
              0)
        << read("err.txt");
    const auto j = nlohmann::json::parse(read("r.json"));
    ASSERT_EQ(j["models"].size(), 1u);
    EXPECT_EQ(j["models"][0]["model"], "gcn");
    EXPECT_EQ(j["models"][0]["trials"].size(), 2u);
    EXPECT_TRUE(fs::exists(path("feats/gcn_trial1_layer3.csv")));
}

TEST_F(Cli, OutputDirectoryFromEnvironment) {
    small_config();
    ASSERT_EQ(run("gen --graph-id 4 --seed 3 --out g.json --d-in 8"), 0);
    ASSERT_EQ(run("train --graph g.json --config cfg.json --trials 1 --out-report r.json", "GRAPHKAN_OUT_DIR=results"),
              0)
        << read("err.txt");
    EXPECT_TRUE(fs::exists(path("results/r.json")));
    EXPECT_FALSE(fs::exists(path("r.json")));
}

TEST_F(Cli, CompareTabulatesEveryGraph) {
    small_config();
    ASSERT_EQ(run("gen --graph-id 4 --seed 3 --out g4.json --d-in 8"), 0);
    ASSERT_EQ(run("gen --graph-id 3 --seed 3 --out g3.json --d-in 8"), 0);
    ASSERT_EQ(run("compare --graphs g4.json g3.json --config cfg.json --trials 1 --out cmp.json"), 0)
        << read("err.txt");
    const auto j = nlohmann::json::parse(read("cmp.json"));
    ASSERT_EQ(j["graphs"].size(), 2u);
    EXPECT_EQ(j["graphs"][0]["label"], "BG4");
    const auto& m = j["graphs"][1]["report"]["models"];
    EXPECT_EQ(m[0]["silhouette"].size(), 3u);
    EXPECT_TRUE(m[1].contains("wall_time_seconds"));
    const std::string table = read("cmp.json.table.txt");
    EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 5);
}

TEST_F(Cli, CompareContinuesPastBadGraph) {
    small_config();
    ASSERT_EQ(run("gen --graph-id 4 --seed 3 --out g4.json --d-in 8"), 0);
    EXPECT_EQ(run("compare --graphs missing.json g4.json --config cfg.json --trials 1 --out cmp.json"), 1);
    const auto j = nlohmann::json::parse(read("cmp.json"));
    EXPECT_TRUE(j["graphs"][0].contains("error"));
    EXPECT_TRUE(j["graphs"][1].contains("report"));
}

TEST_F(Cli, GradcheckPassesAndStrictToleranceFails) {
    ASSERT_EQ(run("gradcheck"), 0) << read("err.txt");
    const std::string out = read("out.txt");
    for (const char* c : {"spline", "kan", "layernorm", "dense", "cross_entropy", "model.graphkan", "model.gcn"})
        EXPECT_NE(out.find(c), std::string::npos) << c;
    ASSERT_EQ(run("gradcheck"), 0);
    EXPECT_EQ(read("out.txt"), out);
    EXPECT_EQ(run("gradcheck --tolerance 1e-12"), 1);
    EXPECT_NE(read("err.txt").find("gradcheck failed"), std::string::npos);
}
