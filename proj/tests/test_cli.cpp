#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lhcm/graph.hpp"
#include "lhcm/sem.hpp"

namespace fs = std::filesystem;
using namespace lhcm;

namespace {

const std::string kCli = LHCM_CLI_PATH;

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / ("lhcm_cli_" + std::to_string(::getpid()))) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string sub(const std::string& name) const { return (path / name).string(); }
};

int run(const std::string& args, const std::string& log = "/dev/null") {
    const std::string cmd = kCli + " " + args + " >" + log + " 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("generate: builtin shapes and provenance") {
    TempDir tmp;
    REQUIRE(run("generate --builtin fig5a --samples 200 --seed 7 --out " + tmp.sub("a")) == 0);
    const auto a = read_dataset(tmp.sub("a") + "/data.csv");
    CHECK(a.rows() == 200);
    CHECK(a.cols() == 4);

    REQUIRE(run("generate --builtin fig5d --samples 100 --seed 7 --out " + tmp.sub("d")) == 0);
    CHECK(read_dataset(tmp.sub("d") + "/data.csv").cols() == 7);
    CHECK(fs::exists(tmp.sub("d") + "/manifest.json"));
}

TEST_CASE("generate: usage errors exit nonzero") {
    TempDir tmp;
    CHECK(run("generate --builtin fig5a") != 0);  // no --out
    CHECK(run("generate --out " + tmp.sub("x")) != 0);  // no graph source
    CHECK(run("generate --builtin fig5a --graph nope.json --out " + tmp.sub("y")) != 0);
    CHECK(run("generate --builtin nosuch --out " + tmp.sub("z")) != 0);
}

TEST_CASE("recover exact: graph matches truth up to relabeling") {
    TempDir tmp;
    REQUIRE(run("recover --builtin fig5c --oracle exact --out " + tmp.sub("r")) == 0);
    const auto est = load_graph(tmp.sub("r") + "/graph.json");
    CHECK(best_perm_shd_f1(builtin_graph("fig5c"), est).shd == 0);
    CHECK(fs::exists(tmp.sub("r") + "/trace.txt"));
    CHECK(!slurp(tmp.sub("r") + "/trace.txt").empty());
}

TEST_CASE("recover: statistical mode without --data is a usage error") {
    TempDir tmp;
    const std::string log = tmp.sub("log.txt");
    CHECK(run("recover --oracle statistical --out " + tmp.sub("r"), log) != 0);
    CHECK(slurp(log).find("--data") != std::string::npos);
}

TEST_CASE("train: smoke run and malformed config key") {
    TempDir tmp;
    REQUIRE(run("generate --builtin fig5a --samples 150 --seed 3 --out " + tmp.sub("g")) == 0);
    REQUIRE(run("train --data " + tmp.sub("g") + "/data.csv --epochs 1 --restarts 1 --seed 5 --out " +
                tmp.sub("t")) == 0);
    CHECK(fs::exists(tmp.sub("t") + "/graph.json"));
    CHECK(fs::exists(tmp.sub("t") + "/checkpoint.json"));
    CHECK(fs::exists(tmp.sub("t") + "/restarts.tsv"));
    load_graph(tmp.sub("t") + "/graph.json").check_well_formed();

    std::ofstream(tmp.sub("bad.json")) << "{\"lerning_rate\": 0.1}";
    const std::string log = tmp.sub("log.txt");
    CHECK(run("train --data " + tmp.sub("g") + "/data.csv --config " + tmp.sub("bad.json") +
                  " --out " + tmp.sub("t2"),
              log) != 0);
    CHECK(slurp(log).find("lerning_rate") != std::string::npos);
}

TEST_CASE("eval: identity, one edge removed, and layer mismatch") {
    TempDir tmp;
    const auto truth = builtin_graph("fig5a");
    save_graph(truth, tmp.sub("truth.json"));

    REQUIRE(run("eval --truth " + tmp.sub("truth.json") + " --est " + tmp.sub("truth.json") +
                " --out " + tmp.sub("e0")) == 0);
    auto metrics = slurp(tmp.sub("e0") + "/metrics.json");
    CHECK(metrics.find("\"shd\": 0") != std::string::npos);
    CHECK(metrics.find("\"f1\": 1.0") != std::string::npos);

    HierGraph cut = truth;
    cut.blocks.back()[0][0] = 0;
    save_graph(cut, tmp.sub("cut.json"));
    REQUIRE(run("eval --truth-builtin fig5a --est " + tmp.sub("cut.json") + " --out " +
                tmp.sub("e1")) == 0);
    CHECK(slurp(tmp.sub("e1") + "/metrics.json").find("\"shd\": 1") != std::string::npos);

    // Single-layer estimate against a two-layer truth: padded, still scored.
    HierGraph flat;
    flat.num_measured = 4;
    flat.layer_sizes = {2};
    flat.blocks = {{{1, 1, 0, 0}, {0, 0, 1, 1}}};
    save_graph(flat, tmp.sub("flat.json"));
    REQUIRE(run("eval --truth-builtin fig5a --est " + tmp.sub("flat.json") + " --out " +
                tmp.sub("e2")) == 0);
    CHECK(slurp(tmp.sub("e2") + "/metrics.json").find("\"shd\"") != std::string::npos);
}

TEST_CASE("e2e oracle mode is exact and reports the summary line") {
    TempDir tmp;
    REQUIRE(run("e2e --builtin fig5b --method oracle --trials 3 --out " + tmp.sub("e")) == 0);
    const auto summary = slurp(tmp.sub("e") + "/summary.txt");
    CHECK(summary.find("SHD 0.00 (0.00)") != std::string::npos);
    CHECK(summary.find("F1 1.00") != std::string::npos);
    CHECK(fs::exists(tmp.sub("e") + "/trial2/metrics.json"));
}

TEST_CASE("rerun from manifest reproduces byte-identical outputs") {
    TempDir tmp;
    REQUIRE(run("generate --builtin fig5b --samples 300 --seed 11 --out " + tmp.sub("g1")) == 0);
    REQUIRE(run("rerun --manifest " + tmp.sub("g1") + "/manifest.json --out " + tmp.sub("g2")) ==
            0);
    CHECK(slurp(tmp.sub("g1") + "/data.csv") == slurp(tmp.sub("g2") + "/data.csv"));
    CHECK(slurp(tmp.sub("g1") + "/graph.json") == slurp(tmp.sub("g2") + "/graph.json"));

    REQUIRE(run("recover --builtin fig5b --oracle exact --out " + tmp.sub("r1")) == 0);
    REQUIRE(run("rerun --manifest " + tmp.sub("r1") + "/manifest.json --out " + tmp.sub("r2")) ==
            0);
    CHECK(slurp(tmp.sub("r1") + "/graph.json") == slurp(tmp.sub("r2") + "/graph.json"));
}

TEST_CASE("unknown flags and subcommands fail") {
    CHECK(run("frobnicate") != 0);
    CHECK(run("generate --builtin fig5a --no-such-flag 1 --out /tmp/x") != 0);
}
