#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lhcm/learner.hpp"
#include "lhcm/rank.hpp"
#include "lhcm/recover.hpp"
#include "lhcm/sem.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lhcm;

namespace {

constexpr int kManifestVersion = 1;

std::string file_hash(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot hash missing file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return hex64(fnv1a(ss.str()));
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw ParseError("cannot write " + path);
    f << text;
}

struct ManifestWriter {
    std::string command;
    json flags;
    json inputs = json::object();
    json outputs = json::object();
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    void add_input(const std::string& path) { inputs[path] = file_hash(path); }
    void add_output(const std::string& path) { outputs[path] = file_hash(path); }
    void write(const std::string& dir) {
        json m;
        m["format_version"] = kManifestVersion;
        m["command"] = command;
        m["flags"] = flags;
        m["inputs"] = inputs;
        m["outputs"] = outputs;
        m["wall_time_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        write_text(dir + "/manifest.json", m.dump(2) + "\n");
    }
};

std::string require_out(const json& flags) {
    std::string out = flags.value("out", "");
    if (out.empty()) {
        const char* env = std::getenv("LHCM_OUT_DIR");
        if (env) out = env;
    }
    if (out.empty()) throw ArgumentError("--out is required (or set LHCM_OUT_DIR)");
    fs::create_directories(out);
    return out;
}

HierGraph load_graph_source(const json& flags, ManifestWriter& mw) {
    const std::string builtin = flags.value("builtin", "");
    const std::string graph = flags.value("graph", "");
    const int sources = (builtin.empty() ? 0 : 1) + (graph.empty() ? 0 : 1) +
                        (flags.value("random_measured", 0) > 0 ? 1 : 0);
    if (sources != 1)
        throw ArgumentError("exactly one graph source required: --builtin, --graph, or --random-*");
    if (!builtin.empty()) return builtin_graph(builtin);
    if (!graph.empty()) {
        mw.add_input(graph);
        return load_graph(graph);
    }
    return random_graph(flags.value("random_measured", 0), flags.value("random_layers", 1),
                        flags.value("seed", std::uint64_t{0}));
}

SemSpec sem_spec_from(const json& flags) {
    SemSpec spec;
    spec.samples = flags.value("samples", 10000);
    spec.seed = flags.value("seed", std::uint64_t{0});
    spec.activation = activation_from_name(flags.value("activation", "leakyrelu"));
    spec.weight_low = flags.value("weight_low", 2.0);
    spec.weight_high = flags.value("weight_high", 5.0);
    spec.alpha_low = flags.value("alpha_low", 1.0);
    spec.alpha_high = flags.value("alpha_high", 3.0);
    spec.check();
    return spec;
}

StatOracleConfig stat_cfg_from(const json& flags) {
    StatOracleConfig cfg;
    cfg.tol = flags.value("rank_tol", 0.05);
    cfg.points = flags.value("rank_points", 64);
    const std::string mode = flags.value("rank_mode", "jacobian");
    if (mode == "jacobian")
        cfg.mode = RankMode::Jacobian;
    else if (mode == "crosscov")
        cfg.mode = RankMode::CrossCov;
    else
        throw ArgumentError("--rank-mode must be jacobian or crosscov");
    cfg.regressor.seed = flags.value("seed", std::uint64_t{0});
    return cfg;
}

TrainConfig train_cfg_from(const json& flags, ManifestWriter& mw) {
    TrainConfig cfg;
    const std::string path = flags.value("config", "");
    if (!path.empty()) {
        mw.add_input(path);
        std::ifstream f(path);
        if (!f) throw ParseError("cannot read config: " + path);
        json j;
        try {
            f >> j;
        } catch (const json::exception& e) {
            throw ParseError("malformed config " + path + ": " + e.what());
        }
        for (const auto& [key, val] : j.items()) {
            if (key == "lr") cfg.lr = val.get<double>();
            else if (key == "epochs") cfg.epochs = val.get<int>();
            else if (key == "batch") cfg.batch = val.get<int>();
            else if (key == "temperature") cfg.temperature = val.get<double>();
            else if (key == "lambda1") cfg.lambda1 = val.get<double>();
            else if (key == "lambda2") cfg.lambda2 = val.get<double>();
            else if (key == "restarts") cfg.restarts = val.get<int>();
            else if (key == "mine_warmup") cfg.mine_warmup = val.get<int>();
            else if (key == "threshold") cfg.threshold = val.get<double>();
            else if (key == "seed") cfg.seed = val.get<std::uint64_t>();
            else throw ArgumentError("unknown config key: " + key);
        }
    }
    if (flags.contains("epochs")) cfg.epochs = flags["epochs"].get<int>();
    if (flags.contains("restarts")) cfg.restarts = flags["restarts"].get<int>();
    if (flags.contains("batch")) cfg.batch = flags["batch"].get<int>();
    if (flags.contains("lr")) cfg.lr = flags["lr"].get<double>();
    if (flags.contains("threshold")) cfg.threshold = flags["threshold"].get<double>();
    if (flags.contains("seed")) cfg.seed = flags["seed"].get<std::uint64_t>();
    cfg.check();
    return cfg;
}

json metrics_json(const Metrics& m) {
    json j;
    j["shd"] = m.shd;
    j["f1"] = m.f1;
    json perms = json::array();
    for (const auto& p : m.best_relabeling.layer_perms) perms.push_back(p);
    j["relabeling"] = perms;
    return j;
}

// ---------------------------------------------------------------- commands

int run_generate(const json& flags) {
    ManifestWriter mw{"generate", flags};
    const std::string out = require_out(flags);
    const HierGraph g = load_graph_source(flags, mw);
    const SemSpec spec = sem_spec_from(flags);
    const Dataset ds = sample_sem(g, spec);
    write_dataset(ds, out + "/data.csv");
    save_graph(g, out + "/graph.json");
    mw.add_output(out + "/data.csv");
    mw.add_output(out + "/graph.json");
    mw.write(out);
    std::cout << "wrote " << ds.rows() << "x" << ds.cols() << " dataset to " << out << "\n";
    return 0;
}

int run_recover(const json& flags) {
    ManifestWriter mw{"recover", flags};
    const std::string out = require_out(flags);
    const std::string mode = flags.value("oracle", "exact");
    RecoverOptions opts;
    opts.subset_cap = flags.value("subset_cap", 4);
    opts.query_budget = flags.value("query_budget", 20000);

    RecoverResult res;
    if (mode == "exact") {
        const HierGraph g = load_graph_source(flags, mw);
        ExactOracle oracle(g);
        res = recover_full(oracle, g.num_measured, opts);
    } else if (mode == "statistical") {
        const std::string data = flags.value("data", "");
        if (data.empty()) throw ArgumentError("--oracle statistical requires --data");
        mw.add_input(data);
        const Dataset ds = read_dataset(data);
        StatisticalOracle oracle(ds.data, stat_cfg_from(flags));
        res = recover_full(oracle, ds.cols(), opts);
    } else {
        throw ArgumentError("--oracle must be exact or statistical");
    }

    save_graph(res.graph, out + "/graph.json");
    write_text(out + "/trace.txt", res.trace.to_text());
    mw.add_output(out + "/graph.json");
    mw.add_output(out + "/trace.txt");
    mw.write(out);
    std::cout << "recovered graph with " << res.graph.num_latents() << " latents, "
              << res.trace.queries.size() << " oracle queries\n";
    return 0;
}

int run_train(const json& flags) {
    ManifestWriter mw{"train", flags};
    const std::string out = require_out(flags);
    const std::string data_path = flags.value("data", "");
    if (data_path.empty()) throw ArgumentError("--data is required");
    mw.add_input(data_path);
    const Dataset ds = read_dataset(data_path);
    const TrainConfig cfg = train_cfg_from(flags, mw);

    const TrainResult tr = train(ds.data, cfg);
    const HierGraph est = extract_structure(tr.state.mask, cfg.threshold);
    save_graph(est, out + "/graph.json");
    save_checkpoint(tr.state, cfg, out + "/checkpoint.json");

    std::ostringstream restarts;
    for (const auto& r : tr.restarts)
        restarts << r.seed << "\t" << r.final_loss << "\t" << (r.diverged ? "diverged" : "ok")
                 << "\n";
    write_text(out + "/restarts.tsv", restarts.str());
    std::ostringstream curve;
    curve << "epoch\tloss\n";
    for (std::size_t e = 0; e < tr.epoch_losses.size(); ++e)
        curve << e << "\t" << tr.epoch_losses[e] << "\n";
    write_text(out + "/curve.tsv", curve.str());

    mw.add_output(out + "/graph.json");
    mw.add_output(out + "/checkpoint.json");
    mw.add_output(out + "/restarts.tsv");
    mw.write(out);
    std::cout << "best loss " << tr.best_loss << "; extracted " << est.num_latents()
              << " latents\n";
    return 0;
}

int run_eval(const json& flags) {
    ManifestWriter mw{"eval", flags};
    const std::string out = require_out(flags);
    const std::string est_path = flags.value("est", "");
    if (est_path.empty()) throw ArgumentError("--est is required");
    HierGraph truth;
    const std::string truth_builtin = flags.value("truth_builtin", "");
    if (!truth_builtin.empty()) {
        truth = builtin_graph(truth_builtin);
    } else {
        const std::string truth_path = flags.value("truth", "");
        if (truth_path.empty()) throw ArgumentError("--truth or --truth-builtin is required");
        mw.add_input(truth_path);
        truth = load_graph(truth_path);
    }
    mw.add_input(est_path);
    const HierGraph est = load_graph(est_path);

    const Metrics m = best_perm_shd_f1(truth, est);
    write_text(out + "/metrics.json", metrics_json(m).dump(2) + "\n");
    mw.add_output(out + "/metrics.json");
    mw.write(out);
    std::cout << "shd " << m.shd << " f1 " << m.f1 << "\n";
    return 0;
}

int run_e2e(const json& flags) {
    ManifestWriter mw{"e2e", flags};
    const std::string out = require_out(flags);
    const std::string name = flags.value("builtin", "");
    if (name.empty()) throw ArgumentError("--builtin is required");
    const std::string method = flags.value("method", "oracle");
    const int trials = flags.value("trials", 3);
    if (trials < 1) throw ArgumentError("--trials must be >= 1");
    const HierGraph truth = builtin_graph(name);

    std::vector<double> shds, f1s;
    const auto t0 = std::chrono::steady_clock::now();
    for (int t = 0; t < trials; ++t) {
        const std::string tdir = out + "/trial" + std::to_string(t);
        fs::create_directories(tdir);
        json tf = flags;
        tf["seed"] = flags.value("seed", std::uint64_t{0}) + static_cast<std::uint64_t>(t);

        HierGraph est;
        if (method == "oracle") {
            ExactOracle oracle(truth);
            est = recover_full(oracle, truth.num_measured).graph;
        } else {
            const SemSpec spec = sem_spec_from(tf);
            const Dataset ds = sample_sem(truth, spec);
            if (method == "statistical") {
                StatisticalOracle oracle(ds.data, stat_cfg_from(tf));
                est = recover_full(oracle, ds.cols()).graph;
            } else if (method == "train") {
                ManifestWriter dummy{"", {}};
                TrainConfig cfg = train_cfg_from(tf, dummy);
                const TrainResult tr = train(ds.data, cfg);
                est = extract_structure(tr.state.mask, cfg.threshold);
            } else {
                throw ArgumentError("--method must be oracle, statistical, or train");
            }
        }
        save_graph(est, tdir + "/graph.json");
        const Metrics m = best_perm_shd_f1(truth, est);
        write_text(tdir + "/metrics.json", metrics_json(m).dump(2) + "\n");
        mw.add_output(tdir + "/graph.json");
        mw.add_output(tdir + "/metrics.json");
        shds.push_back(m.shd);
        f1s.push_back(m.f1);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    auto mean_std = [](const std::vector<double>& v) {
        double mu = 0;
        for (double x : v) mu += x;
        mu /= static_cast<double>(v.size());
        double var = 0;
        for (double x : v) var += (x - mu) * (x - mu);
        var /= static_cast<double>(v.size());
        return std::make_pair(mu, std::sqrt(var));
    };
    const auto [shd_m, shd_s] = mean_std(shds);
    const auto [f1_m, f1_s] = mean_std(f1s);

    char line[256];
    std::snprintf(line, sizeof line, "%-8s %-12s trials=%d  SHD %.2f (%.2f)  F1 %.2f (%.2f)  %.1f s\n",
                  name.c_str(), method.c_str(), trials, shd_m, shd_s, f1_m, f1_s, secs);
    write_text(out + "/summary.txt", line);
    mw.write(out);
    std::cout << line;
    return 0;
}

int dispatch(const std::string& command, const json& flags);

int run_rerun(const json& flags) {
    const std::string path = flags.value("manifest", "");
    if (path.empty()) throw ArgumentError("--manifest is required");
    std::ifstream f(path);
    if (!f) throw ParseError("cannot read manifest: " + path);
    json m;
    try {
        f >> m;
    } catch (const json::exception& e) {
        throw ParseError("malformed manifest " + path + ": " + e.what());
    }
    if (m.value("format_version", 0) != kManifestVersion)
        throw ParseError("unsupported manifest version in " + path);
    json inner = m.at("flags");
    if (flags.contains("out")) inner["out"] = flags["out"];
    return dispatch(m.at("command").get<std::string>(), inner);
}

int dispatch(const std::string& command, const json& flags) {
    if (command == "generate") return run_generate(flags);
    if (command == "recover") return run_recover(flags);
    if (command == "train") return run_train(flags);
    if (command == "eval") return run_eval(flags);
    if (command == "e2e") return run_e2e(flags);
    if (command == "rerun") return run_rerun(flags);
    throw ArgumentError("unknown command: " + command);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Latent hierarchical causal model toolkit"};
    app.require_subcommand(1);
    json flags;
    std::string command;

    auto add_string = [&flags](CLI::App* cmd, const std::string& name, const std::string& key,
                               const std::string& desc) {
        cmd->add_option_function<std::string>(
            name, [&flags, key](const std::string& v) { flags[key] = v; }, desc);
    };
    auto add_int = [&flags](CLI::App* cmd, const std::string& name, const std::string& key,
                            const std::string& desc) {
        cmd->add_option_function<int>(
            name, [&flags, key](int v) { flags[key] = v; }, desc);
    };
    auto add_u64 = [&flags](CLI::App* cmd, const std::string& name, const std::string& key,
                            const std::string& desc) {
        cmd->add_option_function<std::uint64_t>(
            name, [&flags, key](std::uint64_t v) { flags[key] = v; }, desc);
    };
    auto add_double = [&flags](CLI::App* cmd, const std::string& name, const std::string& key,
                               const std::string& desc) {
        cmd->add_option_function<double>(
            name, [&flags, key](double v) { flags[key] = v; }, desc);
    };

    auto add_graph_source = [&](CLI::App* cmd) {
        add_string(cmd, "--builtin", "builtin", "builtin graph: fig5a..fig5d");
        add_string(cmd, "--graph", "graph", "graph JSON file");
        add_int(cmd, "--random-measured", "random_measured", "random graph: measured count");
        add_int(cmd, "--random-layers", "random_layers", "random graph: latent layers");
    };
    auto add_rank_flags = [&](CLI::App* cmd) {
        add_double(cmd, "--rank-tol", "rank_tol", "singular value cutoff ratio");
        add_int(cmd, "--rank-points", "rank_points", "Jacobian evaluation points");
        add_string(cmd, "--rank-mode", "rank_mode", "jacobian | crosscov");
    };

    auto* gen = app.add_subcommand("generate", "sample a synthetic dataset");
    add_graph_source(gen);
    add_int(gen, "--samples", "samples", "rows to sample");
    add_u64(gen, "--seed", "seed", "master seed");
    add_string(gen, "--activation", "activation", "leakyrelu | tanh");
    add_double(gen, "--weight-low", "weight_low", "min |edge weight|");
    add_double(gen, "--weight-high", "weight_high", "max |edge weight|");
    add_double(gen, "--alpha-low", "alpha_low", "min noise half-width");
    add_double(gen, "--alpha-high", "alpha_high", "max noise half-width");
    add_string(gen, "--out", "out", "output directory");

    auto* rec = app.add_subcommand("recover", "recover structure from an oracle");
    add_graph_source(rec);
    add_string(rec, "--data", "data", "dataset CSV (statistical oracle)");
    add_string(rec, "--oracle", "oracle", "exact | statistical");
    add_rank_flags(rec);
    add_u64(rec, "--seed", "seed", "master seed");
    add_int(rec, "--subset-cap", "subset_cap", "cluster verification subset cap");
    add_int(rec, "--query-budget", "query_budget", "max oracle calls");
    add_string(rec, "--out", "out", "output directory");

    auto* trn = app.add_subcommand("train", "train the differentiable learner");
    add_string(trn, "--data", "data", "dataset CSV");
    add_string(trn, "--config", "config", "training config JSON");
    add_int(trn, "--epochs", "epochs", "override epochs");
    add_int(trn, "--restarts", "restarts", "override restarts");
    add_int(trn, "--batch", "batch", "override batch size");
    add_double(trn, "--lr", "lr", "override learning rate");
    add_double(trn, "--threshold", "threshold", "mask extraction threshold");
    add_u64(trn, "--seed", "seed", "master seed");
    add_string(trn, "--out", "out", "output directory");

    auto* evl = app.add_subcommand("eval", "score an estimated graph");
    add_string(evl, "--truth", "truth", "ground-truth graph file");
    add_string(evl, "--truth-builtin", "truth_builtin", "ground-truth builtin name");
    add_string(evl, "--est", "est", "estimated graph file");
    add_string(evl, "--out", "out", "output directory");

    auto* e2e = app.add_subcommand("e2e", "generate -> recover/train -> eval");
    add_string(e2e, "--builtin", "builtin", "builtin graph name");
    add_string(e2e, "--method", "method", "oracle | statistical | train");
    add_int(e2e, "--trials", "trials", "independent trials");
    add_int(e2e, "--samples", "samples", "rows per trial");
    add_u64(e2e, "--seed", "seed", "master seed");
    add_string(e2e, "--activation", "activation", "leakyrelu | tanh");
    add_rank_flags(e2e);
    add_string(e2e, "--config", "config", "training config JSON");
    add_int(e2e, "--epochs", "epochs", "override epochs");
    add_int(e2e, "--restarts", "restarts", "override restarts");
    add_string(e2e, "--out", "out", "output directory");

    auto* rr = app.add_subcommand("rerun", "re-execute a command from its manifest");
    add_string(rr, "--manifest", "manifest", "manifest.json of a previous run");
    add_string(rr, "--out", "out", "new output directory");

    CLI11_PARSE(app, argc, argv);
    command = app.get_subcommands().front()->get_name();

    try {
        return dispatch(command, flags);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
