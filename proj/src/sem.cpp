#include "lhcm/sem.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace lhcm {

std::string activation_name(Activation a) {
    return a == Activation::LeakyRelu02 ? "leakyrelu_0.2" : "tanh";
}

Activation activation_from_name(const std::string& s) {
    if (s == "leakyrelu_0.2" || s == "leakyrelu") return Activation::LeakyRelu02;
    if (s == "tanh") return Activation::Tanh;
    throw ArgumentError("unknown activation: " + s);
}

void SemSpec::check() const {
    if (!(0 < weight_low && weight_low < weight_high))
        throw ArgumentError("SemSpec: need 0 < weight_low < weight_high");
    if (!(0 <= alpha_low && alpha_low <= alpha_high))
        throw ArgumentError("SemSpec: need 0 <= alpha_low <= alpha_high");
    if (samples <= 0) throw ArgumentError("SemSpec: samples must be positive");
}

SemParams sample_weights(const HierGraph& g, const SemSpec& spec, Rng& rng) {
    spec.check();
    std::uniform_real_distribution<double> mag(spec.weight_low, spec.weight_high);
    std::uniform_real_distribution<double> amag(spec.alpha_low, spec.alpha_high);
    std::bernoulli_distribution flip(0.5);

    SemParams p;
    p.weights.reserve(g.blocks.size());
    for (const auto& block : g.blocks) {
        Eigen::MatrixXd w = Eigen::MatrixXd::Zero(block.size(), block[0].size());
        for (int i = 0; i < w.rows(); ++i)
            for (int j = 0; j < w.cols(); ++j)
                if (block[i][j]) w(i, j) = (flip(rng) ? 1.0 : -1.0) * mag(rng);
        p.weights.push_back(std::move(w));
    }
    p.alpha.resize(g.num_nodes());
    for (auto& a : p.alpha) a = amag(rng);
    return p;
}

namespace {

double apply_act(Activation act, double v) {
    if (act == Activation::Tanh) return std::tanh(v);
    return v >= 0 ? v : 0.2 * v;
}

}  // namespace

Dataset sample_sem(const HierGraph& g, const SemSpec& spec) {
    g.check_well_formed();
    spec.check();
    Rng rng(spec.seed);
    const SemParams params = sample_weights(g, spec, rng);

    const int L = g.num_layers();
    std::uniform_real_distribution<double> unit(-1.0, 1.0);

    Dataset d;
    d.data.resize(spec.samples, g.num_measured);
    for (int s = 0; s < spec.samples; ++s) {
        std::vector<Eigen::VectorXd> layer_vals(L + 1);
        Eigen::VectorXd prev;
        for (int l = 0; l <= L; ++l) {
            const int size = (l < L) ? g.layer_sizes[l] : g.num_measured;
            Eigen::VectorXd vals(size);
            const int base = (l < L) ? g.latent_id(l, 0) : g.measured_id(0);
            for (int j = 0; j < size; ++j) {
                double pre = unit(rng) * params.alpha[base + j];
                if (l > 0) pre += params.weights[l - 1].col(j).dot(prev);
                vals(j) = apply_act(spec.activation, pre);
            }
            prev = vals;
        }
        d.data.row(s) = prev.transpose();
    }

    d.columns.resize(g.num_measured);
    for (int j = 0; j < g.num_measured; ++j) d.columns[j] = "x_" + std::to_string(j);
    d.provenance.graph_hash = hex64(graph_hash(g));
    d.provenance.spec = spec;

    if (!d.data.allFinite()) throw StructuralError("sample_sem: non-finite values generated");
    return d;
}

void write_dataset(const Dataset& d, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw ParseError("cannot open for writing: " + path);
    for (std::size_t j = 0; j < d.columns.size(); ++j)
        f << (j ? "," : "") << d.columns[j];
    f << "\n";
    char buf[64];
    for (int i = 0; i < d.rows(); ++i) {
        for (int j = 0; j < d.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", d.data(i, j));
            f << (j ? "," : "") << buf;
        }
        f << "\n";
    }

    const auto& s = d.provenance.spec;
    nlohmann::json prov{{"graph_hash", d.provenance.graph_hash},
                        {"activation", activation_name(s.activation)},
                        {"weight_low", s.weight_low},
                        {"weight_high", s.weight_high},
                        {"alpha_low", s.alpha_low},
                        {"alpha_high", s.alpha_high},
                        {"samples", s.samples},
                        {"seed", s.seed}};
    std::ofstream pf(path + ".prov.json");
    pf << prov.dump(2) << "\n";
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

}  // namespace

Dataset read_dataset(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ParseError("cannot open dataset file: " + path);
    std::string line;
    if (!std::getline(f, line) || line.empty())
        throw ParseError(path + ": empty dataset file");
    Dataset d;
    d.columns = split_csv_line(line);
    const int ncols = static_cast<int>(d.columns.size());

    std::vector<std::vector<double>> rows;
    int lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (static_cast<int>(cells.size()) != ncols)
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected " +
                             std::to_string(ncols) + " columns, got " + std::to_string(cells.size()));
        std::vector<double> row(ncols);
        for (int j = 0; j < ncols; ++j) {
            std::size_t used = 0;
            try {
                row[j] = std::stod(cells[j], &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != cells[j].size() || cells[j].empty())
                throw ParseError(path + ":" + std::to_string(lineno) + ": non-numeric cell '" +
                                 cells[j] + "'");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError(path + ": dataset has no data rows");

    d.data.resize(rows.size(), ncols);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (int j = 0; j < ncols; ++j) d.data(i, j) = rows[i][j];

    std::ifstream pf(path + ".prov.json");
    if (pf) {
        try {
            nlohmann::json prov = nlohmann::json::parse(pf);
            d.provenance.graph_hash = prov.value("graph_hash", "");
            d.provenance.spec.activation = activation_from_name(prov.value("activation", "leakyrelu_0.2"));
            d.provenance.spec.weight_low = prov.value("weight_low", 2.0);
            d.provenance.spec.weight_high = prov.value("weight_high", 5.0);
            d.provenance.spec.alpha_low = prov.value("alpha_low", 1.0);
            d.provenance.spec.alpha_high = prov.value("alpha_high", 3.0);
            d.provenance.spec.samples = prov.value("samples", static_cast<int>(rows.size()));
            d.provenance.spec.seed = prov.value("seed", std::uint64_t{0});
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path + ".prov.json: " + std::string(e.what()));
        }
    }
    return d;
}

}  // namespace lhcm
