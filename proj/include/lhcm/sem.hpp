#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "lhcm/graph.hpp"

namespace lhcm {

enum class Activation { LeakyRelu02, Tanh };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& s);

/// Synthetic data generating configuration: edge weights uniform on
/// ±[weight_low, weight_high], per-node noise uniform on [-alpha, alpha]
/// with alpha uniform on [alpha_low, alpha_high].
struct SemSpec {
    Activation activation = Activation::LeakyRelu02;
    double weight_low = 2.0;
    double weight_high = 5.0;
    double alpha_low = 1.0;
    double alpha_high = 3.0;
    int samples = 10000;
    std::uint64_t seed = 0;

    void check() const;
};

/// Edge weights per block plus per-node noise half-widths, in graph order
/// (latents layer-major, then measured).
struct SemParams {
    std::vector<Eigen::MatrixXd> weights;  // same shapes as g.blocks
    std::vector<double> alpha;             // one per node
};

struct Provenance {
    std::string graph_hash;
    SemSpec spec;
};

struct Dataset {
    Eigen::MatrixXd data;  // samples x num_measured
    std::vector<std::string> columns;
    Provenance provenance;

    int rows() const { return static_cast<int>(data.rows()); }
    int cols() const { return static_cast<int>(data.cols()); }
};

SemParams sample_weights(const HierGraph& g, const SemSpec& spec, Rng& rng);

/// Ancestral sampling top layer first: node = activation(W * parents + noise);
/// top-layer latents have no parent term. Only measured columns are kept.
Dataset sample_sem(const HierGraph& g, const SemSpec& spec);

/// CSV with header x_0,...,x_{n-1}, 17 significant digits, plus a
/// provenance sidecar at <path>.prov.json.
void write_dataset(const Dataset& d, const std::string& path);
Dataset read_dataset(const std::string& path);

}  // namespace lhcm
