#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lhcm/common.hpp"

namespace lhcm {

using BinRow = std::vector<std::uint8_t>;
using BinMatrix = std::vector<BinRow>;

/// Layered latent DAG stored as a stack of binary block matrices, top layer
/// first. blocks[i] connects layer i (rows) to layer i+1 (columns); the last
/// block connects the bottom latent layer to the measured variables. Edges
/// only exist between adjacent layers, so the block form is the whole graph.
struct HierGraph {
    int num_measured = 0;
    std::vector<int> layer_sizes;     // top first
    std::vector<BinMatrix> blocks;    // blocks.size() == layer_sizes.size()

    int num_layers() const { return static_cast<int>(layer_sizes.size()); }
    int num_latents() const;
    int num_nodes() const { return num_latents() + num_measured; }

    // Global node ids: latents in layer-major order (top layer first),
    // measured variables after all latents.
    int latent_id(int layer, int index) const;
    int measured_id(int index) const { return num_latents() + index; }
    bool is_measured(int id) const { return id >= num_latents(); }
    int layer_of(int latent_global_id) const;

    std::vector<int> parents(int id) const;
    std::vector<int> children(int id) const;

    // Full directed adjacency over all nodes (latents then measured).
    std::vector<std::vector<std::uint8_t>> full_adjacency() const;

    int edge_count() const;

    /// Throws StructuralError if shapes or entries are inconsistent.
    void check_well_formed() const;
};

struct Condition1Report {
    bool ok = true;
    std::vector<int> violating;  // global latent ids with 1 pure child but a nonempty row
};

/// Condition 1(i) via the pure-child count: a latent row passes if it is
/// all-zero or has at least two entries not shared with any sibling row.
Condition1Report validate_condition1(const HierGraph& g);

/// Children of `node` whose only parent is `node`.
std::vector<int> pure_children(const HierGraph& g, int node);

/// Measured variables reached from `latent` by following pure children only.
/// These are the surrogate measured stand-ins for latent-level rank queries.
std::vector<int> pure_measured_descendants(const HierGraph& g, int latent);

/// Random Condition-1 graph: each latent gets two dedicated pure children
/// first, leftover children one parent each, then extra edges with
/// probability 0.3 per admissible slot.
HierGraph random_graph(int num_measured, int num_layers, std::uint64_t seed);

struct Relabeling {
    // layer_perms[l][i] = source index in layer l for relabeled slot i.
    // Measured indices are never permuted.
    std::vector<std::vector<int>> layer_perms;
};

struct Metrics {
    int shd = 0;
    double f1 = 0.0;
    Relabeling best_relabeling;
    double wall_time_seconds = 0.0;
};

/// SHD/F1 minimized over within-layer latent relabelings. Graphs with
/// differing layer counts or sizes are reconciled by zero padding.
Metrics best_perm_shd_f1(const HierGraph& truth, const HierGraph& est);

HierGraph apply_relabeling(const HierGraph& g, const Relabeling& r);

// Figure-style builtin graphs used by the synthetic experiments.
HierGraph builtin_graph(const std::string& name);  // fig5a, fig5b, fig5c, fig5d
std::vector<std::string> builtin_names();

// Graph file format: JSON {format_version, num_measured, layer_sizes, blocks}.
std::string graph_to_json(const HierGraph& g);
HierGraph graph_from_json(const std::string& text);
void save_graph(const HierGraph& g, const std::string& path);
HierGraph load_graph(const std::string& path);

std::uint64_t graph_hash(const HierGraph& g);

}  // namespace lhcm
