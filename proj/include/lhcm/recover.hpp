#pragma once

#include <string>
#include <vector>

#include "lhcm/dsep.hpp"

namespace lhcm {

/// One oracle call made during recovery, in measured column indices.
struct TraceQuery {
    std::vector<int> S, T;
    int answer = 0;
    std::string context;
};

/// A structural decision, citing the queries that justify it.
struct TraceDecision {
    std::string text;
    std::vector<int> cited;  // indices into RecoveryTrace::queries
};

struct RecoveryTrace {
    std::vector<TraceQuery> queries;
    std::vector<TraceDecision> decisions;
    // surrogates[level][node] = measured surrogate set; level 0 is measured.
    std::vector<std::vector<std::vector<int>>> surrogates;

    std::string to_text() const;
};

struct RecoverOptions {
    int subset_cap = 4;        // largest subset size swept when verifying a cluster
    int query_budget = 20000;  // hard cap on oracle calls per recovery
};

/// Grouping of the active nodes at one level: clusters of pure children of a
/// common (new) parent, plus nodes that joined no cluster.
struct Clustering {
    std::vector<std::vector<int>> clusters;  // indices into the active set
    std::vector<int> leftover;
};

/// Indices of active nodes c with r(c, active \ {c}) = 0, i.e. parentless.
/// `surrogates` holds one measured surrogate set per active node.
std::vector<int> find_isolated(RankOracle& oracle, const std::vector<std::vector<int>>& surrogates,
                               RecoveryTrace* trace = nullptr, const RecoverOptions& opts = {});

/// Partition into pure-child clusters: a set S qualifies when its members are
/// pairwise dependent and every subset T (2 <= |T| <= subset_cap) has
/// r(T, active \ T) <= 1. Grown greedily from pairs with re-verification.
Clustering cluster_pure_children(RankOracle& oracle,
                                 const std::vector<std::vector<int>>& surrogates,
                                 RecoveryTrace* trace = nullptr, const RecoverOptions& opts = {});

/// Minimal parent set for a leftover node c, as indices into `clusters`:
/// the smallest P such that every transversal S (one member per cluster in P)
/// satisfies r(S, rest) = r(S + c, rest) with rest = active \ (S + c).
/// Throws ModelViolationError when no candidate satisfies the equalities.
std::vector<int> assign_multi_parents(RankOracle& oracle,
                                      const std::vector<std::vector<int>>& surrogates, int leftover,
                                      const std::vector<std::vector<int>>& clusters,
                                      RecoveryTrace* trace = nullptr,
                                      const RecoverOptions& opts = {});

struct RecoverResult {
    HierGraph graph;
    RecoveryTrace trace;
};

/// Full bottom-up recovery from rank queries alone: per level, drop
/// parentless nodes, cluster pure children into new latents, attach
/// multi-parent leftovers, then recurse on the new latents with surrogate
/// measured sets until at most one active node remains.
RecoverResult recover_full(RankOracle& oracle, int num_measured,
                           const RecoverOptions& opts = {});

}  // namespace lhcm
