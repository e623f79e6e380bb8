#pragma once

#include <map>
#include <set>
#include <vector>

#include "lhcm/graph.hpp"

namespace lhcm {

using NodeSet = std::set<int>;  // global node ids

/// True iff Z blocks every path between S and T (standard d-separation).
/// S, T, Z must be pairwise disjoint; Z may only contain latents.
bool is_dsep(const HierGraph& g, const NodeSet& S, const NodeSet& T, const NodeSet& Z);

/// Size of the smallest latent set d-separating S from T, via a unit-vertex-
/// capacity minimum cut on the moralized ancestral graph of S ∪ T.
/// Returns 0 when S and T are already d-separated by the empty set, and 0 by
/// convention when either side is empty.
int min_dsep_size(const HierGraph& g, const NodeSet& S, const NodeSet& T);

/// Same contract, by enumerating latent subsets in ascending cardinality.
/// Test oracle for min_dsep_size; refuses graphs with more than 20 latents.
int min_dsep_size_brute(const HierGraph& g, const NodeSet& S, const NodeSet& T);

/// Measured-set rank query interface: r(S, T) with S, T measured indices
/// (0-based columns), answering the minimal latent d-separator size.
class RankOracle {
public:
    virtual ~RankOracle() = default;
    virtual int query(const std::vector<int>& S, const std::vector<int>& T) = 0;
};

/// Exact oracle backed by a known graph.
class ExactOracle : public RankOracle {
public:
    explicit ExactOracle(HierGraph g);
    int query(const std::vector<int>& S, const std::vector<int>& T) override;

private:
    HierGraph g_;
    std::map<std::pair<std::vector<int>, std::vector<int>>, int> cache_;
};

}  // namespace lhcm
