#include "lhcm/recover.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>

namespace lhcm {

namespace {

std::string set_text(const std::vector<int>& v) {
    std::string s = "{";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s + "}";
}

/// Shared query plumbing: surrogate substitution, logging, budget.
class Ctx {
public:
    Ctx(RankOracle& oracle, const std::vector<std::vector<int>>& surr, RecoveryTrace* trace,
        const RecoverOptions& opts)
        : oracle_(oracle), surr_(surr), opts_(opts), trace_(trace ? trace : &local_) {}

    /// r(A, B) with A, B sets of active-node indices, expanded to measured
    /// surrogates. Returns the logged query index through `qi`.
    int r(const std::vector<int>& A, const std::vector<int>& B, const std::string& context,
          int* qi = nullptr) {
        if (static_cast<int>(trace_->queries.size()) >= opts_.query_budget)
            throw FeasibilityError("query budget of " + std::to_string(opts_.query_budget) +
                                   " oracle calls exceeded during recovery");
        TraceQuery q;
        q.S = expand(A);
        q.T = expand(B);
        q.context = context;
        q.answer = (q.S.empty() || q.T.empty()) ? 0 : oracle_.query(q.S, q.T);
        if (qi) *qi = static_cast<int>(trace_->queries.size());
        trace_->queries.push_back(q);
        return q.answer;
    }

    /// Pairwise dependence with a symmetry audit of the oracle.
    bool dependent(int a, int b, std::vector<int>* cited) {
        const auto key = std::minmax(a, b);
        if (auto it = dep_.find(key); it != dep_.end()) return it->second;
        int q1 = 0, q2 = 0;
        const int fwd = r({a}, {b}, "dependence", &q1);
        const int bwd = r({b}, {a}, "dependence", &q2);
        if (fwd != bwd)
            throw StructuralError("oracle inconsistency: r" + set_text(expand({a})) + "," +
                                  set_text(expand({b})) + " gave " + std::to_string(fwd) +
                                  " one way and " + std::to_string(bwd) + " the other");
        if (cited) {
            cited->push_back(q1);
            cited->push_back(q2);
        }
        dep_[key] = fwd >= 1;
        return fwd >= 1;
    }

    /// r(T, active \ T) for a sorted subset of active indices, cached.
    int rank_vs_rest(std::vector<int> subset, const std::string& context,
                     std::vector<int>* cited = nullptr) {
        std::sort(subset.begin(), subset.end());
        if (auto it = vs_rest_.find(subset); it != vs_rest_.end()) return it->second;
        std::vector<int> rest;
        for (int i = 0; i < n(); ++i)
            if (!std::binary_search(subset.begin(), subset.end(), i)) rest.push_back(i);
        int qi = 0;
        const int ans = r(subset, rest, context, &qi);
        if (cited) cited->push_back(qi);
        vs_rest_[subset] = ans;
        return ans;
    }

    void decide(std::string text, std::vector<int> cited) {
        trace_->decisions.push_back({std::move(text), std::move(cited)});
    }

    int n() const { return static_cast<int>(surr_.size()); }
    int queries_from() const { return static_cast<int>(trace_->queries.size()); }

private:
    std::vector<int> expand(const std::vector<int>& nodes) const {
        std::vector<int> out;
        for (int i : nodes) out.insert(out.end(), surr_[i].begin(), surr_[i].end());
        std::sort(out.begin(), out.end());
        return out;
    }

    RankOracle& oracle_;
    const std::vector<std::vector<int>>& surr_;
    const RecoverOptions& opts_;
    RecoveryTrace local_;
    RecoveryTrace* trace_;
    std::map<std::pair<int, int>, bool> dep_;
    std::map<std::vector<int>, int> vs_rest_;
};

/// All size-k index subsets of {0..n-1} restricted to `pool`.
void for_each_subset(const std::vector<int>& pool, int k,
                     const std::function<bool(const std::vector<int>&)>& fn) {
    std::vector<int> pick(static_cast<std::size_t>(k));
    std::function<bool(int, int)> go = [&](int start, int depth) {
        if (depth == k) return fn(pick);
        for (int i = start; i <= static_cast<int>(pool.size()) - (k - depth); ++i) {
            pick[static_cast<std::size_t>(depth)] = pool[static_cast<std::size_t>(i)];
            if (!go(i + 1, depth + 1)) return false;
        }
        return true;
    };
    go(0, 0);
}

/// Every subset of a candidate cluster must still look like one common
/// parent: rank at most 1 against everything else.
bool verify_cluster(Ctx& ctx, const std::vector<int>& cluster, int subset_cap,
                    std::vector<int>* cited) {
    const int top = std::min<int>(subset_cap, static_cast<int>(cluster.size()));
    for (int k = 2; k <= top; ++k) {
        bool ok = true;
        for_each_subset(cluster, k, [&](const std::vector<int>& sub) {
            if (ctx.rank_vs_rest(sub, "cluster-verify", cited) > 1) {
                ok = false;
                return false;
            }
            return true;
        });
        if (!ok) return false;
    }
    return true;
}

bool pair_ok(Ctx& ctx, int a, int b, std::vector<int>* cited) {
    if (!ctx.dependent(a, b, cited)) return false;
    return ctx.rank_vs_rest({a, b}, "pair-check", cited) <= 1;
}

}  // namespace

std::string RecoveryTrace::to_text() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < queries.size(); ++i)
        out << "query " << i << ": S=" << set_text(queries[i].S) << " T=" << set_text(queries[i].T)
            << " r=" << queries[i].answer << " [" << queries[i].context << "]\n";
    for (const auto& d : decisions) {
        out << "decision: " << d.text << " cites=";
        out << set_text(d.cited) << "\n";
    }
    for (std::size_t lvl = 1; lvl < surrogates.size(); ++lvl) {
        out << "level " << lvl << " surrogates:";
        for (std::size_t i = 0; i < surrogates[lvl].size(); ++i)
            out << " z" << lvl << "#" << i << "->" << set_text(surrogates[lvl][i]);
        out << "\n";
    }
    return out.str();
}

std::vector<int> find_isolated(RankOracle& oracle, const std::vector<std::vector<int>>& surrogates,
                               RecoveryTrace* trace, const RecoverOptions& opts) {
    Ctx ctx(oracle, surrogates, trace, opts);
    std::vector<int> out;
    if (ctx.n() < 2) return out;
    for (int c = 0; c < ctx.n(); ++c) {
        std::vector<int> cited;
        if (ctx.rank_vs_rest({c}, "isolated-check", &cited) == 0) {
            ctx.decide("node " + std::to_string(c) + " is parentless", cited);
            out.push_back(c);
        }
    }
    return out;
}

Clustering cluster_pure_children(RankOracle& oracle,
                                 const std::vector<std::vector<int>>& surrogates,
                                 RecoveryTrace* trace, const RecoverOptions& opts) {
    Ctx ctx(oracle, surrogates, trace, opts);
    const int n = ctx.n();
    std::vector<char> claimed(static_cast<std::size_t>(n), 0);
    Clustering out;

    for (int a = 0; a < n; ++a) {
        if (claimed[static_cast<std::size_t>(a)]) continue;
        for (int b = a + 1; b < n; ++b) {
            if (claimed[static_cast<std::size_t>(b)]) continue;
            std::vector<int> cited;
            if (!pair_ok(ctx, a, b, &cited)) continue;

            std::vector<int> cluster{a, b};
            for (int d = 0; d < n; ++d) {
                if (claimed[static_cast<std::size_t>(d)] || d == a || d == b) continue;
                bool fits = true;
                for (int m : cluster)
                    if (!pair_ok(ctx, d, m, &cited)) {
                        fits = false;
                        break;
                    }
                if (!fits) continue;
                cluster.push_back(d);
                std::sort(cluster.begin(), cluster.end());
                if (!verify_cluster(ctx, cluster, opts.subset_cap, &cited))
                    cluster.erase(std::find(cluster.begin(), cluster.end(), d));
            }
            for (int m : cluster) claimed[static_cast<std::size_t>(m)] = 1;
            ctx.decide("cluster " + set_text(cluster) + " shares one parent", cited);
            out.clusters.push_back(std::move(cluster));
            break;  // a is claimed; move to the next seed
        }
    }
    for (int i = 0; i < n; ++i)
        if (!claimed[static_cast<std::size_t>(i)]) out.leftover.push_back(i);
    return out;
}

std::vector<int> assign_multi_parents(RankOracle& oracle,
                                      const std::vector<std::vector<int>>& surrogates, int leftover,
                                      const std::vector<std::vector<int>>& clusters,
                                      RecoveryTrace* trace, const RecoverOptions& opts) {
    Ctx ctx(oracle, surrogates, trace, opts);
    const int m = static_cast<int>(clusters.size());
    if (m == 0)
        throw ModelViolationError("leftover node " + std::to_string(leftover) +
                                  " has no candidate parents: no pure-child clusters found");

    std::vector<int> cluster_ids(static_cast<std::size_t>(m));
    std::iota(cluster_ids.begin(), cluster_ids.end(), 0);

    for (int size = 1; size <= m; ++size) {
        std::vector<int> found;
        for_each_subset(cluster_ids, size, [&](const std::vector<int>& P) {
            std::vector<int> cited;
            // Walk every transversal: one member from each cluster in P.
            std::vector<std::size_t> pos(P.size(), 0);
            bool all_match = true;
            while (true) {
                std::vector<int> S;
                for (std::size_t k = 0; k < P.size(); ++k)
                    S.push_back(clusters[static_cast<std::size_t>(P[k])][pos[k]]);
                std::vector<int> with_c = S;
                with_c.push_back(leftover);
                std::sort(with_c.begin(), with_c.end());
                std::vector<int> rest;
                for (int i = 0; i < ctx.n(); ++i)
                    if (!std::binary_search(with_c.begin(), with_c.end(), i)) rest.push_back(i);
                int q1 = 0, q2 = 0;
                const int r1 = ctx.r(S, rest, "parent-check", &q1);
                const int r2 = ctx.r(with_c, rest, "parent-check", &q2);
                cited.push_back(q1);
                cited.push_back(q2);
                if (r1 != r2) {
                    all_match = false;
                    break;
                }
                // Advance the mixed-radix transversal counter.
                std::size_t k = 0;
                while (k < P.size() && ++pos[k] == clusters[static_cast<std::size_t>(P[k])].size()) {
                    pos[k] = 0;
                    ++k;
                }
                if (k == P.size()) break;
            }
            if (all_match) {
                found = P;
                ctx.decide("node " + std::to_string(leftover) + " has parent clusters " +
                               set_text(P),
                           cited);
                return false;  // stop the subset scan
            }
            return true;
        });
        if (!found.empty()) return found;
    }
    throw ModelViolationError("no parent set explains leftover node " + std::to_string(leftover) +
                              "; the data-generating graph is outside the identifiable class");
}

RecoverResult recover_full(RankOracle& oracle, int num_measured, const RecoverOptions& opts) {
    if (num_measured < 1) throw ArgumentError("recovery needs at least one measured variable");
    RecoverResult res;
    RecoveryTrace& trace = res.trace;

    // Active nodes are (level, index-in-level) with measured surrogate sets.
    struct Active {
        int index;
        std::vector<int> surrogate;
    };
    std::vector<Active> active;
    std::vector<std::vector<int>> level0;
    for (int i = 0; i < num_measured; ++i) {
        active.push_back({i, {i}});
        level0.push_back({i});
    }
    trace.surrogates.push_back(level0);

    std::vector<int> level_counts{num_measured};
    // children_of[p-1][i] = children (level p-1 indices) of latent i at level p.
    std::vector<std::vector<std::vector<int>>> children_of;

    while (static_cast<int>(active.size()) > 1) {
        std::vector<std::vector<int>> surr;
        for (const auto& a : active) surr.push_back(a.surrogate);

        const auto iso = find_isolated(oracle, surr, &trace, opts);
        for (auto it = iso.rbegin(); it != iso.rend(); ++it)
            active.erase(active.begin() + *it);
        if (static_cast<int>(active.size()) <= 1) break;

        surr.clear();
        for (const auto& a : active) surr.push_back(a.surrogate);
        const auto grouping = cluster_pure_children(oracle, surr, &trace, opts);
        if (grouping.clusters.empty())
            throw ModelViolationError(
                "active nodes are dependent but form no pure-child cluster; "
                "the graph violates the purity condition");

        std::vector<std::vector<int>> children(grouping.clusters.size());
        std::vector<Active> next;
        std::vector<std::vector<int>> next_surr;
        for (std::size_t ci = 0; ci < grouping.clusters.size(); ++ci) {
            for (int member : grouping.clusters[ci])
                children[ci].push_back(active[static_cast<std::size_t>(member)].index);
            // Surrogate: pure measured descendants through the first two
            // cluster members (two are guaranteed to exist).
            std::vector<int> s = active[static_cast<std::size_t>(grouping.clusters[ci][0])].surrogate;
            const auto& s2 = active[static_cast<std::size_t>(grouping.clusters[ci][1])].surrogate;
            s.insert(s.end(), s2.begin(), s2.end());
            std::sort(s.begin(), s.end());
            next.push_back({static_cast<int>(ci), s});
            next_surr.push_back(std::move(s));
        }
        for (int c : grouping.leftover) {
            const auto P = assign_multi_parents(oracle, surr, c, grouping.clusters, &trace, opts);
            for (int ci : P)
                children[static_cast<std::size_t>(ci)].push_back(
                    active[static_cast<std::size_t>(c)].index);
        }

        children_of.push_back(std::move(children));
        level_counts.push_back(static_cast<int>(grouping.clusters.size()));
        trace.surrogates.push_back(next_surr);
        active = std::move(next);
    }

    const int L = static_cast<int>(children_of.size());
    if (L == 0)
        throw ModelViolationError(
            "no latent structure recoverable: measured variables are mutually independent");

    HierGraph g;
    g.num_measured = num_measured;
    for (int lvl = L; lvl >= 1; --lvl) g.layer_sizes.push_back(level_counts[static_cast<std::size_t>(lvl)]);
    for (int lvl = L; lvl >= 1; --lvl) {
        const int rows = level_counts[static_cast<std::size_t>(lvl)];
        const int cols = lvl == 1 ? num_measured : level_counts[static_cast<std::size_t>(lvl - 1)];
        BinMatrix block(static_cast<std::size_t>(rows), BinRow(static_cast<std::size_t>(cols), 0));
        const auto& kids = children_of[static_cast<std::size_t>(lvl - 1)];
        for (int i = 0; i < rows; ++i)
            for (int j : kids[static_cast<std::size_t>(i)])
                block[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = 1;
        g.blocks.push_back(std::move(block));
    }
    g.check_well_formed();
    res.graph = g;
    return res;
}

}  // namespace lhcm
