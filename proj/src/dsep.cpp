#include "lhcm/dsep.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <queue>

namespace lhcm {

namespace {

void check_disjoint(const NodeSet& a, const NodeSet& b, const char* what) {
    for (int v : a)
        if (b.count(v)) throw ArgumentError(std::string("overlapping sets in ") + what);
}

std::vector<std::vector<int>> parents_table(const HierGraph& g) {
    std::vector<std::vector<int>> out(g.num_nodes());
    for (int v = 0; v < g.num_nodes(); ++v) out[v] = g.parents(v);
    return out;
}

std::vector<std::vector<int>> children_table(const HierGraph& g) {
    std::vector<std::vector<int>> out(g.num_nodes());
    for (int v = 0; v < g.num_nodes(); ++v) out[v] = g.children(v);
    return out;
}

std::vector<std::uint8_t> ancestors_of(const HierGraph& g, const NodeSet& seed,
                                       const std::vector<std::vector<int>>& parents) {
    std::vector<std::uint8_t> in(g.num_nodes(), 0);
    std::deque<int> q(seed.begin(), seed.end());
    for (int v : seed) in[v] = 1;
    while (!q.empty()) {
        const int v = q.front();
        q.pop_front();
        for (int p : parents[v])
            if (!in[p]) {
                in[p] = 1;
                q.push_back(p);
            }
    }
    return in;
}

}  // namespace

bool is_dsep(const HierGraph& g, const NodeSet& S, const NodeSet& T, const NodeSet& Z) {
    g.check_well_formed();
    check_disjoint(S, T, "is_dsep(S,T)");
    check_disjoint(S, Z, "is_dsep(S,Z)");
    check_disjoint(T, Z, "is_dsep(T,Z)");
    for (int z : Z)
        if (g.is_measured(z)) throw ArgumentError("is_dsep: Z must contain only latents");
    if (S.empty() || T.empty()) return true;

    const auto parents = parents_table(g);
    const auto children = children_table(g);
    const auto anc_z = ancestors_of(g, Z, parents);

    // Active-trail reachability from S given Z (Bayes-ball).
    const int n = g.num_nodes();
    std::vector<std::uint8_t> seen_up(n, 0), seen_down(n, 0), reachable(n, 0);
    std::deque<std::pair<int, bool>> q;  // (node, arrived_from_child)
    for (int s : S) q.emplace_back(s, true);
    while (!q.empty()) {
        auto [v, up] = q.front();
        q.pop_front();
        auto& seen = up ? seen_up : seen_down;
        if (seen[v]) continue;
        seen[v] = 1;
        const bool in_z = Z.count(v) > 0;
        if (up) {
            if (!in_z) {
                reachable[v] = 1;
                for (int p : parents[v]) q.emplace_back(p, true);
                for (int c : children[v]) q.emplace_back(c, false);
            }
        } else {
            if (!in_z) {
                reachable[v] = 1;
                for (int c : children[v]) q.emplace_back(c, false);
            }
            if (anc_z[v])
                for (int p : parents[v]) q.emplace_back(p, true);
        }
    }
    for (int t : T)
        if (reachable[t]) return false;
    return true;
}

namespace {

// Unit-vertex-capacity max flow on the moral graph of An(S ∪ T); only
// latents outside S ∪ T are cuttable.
struct FlowNet {
    struct Edge {
        int to, cap;
    };
    std::vector<Edge> edges;
    std::vector<std::vector<int>> adj;

    void add(int u, int v, int cap) {
        adj[u].push_back(static_cast<int>(edges.size()));
        edges.push_back({v, cap});
        adj[v].push_back(static_cast<int>(edges.size()));
        edges.push_back({u, 0});
    }

    int max_flow(int s, int t) {
        int flow = 0;
        for (;;) {
            std::vector<int> prev_edge(adj.size(), -1);
            std::deque<int> q{s};
            prev_edge[s] = -2;
            while (!q.empty() && prev_edge[t] == -1) {
                const int v = q.front();
                q.pop_front();
                for (int ei : adj[v]) {
                    if (edges[ei].cap > 0 && prev_edge[edges[ei].to] == -1) {
                        prev_edge[edges[ei].to] = ei;
                        q.push_back(edges[ei].to);
                    }
                }
            }
            if (prev_edge[t] == -1) return flow;
            int push = std::numeric_limits<int>::max();
            for (int v = t; v != s;) {
                const int ei = prev_edge[v];
                push = std::min(push, edges[ei].cap);
                v = edges[ei ^ 1].to;
            }
            for (int v = t; v != s;) {
                const int ei = prev_edge[v];
                edges[ei].cap -= push;
                edges[ei ^ 1].cap += push;
                v = edges[ei ^ 1].to;
            }
            flow += push;
        }
    }
};

}  // namespace

int min_dsep_size(const HierGraph& g, const NodeSet& S, const NodeSet& T) {
    g.check_well_formed();
    check_disjoint(S, T, "min_dsep_size(S,T)");
    if (S.empty() || T.empty()) return 0;

    const auto parents = parents_table(g);
    NodeSet both;
    both.insert(S.begin(), S.end());
    both.insert(T.begin(), T.end());
    const auto anc = ancestors_of(g, both, parents);
    const int n = g.num_nodes();

    // Moral graph restricted to the ancestral set.
    std::vector<std::vector<std::uint8_t>> moral(n, std::vector<std::uint8_t>(n, 0));
    for (int v = 0; v < n; ++v) {
        if (!anc[v]) continue;
        const auto& pa = parents[v];
        for (int p : pa) {
            moral[p][v] = moral[v][p] = 1;
            for (int q : pa)
                if (p != q) moral[p][q] = moral[q][p] = 1;
        }
    }

    const int INF = 1 << 28;
    // Node split: v_in = 2v, v_out = 2v + 1; supersource/sink appended.
    FlowNet net;
    const int src = 2 * n, snk = 2 * n + 1;
    net.adj.resize(2 * n + 2);
    for (int v = 0; v < n; ++v) {
        if (!anc[v]) continue;
        const bool cuttable = !g.is_measured(v) && !both.count(v);
        net.add(2 * v, 2 * v + 1, cuttable ? 1 : INF);
    }
    for (int u = 0; u < n; ++u) {
        if (!anc[u]) continue;
        for (int v = u + 1; v < n; ++v) {
            if (!anc[v] || !moral[u][v]) continue;
            net.add(2 * u + 1, 2 * v, INF);
            net.add(2 * v + 1, 2 * u, INF);
        }
    }
    for (int s : S) net.add(src, 2 * s, INF);
    for (int t : T) net.add(2 * t + 1, snk, INF);

    const int flow = net.max_flow(src, snk);
    if (flow >= INF) throw ArgumentError("min_dsep_size: no latent separator exists for this query");
    return flow;
}

int min_dsep_size_brute(const HierGraph& g, const NodeSet& S, const NodeSet& T) {
    g.check_well_formed();
    check_disjoint(S, T, "min_dsep_size_brute(S,T)");
    if (S.empty() || T.empty()) return 0;
    const int nl = g.num_latents();
    if (nl > 20) throw ArgumentError("min_dsep_size_brute: more than 20 latents");

    std::vector<int> candidates;
    for (int v = 0; v < nl; ++v)
        if (!S.count(v) && !T.count(v)) candidates.push_back(v);
    const int m = static_cast<int>(candidates.size());

    for (int k = 0; k <= m; ++k) {
        std::vector<std::uint8_t> mask(m, 0);
        std::fill(mask.begin(), mask.begin() + k, 1);
        // std::prev_permutation walks all k-of-m selections.
        do {
            NodeSet Z;
            for (int i = 0; i < m; ++i)
                if (mask[i]) Z.insert(candidates[i]);
            if (is_dsep(g, S, T, Z)) return k;
        } while (std::prev_permutation(mask.begin(), mask.end()));
    }
    throw ArgumentError("min_dsep_size_brute: no latent separator exists for this query");
}

ExactOracle::ExactOracle(HierGraph g) : g_(std::move(g)) { g_.check_well_formed(); }

int ExactOracle::query(const std::vector<int>& S, const std::vector<int>& T) {
    std::vector<int> s = S, t = T;
    std::sort(s.begin(), s.end());
    std::sort(t.begin(), t.end());
    if (t < s) std::swap(s, t);  // r(S,T) = r(T,S)
    const auto key = std::make_pair(s, t);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;

    NodeSet ns, nt;
    for (int i : s) ns.insert(g_.measured_id(i));
    for (int i : t) nt.insert(g_.measured_id(i));
    const int r = min_dsep_size(g_, ns, nt);
    cache_.emplace(key, r);
    return r;
}

}  // namespace lhcm
