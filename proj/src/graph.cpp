#include "lhcm/graph.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace lhcm {

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

int HierGraph::num_latents() const {
    return std::accumulate(layer_sizes.begin(), layer_sizes.end(), 0);
}

int HierGraph::latent_id(int layer, int index) const {
    int id = 0;
    for (int l = 0; l < layer; ++l) id += layer_sizes[l];
    return id + index;
}

int HierGraph::layer_of(int latent_global_id) const {
    int acc = 0;
    for (int l = 0; l < num_layers(); ++l) {
        acc += layer_sizes[l];
        if (latent_global_id < acc) return l;
    }
    throw ArgumentError("layer_of: id is not a latent: " + std::to_string(latent_global_id));
}

void HierGraph::check_well_formed() const {
    if (num_measured <= 0) throw StructuralError("num_measured must be positive");
    if (layer_sizes.empty()) throw StructuralError("at least one latent layer required");
    if (blocks.size() != layer_sizes.size())
        throw StructuralError("blocks count must equal layer count");
    for (int l = 0; l < num_layers(); ++l) {
        if (layer_sizes[l] <= 0) throw StructuralError("layer size must be positive");
        const int rows = layer_sizes[l];
        const int cols = (l + 1 < num_layers()) ? layer_sizes[l + 1] : num_measured;
        if (static_cast<int>(blocks[l].size()) != rows)
            throw StructuralError("block " + std::to_string(l) + " row count mismatch");
        for (const auto& row : blocks[l]) {
            if (static_cast<int>(row.size()) != cols)
                throw StructuralError("block " + std::to_string(l) + " column count mismatch");
            for (auto v : row)
                if (v != 0 && v != 1) throw StructuralError("block entries must be 0 or 1");
        }
    }
}

std::vector<int> HierGraph::parents(int id) const {
    std::vector<int> out;
    if (is_measured(id)) {
        const int j = id - num_latents();
        const int l = num_layers() - 1;
        for (int i = 0; i < layer_sizes[l]; ++i)
            if (blocks[l][i][j]) out.push_back(latent_id(l, i));
    } else {
        const int l = layer_of(id);
        if (l == 0) return out;
        const int j = id - latent_id(l, 0);
        for (int i = 0; i < layer_sizes[l - 1]; ++i)
            if (blocks[l - 1][i][j]) out.push_back(latent_id(l - 1, i));
    }
    return out;
}

std::vector<int> HierGraph::children(int id) const {
    std::vector<int> out;
    if (is_measured(id)) return out;
    const int l = layer_of(id);
    const int i = id - latent_id(l, 0);
    const int cols = (l + 1 < num_layers()) ? layer_sizes[l + 1] : num_measured;
    for (int j = 0; j < cols; ++j)
        if (blocks[l][i][j])
            out.push_back(l + 1 < num_layers() ? latent_id(l + 1, j) : measured_id(j));
    return out;
}

std::vector<std::vector<std::uint8_t>> HierGraph::full_adjacency() const {
    const int n = num_nodes();
    std::vector<std::vector<std::uint8_t>> adj(n, std::vector<std::uint8_t>(n, 0));
    for (int l = 0; l < num_layers(); ++l) {
        for (int i = 0; i < layer_sizes[l]; ++i) {
            const int src = latent_id(l, i);
            const int cols = (l + 1 < num_layers()) ? layer_sizes[l + 1] : num_measured;
            for (int j = 0; j < cols; ++j)
                if (blocks[l][i][j]) {
                    const int dst = (l + 1 < num_layers()) ? latent_id(l + 1, j) : measured_id(j);
                    adj[src][dst] = 1;
                }
        }
    }
    return adj;
}

int HierGraph::edge_count() const {
    int c = 0;
    for (const auto& b : blocks)
        for (const auto& row : b)
            for (auto v : row) c += v;
    return c;
}

Condition1Report validate_condition1(const HierGraph& g) {
    g.check_well_formed();
    Condition1Report rep;
    for (int l = 0; l < g.num_layers(); ++l) {
        const auto& block = g.blocks[l];
        const int rows = g.layer_sizes[l];
        const int cols = static_cast<int>(block[0].size());
        for (int i = 0; i < rows; ++i) {
            int row_sum = 0, pure = 0;
            for (int j = 0; j < cols; ++j) {
                if (!block[i][j]) continue;
                ++row_sum;
                bool shared = false;
                for (int k = 0; k < rows && !shared; ++k)
                    if (k != i && block[k][j]) shared = true;
                if (!shared) ++pure;
            }
            if (row_sum > 0 && pure < 2) {
                rep.ok = false;
                rep.violating.push_back(g.latent_id(l, i));
            }
        }
    }
    return rep;
}

std::vector<int> pure_children(const HierGraph& g, int node) {
    if (node < 0 || node >= g.num_nodes())
        throw ArgumentError("pure_children: unknown node " + std::to_string(node));
    std::vector<int> out;
    for (int c : g.children(node)) {
        if (g.parents(c).size() == 1) out.push_back(c);
    }
    return out;
}

std::vector<int> pure_measured_descendants(const HierGraph& g, int latent) {
    if (latent < 0 || latent >= g.num_latents())
        throw ArgumentError("pure_measured_descendants: not a latent: " + std::to_string(latent));
    std::vector<int> out;
    for (int c : pure_children(g, latent)) {
        if (g.is_measured(c)) {
            out.push_back(c - g.num_latents());
        } else {
            auto sub = pure_measured_descendants(g, c);
            out.insert(out.end(), sub.begin(), sub.end());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

HierGraph random_graph(int num_measured, int num_layers, std::uint64_t seed) {
    if (num_measured < 4) throw ArgumentError("random_graph: num_measured must be >= 4");
    if (num_layers < 1) throw ArgumentError("random_graph: num_layers must be >= 1");
    Rng rng(seed);

    // Pick layer sizes bottom-up; layer i needs room for two pure children
    // per latent in the layer above it.
    std::vector<int> sizes_bottom_up;
    int below = num_measured;
    for (int i = 1; i <= num_layers; ++i) {
        const int hi = below / 2;
        const int lo = 1 << (num_layers - i);
        if (lo > hi)
            throw FeasibilityError("random_graph: cannot fit " + std::to_string(num_layers) +
                                   " layers over " + std::to_string(num_measured) + " measured variables");
        std::uniform_int_distribution<int> dist(lo, hi);
        const int s = dist(rng);
        sizes_bottom_up.push_back(s);
        below = s;
    }

    HierGraph g;
    g.num_measured = num_measured;
    g.layer_sizes.assign(sizes_bottom_up.rbegin(), sizes_bottom_up.rend());
    g.blocks.resize(g.num_layers());

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int l = 0; l < g.num_layers(); ++l) {
        const int rows = g.layer_sizes[l];
        const int cols = (l + 1 < g.num_layers()) ? g.layer_sizes[l + 1] : num_measured;
        BinMatrix block(rows, BinRow(cols, 0));

        std::vector<int> child_order(cols);
        std::iota(child_order.begin(), child_order.end(), 0);
        std::shuffle(child_order.begin(), child_order.end(), rng);

        // Two dedicated pure children per parent.
        std::vector<std::uint8_t> dedicated(cols, 0);
        int next = 0;
        for (int i = 0; i < rows; ++i) {
            for (int k = 0; k < 2; ++k) {
                const int c = child_order[next++];
                block[i][c] = 1;
                dedicated[c] = 1;
            }
        }
        // Leftover children get one random parent each.
        std::uniform_int_distribution<int> pick_parent(0, rows - 1);
        for (; next < cols; ++next) block[pick_parent(rng)][child_order[next]] = 1;
        // Extra edges only into non-dedicated slots.
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j)
                if (!dedicated[j] && !block[i][j] && unit(rng) < 0.3) block[i][j] = 1;

        g.blocks[l] = std::move(block);
    }

    g.check_well_formed();
    if (!validate_condition1(g).ok)
        throw FeasibilityError("random_graph: generated graph violates Condition 1");
    return g;
}

namespace {

HierGraph pad_graph(const HierGraph& g, const std::vector<int>& sizes) {
    HierGraph out;
    out.num_measured = g.num_measured;
    out.layer_sizes = sizes;
    const int L = static_cast<int>(sizes.size());
    const int shift = L - g.num_layers();  // empty layers prepended on top
    out.blocks.resize(L);
    for (int l = 0; l < L; ++l) {
        const int rows = sizes[l];
        const int cols = (l + 1 < L) ? sizes[l + 1] : g.num_measured;
        BinMatrix block(rows, BinRow(cols, 0));
        const int gl = l - shift;
        if (gl >= 0) {
            for (int i = 0; i < g.layer_sizes[gl]; ++i)
                for (int j = 0; j < static_cast<int>(g.blocks[gl][i].size()); ++j)
                    block[i][j] = g.blocks[gl][i][j];
        }
        out.blocks[l] = std::move(block);
    }
    return out;
}

std::vector<std::vector<int>> all_perms(int n) {
    std::vector<int> p(n);
    std::iota(p.begin(), p.end(), 0);
    std::vector<std::vector<int>> out;
    do {
        out.push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
    return out;
}

// Hamming distance of block l with truth rows/cols read through the given
// permutations of est indices (perm[i] = est index matched to truth slot i).
int block_cost(const BinMatrix& truth, const BinMatrix& est,
               const std::vector<int>& row_perm, const std::vector<int>* col_perm) {
    int cost = 0;
    const int rows = static_cast<int>(truth.size());
    const int cols = rows ? static_cast<int>(truth[0].size()) : 0;
    for (int i = 0; i < rows; ++i) {
        const auto& er = est[row_perm[i]];
        for (int j = 0; j < cols; ++j) {
            const int ej = col_perm ? (*col_perm)[j] : j;
            cost += truth[i][j] != er[ej];
        }
    }
    return cost;
}

}  // namespace

HierGraph apply_relabeling(const HierGraph& g, const Relabeling& r) {
    if (r.layer_perms.size() != static_cast<std::size_t>(g.num_layers()))
        throw ArgumentError("apply_relabeling: layer count mismatch");
    HierGraph out = g;
    for (int l = 0; l < g.num_layers(); ++l) {
        const auto& rp = r.layer_perms[l];
        const std::vector<int>* cp = (l + 1 < g.num_layers()) ? &r.layer_perms[l + 1] : nullptr;
        const int cols = static_cast<int>(g.blocks[l][0].size());
        for (int i = 0; i < g.layer_sizes[l]; ++i)
            for (int j = 0; j < cols; ++j)
                out.blocks[l][i][j] = g.blocks[l][rp[i]][cp ? (*cp)[j] : j];
    }
    return out;
}

Metrics best_perm_shd_f1(const HierGraph& truth, const HierGraph& est) {
    const auto t0 = std::chrono::steady_clock::now();
    truth.check_well_formed();
    est.check_well_formed();
    if (truth.num_measured != est.num_measured)
        throw ArgumentError("best_perm_shd_f1: measured counts differ");

    const int L = std::max(truth.num_layers(), est.num_layers());
    std::vector<int> sizes(L, 0);
    for (int l = 0; l < L; ++l) {
        const int ts = l - (L - truth.num_layers());
        const int es = l - (L - est.num_layers());
        sizes[l] = std::max(ts >= 0 ? truth.layer_sizes[ts] : 0, es >= 0 ? est.layer_sizes[es] : 0);
        sizes[l] = std::max(sizes[l], 1);  // keep layers nonempty; extra slots are zero rows
    }
    const HierGraph tp = pad_graph(truth, sizes);
    const HierGraph ep = pad_graph(est, sizes);

    // Chain DP over per-layer permutations: block l couples layers l and l+1.
    std::vector<std::vector<std::vector<int>>> perms(L);
    for (int l = 0; l < L; ++l) perms[l] = all_perms(sizes[l]);

    std::vector<std::vector<int>> dp(L);
    std::vector<std::vector<int>> back(L);
    dp[0].assign(perms[0].size(), 0);
    for (int l = 0; l < L; ++l) {
        const bool last = (l + 1 == L);
        if (!last) {
            dp[l + 1].assign(perms[l + 1].size(), INT32_MAX);
            back[l + 1].assign(perms[l + 1].size(), 0);
        }
        for (std::size_t a = 0; a < perms[l].size(); ++a) {
            if (dp[l][a] == INT32_MAX) continue;
            if (last) {
                dp[l][a] += block_cost(tp.blocks[l], ep.blocks[l], perms[l][a], nullptr);
            } else {
                for (std::size_t b = 0; b < perms[l + 1].size(); ++b) {
                    const int c = dp[l][a] + block_cost(tp.blocks[l], ep.blocks[l], perms[l][a], &perms[l + 1][b]);
                    if (c < dp[l + 1][b]) {
                        dp[l + 1][b] = c;
                        back[l + 1][b] = static_cast<int>(a);
                    }
                }
            }
        }
    }

    int best = INT32_MAX, best_idx = 0;
    for (std::size_t a = 0; a < dp[L - 1].size(); ++a)
        if (dp[L - 1][a] < best) {
            best = dp[L - 1][a];
            best_idx = static_cast<int>(a);
        }

    Relabeling rel;
    rel.layer_perms.resize(L);
    int idx = best_idx;
    for (int l = L - 1; l >= 0; --l) {
        rel.layer_perms[l] = perms[l][idx];
        if (l > 0) idx = back[l][idx];
    }

    // F1 over directed edges of the full padded adjacency at the best match.
    const HierGraph er = apply_relabeling(ep, rel);
    const auto at = tp.full_adjacency();
    const auto ae = er.full_adjacency();
    int tp_edges = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < at.size(); ++i)
        for (std::size_t j = 0; j < at.size(); ++j) {
            if (at[i][j] && ae[i][j]) ++tp_edges;
            else if (!at[i][j] && ae[i][j]) ++fp;
            else if (at[i][j] && !ae[i][j]) ++fn;
        }

    Metrics m;
    m.shd = best;
    m.f1 = (2 * tp_edges + fp + fn) == 0 ? 1.0 : 2.0 * tp_edges / (2.0 * tp_edges + fp + fn);
    m.best_relabeling = std::move(rel);
    m.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return m;
}

HierGraph builtin_graph(const std::string& name) {
    HierGraph g;
    if (name == "fig5a") {
        g.num_measured = 4;
        g.layer_sizes = {1, 2};
        g.blocks = {{{1, 1}}, {{1, 1, 0, 0}, {0, 0, 1, 1}}};
    } else if (name == "fig5b") {
        g.num_measured = 6;
        g.layer_sizes = {1, 3};
        g.blocks = {{{1, 1, 1}}, {{1, 1, 0, 0, 0, 0}, {0, 0, 1, 1, 0, 0}, {0, 0, 0, 0, 1, 1}}};
    } else if (name == "fig5c") {
        g.num_measured = 5;
        g.layer_sizes = {1, 2};
        g.blocks = {{{1, 1}}, {{1, 1, 1, 0, 0}, {0, 0, 1, 1, 1}}};
    } else if (name == "fig5d") {
        g.num_measured = 7;
        g.layer_sizes = {1, 3};
        g.blocks = {{{1, 1, 0}},
                    {{1, 1, 0, 0, 0, 0, 1}, {0, 0, 1, 1, 0, 0, 1}, {0, 0, 0, 0, 1, 1, 1}}};
    } else {
        throw ArgumentError("unknown builtin graph: " + name);
    }
    g.check_well_formed();
    return g;
}

std::vector<std::string> builtin_names() { return {"fig5a", "fig5b", "fig5c", "fig5d"}; }

std::string graph_to_json(const HierGraph& g) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["num_measured"] = g.num_measured;
    j["layer_sizes"] = g.layer_sizes;
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : g.blocks) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& row : b) rows.push_back(std::vector<int>(row.begin(), row.end()));
        blocks.push_back(rows);
    }
    j["blocks"] = blocks;
    return j.dump(2) + "\n";
}

HierGraph graph_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("graph file is not valid JSON: ") + e.what());
    }
    if (!j.contains("format_version") || j["format_version"] != 1)
        throw ParseError("graph file: missing or unsupported format_version");
    HierGraph g;
    try {
        g.num_measured = j.at("num_measured").get<int>();
        g.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
        for (const auto& b : j.at("blocks")) {
            BinMatrix block;
            for (const auto& row : b) {
                BinRow r;
                for (const auto& v : row) r.push_back(static_cast<std::uint8_t>(v.get<int>()));
                block.push_back(std::move(r));
            }
            g.blocks.push_back(std::move(block));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("graph file: bad field: ") + e.what());
    }
    g.check_well_formed();
    return g;
}

void save_graph(const HierGraph& g, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw ParseError("cannot open for writing: " + path);
    f << graph_to_json(g);
}

HierGraph load_graph(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ParseError("cannot open graph file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return graph_from_json(ss.str());
}

std::uint64_t graph_hash(const HierGraph& g) { return fnv1a(graph_to_json(g)); }

}  // namespace lhcm
