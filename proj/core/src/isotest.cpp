#include "ugt/isotest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace ugt {

std::vector<double> embed_graph(const Graph& g, const UGTConfig& cfg, std::uint64_t seed,
                                std::size_t d0) {
    UGTConfig local = cfg;
    local.dense_attention = true;
    local.dropout = 0.0;
    local.k_pe = std::min<std::size_t>(local.k_pe, g.n_nodes() > 1 ? g.n_nodes() - 1 : 1);

    NodeFeatures feats;
    feats.dim = d0;
    feats.matrix.assign(std::size_t(g.n_nodes()) * d0, 0.0);
    for (NodeId v = 0; v < g.n_nodes(); ++v)
        feats.matrix[std::size_t(v) * d0 + std::min<std::size_t>(g.degree(v), d0 - 1)] = 1.0;

    Sidecars sc = build_sidecars(g, local);
    UGTModel model(local, d0, 0, 0, seed);
    Tape tape(false);
    TRef z = model.forward(tape, feats, sc, false, nullptr);
    const Tensor& Z = tape.value(z);

    std::vector<double> fp(Z.cols() + Z.rows(), 0.0);
    for (std::size_t i = 0; i < Z.rows(); ++i)
        for (std::size_t j = 0; j < Z.cols(); ++j) fp[j] += Z.at(i, j);
    std::vector<double> norms(Z.rows());
    for (std::size_t i = 0; i < Z.rows(); ++i) {
        double r2 = 0.0;
        for (std::size_t j = 0; j < Z.cols(); ++j) r2 += Z.at(i, j) * Z.at(i, j);
        norms[i] = std::sqrt(r2);
    }
    std::sort(norms.begin(), norms.end());
    std::copy(norms.begin(), norms.end(), fp.begin() + Z.cols());
    return fp;
}

double fingerprint_distance(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
    double diff = 0.0, scale = 1e-9;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff = std::max(diff, std::fabs(a[i] - b[i]));
        scale = std::max({scale, std::fabs(a[i]), std::fabs(b[i])});
    }
    return diff / scale;
}

DistinguishReport count_undistinguished(const GraphCorpus& corpus, const UGTConfig& cfg,
                                        double tolerance, std::uint64_t seed) {
    if (tolerance <= 0.0) throw ConfigError("count_undistinguished: tolerance must be > 0");
    DistinguishReport report;
    report.corpus = corpus.name;
    report.n_graphs = corpus.graphs.size();
    report.n_comparisons = corpus.graphs.size() * (corpus.graphs.size() - 1) / 2;
    report.tolerance = tolerance;
    report.seed = seed;

    std::size_t max_deg = 0;
    for (const auto& g : corpus.graphs) max_deg = std::max(max_deg, g.max_degree());
    const std::size_t d0 = std::min(max_deg, cfg.degree_onehot_cap) + 1;

    // bucket by node count; within a bucket sort by first fingerprint
    // component and scan a window (exact for relative L-inf)
    std::map<std::size_t, std::vector<std::size_t>> by_n;
    std::vector<std::vector<double>> fps(corpus.graphs.size());
    for (std::size_t i = 0; i < corpus.graphs.size(); ++i) {
        fps[i] = embed_graph(corpus.graphs[i], cfg, seed, d0);
        by_n[corpus.graphs[i].n_nodes()].push_back(i);
    }

    for (auto& [n, idx] : by_n) {
        double group_scale = 1e-9;
        for (std::size_t i : idx)
            for (double x : fps[i]) group_scale = std::max(group_scale, std::fabs(x));
        std::sort(idx.begin(), idx.end(),
                  [&](std::size_t a, std::size_t b) { return fps[a][0] < fps[b][0]; });
        double window = tolerance * group_scale;
        for (std::size_t a = 0; a < idx.size(); ++a) {
            for (std::size_t b = a + 1; b < idx.size(); ++b) {
                if (fps[idx[b]][0] - fps[idx[a]][0] > window) break;
                if (fingerprint_distance(fps[idx[a]], fps[idx[b]]) < tolerance) {
                    ++report.n_undistinguished;
                    report.undistinguished_pairs.emplace_back(std::min(idx[a], idx[b]),
                                                              std::max(idx[a], idx[b]));
                }
            }
        }
    }
    std::sort(report.undistinguished_pairs.begin(), report.undistinguished_pairs.end());
    return report;
}

namespace {

std::uint64_t fnv64(const std::vector<std::uint64_t>& words) {
    std::uint64_t h = 1469598103934665603ULL;
    for (std::uint64_t w : words)
        for (int b = 0; b < 8; ++b) {
            h ^= (w >> (8 * b)) & 0xff;
            h *= 1099511628211ULL;
        }
    return h;
}

} // namespace

std::vector<std::uint64_t> wl1_signature(const Graph& g) {
    std::vector<std::uint64_t> color(g.n_nodes());
    for (NodeId v = 0; v < g.n_nodes(); ++v) color[v] = g.degree(v);
    for (NodeId round = 0; round < g.n_nodes(); ++round) {
        std::vector<std::uint64_t> next(g.n_nodes());
        for (NodeId v = 0; v < g.n_nodes(); ++v) {
            std::vector<std::uint64_t> sig;
            sig.push_back(color[v]);
            for (auto it = g.neighbors_begin(v); it != g.neighbors_end(v); ++it)
                sig.push_back(color[*it]);
            std::sort(sig.begin() + 1, sig.end());
            next[v] = fnv64(sig);
        }
        color = std::move(next);
    }
    std::sort(color.begin(), color.end());
    return color;
}

Graph make_decalin() {
    // 6-cycle 0-1-2-3-4-5 fused with 4-5-6-7-8-9 along edge 4-5
    std::vector<std::pair<NodeId, NodeId>> e = {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 0},
                                                {5, 6}, {6, 7}, {7, 8}, {8, 9}, {9, 4}};
    return Graph(10, std::move(e));
}

Graph make_bicyclopentyl() {
    // 5-cycles 0-1-2-3-4 and 5-6-7-8-9 joined by bridge 0-5
    std::vector<std::pair<NodeId, NodeId>> e = {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 0},
                                                {5, 6}, {6, 7}, {7, 8}, {8, 9}, {9, 5},
                                                {0, 5}};
    return Graph(10, std::move(e));
}

// ---------------------------------------------------------------------------
// Small-graph canonical forms (n <= 8) and connected-graph generation.

namespace {

struct SmallGraph {
    unsigned n = 0;
    std::uint8_t row[8] = {0};
    bool adj(unsigned i, unsigned j) const { return (row[i] >> j) & 1; }
    void set(unsigned i, unsigned j) {
        row[i] |= std::uint8_t(1u << j);
        row[j] |= std::uint8_t(1u << i);
    }
};

std::uint64_t upper_bits(const SmallGraph& g, const std::array<int, 8>& order) {
    std::uint64_t bits = 0;
    int pos = 0;
    for (unsigned j = 1; j < g.n; ++j)
        for (unsigned i = 0; i < j; ++i) {
            bits = (bits << 1) | (g.adj(order[i], order[j]) ? 1 : 0);
            ++pos;
        }
    return bits;
}

void refine(const SmallGraph& g, std::vector<std::vector<int>>& cells) {
    bool changed = true;
    while (changed) {
        changed = false;
        int cell_of[8];
        for (std::size_t c = 0; c < cells.size(); ++c)
            for (int v : cells[c]) cell_of[v] = static_cast<int>(c);
        std::vector<std::vector<int>> next;
        for (auto& cell : cells) {
            if (cell.size() == 1) {
                next.push_back(cell);
                continue;
            }
            // signature: neighbor count per existing cell
            std::vector<std::pair<std::vector<int>, int>> sigs;
            for (int v : cell) {
                std::vector<int> s(cells.size(), 0);
                for (unsigned u = 0; u < g.n; ++u)
                    if (g.adj(v, u)) s[cell_of[u]]++;
                sigs.emplace_back(std::move(s), v);
            }
            std::sort(sigs.begin(), sigs.end());
            std::vector<int> group{sigs[0].second};
            for (std::size_t i = 1; i < sigs.size(); ++i) {
                if (sigs[i].first != sigs[i - 1].first) {
                    next.push_back(group);
                    group.clear();
                    changed = true;
                }
                group.push_back(sigs[i].second);
            }
            next.push_back(group);
        }
        cells = std::move(next);
    }
}

void canon_rec(const SmallGraph& g, std::vector<std::vector<int>> cells, std::uint64_t& best,
               bool& have) {
    refine(g, cells);
    std::size_t split = cells.size();
    for (std::size_t c = 0; c < cells.size(); ++c)
        if (cells[c].size() > 1) {
            split = c;
            break;
        }
    if (split == cells.size()) {
        std::array<int, 8> order{};
        for (std::size_t c = 0; c < cells.size(); ++c) order[c] = cells[c][0];
        std::uint64_t bits = upper_bits(g, order);
        if (!have || bits < best) {
            best = bits;
            have = true;
        }
        return;
    }
    for (int v : cells[split]) {
        std::vector<std::vector<int>> next(cells.begin(), cells.begin() + split);
        next.push_back({v});
        std::vector<int> rest;
        for (int u : cells[split])
            if (u != v) rest.push_back(u);
        next.push_back(rest);
        next.insert(next.end(), cells.begin() + split + 1, cells.end());
        canon_rec(g, std::move(next), best, have);
    }
}

std::uint64_t canon_key(const SmallGraph& g) {
    std::vector<std::vector<int>> cells(1);
    for (unsigned v = 0; v < g.n; ++v) cells[0].push_back(static_cast<int>(v));
    std::uint64_t best = 0;
    bool have = false;
    canon_rec(g, std::move(cells), best, have);
    return (std::uint64_t(g.n) << 56) | best;
}

bool small_connected(const SmallGraph& g) {
    if (g.n == 0) return false;
    std::uint8_t seen = 1;
    std::uint8_t frontier = 1;
    while (frontier) {
        std::uint8_t next = 0;
        for (unsigned v = 0; v < g.n; ++v)
            if (frontier & (1u << v)) next |= g.row[v];
        frontier = next & std::uint8_t(~seen);
        seen |= next;
    }
    return seen == ((1u << g.n) - 1);
}

} // namespace

std::vector<Graph> generate_connected_graphs(unsigned n) {
    if (n < 1 || n > 8) throw ConfigError("generate_connected_graphs: n must be in 1..8");
    // level-by-level augmentation with canonical-form dedup
    std::map<std::uint64_t, SmallGraph> level;
    SmallGraph k1;
    k1.n = 1;
    level.emplace(canon_key(k1), k1);
    for (unsigned sz = 2; sz <= n; ++sz) {
        std::map<std::uint64_t, SmallGraph> next;
        for (auto& [key, parent] : level) {
            for (unsigned mask = 0; mask < (1u << parent.n); ++mask) {
                SmallGraph child = parent;
                child.n = parent.n + 1;
                for (unsigned v = 0; v < parent.n; ++v)
                    if (mask & (1u << v)) child.set(parent.n, v);
                std::uint64_t ck = canon_key(child);
                next.emplace(ck, child);
            }
        }
        level = std::move(next);
    }
    std::vector<Graph> out;
    for (auto& [key, sg] : level) {
        if (!small_connected(sg)) continue;
        std::vector<std::pair<NodeId, NodeId>> edges;
        for (unsigned i = 0; i < sg.n; ++i)
            for (unsigned j = i + 1; j < sg.n; ++j)
                if (sg.adj(i, j)) edges.emplace_back(i, j);
        out.emplace_back(sg.n, std::move(edges));
    }
    return out;
}

} // namespace ugt
