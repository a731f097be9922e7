#include "ugt/struct_features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ugt {

DegreeSequences build_degree_sequences(const Graph& g, unsigned k) {
    DegreeSequences out;
    out.k = k;
    out.per_node.resize(g.n_nodes());
    for (NodeId v = 0; v < g.n_nodes(); ++v) {
        auto shells = hop_shells(g, v, k);
        out.per_node[v].resize(k);
        for (unsigned h = 0; h < k; ++h) {
            auto& seq = out.per_node[v][h];
            seq.reserve(shells[h].size());
            for (NodeId u : shells[h]) seq.push_back(static_cast<double>(g.degree(u)));
            std::sort(seq.begin(), seq.end());
        }
    }
    return out;
}

namespace {

inline double elem_cost(double a, double b, DtwCost cost) {
    if (cost == DtwCost::Absolute) return std::fabs(a - b);
    double x = std::max(a, 1.0); // degree-0 guard
    double y = std::max(b, 1.0);
    return std::max(x, y) / std::min(x, y) - 1.0;
}

} // namespace

double dtw_distance(const DegreeSequence& a, const DegreeSequence& b, DtwCost cost) {
    const std::size_t n = a.size(), m = b.size();
    if (n == 0 || m == 0) throw DataError("dtw_distance: empty sequence");
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
    prev[0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = inf;
        for (std::size_t j = 1; j <= m; ++j) {
            double c = elem_cost(a[i - 1], b[j - 1], cost);
            cur[j] = c + std::min({prev[j], cur[j - 1], prev[j - 1]});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

double structural_distance_scalar(const DegreeSequences& seqs, const Graph& g,
                                  NodeId v_i, NodeId v_j, unsigned k_dtw, DtwCost cost) {
    static const DegreeSequence kEmptyShell{0.0};
    double total = dtw_distance({static_cast<double>(g.degree(v_i))},
                                {static_cast<double>(g.degree(v_j))}, cost);
    for (unsigned h = 0; h < k_dtw; ++h) {
        const auto& a = seqs.per_node[v_i][h];
        const auto& b = seqs.per_node[v_j][h];
        if (a.empty() && b.empty()) continue;
        total += dtw_distance(a.empty() ? kEmptyShell : a, b.empty() ? kEmptyShell : b, cost);
    }
    return total;
}

double similarity_score(double s_k, std::size_t d_i, std::size_t d_j, bool boosted) {
    double s = std::exp(-std::sqrt(s_k));
    if (boosted)
        s += std::exp(-1.0 / std::sqrt(static_cast<double>(d_i + d_j)));
    return s;
}

std::size_t VirtualEdgeSet::total_edges() const {
    std::size_t n = 0;
    for (auto& lst : per_node) n += lst.size();
    return n / 2;
}

namespace {

unsigned log_degree_bucket(std::size_t degree, unsigned n_buckets) {
    unsigned b = 0;
    std::size_t d = std::max<std::size_t>(degree, 1);
    while (d > 1) {
        d >>= 1;
        ++b;
    }
    return std::min(b, n_buckets - 1);
}

} // namespace

VirtualEdgeSet build_virtual_edges(const Graph& g, const VirtualEdgeParams& params) {
    VirtualEdgeSet out;
    out.k_dtw = params.k_dtw;
    out.top_m = params.top_m;
    out.n_buckets = params.n_buckets;
    out.per_node.resize(g.n_nodes());
    if (params.top_m == 0 || g.n_nodes() < 2) return out;

    DegreeSequences seqs = build_degree_sequences(g, params.k_dtw);

    std::vector<std::vector<NodeId>> bucket_members;
    std::vector<unsigned> bucket_of;
    if (params.n_buckets > 0) {
        bucket_of.resize(g.n_nodes());
        bucket_members.resize(params.n_buckets);
        for (NodeId v = 0; v < g.n_nodes(); ++v) {
            bucket_of[v] = log_degree_bucket(g.degree(v), params.n_buckets);
            bucket_members[bucket_of[v]].push_back(v);
        }
    }

    // Per-node selection of the top_m best-scoring non-adjacent peers.
    std::vector<std::vector<VirtualEdge>> picked(g.n_nodes());
    for (NodeId v = 0; v < g.n_nodes(); ++v) {
        std::vector<std::pair<double, NodeId>> scored; // (-score, peer) for sorting
        auto consider = [&](NodeId u) {
            if (u == v || g.has_edge(v, u)) return;
            double s_k = structural_distance_scalar(seqs, g, v, u, params.k_dtw, params.cost);
            double s = similarity_score(s_k, g.degree(v), g.degree(u), params.boosted_score);
            if (s > params.score_threshold) scored.emplace_back(-s, u);
        };
        if (params.n_buckets == 0) {
            for (NodeId u = 0; u < g.n_nodes(); ++u) consider(u);
        } else {
            unsigned b = bucket_of[v];
            for (int db = -1; db <= 1; ++db) {
                int nb = static_cast<int>(b) + db;
                if (nb < 0 || nb >= static_cast<int>(params.n_buckets)) continue;
                for (NodeId u : bucket_members[nb]) consider(u);
            }
        }
        // Highest score first; ties broken by ascending peer id.
        std::sort(scored.begin(), scored.end());
        std::size_t keep = std::min<std::size_t>(params.top_m, scored.size());
        for (std::size_t i = 0; i < keep; ++i)
            picked[v].push_back({scored[i].second, -scored[i].first});
    }

    // Symmetric closure: an edge is kept if selected by either endpoint.
    for (NodeId v = 0; v < g.n_nodes(); ++v) {
        for (auto& e : picked[v]) {
            out.per_node[v].push_back(e);
            bool mirrored = false;
            for (auto& back : picked[e.peer])
                if (back.peer == v) mirrored = true;
            if (!mirrored) out.per_node[e.peer].push_back({v, e.score});
        }
    }
    for (auto& lst : out.per_node)
        std::sort(lst.begin(), lst.end(),
                  [](const VirtualEdge& a, const VirtualEdge& b) { return a.peer < b.peer; });
    return out;
}

ContextSet build_context(const Graph& g, const VirtualEdgeSet& virt, unsigned k_hop) {
    ContextSet out;
    out.k_hop = k_hop;
    out.per_node.resize(g.n_nodes());
    for (NodeId v = 0; v < g.n_nodes(); ++v) {
        auto khop = khop_neighbors(g, v, k_hop);
        auto& ctx = out.per_node[v];
        ctx.reserve(khop.size() + virt.per_node[v].size());
        for (NodeId u : khop) ctx.push_back({u, ContextTag::KHop});
        for (auto& e : virt.per_node[v]) {
            auto it = std::lower_bound(ctx.begin(), ctx.end(), e.peer,
                                       [](const ContextEntry& c, NodeId u) { return c.peer < u; });
            if (it != ctx.end() && it->peer == e.peer)
                it->tag = ContextTag::Both;
            else
                ctx.insert(it, {e.peer, ContextTag::Virtual});
        }
    }
    return out;
}

std::vector<double> structural_identity(const Graph& g, NodeId v, unsigned k_id) {
    std::vector<double> id;
    id.reserve(1 + 4 * k_id);
    id.push_back(static_cast<double>(g.degree(v)));
    auto shells = hop_shells(g, v, k_id);
    for (unsigned h = 0; h < k_id; ++h) {
        if (shells[h].empty()) {
            id.insert(id.end(), {0.0, 0.0, 0.0, 0.0});
            continue;
        }
        double mn = std::numeric_limits<double>::infinity(), mx = 0.0, sum = 0.0;
        for (NodeId u : shells[h]) {
            double d = static_cast<double>(g.degree(u));
            mn = std::min(mn, d);
            mx = std::max(mx, d);
            sum += d;
        }
        double mean = sum / shells[h].size();
        double var = 0.0;
        for (NodeId u : shells[h]) {
            double d = static_cast<double>(g.degree(u)) - mean;
            var += d * d;
        }
        var /= shells[h].size();
        id.insert(id.end(), {mn, mx, mean, std::sqrt(var)});
    }
    return id;
}

std::vector<double> structural_identity_matrix(const Graph& g, unsigned k_id) {
    std::size_t dim = 1 + 4 * std::size_t(k_id);
    std::vector<double> mat(g.n_nodes() * dim);
    for (NodeId v = 0; v < g.n_nodes(); ++v) {
        auto id = structural_identity(g, v, k_id);
        std::copy(id.begin(), id.end(), mat.begin() + std::size_t(v) * dim);
    }
    return mat;
}

double pairwise_identity_distance(const std::vector<double>& id_i,
                                  const std::vector<double>& id_j, double eps,
                                  bool per_component) {
    if (id_i.size() != id_j.size())
        throw DataError("pairwise_identity_distance: identity length mismatch");
    constexpr double kCap = 1e6;
    if (per_component) {
        double acc = 0.0;
        for (std::size_t q = 0; q < id_i.size(); ++q)
            acc += 1.0 / (std::fabs(id_i[q] - id_j[q]) + eps);
        return std::min(acc / id_i.size(), kCap);
    }
    double norm2 = 0.0;
    for (std::size_t q = 0; q < id_i.size(); ++q) {
        double d = id_i[q] - id_j[q];
        norm2 += d * d;
    }
    return std::min(1.0 / (std::sqrt(norm2) + eps), kCap);
}

std::vector<double> identity_distance_matrix(const std::vector<double>& identities,
                                             std::size_t n, std::size_t dim, double eps,
                                             bool per_component) {
    std::vector<double> out(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> id_i(identities.begin() + i * dim, identities.begin() + (i + 1) * dim);
        for (std::size_t j = i; j < n; ++j) {
            std::vector<double> id_j(identities.begin() + j * dim,
                                     identities.begin() + (j + 1) * dim);
            double d = pairwise_identity_distance(id_i, id_j, eps, per_component);
            out[i * n + j] = d;
            out[j * n + i] = d;
        }
    }
    return out;
}

} // namespace ugt
