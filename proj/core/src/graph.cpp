#include "ugt/graph.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

namespace ugt {

Graph::Graph(NodeId n_nodes, std::vector<std::pair<NodeId, NodeId>> edges)
    : n_nodes_(n_nodes) {
    std::vector<std::pair<NodeId, NodeId>> dir;
    dir.reserve(edges.size() * 2);
    for (auto [u, v] : edges) {
        if (u == v) continue; // self loop
        if (u >= n_nodes || v >= n_nodes)
            throw DataError("edge endpoint out of range: " + std::to_string(std::max(u, v)));
        dir.emplace_back(u, v);
        dir.emplace_back(v, u);
    }
    std::sort(dir.begin(), dir.end());
    dir.erase(std::unique(dir.begin(), dir.end()), dir.end());

    offsets_.assign(n_nodes_ + 1, 0);
    targets_.resize(dir.size());
    for (auto& [u, v] : dir) offsets_[u + 1]++;
    for (NodeId v = 0; v < n_nodes_; ++v) offsets_[v + 1] += offsets_[v];
    std::size_t i = 0;
    for (auto& [u, v] : dir) targets_[i++] = v;
}

std::size_t Graph::max_degree() const {
    std::size_t m = 0;
    for (NodeId v = 0; v < n_nodes_; ++v) m = std::max(m, degree(v));
    return m;
}

bool Graph::has_edge(NodeId u, NodeId v) const {
    return std::binary_search(neighbors_begin(u), neighbors_end(u), v);
}

void Graph::validate() const {
    if (offsets_.size() != std::size_t(n_nodes_) + 1 || offsets_[0] != 0)
        throw DataError("graph: bad offsets");
    if (offsets_[n_nodes_] != targets_.size()) throw DataError("graph: offsets/targets mismatch");
    for (NodeId v = 0; v < n_nodes_; ++v) {
        if (offsets_[v] > offsets_[v + 1]) throw DataError("graph: offsets not monotone");
        for (std::size_t i = offsets_[v]; i < offsets_[v + 1]; ++i) {
            NodeId u = targets_[i];
            if (u >= n_nodes_) throw DataError("graph: target out of range");
            if (u == v) throw DataError("graph: self loop");
            if (i > offsets_[v] && targets_[i - 1] >= u)
                throw DataError("graph: neighbor list not strictly ascending");
            if (!has_edge(u, v)) throw DataError("graph: asymmetric edge");
        }
    }
}

Graph Graph::permuted(const std::vector<NodeId>& perm) const {
    std::vector<std::pair<NodeId, NodeId>> edges;
    edges.reserve(n_edges());
    for (NodeId v = 0; v < n_nodes_; ++v)
        for (auto it = neighbors_begin(v); it != neighbors_end(v); ++it)
            if (v < *it) edges.emplace_back(perm[v], perm[*it]);
    return Graph(n_nodes_, std::move(edges));
}

std::vector<std::pair<NodeId, NodeId>> Graph::edge_list() const {
    std::vector<std::pair<NodeId, NodeId>> edges;
    edges.reserve(n_edges());
    for (NodeId v = 0; v < n_nodes_; ++v)
        for (auto it = neighbors_begin(v); it != neighbors_end(v); ++it)
            if (v < *it) edges.emplace_back(v, *it);
    return edges;
}

namespace {

bool parse_u64(std::string_view tok, std::uint64_t& out) {
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return ec == std::errc() && p == tok.data() + tok.size();
}

} // namespace

Graph parse_edge_list(const std::string& text, const std::string& origin) {
    std::vector<std::pair<std::uint64_t, std::uint64_t>> raw;
    std::uint64_t min_id = UINT64_MAX, max_id = 0;
    std::size_t line_no = 0;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ls(line);
        std::vector<std::string> toks;
        std::string t;
        while (ls >> t) toks.push_back(t);
        if (toks.empty()) continue;
        std::uint64_t u, v;
        if (toks.size() != 2 || !parse_u64(toks[0], u) || !parse_u64(toks[1], v))
            throw DataError(origin + ":" + std::to_string(line_no) + ": malformed edge line");
        raw.emplace_back(u, v);
        min_id = std::min({min_id, u, v});
        max_id = std::max({max_id, u, v});
    }
    if (raw.empty()) throw DataError(origin + ": no edges found");

    std::uint64_t shift = (min_id >= 1) ? 1 : 0; // 1-based file detected
    std::vector<std::pair<NodeId, NodeId>> edges;
    edges.reserve(raw.size());
    for (auto [u, v] : raw)
        edges.emplace_back(static_cast<NodeId>(u - shift), static_cast<NodeId>(v - shift));
    return Graph(static_cast<NodeId>(max_id - shift + 1), std::move(edges));
}

Graph load_edge_list(const std::string& path) {
    return parse_edge_list(read_text_file(path), path);
}

namespace {

std::vector<std::string> split_cells(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',' || c == '\t') {
            cells.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    cells.push_back(cur);
    for (auto& s : cells) {
        std::size_t b = s.find_first_not_of(" \r\n");
        std::size_t e = s.find_last_not_of(" \r\n");
        s = (b == std::string::npos) ? std::string() : s.substr(b, e - b + 1);
    }
    return cells;
}

bool parse_double(const std::string& tok, double& out) {
    try {
        std::size_t pos = 0;
        out = std::stod(tok, &pos);
        return pos == tok.size();
    } catch (...) {
        return false;
    }
}

} // namespace

NodeFeatures load_features(const std::string& path, const Graph& g) {
    std::istringstream in(read_text_file(path));
    std::string line;
    std::size_t line_no = 0, dim = 0;
    std::vector<std::pair<NodeId, std::vector<double>>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        auto cells = split_cells(line);
        if (cells.empty() || (cells.size() == 1 && cells[0].empty())) continue;
        std::uint64_t id;
        if (!parse_u64(cells[0], id)) {
            if (line_no == 1) continue; // header row
            throw DataError(path + ":" + std::to_string(line_no) + ": non-numeric node id");
        }
        if (id >= g.n_nodes())
            throw DataError(path + ":" + std::to_string(line_no) + ": node id out of range");
        std::vector<double> feats;
        feats.reserve(cells.size() - 1);
        for (std::size_t i = 1; i < cells.size(); ++i) {
            double x;
            if (!parse_double(cells[i], x))
                throw DataError(path + ":" + std::to_string(line_no) + ": non-numeric cell");
            feats.push_back(x);
        }
        if (dim == 0) dim = feats.size();
        if (feats.size() != dim)
            throw DataError(path + ":" + std::to_string(line_no) + ": inconsistent feature width");
        rows.emplace_back(static_cast<NodeId>(id), std::move(feats));
    }
    if (dim == 0) throw DataError(path + ": no feature rows");
    NodeFeatures nf;
    nf.dim = dim;
    nf.matrix.assign(std::size_t(g.n_nodes()) * dim, 0.0);
    for (auto& [id, feats] : rows)
        std::copy(feats.begin(), feats.end(), nf.matrix.begin() + std::size_t(id) * dim);
    return nf;
}

LabelSet load_labels(const std::string& path, const Graph& g) {
    std::istringstream in(read_text_file(path));
    std::string line;
    std::size_t line_no = 0;
    LabelSet ls;
    ls.labels.assign(g.n_nodes(), -1);
    std::int32_t max_label = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        // Accept tab, comma or whitespace separated pairs.
        for (char& c : line)
            if (c == ',' || c == '\t') c = ' ';
        std::istringstream lss(line);
        std::vector<std::string> toks;
        std::string t;
        while (lss >> t) toks.push_back(t);
        if (toks.empty()) continue;
        std::uint64_t id, lab;
        if (toks.size() != 2 || !parse_u64(toks[0], id) || !parse_u64(toks[1], lab)) {
            if (line_no == 1) continue; // header row
            throw DataError(path + ":" + std::to_string(line_no) + ": malformed label line");
        }
        if (id >= g.n_nodes())
            throw DataError(path + ":" + std::to_string(line_no) + ": node id out of range");
        ls.labels[id] = static_cast<std::int32_t>(lab);
        max_label = std::max(max_label, ls.labels[id]);
    }
    ls.n_classes = max_label + 1;
    if (ls.n_classes <= 0) throw DataError(path + ": no labels found");
    return ls;
}

NodeFeatures degree_onehot_features(const Graph& g, std::size_t cap) {
    std::size_t maxd = std::min(g.max_degree(), cap);
    NodeFeatures nf;
    nf.dim = maxd + 1;
    nf.matrix.assign(std::size_t(g.n_nodes()) * nf.dim, 0.0);
    for (NodeId v = 0; v < g.n_nodes(); ++v) {
        std::size_t bucket = std::min(g.degree(v), maxd);
        nf.matrix[std::size_t(v) * nf.dim + bucket] = 1.0;
    }
    return nf;
}

std::vector<std::vector<NodeId>> hop_shells(const Graph& g, NodeId v, unsigned k) {
    std::vector<std::vector<NodeId>> shells(k);
    std::vector<int> dist(g.n_nodes(), -1);
    dist[v] = 0;
    std::deque<NodeId> q{v};
    while (!q.empty()) {
        NodeId u = q.front();
        q.pop_front();
        if (unsigned(dist[u]) >= k) continue;
        for (auto it = g.neighbors_begin(u); it != g.neighbors_end(u); ++it) {
            if (dist[*it] < 0) {
                dist[*it] = dist[u] + 1;
                shells[dist[*it] - 1].push_back(*it);
                q.push_back(*it);
            }
        }
    }
    for (auto& s : shells) std::sort(s.begin(), s.end());
    return shells;
}

std::vector<NodeId> khop_neighbors(const Graph& g, NodeId v, unsigned k) {
    auto shells = hop_shells(g, v, k);
    std::vector<NodeId> out;
    for (auto& s : shells) out.insert(out.end(), s.begin(), s.end());
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Split> make_splits(const LabelSet& labels, std::size_t n_splits,
                               double train_frac, double val_frac, std::uint64_t seed) {
    std::vector<NodeId> labeled;
    for (NodeId v = 0; v < labels.labels.size(); ++v)
        if (labels.labels[v] >= 0) labeled.push_back(v);
    if (labeled.empty()) throw DataError("make_splits: no labeled nodes");

    std::vector<Split> splits;
    Rng rng(seed);
    for (std::size_t s = 0; s < n_splits; ++s) {
        for (int attempt = 0; attempt < 1000; ++attempt) {
            Rng r = rng.fork(s * 1009 + attempt);
            std::vector<NodeId> order = labeled;
            r.shuffle(order);
            std::size_t n_train = static_cast<std::size_t>(order.size() * train_frac);
            std::size_t n_val = static_cast<std::size_t>(order.size() * val_frac);
            n_train = std::max<std::size_t>(1, n_train);
            Split sp;
            sp.train.assign(order.begin(), order.begin() + n_train);
            sp.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
            sp.test.assign(order.begin() + n_train + n_val, order.end());
            std::vector<bool> seen(static_cast<std::size_t>(labels.n_classes), false);
            for (NodeId v : sp.train) seen[labels.labels[v]] = true;
            bool all = true;
            for (std::int32_t c = 0; c < labels.n_classes; ++c)
                if (!seen[c]) all = false;
            if (!all) continue; // class missing from train: resample
            std::sort(sp.train.begin(), sp.train.end());
            std::sort(sp.val.begin(), sp.val.end());
            std::sort(sp.test.begin(), sp.test.end());
            splits.push_back(std::move(sp));
            break;
        }
        if (splits.size() != s + 1)
            throw DataError("make_splits: could not build a split covering all classes");
    }
    return splits;
}

} // namespace ugt
