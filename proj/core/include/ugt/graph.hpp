#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ugt/util.hpp"

namespace ugt {

using NodeId = std::uint32_t;

/// Immutable undirected graph in CSR form. Neighbor lists are sorted
/// ascending, symmetric, self-loop free and duplicate free.
class Graph {
  public:
    Graph() = default;
    /// Build from an undirected edge list; dedupes, drops self loops and
    /// keeps isolated nodes up to n_nodes-1.
    Graph(NodeId n_nodes, std::vector<std::pair<NodeId, NodeId>> edges);

    NodeId n_nodes() const { return n_nodes_; }
    std::size_t n_edges() const { return targets_.size() / 2; }
    std::size_t degree(NodeId v) const { return offsets_[v + 1] - offsets_[v]; }
    std::size_t max_degree() const;

    const NodeId* neighbors_begin(NodeId v) const { return targets_.data() + offsets_[v]; }
    const NodeId* neighbors_end(NodeId v) const { return targets_.data() + offsets_[v + 1]; }
    bool has_edge(NodeId u, NodeId v) const;

    const std::vector<std::size_t>& offsets() const { return offsets_; }
    const std::vector<NodeId>& targets() const { return targets_; }

    /// Re-checks all structural invariants; throws DataError on violation.
    void validate() const;

    /// Graph with node v relabeled to perm[v]; used by equivariance tests.
    Graph permuted(const std::vector<NodeId>& perm) const;
    std::vector<std::pair<NodeId, NodeId>> edge_list() const;

  private:
    NodeId n_nodes_ = 0;
    std::vector<std::size_t> offsets_{0};
    std::vector<NodeId> targets_;
};

struct NodeFeatures {
    std::vector<double> matrix; // row-major n_nodes x dim
    std::size_t dim = 0;

    double at(NodeId v, std::size_t f) const { return matrix[v * dim + f]; }
};

struct LabelSet {
    std::vector<std::int32_t> labels; // -1 = unlabeled
    std::int32_t n_classes = 0;
};

struct Split {
    std::vector<NodeId> train, val, test;
};

struct DatasetBundle {
    Graph graph;
    NodeFeatures features;
    std::optional<LabelSet> labels;
    std::vector<Split> splits;
};

/// Parse a whitespace-separated "u v" edge list ('#' comments allowed).
/// 1-based ids are detected from the minimum observed id and shifted down.
Graph load_edge_list(const std::string& path);
Graph parse_edge_list(const std::string& text, const std::string& origin);

/// CSV rows "node_id, f1, ..., fd" (optional header). Missing nodes get zero
/// rows. Throws DataError on non-numeric cells or out-of-range ids.
NodeFeatures load_features(const std::string& path, const Graph& g);

/// Two-column "node_id <tab|comma|space> class". Missing nodes get -1.
LabelSet load_labels(const std::string& path, const Graph& g);

/// One-hot encoding of degree, bucketed at min(degree, cap).
NodeFeatures degree_onehot_features(const Graph& g, std::size_t cap = 64);

/// All nodes u != v with BFS distance(v, u) <= k, ascending.
std::vector<NodeId> khop_neighbors(const Graph& g, NodeId v, unsigned k);

/// Shells of nodes at exactly distance 1..k (disjoint; empty shells allowed).
std::vector<std::vector<NodeId>> hop_shells(const Graph& g, NodeId v, unsigned k);

/// Seeded uniform train/val/test splits over labeled nodes (resampled until
/// every class appears in train). Ratios must sum to <= 1.
std::vector<Split> make_splits(const LabelSet& labels, std::size_t n_splits,
                               double train_frac, double val_frac, std::uint64_t seed);

} // namespace ugt
