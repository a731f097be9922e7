#pragma once

#include <vector>

#include "ugt/graph.hpp"

namespace ugt {

/// Ordered (ascending) degree sequences per hop shell 1..k. Hop 0 is the
/// node's own degree and is stored separately by callers.
using DegreeSequence = std::vector<double>;

struct DegreeSequences {
    unsigned k = 0;
    // seq[v][h] = sorted degrees of nodes in hop shell h+1 of v.
    std::vector<std::vector<DegreeSequence>> per_node;
};

DegreeSequences build_degree_sequences(const Graph& g, unsigned k);

enum class DtwCost { Ratio, Absolute };

/// Classic DTW over two non-empty sequences. Default element cost is the
/// struc2vec ratio max(a,b)/min(a,b) - 1 with degree-0 entries guarded to 1.
double dtw_distance(const DegreeSequence& a, const DegreeSequence& b,
                    DtwCost cost = DtwCost::Ratio);

/// s_k of two nodes: sum over hops 0..k of the DTW distance between their
/// hop-h degree sequences. An empty shell contributes as the sequence [0]
/// (guarded to 1 inside the ratio cost) when the other side is non-empty.
double structural_distance_scalar(const DegreeSequences& seqs, const Graph& g,
                                  NodeId v_i, NodeId v_j, unsigned k_dtw,
                                  DtwCost cost = DtwCost::Ratio);

/// Similarity score. Boosted form adds exp(-1/sqrt(d_i+d_j)); the plain
/// variant exp(-sqrt(s_k)) sits behind `boosted=false`.
double similarity_score(double s_k, std::size_t d_i, std::size_t d_j, bool boosted = true);

struct VirtualEdge {
    NodeId peer;
    double score;
};

struct VirtualEdgeSet {
    unsigned k_dtw = 0;
    unsigned top_m = 0;
    unsigned n_buckets = 0; // 0 = exact all-pairs candidates
    std::vector<std::vector<VirtualEdge>> per_node; // sorted by peer id
    std::size_t total_edges() const;
};

struct VirtualEdgeParams {
    unsigned k_dtw = 2;
    unsigned top_m = 3;
    /// 0 disables degree-bucket pruning (exact mode). Otherwise candidates
    /// are nodes within +-1 logarithmic degree bucket, buckets capped at
    /// n_buckets - 1.
    unsigned n_buckets = 0;
    double score_threshold = 0.0; // keep only pairs with S > threshold
    bool boosted_score = true;    // false = plain exp(-sqrt(s_k))
    DtwCost cost = DtwCost::Ratio;
};

/// Score non-adjacent candidate pairs, keep each node's top_m peers by
/// score, then symmetrize (an edge survives if either endpoint picked it).
VirtualEdgeSet build_virtual_edges(const Graph& g, const VirtualEdgeParams& params);

enum class ContextTag : std::uint8_t { KHop = 0, Virtual = 1, Both = 2 };

struct ContextEntry {
    NodeId peer;
    ContextTag tag;
};

struct ContextSet {
    unsigned k_hop = 0;
    std::vector<std::vector<ContextEntry>> per_node; // sorted by peer id
};

ContextSet build_context(const Graph& g, const VirtualEdgeSet& virt, unsigned k_hop);

/// Structural identity vector [d_v; (min,max,mean,std) per hop 1..k_id].
/// Population standard deviation; empty shells contribute four zeros.
std::vector<double> structural_identity(const Graph& g, NodeId v, unsigned k_id);

/// All identities stacked row-major, n x (1+4*k_id).
std::vector<double> structural_identity_matrix(const Graph& g, unsigned k_id);

/// Raw pairwise structural distance 1/(||I_i - I_j||_2 + eps), capped at
/// 1e6. The per_component flag implements the alternative reading of the
/// bracketed inverse (mean of per-component inverses).
double pairwise_identity_distance(const std::vector<double>& id_i,
                                  const std::vector<double>& id_j, double eps = 1e-6,
                                  bool per_component = false);

/// Dense n x n matrix of pairwise_identity_distance values (diagonal capped
/// like the zero-norm case).
std::vector<double> identity_distance_matrix(const std::vector<double>& identities,
                                             std::size_t n, std::size_t dim,
                                             double eps = 1e-6, bool per_component = false);

} // namespace ugt
