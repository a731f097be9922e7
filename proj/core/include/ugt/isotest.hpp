#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ugt/graph6.hpp"
#include "ugt/model.hpp"

namespace ugt {

struct DistinguishReport {
    std::string corpus;
    std::size_t n_graphs = 0;
    std::size_t n_comparisons = 0;
    std::size_t n_undistinguished = 0;
    double tolerance = 1e-6;
    std::uint64_t seed = 7;
    std::vector<std::pair<std::size_t, std::size_t>> undistinguished_pairs;
};

/// Whole-graph fingerprint: sum-pooled final embeddings concatenated with
/// the sorted per-node embedding norms. Untrained model with seed-fixed
/// weights, f64, dense attention, sign-canonicalized PE, no flip
/// augmentation. d0 fixes the degree-one-hot width (shared across a corpus).
std::vector<double> embed_graph(const Graph& g, const UGTConfig& cfg, std::uint64_t seed,
                                std::size_t d0);

/// Relative L-infinity distance with absolute floor 1e-9.
double fingerprint_distance(const std::vector<double>& a, const std::vector<double>& b);

/// Pairs with relative L-inf distance below tolerance are undistinguished.
/// All unordered pairs are counted as comparisons; fingerprints of graphs
/// with different node counts never collide. Candidate pruning sorts by the
/// first fingerprint component and scans a window, which is exact for the
/// L-inf metric.
DistinguishReport count_undistinguished(const GraphCorpus& corpus, const UGTConfig& cfg,
                                        double tolerance, std::uint64_t seed);

/// 1-WL color refinement to stabilization; returns the canonical sorted
/// color histogram signature. Equal signatures = 1-WL equivalent.
std::vector<std::uint64_t> wl1_signature(const Graph& g);

/// Built-in non-isomorphic 1-WL-equivalent pair (10 nodes, 11 edges each).
Graph make_decalin();        // two 6-cycles sharing an edge
Graph make_bicyclopentyl();  // two 5-cycles joined by a bridge

/// All connected graphs on n nodes (3 <= n <= 8) up to isomorphism, by
/// canonical-parent augmentation. Reference corpora for expressivity runs.
std::vector<Graph> generate_connected_graphs(unsigned n);

} // namespace ugt
