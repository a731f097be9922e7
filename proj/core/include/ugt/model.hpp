#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "ugt/graph.hpp"
#include "ugt/spectral.hpp"
#include "ugt/struct_features.hpp"
#include "ugt/tensor.hpp"

namespace ugt {

struct UGTConfig {
    unsigned n_layers = 2;
    unsigned n_heads = 4;
    std::size_t hidden = 64;
    std::size_t k_pe = 8;
    unsigned k_id = 2;
    unsigned k_hop = 2;
    unsigned k_dtw = 2;
    unsigned p_steps = 3;
    unsigned top_m = 3;
    unsigned n_buckets = 0; // 0 = exact candidate scan
    bool use_virtual = true;
    bool use_identity = true;
    bool use_pe = true;
    bool use_D = true;
    bool use_M = true;
    double dropout = 0.0;

    // resolved choices exposed as ablation/alternative-reading flags
    bool eq3_score = false;            // plain exp(-sqrt(s_k)) scorer
    bool dtw_abs_cost = false;         // |a-b| DTW element cost
    bool per_component_inverse = false;
    bool combinatorial_laplacian = false;
    bool row_normalized_targets = false;
    bool per_step_projection = false;  // per-step affine before cosine
    bool dense_attention = false;      // all-pairs attention (iso protocol)
    std::size_t degree_onehot_cap = 64;
    double score_threshold = 0.0;

    std::size_t dk() const { return hidden / n_heads; }
    void validate() const;
};

/// Preprocessed per-graph artifacts every forward pass consumes.
struct Sidecars {
    std::size_t n = 0;
    std::size_t id_dim = 0;
    std::vector<double> identities; // n x id_dim
    VirtualEdgeSet virtual_edges;
    ContextSet context;
    LaplacianPE pe;
    TransitionStack transitions;
    std::vector<double> d_raw; // n x n
};

Sidecars build_sidecars(const Graph& g, const UGTConfig& cfg);

/// The UGT network. Parameters live in an embedded ParamStore; forward
/// passes lease them onto a caller-provided tape.
class UGTModel {
  public:
    /// n_classes/n_clusters of 0 skip the corresponding head's parameters.
    UGTModel(UGTConfig cfg, std::size_t d0, std::size_t n_classes, std::size_t n_clusters,
             std::uint64_t seed);

    const UGTConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    std::size_t d0() const { return d0_; }
    std::size_t n_classes() const { return n_classes_; }
    std::size_t n_clusters() const { return n_clusters_; }

    /// H^0 = W0 x + b0 (+ W1 lambda + b1 when use_pe). pe_override replaces
    /// the sidecar PE matrix (sign-flip augmentation during training).
    TRef input_encoding(Tape& tape, const NodeFeatures& x, const Sidecars& sc,
                        const std::vector<double>* pe_override = nullptr);

    /// One transformer layer (attention + identity injection + FFN).
    TRef layer_forward(Tape& tape, TRef h, unsigned layer, const Sidecars& sc,
                       bool training = false, Rng* dropout_rng = nullptr);

    /// Full forward: input encoding then n_layers transformer layers.
    TRef forward(Tape& tape, const NodeFeatures& x, const Sidecars& sc,
                 bool training = false, Rng* dropout_rng = nullptr,
                 const std::vector<double>* pe_override = nullptr);

    TRef classify_head(Tape& tape, TRef z);
    TRef graph_pool_head(Tape& tape, TRef z);
    TRef reconstruct_head(Tape& tape, TRef z);
    /// Soft assignment (n x n_clusters).
    TRef cluster_assignment(Tape& tape, TRef z);
    /// DMoN-style loss: -(1/2m) tr(C^T B C) + (sqrt(k)/n)||sum_i C_i||_F - 1.
    TRef cluster_loss(Tape& tape, TRef assignment, const Graph& g);

    /// Z^(p) score matrices for the SSL loss (cosine similarity of Z, with
    /// optional per-step projections).
    std::vector<TRef> ssl_score_matrices(Tape& tape, TRef z);

  private:
    TRef attention_block(Tape& tape, TRef h, unsigned layer, const Sidecars& sc);
    Tensor context_mask(const Sidecars& sc) const;

    UGTConfig cfg_;
    std::size_t d0_ = 0;
    std::size_t n_classes_ = 0;
    std::size_t n_clusters_ = 0;
    ParamStore params_;
};

} // namespace ugt
