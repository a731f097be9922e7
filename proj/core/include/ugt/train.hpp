#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ugt/graph.hpp"
#include "ugt/model.hpp"
#include "ugt/spectral.hpp"

namespace ugt {

struct PretrainConfig {
    double alpha = 1.0;
    double beta = 0.5;
    std::size_t neg_count = 1;
    double target_floor = 0.0;
    unsigned epochs = 100;
    double lr = 1e-3;
    std::uint64_t seed = 7;
};

struct FinetuneConfig {
    unsigned epochs = 400;
    unsigned patience = 50;
    double lr = 1e-2;
    std::size_t n_splits = 10;
    double train_frac = 0.8;
    double val_frac = 0.1;
    std::uint64_t seed = 7;
};

struct ClusterConfig {
    std::size_t n_clusters = 2;
    std::string mode = "end2end"; // or "kmeans"
    unsigned epochs = 300;
    double lr = 1e-2;
    unsigned restarts = 50; // k-means restarts
    std::uint64_t seed = 7;
};

struct MetricReport {
    std::string task;
    double accuracy_mean = 0.0;
    double accuracy_std = 0.0;
    std::vector<double> per_split_accuracy;
    double modularity = 0.0;
    double conductance = 0.0;
    std::vector<int> assignment;
    std::vector<std::vector<double>> loss_traces; // one per run
};

struct PretrainResult {
    std::vector<double> loss_trace;
    double best_loss = 0.0;
    bool aborted_non_finite = false;
};

/// Minimize alpha * sum_p ||A'(p) - Z(p)||_F^2 + beta * mean_i ||x_i-x̂_i||_2
/// with Adam. Keeps the best-loss parameters; restores them if the loss
/// goes non-finite and stops.
PretrainResult pretrain(const DatasetBundle& bundle, const Sidecars& sidecars,
                        UGTModel& model, const PretrainConfig& cfg);

/// Cross-entropy fine-tuning over seeded splits with early stopping on
/// validation accuracy. init_params, when given, re-initializes the model
/// before each split run (pretrained-init mode).
MetricReport finetune_node_classification(const DatasetBundle& bundle, const Sidecars& sidecars,
                                          UGTModel& model, const FinetuneConfig& cfg,
                                          const ParamStore* init_params = nullptr);

struct GraphDataset {
    std::vector<Graph> graphs;
    std::vector<std::int32_t> labels;
    std::int32_t n_classes = 0;
};

GraphDataset load_graph_dataset(const std::string& path);

MetricReport finetune_graph_classification(const GraphDataset& dataset, const UGTConfig& cfg,
                                           const FinetuneConfig& ft, std::uint64_t seed);

MetricReport cluster(const DatasetBundle& bundle, const Sidecars& sidecars, UGTModel& model,
                     const ClusterConfig& cfg);

/// Newman modularity of a hard partition (labels >= 0 per node).
double modularity_Q(const Graph& g, const std::vector<int>& partition);

/// Size-weighted average over clusters of cut / min(vol, 2m - vol).
/// A partition with a single cluster scores 0 by convention.
double conductance_C(const Graph& g, const std::vector<int>& partition);

/// Fraction of mask positions where pred matches truth. Empty mask errors.
double accuracy(const std::vector<std::int32_t>& pred, const std::vector<std::int32_t>& truth,
                const std::vector<NodeId>& mask);

struct KMeansResult {
    std::vector<int> assignment;
    std::vector<double> centroids; // k x dim
    double inertia = 0.0;
};

/// Lloyd's algorithm with k-means++ seeding and multiple restarts. Empty
/// clusters are re-seeded from the farthest point.
KMeansResult kmeans(const std::vector<double>& points, std::size_t n, std::size_t dim,
                    std::size_t k, unsigned restarts, std::uint64_t seed);

} // namespace ugt
