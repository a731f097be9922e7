#include "ugt/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace ugt {

namespace {

std::vector<std::int32_t> argmax_rows(const Tensor& t) {
    std::vector<std::int32_t> out(t.rows());
    for (std::size_t i = 0; i < t.rows(); ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < t.cols(); ++j)
            if (t.at(i, j) > t.at(i, best)) best = j;
        out[i] = static_cast<std::int32_t>(best);
    }
    return out;
}

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

double std_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double m = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / v.size());
}

} // namespace

PretrainResult pretrain(const DatasetBundle& bundle, const Sidecars& sidecars, UGTModel& model,
                        const PretrainConfig& cfg) {
    if (cfg.alpha < 0.0 || cfg.beta < 0.0)
        throw ConfigError("pretrain: alpha and beta must be >= 0");
    const UGTConfig& mc = model.config();
    LogTargetStack targets = log_scale_targets(sidecars.transitions, cfg.neg_count,
                                               cfg.target_floor, mc.row_normalized_targets);

    AdamState adam({cfg.lr});
    Rng rng(cfg.seed);
    PretrainResult result;
    ParamStore best;
    double best_loss = std::numeric_limits<double>::infinity();

    auto snapshot = [&](ParamStore& dst) {
        dst = ParamStore();
        for (const auto& name : model.params().names()) dst.add(name, model.params().at(name));
    };

    for (unsigned epoch = 0; epoch < cfg.epochs; ++epoch) {
        Tape tape(false);
        Rng drop_rng = rng.fork(epoch * 2 + 1);
        std::vector<double> flipped;
        const std::vector<double>* pe_override = nullptr;
        if (mc.use_pe) {
            flipped = sign_flip(sidecars.pe, cfg.seed ^ (0x9e37u + epoch));
            pe_override = &flipped;
        }
        TRef z = model.forward(tape, bundle.features, sidecars, true, &drop_rng, pe_override);

        TRef loss = tape.constant(Tensor::scalar(0.0));
        if (cfg.alpha > 0.0) {
            auto scores = model.ssl_score_matrices(tape, z);
            TRef l1 = tape.constant(Tensor::scalar(0.0));
            for (unsigned s = 0; s < mc.p_steps; ++s) {
                TRef target = tape.constant(
                    Tensor::matrix(sidecars.n, sidecars.n, targets.mats[s]));
                l1 = tape.add(l1, tape.frobenius_sq(tape.sub(target, scores[s])));
            }
            loss = tape.add(loss, tape.scale(l1, cfg.alpha));
        }
        if (cfg.beta > 0.0) {
            TRef xhat = model.reconstruct_head(tape, z);
            TRef x = tape.constant(
                Tensor::matrix(sidecars.n, bundle.features.dim, bundle.features.matrix));
            loss = tape.add(loss, tape.scale(tape.mean_row_norm(tape.sub(x, xhat)), cfg.beta));
        }

        double lval = tape.value(loss).item();
        if (!std::isfinite(lval)) {
            if (best_loss < std::numeric_limits<double>::infinity()) {
                for (const auto& name : best.names()) model.params().at(name) = best.at(name);
            }
            result.aborted_non_finite = true;
            break;
        }
        result.loss_trace.push_back(lval);
        if (lval < best_loss) {
            best_loss = lval;
            snapshot(best);
        }

        model.params().zero_grads();
        tape.backward(loss);
        adam.step(model.params());
    }
    if (best_loss < std::numeric_limits<double>::infinity()) {
        for (const auto& name : best.names()) model.params().at(name) = best.at(name);
        result.best_loss = best_loss;
    }
    return result;
}

namespace {

double eval_accuracy(UGTModel& model, const DatasetBundle& bundle, const Sidecars& sidecars,
                     const std::vector<NodeId>& mask) {
    Tape tape(false);
    TRef z = model.forward(tape, bundle.features, sidecars, false, nullptr);
    TRef logits = model.classify_head(tape, z);
    return accuracy(argmax_rows(tape.value(logits)), bundle.labels->labels, mask);
}

void copy_matching_params(const ParamStore& src, ParamStore& dst) {
    for (const auto& name : src.names()) {
        if (!dst.contains(name)) continue;
        if (dst.at(name).shape != src.at(name).shape) continue;
        dst.at(name) = src.at(name);
    }
}

} // namespace

MetricReport finetune_node_classification(const DatasetBundle& bundle, const Sidecars& sidecars,
                                          UGTModel& model, const FinetuneConfig& cfg,
                                          const ParamStore* init_params) {
    if (!bundle.labels) throw DataError("finetune: dataset has no labels");
    const LabelSet& labels = *bundle.labels;

    std::vector<Split> splits = bundle.splits;
    if (splits.empty())
        splits = make_splits(labels, cfg.n_splits, cfg.train_frac, cfg.val_frac, cfg.seed);

    MetricReport report;
    report.task = "node_classification";

    for (std::size_t s = 0; s < splits.size(); ++s) {
        const Split& split = splits[s];
        UGTModel run_model(model.config(), model.d0(), model.n_classes(), model.n_clusters(),
                           cfg.seed + 101 * s);
        if (init_params) copy_matching_params(*init_params, run_model.params());

        AdamState adam({cfg.lr});
        Rng rng(cfg.seed + 31 * s);
        std::vector<std::int32_t> train_labels;
        std::vector<std::size_t> train_rows;
        for (NodeId v : split.train) {
            train_rows.push_back(v);
            train_labels.push_back(labels.labels[v]);
        }

        double best_val = -1.0;
        unsigned since_best = 0;
        ParamStore best;
        auto snapshot = [&]() {
            best = ParamStore();
            for (const auto& name : run_model.params().names())
                best.add(name, run_model.params().at(name));
        };
        snapshot();

        std::vector<double> trace;
        for (unsigned epoch = 0; epoch < cfg.epochs; ++epoch) {
            Tape tape(false);
            Rng drop_rng = rng.fork(epoch);
            std::vector<double> flipped;
            const std::vector<double>* pe_override = nullptr;
            if (run_model.config().use_pe) {
                flipped = sign_flip(sidecars.pe, cfg.seed ^ (1234567u + epoch + 99991 * s));
                pe_override = &flipped;
            }
            TRef z = run_model.forward(tape, bundle.features, sidecars, true, &drop_rng,
                                       pe_override);
            TRef logits = run_model.classify_head(tape, z);
            TRef train_logits = tape.gather_rows(logits, train_rows);
            TRef loss = tape.cross_entropy(train_logits, train_labels);
            double lval = tape.value(loss).item();
            if (!std::isfinite(lval)) break;
            trace.push_back(lval);

            run_model.params().zero_grads();
            tape.backward(loss);
            adam.step(run_model.params());

            double val_acc = split.val.empty()
                                 ? -eval_accuracy(run_model, bundle, sidecars, split.train)
                                 : eval_accuracy(run_model, bundle, sidecars, split.val);
            if (val_acc > best_val) {
                best_val = val_acc;
                snapshot();
                since_best = 0;
            } else if (++since_best > cfg.patience) {
                break;
            }
        }
        for (const auto& name : best.names()) run_model.params().at(name) = best.at(name);
        double test_acc = eval_accuracy(run_model, bundle, sidecars,
                                        split.test.empty() ? split.train : split.test);
        report.per_split_accuracy.push_back(test_acc);
        report.loss_traces.push_back(std::move(trace));
    }
    report.accuracy_mean = mean_of(report.per_split_accuracy);
    report.accuracy_std = std_of(report.per_split_accuracy);
    return report;
}

GraphDataset load_graph_dataset(const std::string& path) {
    std::istringstream in(read_text_file(path));
    GraphDataset ds;
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::pair<NodeId, NodeId>> edges;
    NodeId max_id = 0;
    std::int32_t label = -1;
    bool open = false;
    auto flush = [&]() {
        if (!open) return;
        ds.graphs.emplace_back(max_id + 1, edges);
        ds.labels.push_back(label);
        ds.n_classes = std::max(ds.n_classes, label + 1);
        edges.clear();
        max_id = 0;
        open = false;
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "g") {
            flush();
            if (!(ls >> label) || label < 0)
                throw DataError(path + ":" + std::to_string(line_no) + ": bad graph header");
            open = true;
        } else {
            if (!open)
                throw DataError(path + ":" + std::to_string(line_no) + ": edge before header");
            NodeId u, v;
            try {
                u = static_cast<NodeId>(std::stoul(tok));
            } catch (...) {
                throw DataError(path + ":" + std::to_string(line_no) + ": bad edge line");
            }
            if (!(ls >> v))
                throw DataError(path + ":" + std::to_string(line_no) + ": bad edge line");
            edges.emplace_back(u, v);
            max_id = std::max({max_id, u, v});
        }
    }
    flush();
    if (ds.graphs.empty()) throw DataError(path + ": no graphs found");
    return ds;
}

MetricReport finetune_graph_classification(const GraphDataset& dataset, const UGTConfig& cfg,
                                           const FinetuneConfig& ft, std::uint64_t seed) {
    std::size_t max_deg = 0;
    for (const auto& g : dataset.graphs) max_deg = std::max(max_deg, g.max_degree());
    const std::size_t d0 = std::min(max_deg, cfg.degree_onehot_cap) + 1;

    std::vector<Sidecars> sidecars;
    std::vector<NodeFeatures> feats;
    sidecars.reserve(dataset.graphs.size());
    for (const auto& g : dataset.graphs) {
        sidecars.push_back(build_sidecars(g, cfg));
        NodeFeatures nf;
        nf.dim = d0;
        nf.matrix.assign(std::size_t(g.n_nodes()) * d0, 0.0);
        for (NodeId v = 0; v < g.n_nodes(); ++v)
            nf.matrix[std::size_t(v) * d0 + std::min<std::size_t>(g.degree(v), d0 - 1)] = 1.0;
        feats.push_back(std::move(nf));
    }

    MetricReport report;
    report.task = "graph_classification";
    Rng split_rng(seed);

    for (std::size_t s = 0; s < ft.n_splits; ++s) {
        std::vector<std::size_t> order(dataset.graphs.size());
        std::iota(order.begin(), order.end(), 0);
        Rng r = split_rng.fork(s);
        r.shuffle(order);
        std::size_t n_train = std::max<std::size_t>(1, order.size() * ft.train_frac);
        std::size_t n_val = order.size() * ft.val_frac;
        std::vector<std::size_t> train(order.begin(), order.begin() + n_train);
        std::vector<std::size_t> val(order.begin() + n_train, order.begin() + n_train + n_val);
        std::vector<std::size_t> test(order.begin() + n_train + n_val, order.end());
        if (test.empty()) test = train;

        UGTModel model(cfg, d0, dataset.n_classes, 0, seed + 33 * s);
        AdamState adam({ft.lr});

        auto eval = [&](const std::vector<std::size_t>& idx) {
            if (idx.empty()) return 0.0;
            std::size_t correct = 0;
            for (std::size_t gi : idx) {
                Tape tape(false);
                TRef z = model.forward(tape, feats[gi], sidecars[gi], false, nullptr);
                TRef logits = model.graph_pool_head(tape, z);
                auto pred = argmax_rows(tape.value(logits));
                if (pred[0] == dataset.labels[gi]) ++correct;
            }
            return double(correct) / double(idx.size());
        };

        double best_val = -1.0;
        unsigned since_best = 0;
        ParamStore best;
        auto snapshot = [&]() {
            best = ParamStore();
            for (const auto& name : model.params().names())
                best.add(name, model.params().at(name));
        };
        snapshot();
        std::vector<double> trace;

        for (unsigned epoch = 0; epoch < ft.epochs; ++epoch) {
            Tape tape(false);
            TRef loss = tape.constant(Tensor::scalar(0.0));
            for (std::size_t gi : train) {
                TRef z = model.forward(tape, feats[gi], sidecars[gi], false, nullptr);
                TRef logits = model.graph_pool_head(tape, z);
                loss = tape.add(loss, tape.cross_entropy(logits, {dataset.labels[gi]}));
            }
            loss = tape.scale(loss, 1.0 / double(train.size()));
            double lval = tape.value(loss).item();
            if (!std::isfinite(lval)) break;
            trace.push_back(lval);
            model.params().zero_grads();
            tape.backward(loss);
            adam.step(model.params());

            double val_acc = val.empty() ? eval(train) : eval(val);
            if (val_acc > best_val) {
                best_val = val_acc;
                snapshot();
                since_best = 0;
            } else if (++since_best > ft.patience) {
                break;
            }
        }
        for (const auto& name : best.names()) model.params().at(name) = best.at(name);
        report.per_split_accuracy.push_back(eval(test));
        report.loss_traces.push_back(std::move(trace));
    }
    report.accuracy_mean = mean_of(report.per_split_accuracy);
    report.accuracy_std = std_of(report.per_split_accuracy);
    return report;
}

MetricReport cluster(const DatasetBundle& bundle, const Sidecars& sidecars, UGTModel& model,
                     const ClusterConfig& cfg) {
    if (cfg.n_clusters < 1) throw ConfigError("cluster: n_clusters must be >= 1");
    MetricReport report;
    report.task = "cluster_" + cfg.mode;

    if (cfg.mode == "end2end") {
        if (model.n_clusters() != cfg.n_clusters)
            throw ConfigError("cluster: model cluster head size mismatch");
        AdamState adam({cfg.lr});
        std::vector<double> trace;
        for (unsigned epoch = 0; epoch < cfg.epochs; ++epoch) {
            Tape tape(false);
            TRef z = model.forward(tape, bundle.features, sidecars, false, nullptr);
            TRef assign = model.cluster_assignment(tape, z);
            TRef loss = model.cluster_loss(tape, assign, bundle.graph);
            double lval = tape.value(loss).item();
            if (!std::isfinite(lval)) break;
            trace.push_back(lval);
            model.params().zero_grads();
            tape.backward(loss);
            adam.step(model.params());
        }
        Tape tape(false);
        TRef z = model.forward(tape, bundle.features, sidecars, false, nullptr);
        TRef assign = model.cluster_assignment(tape, z);
        auto hard = argmax_rows(tape.value(assign));
        report.assignment.assign(hard.begin(), hard.end());
        report.loss_traces.push_back(std::move(trace));
    } else if (cfg.mode == "kmeans") {
        Tape tape(false);
        TRef z = model.forward(tape, bundle.features, sidecars, false, nullptr);
        const Tensor& Z = tape.value(z);
        KMeansResult km = kmeans(Z.data, Z.rows(), Z.cols(), cfg.n_clusters, cfg.restarts,
                                 cfg.seed);
        report.assignment = km.assignment;
    } else {
        throw ConfigError("cluster: unknown mode " + cfg.mode);
    }

    report.modularity = modularity_Q(bundle.graph, report.assignment);
    report.conductance = conductance_C(bundle.graph, report.assignment);
    return report;
}

double modularity_Q(const Graph& g, const std::vector<int>& partition) {
    if (partition.size() != g.n_nodes()) throw DataError("modularity_Q: partition size mismatch");
    const double two_m = 2.0 * static_cast<double>(g.n_edges());
    if (two_m == 0.0) return 0.0;
    int k = 0;
    for (int c : partition) {
        if (c < 0) throw DataError("modularity_Q: negative cluster id");
        k = std::max(k, c + 1);
    }
    std::vector<double> intra(k, 0.0), vol(k, 0.0);
    for (NodeId v = 0; v < g.n_nodes(); ++v) {
        vol[partition[v]] += static_cast<double>(g.degree(v));
        for (auto it = g.neighbors_begin(v); it != g.neighbors_end(v); ++it)
            if (v < *it && partition[v] == partition[*it]) intra[partition[v]] += 1.0;
    }
    double q = 0.0;
    for (int c = 0; c < k; ++c)
        q += intra[c] / (two_m / 2.0) - (vol[c] / two_m) * (vol[c] / two_m);
    return q;
}

double conductance_C(const Graph& g, const std::vector<int>& partition) {
    if (partition.size() != g.n_nodes()) throw DataError("conductance_C: partition size mismatch");
    const double two_m = 2.0 * static_cast<double>(g.n_edges());
    if (two_m == 0.0) return 0.0;
    int k = 0;
    for (int c : partition) k = std::max(k, c + 1);
    if (k <= 1) return 0.0; // whole-graph partition
    std::vector<double> cut(k, 0.0), vol(k, 0.0);
    std::vector<std::size_t> size(k, 0);
    for (NodeId v = 0; v < g.n_nodes(); ++v) {
        ++size[partition[v]];
        vol[partition[v]] += static_cast<double>(g.degree(v));
        for (auto it = g.neighbors_begin(v); it != g.neighbors_end(v); ++it)
            if (partition[v] != partition[*it]) cut[partition[v]] += 1.0;
    }
    double acc = 0.0;
    for (int c = 0; c < k; ++c) {
        double denom = std::min(vol[c], two_m - vol[c]);
        double cc = (denom > 0.0) ? cut[c] / denom : 0.0;
        acc += cc * (static_cast<double>(size[c]) / static_cast<double>(g.n_nodes()));
    }
    return acc;
}

double accuracy(const std::vector<std::int32_t>& pred, const std::vector<std::int32_t>& truth,
                const std::vector<NodeId>& mask) {
    if (mask.empty()) throw DataError("accuracy: empty mask");
    std::size_t correct = 0;
    for (NodeId v : mask) {
        if (v >= pred.size() || v >= truth.size()) throw DataError("accuracy: index out of range");
        if (pred[v] == truth[v]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(mask.size());
}

namespace {

double sq_dist(const double* a, const double* b, std::size_t dim) {
    double s = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

} // namespace

KMeansResult kmeans(const std::vector<double>& points, std::size_t n, std::size_t dim,
                    std::size_t k, unsigned restarts, std::uint64_t seed) {
    if (k == 0 || n == 0) throw ConfigError("kmeans: empty input");
    if (k > n) throw ConfigError("kmeans: k > n");
    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    Rng master(seed);

    for (unsigned r = 0; r < std::max(1u, restarts); ++r) {
        Rng rng = master.fork(r);
        // k-means++ seeding
        std::vector<double> centroids(k * dim);
        std::vector<double> d2(n, std::numeric_limits<double>::infinity());
        std::size_t first = static_cast<std::size_t>(rng.uniform_index(n));
        std::copy(points.begin() + first * dim, points.begin() + (first + 1) * dim,
                  centroids.begin());
        for (std::size_t c = 1; c < k; ++c) {
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                d2[i] = std::min(d2[i], sq_dist(points.data() + i * dim,
                                                centroids.data() + (c - 1) * dim, dim));
                total += d2[i];
            }
            std::size_t pick = 0;
            if (total > 0.0) {
                double target = rng.uniform() * total, acc = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    acc += d2[i];
                    if (acc >= target) {
                        pick = i;
                        break;
                    }
                }
            } else {
                pick = static_cast<std::size_t>(rng.uniform_index(n));
            }
            std::copy(points.begin() + pick * dim, points.begin() + (pick + 1) * dim,
                      centroids.begin() + c * dim);
        }

        std::vector<int> assign(n, 0);
        for (int iter = 0; iter < 200; ++iter) {
            bool changed = false;
            for (std::size_t i = 0; i < n; ++i) {
                int bc = 0;
                double bd = std::numeric_limits<double>::infinity();
                for (std::size_t c = 0; c < k; ++c) {
                    double d = sq_dist(points.data() + i * dim, centroids.data() + c * dim, dim);
                    if (d < bd) {
                        bd = d;
                        bc = static_cast<int>(c);
                    }
                }
                if (assign[i] != bc) {
                    assign[i] = bc;
                    changed = true;
                }
            }
            std::vector<double> sums(k * dim, 0.0);
            std::vector<std::size_t> counts(k, 0);
            for (std::size_t i = 0; i < n; ++i) {
                ++counts[assign[i]];
                for (std::size_t t = 0; t < dim; ++t) sums[assign[i] * dim + t] += points[i * dim + t];
            }
            for (std::size_t c = 0; c < k; ++c) {
                if (counts[c] == 0) {
                    // empty cluster: re-seed at the point farthest from its centroid
                    std::size_t far = 0;
                    double fd = -1.0;
                    for (std::size_t i = 0; i < n; ++i) {
                        double d = sq_dist(points.data() + i * dim,
                                           centroids.data() + assign[i] * dim, dim);
                        if (d > fd) {
                            fd = d;
                            far = i;
                        }
                    }
                    std::copy(points.begin() + far * dim, points.begin() + (far + 1) * dim,
                              centroids.begin() + c * dim);
                    changed = true;
                    continue;
                }
                for (std::size_t t = 0; t < dim; ++t)
                    centroids[c * dim + t] = sums[c * dim + t] / counts[c];
            }
            if (!changed) break;
        }
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            inertia += sq_dist(points.data() + i * dim, centroids.data() + assign[i] * dim, dim);
        if (inertia < best.inertia) {
            best.inertia = inertia;
            best.assignment = assign;
            best.centroids = centroids;
        }
    }
    return best;
}

} // namespace ugt
