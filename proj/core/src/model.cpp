#include "ugt/model.hpp"

#include <cmath>

namespace ugt {

void UGTConfig::validate() const {
    if (n_heads == 0 || hidden == 0 || n_layers == 0)
        throw ConfigError("UGTConfig: n_layers, n_heads and hidden must be positive");
    if (hidden % n_heads != 0) throw ConfigError("UGTConfig: hidden must be divisible by n_heads");
    if (k_id < 1 || k_hop < 1 || k_dtw < 1 || p_steps < 1)
        throw ConfigError("UGTConfig: all k and p values must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("UGTConfig: dropout must be in [0,1)");
}

Sidecars build_sidecars(const Graph& g, const UGTConfig& cfg) {
    cfg.validate();
    Sidecars sc;
    sc.n = g.n_nodes();
    sc.id_dim = 1 + 4 * std::size_t(cfg.k_id);
    sc.identities = structural_identity_matrix(g, cfg.k_id);

    VirtualEdgeParams vp;
    vp.k_dtw = cfg.k_dtw;
    vp.top_m = cfg.use_virtual ? cfg.top_m : 0;
    vp.n_buckets = cfg.n_buckets;
    vp.score_threshold = cfg.score_threshold;
    vp.boosted_score = !cfg.eq3_score;
    vp.cost = cfg.dtw_abs_cost ? DtwCost::Absolute : DtwCost::Ratio;
    sc.virtual_edges = build_virtual_edges(g, vp);
    sc.context = build_context(g, sc.virtual_edges, cfg.k_hop);

    sc.pe = laplacian_pe(g, std::min<std::size_t>(cfg.k_pe, g.n_nodes() - 1),
                         cfg.combinatorial_laplacian);
    if (sc.pe.k != cfg.k_pe) {
        // pad PE columns with zeros so W1's shape matches the config
        LaplacianPE padded;
        padded.n = sc.pe.n;
        padded.k = cfg.k_pe;
        padded.matrix.assign(sc.pe.n * cfg.k_pe, 0.0);
        padded.eigenvalues.assign(cfg.k_pe, 0.0);
        for (std::size_t i = 0; i < sc.pe.n; ++i)
            for (std::size_t j = 0; j < sc.pe.k; ++j)
                padded.matrix[i * cfg.k_pe + j] = sc.pe.matrix[i * sc.pe.k + j];
        for (std::size_t j = 0; j < sc.pe.k; ++j) padded.eigenvalues[j] = sc.pe.eigenvalues[j];
        sc.pe = std::move(padded);
    }
    sc.transitions = transition_stack(g, cfg.p_steps);
    sc.d_raw = identity_distance_matrix(sc.identities, sc.n, sc.id_dim, 1e-6,
                                        cfg.per_component_inverse);
    return sc;
}

UGTModel::UGTModel(UGTConfig cfg, std::size_t d0, std::size_t n_classes,
                   std::size_t n_clusters, std::uint64_t seed)
    : cfg_(std::move(cfg)), d0_(d0), n_classes_(n_classes), n_clusters_(n_clusters) {
    cfg_.validate();
    Rng rng(seed);
    const std::size_t d = cfg_.hidden;
    const std::size_t dk = cfg_.dk();
    const std::size_t id_dim = 1 + 4 * std::size_t(cfg_.k_id);

    params_.add("input.W0", xavier_uniform(d, d0_, rng));
    params_.add("input.b0", Tensor({1, d}, 0.0));
    params_.add("input.W1", xavier_uniform(d, cfg_.k_pe, rng));
    params_.add("input.b1", Tensor({1, d}, 0.0));

    for (unsigned l = 0; l < cfg_.n_layers; ++l) {
        std::string lp = "layer" + std::to_string(l) + ".";
        for (unsigned h = 0; h < cfg_.n_heads; ++h) {
            std::string hp = lp + "h" + std::to_string(h) + ".";
            params_.add(hp + "Q", xavier_uniform(dk, d, rng));
            params_.add(hp + "K", xavier_uniform(dk, d, rng));
            params_.add(hp + "V", xavier_uniform(dk, d, rng));
            params_.add(hp + "Dw", xavier_uniform(1, 1, rng));
            params_.add(hp + "Db", Tensor({1}, 0.0));
            params_.add(hp + "Mw", xavier_uniform(1, cfg_.p_steps, rng));
            params_.add(hp + "Mb", Tensor({1}, 0.0));
        }
        params_.add(lp + "O", xavier_uniform(d, d, rng));
        params_.add(lp + "I.W", xavier_uniform(d, id_dim, rng));
        params_.add(lp + "I.b", Tensor({1, d}, 0.0));
        params_.add(lp + "ln1.g", Tensor({1, d}, 1.0));
        params_.add(lp + "ln1.b", Tensor({1, d}, 0.0));
        params_.add(lp + "ffn.W1", xavier_uniform(2 * d, d, rng));
        params_.add(lp + "ffn.W2", xavier_uniform(d, 2 * d, rng));
        params_.add(lp + "ln2.g", Tensor({1, d}, 1.0));
        params_.add(lp + "ln2.b", Tensor({1, d}, 0.0));
    }

    params_.add("head.rec.W1", xavier_uniform(d, d, rng));
    params_.add("head.rec.W2", xavier_uniform(d0_, d, rng));
    if (n_classes_ > 0) {
        params_.add("head.cls.W2", xavier_uniform(d, d, rng));
        params_.add("head.cls.W1", xavier_uniform(n_classes_, d, rng));
    }
    if (n_clusters_ > 0) {
        params_.add("head.clu.W", xavier_uniform(n_clusters_, d, rng));
        params_.add("head.clu.b", Tensor({1, n_clusters_}, 0.0));
    }
    if (cfg_.per_step_projection)
        for (unsigned s = 0; s < cfg_.p_steps; ++s)
            params_.add("head.ssl.step" + std::to_string(s) + ".W", xavier_uniform(d, d, rng));
}

TRef UGTModel::input_encoding(Tape& tape, const NodeFeatures& x, const Sidecars& sc,
                              const std::vector<double>* pe_override) {
    if (x.dim != d0_) throw ConfigError("input_encoding: feature dim mismatch");
    TRef X = tape.constant(Tensor::matrix(sc.n, x.dim, x.matrix));
    TRef h = tape.add(tape.matmul(X, tape.param(params_, "input.W0"), false, true),
                      tape.param(params_, "input.b0"));
    if (cfg_.use_pe) {
        const std::vector<double>& pe = pe_override ? *pe_override : sc.pe.matrix;
        TRef L = tape.constant(Tensor::matrix(sc.n, cfg_.k_pe, pe));
        TRef lhat = tape.add(tape.matmul(L, tape.param(params_, "input.W1"), false, true),
                             tape.param(params_, "input.b1"));
        h = tape.add(h, lhat);
    }
    return h;
}

Tensor UGTModel::context_mask(const Sidecars& sc) const {
    const double kBlock = -1e30;
    Tensor mask({sc.n, sc.n}, cfg_.dense_attention ? 0.0 : kBlock);
    if (cfg_.dense_attention) return mask; // all pairs, self included
    for (std::size_t i = 0; i < sc.n; ++i) {
        const auto& ctx = sc.context.per_node[i];
        if (ctx.empty()) {
            mask.at(i, i) = 0.0; // empty context: attend to self only
            continue;
        }
        for (const auto& e : ctx) mask.at(i, e.peer) = 0.0;
    }
    return mask;
}

TRef UGTModel::attention_block(Tape& tape, TRef h, unsigned layer, const Sidecars& sc) {
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(cfg_.dk()));
    std::string lp = "layer" + std::to_string(layer) + ".";

    TRef mask = tape.constant(context_mask(sc));
    TRef draw, ident;
    if (cfg_.use_D) draw = tape.constant(Tensor::matrix(sc.n, sc.n, sc.d_raw));
    std::vector<TRef> trans;
    if (cfg_.use_M)
        for (unsigned s = 0; s < cfg_.p_steps; ++s)
            trans.push_back(tape.constant(Tensor::matrix(sc.n, sc.n, sc.transitions.mats[s])));

    std::vector<TRef> heads;
    for (unsigned k = 0; k < cfg_.n_heads; ++k) {
        std::string hp = lp + "h" + std::to_string(k) + ".";
        TRef qh = tape.matmul(h, tape.param(params_, hp + "Q"), false, true); // n x dk
        TRef kh = tape.matmul(h, tape.param(params_, hp + "K"), false, true);
        TRef vh = tape.matmul(h, tape.param(params_, hp + "V"), false, true);
        TRef logits = tape.scale(tape.matmul(qh, kh, false, true), inv_sqrt_dk);
        if (cfg_.use_D) {
            TRef d_bias = tape.add(tape.mul(draw, tape.param(params_, hp + "Dw")),
                                   tape.param(params_, hp + "Db"));
            logits = tape.add(logits, d_bias);
        }
        if (cfg_.use_M) {
            TRef m_bias = tape.add(tape.stack_weighted_sum(tape.param(params_, hp + "Mw"), trans),
                                   tape.param(params_, hp + "Mb"));
            logits = tape.add(logits, m_bias);
        }
        TRef alpha = tape.softmax_lastdim(tape.add(logits, mask));
        heads.push_back(tape.matmul(alpha, vh)); // n x dk
    }
    TRef cat = cfg_.n_heads == 1 ? heads[0] : tape.concat_lastdim(heads);
    return tape.matmul(cat, tape.param(params_, lp + "O"), false, true);
}

TRef UGTModel::layer_forward(Tape& tape, TRef h, unsigned layer, const Sidecars& sc,
                             bool training, Rng* dropout_rng) {
    std::string lp = "layer" + std::to_string(layer) + ".";
    TRef hat = attention_block(tape, h, layer, sc);
    if (cfg_.use_identity) {
        TRef I = tape.constant(Tensor::matrix(sc.n, sc.id_dim, sc.identities));
        TRef inj = tape.add(tape.matmul(I, tape.param(params_, lp + "I.W"), false, true),
                            tape.param(params_, lp + "I.b"));
        hat = tape.add(hat, inj);
    }
    if (training && cfg_.dropout > 0.0 && dropout_rng)
        hat = tape.dropout(hat, cfg_.dropout, *dropout_rng);

    TRef res1 = tape.layer_norm_core(tape.add(h, hat));
    res1 = tape.add(tape.mul(res1, tape.param(params_, lp + "ln1.g")),
                    tape.param(params_, lp + "ln1.b"));

    TRef ffn = tape.matmul(tape.relu(tape.matmul(res1, tape.param(params_, lp + "ffn.W1"),
                                                 false, true)),
                           tape.param(params_, lp + "ffn.W2"), false, true);
    if (training && cfg_.dropout > 0.0 && dropout_rng)
        ffn = tape.dropout(ffn, cfg_.dropout, *dropout_rng);

    TRef res2 = tape.layer_norm_core(tape.add(res1, ffn));
    return tape.add(tape.mul(res2, tape.param(params_, lp + "ln2.g")),
                    tape.param(params_, lp + "ln2.b"));
}

TRef UGTModel::forward(Tape& tape, const NodeFeatures& x, const Sidecars& sc, bool training,
                       Rng* dropout_rng, const std::vector<double>* pe_override) {
    TRef h = input_encoding(tape, x, sc, pe_override);
    for (unsigned l = 0; l < cfg_.n_layers; ++l)
        h = layer_forward(tape, h, l, sc, training, dropout_rng);
    return h;
}

TRef UGTModel::classify_head(Tape& tape, TRef z) {
    if (n_classes_ == 0) throw ConfigError("classify_head: model built without classes");
    TRef hidden = tape.relu(tape.matmul(z, tape.param(params_, "head.cls.W2"), false, true));
    return tape.matmul(hidden, tape.param(params_, "head.cls.W1"), false, true);
}

TRef UGTModel::graph_pool_head(Tape& tape, TRef z) {
    if (n_classes_ == 0) throw ConfigError("graph_pool_head: model built without classes");
    TRef pooled = tape.mean_axis0(z);
    TRef hidden = tape.relu(tape.matmul(pooled, tape.param(params_, "head.cls.W2"), false, true));
    return tape.matmul(hidden, tape.param(params_, "head.cls.W1"), false, true);
}

TRef UGTModel::reconstruct_head(Tape& tape, TRef z) {
    TRef hidden = tape.relu(tape.matmul(z, tape.param(params_, "head.rec.W1"), false, true));
    return tape.matmul(hidden, tape.param(params_, "head.rec.W2"), false, true);
}

TRef UGTModel::cluster_assignment(Tape& tape, TRef z) {
    if (n_clusters_ == 0) throw ConfigError("cluster_assignment: model built without clusters");
    TRef logits = tape.add(tape.matmul(z, tape.param(params_, "head.clu.W"), false, true),
                           tape.param(params_, "head.clu.b"));
    return tape.softmax_lastdim(logits);
}

TRef UGTModel::cluster_loss(Tape& tape, TRef assignment, const Graph& g) {
    const std::size_t n = g.n_nodes();
    const double two_m = 2.0 * static_cast<double>(g.n_edges());
    if (two_m == 0.0) throw DataError("cluster_loss: graph has no edges");

    Tensor B({n, n});
    for (NodeId i = 0; i < n; ++i)
        for (NodeId j = 0; j < n; ++j) {
            double a = g.has_edge(i, j) ? 1.0 : 0.0;
            B.at(i, j) = a - double(g.degree(i)) * double(g.degree(j)) / two_m;
        }
    TRef bc = tape.matmul(tape.constant(std::move(B)), assignment); // n x k
    TRef trace = tape.sum_all(tape.mul(assignment, bc));
    TRef mod = tape.scale(trace, -1.0 / two_m);

    Tensor ones({1, n}, 1.0);
    TRef colsum = tape.matmul(tape.constant(std::move(ones)), assignment); // 1 x k
    TRef reg = tape.scale(tape.scalar_sqrt(tape.frobenius_sq(colsum)),
                          std::sqrt(static_cast<double>(n_clusters_)) / static_cast<double>(n));
    return tape.add(mod, tape.add(reg, tape.constant(Tensor::scalar(-1.0))));
}

std::vector<TRef> UGTModel::ssl_score_matrices(Tape& tape, TRef z) {
    std::vector<TRef> out;
    for (unsigned s = 0; s < cfg_.p_steps; ++s) {
        TRef base = z;
        if (cfg_.per_step_projection)
            base = tape.matmul(z, tape.param(params_, "head.ssl.step" + std::to_string(s) + ".W"),
                               false, true);
        out.push_back(tape.cosine_similarity_matrix(base));
        if (!cfg_.per_step_projection) {
            // shared Z: one cosine matrix reused for every step
            for (unsigned s2 = 1; s2 < cfg_.p_steps; ++s2) out.push_back(out[0]);
            break;
        }
    }
    return out;
}

} // namespace ugt
