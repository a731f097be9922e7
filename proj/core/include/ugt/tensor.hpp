#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ugt/util.hpp"

namespace ugt {

/// Dense row-major tensor of doubles (rank 0..2 is what the model needs).
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, double fill = 0.0);
    static Tensor scalar(double v);
    static Tensor row(std::vector<double> v);
    static Tensor matrix(std::size_t r, std::size_t c, std::vector<double> v);

    std::size_t numel() const;
    std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
    double& at(std::size_t i, std::size_t j) { return data[i * cols() + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols() + j]; }
    double item() const;
};

/// Named trainable tensors. Iteration order is name-sorted so that
/// checkpoints and Adam updates are deterministic.
class ParamStore {
  public:
    Tensor& add(const std::string& name, Tensor init);
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    bool contains(const std::string& name) const { return values_.count(name) != 0; }

    Tensor* grad(const std::string& name);
    void set_grad(const std::string& name, Tensor g);
    void zero_grads() { grads_.clear(); }

    std::vector<std::string> names() const; // sorted
    std::size_t size() const { return values_.size(); }

  private:
    std::map<std::string, Tensor> values_;
    std::map<std::string, Tensor> grads_;
};

Tensor xavier_uniform(std::size_t fan_out, std::size_t fan_in, Rng& rng);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class AdamState {
  public:
    explicit AdamState(AdamConfig cfg = {}) : cfg_(cfg) {}
    /// One Adam update from the grads currently held by the store.
    /// Parameters with no grad are left untouched.
    void step(ParamStore& params);
    std::int64_t step_count() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

  private:
    AdamConfig cfg_;
    std::int64_t t_ = 0;
    std::map<std::string, Tensor> m_, v_;
};

/// Handle to a node on a Tape.
struct TRef {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Reverse-mode tape with eager evaluation. One tape per forward/backward
/// pass; values are recorded as ops execute and replayed in reverse by
/// backward().
class Tape {
  public:
    explicit Tape(bool check_finite = true) : check_finite_(check_finite) {}

    TRef constant(Tensor value);
    TRef param(ParamStore& store, const std::string& name);

    TRef matmul(TRef a, TRef b, bool trans_a = false, bool trans_b = false);
    /// add/mul accept equal shapes, (n,d)+(1,d) row broadcast, or a scalar
    /// {1} operand on either side.
    TRef add(TRef a, TRef b);
    TRef sub(TRef a, TRef b);
    TRef mul(TRef a, TRef b);
    TRef scale(TRef a, double c);
    TRef relu(TRef a);
    TRef softmax_lastdim(TRef a);
    /// (x - mean)/sqrt(var + eps) over the last axis, no affine.
    TRef layer_norm_core(TRef a, double eps = 1e-5);
    TRef concat_lastdim(const std::vector<TRef>& parts);
    TRef gather_rows(TRef a, std::vector<std::size_t> idx);
    TRef mean_axis0(TRef a);
    TRef sum_all(TRef a);
    TRef frobenius_sq(TRef a);
    TRef mse(TRef a, TRef b);
    /// mean over rows of the row L2 norms: (1/n) sum_i ||row_i||_2.
    TRef mean_row_norm(TRef a);
    /// C_ij = cos(z_i, z_j) over rows of a (n,d) tensor.
    TRef cosine_similarity_matrix(TRef a);
    /// Mean cross entropy of logits (m,C) against integer labels.
    TRef cross_entropy(TRef logits, const std::vector<std::int32_t>& labels);
    /// out = sum_s w_s * consts[s]; w has shape {p}.
    TRef stack_weighted_sum(TRef w, const std::vector<TRef>& consts);
    TRef scalar_sqrt(TRef a);
    /// Inverted dropout with a mask drawn once at record time.
    TRef dropout(TRef a, double rate, Rng& rng);

    const Tensor& value(TRef r) const;
    const Tensor& grad(TRef r) const;

    /// Reverse pass from a scalar loss. Writes parameter gradients into the
    /// ParamStores the params were leased from (accumulating across leases).
    void backward(TRef loss);

    std::size_t size() const { return nodes_.size(); }

  private:
    enum class Op;
    struct Node;
    TRef push(Node n);
    void check(const Tensor& t, const char* op) const;

    bool check_finite_;
    std::vector<Node> nodes_;
};

} // namespace ugt
