#include "ugt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace ugt {

Tensor::Tensor(std::vector<std::size_t> s, double fill) : shape(std::move(s)) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    data.assign(n, fill);
}

Tensor Tensor::scalar(double v) {
    Tensor t({1});
    t.data[0] = v;
    return t;
}

Tensor Tensor::row(std::vector<double> v) {
    Tensor t;
    t.shape = {1, v.size()};
    t.data = std::move(v);
    return t;
}

Tensor Tensor::matrix(std::size_t r, std::size_t c, std::vector<double> v) {
    if (v.size() != r * c) throw NumericError("Tensor::matrix: size mismatch");
    Tensor t;
    t.shape = {r, c};
    t.data = std::move(v);
    return t;
}

std::size_t Tensor::numel() const {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

double Tensor::item() const {
    if (numel() != 1) throw NumericError("Tensor::item: not a scalar");
    return data[0];
}

Tensor& ParamStore::add(const std::string& name, Tensor init) {
    if (values_.count(name)) throw ConfigError("ParamStore: duplicate parameter " + name);
    return values_.emplace(name, std::move(init)).first->second;
}

Tensor& ParamStore::at(const std::string& name) {
    auto it = values_.find(name);
    if (it == values_.end()) throw ConfigError("ParamStore: unknown parameter " + name);
    return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
    auto it = values_.find(name);
    if (it == values_.end()) throw ConfigError("ParamStore: unknown parameter " + name);
    return it->second;
}

Tensor* ParamStore::grad(const std::string& name) {
    auto it = grads_.find(name);
    return it == grads_.end() ? nullptr : &it->second;
}

void ParamStore::set_grad(const std::string& name, Tensor g) {
    auto it = grads_.find(name);
    if (it == grads_.end()) {
        grads_.emplace(name, std::move(g));
    } else {
        auto& acc = it->second.data;
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g.data[i];
    }
}

std::vector<std::string> ParamStore::names() const {
    std::vector<std::string> out;
    out.reserve(values_.size());
    for (auto& [k, v] : values_) out.push_back(k);
    return out; // std::map iterates sorted
}

Tensor xavier_uniform(std::size_t fan_out, std::size_t fan_in, Rng& rng) {
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor t({fan_out, fan_in});
    for (auto& x : t.data) x = rng.uniform(-bound, bound);
    return t;
}

void AdamState::step(ParamStore& params) {
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (const auto& name : params.names()) {
        Tensor* g = params.grad(name);
        if (!g) continue;
        Tensor& p = params.at(name);
        auto mi = m_.find(name);
        if (mi == m_.end()) {
            m_.emplace(name, Tensor(p.shape, 0.0));
            v_.emplace(name, Tensor(p.shape, 0.0));
        }
        Tensor& m = m_.at(name);
        Tensor& v = v_.at(name);
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            double gi = g->data[i];
            m.data[i] = cfg_.beta1 * m.data[i] + (1.0 - cfg_.beta1) * gi;
            v.data[i] = cfg_.beta2 * v.data[i] + (1.0 - cfg_.beta2) * gi * gi;
            double mhat = m.data[i] / bc1;
            double vhat = v.data[i] / bc2;
            p.data[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

// ---------------------------------------------------------------------------

enum class Tape::Op {
    Constant, Param, Matmul, Add, Mul, Scale, Relu, Softmax, LayerNorm,
    Concat, GatherRows, MeanAxis0, SumAll, FrobeniusSq, Mse, MeanRowNorm,
    CosineSim, CrossEntropy, StackWeightedSum, ScalarSqrt, Dropout
};

struct Tape::Node {
    Op op;
    std::vector<int> in;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;

    bool trans_a = false, trans_b = false;
    double c = 0.0; // scale factor / eps
    std::vector<std::size_t> idx;
    std::vector<std::int32_t> labels;
    std::vector<double> auxd;
    ParamStore* store = nullptr;
    std::string pname;
};

void Tape::check(const Tensor& t, const char* op) const {
    if (!check_finite_) return;
    for (double x : t.data)
        if (!std::isfinite(x)) throw NumericError(std::string("non-finite value after op ") + op);
}

TRef Tape::push(Node n) {
    check(n.value, "record");
    nodes_.push_back(std::move(n));
    return TRef{static_cast<int>(nodes_.size()) - 1};
}

const Tensor& Tape::value(TRef r) const { return nodes_.at(r.id).value; }
const Tensor& Tape::grad(TRef r) const {
    const Node& n = nodes_.at(r.id);
    if (!n.has_grad) throw NumericError("Tape::grad: node has no gradient");
    return n.grad;
}

TRef Tape::constant(Tensor value) {
    Node n;
    n.op = Op::Constant;
    n.value = std::move(value);
    return push(std::move(n));
}

TRef Tape::param(ParamStore& store, const std::string& name) {
    Node n;
    n.op = Op::Param;
    n.value = store.at(name);
    n.requires_grad = true;
    n.store = &store;
    n.pname = name;
    return push(std::move(n));
}

namespace {

enum class Bcast { Same, ScalarB, RowB, ScalarA, RowA };

Bcast classify(const Tensor& a, const Tensor& b) {
    if (a.shape == b.shape) return Bcast::Same;
    if (b.numel() == 1) return Bcast::ScalarB;
    if (a.numel() == 1) return Bcast::ScalarA;
    if (a.shape.size() == 2 && b.shape.size() == 2 && b.shape[0] == 1 && b.shape[1] == a.shape[1])
        return Bcast::RowB;
    if (a.shape.size() == 2 && b.shape.size() == 2 && a.shape[0] == 1 && a.shape[1] == b.shape[1])
        return Bcast::RowA;
    throw NumericError("tensor op: incompatible shapes");
}

// Reduce a full-shaped gradient onto a broadcast operand's shape.
Tensor reduce_to(const Tensor& g, const Tensor& like, Bcast mode, bool operand_a) {
    bool full = (mode == Bcast::Same) || (operand_a && (mode == Bcast::ScalarB || mode == Bcast::RowB)) ||
                (!operand_a && (mode == Bcast::ScalarA || mode == Bcast::RowA));
    if (full) return g;
    Tensor out(like.shape, 0.0);
    if (out.numel() == 1) {
        double acc = 0.0;
        for (double x : g.data) acc += x;
        out.data[0] = acc;
        return out;
    }
    // row vector: sum over rows
    std::size_t rows = g.rows(), cols = g.cols();
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) out.data[j] += g.at(i, j);
    return out;
}

} // namespace

TRef Tape::add(TRef a, TRef b) {
    const Tensor& A = nodes_[a.id].value;
    const Tensor& B = nodes_[b.id].value;
    Bcast mode = classify(A, B);
    const Tensor& big = (mode == Bcast::ScalarA || mode == Bcast::RowA) ? B : A;
    Node n;
    n.op = Op::Add;
    n.in = {a.id, b.id};
    n.requires_grad = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
    n.value = Tensor(big.shape);
    std::size_t rows = big.rows(), cols = big.cols();
    auto fetch = [&](const Tensor& t, std::size_t i, std::size_t j) {
        if (t.numel() == 1) return t.data[0];
        if (t.shape.size() == 2 && t.shape[0] == 1 && big.rows() > 1) return t.data[j];
        return t.data[i * cols + j];
    };
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            n.value.data[i * cols + j] = fetch(A, i, j) + fetch(B, i, j);
    return push(std::move(n));
}

TRef Tape::sub(TRef a, TRef b) { return add(a, scale(b, -1.0)); }

TRef Tape::mul(TRef a, TRef b) {
    const Tensor& A = nodes_[a.id].value;
    const Tensor& B = nodes_[b.id].value;
    Bcast mode = classify(A, B);
    const Tensor& big = (mode == Bcast::ScalarA || mode == Bcast::RowA) ? B : A;
    Node n;
    n.op = Op::Mul;
    n.in = {a.id, b.id};
    n.requires_grad = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
    n.value = Tensor(big.shape);
    std::size_t rows = big.rows(), cols = big.cols();
    auto fetch = [&](const Tensor& t, std::size_t i, std::size_t j) {
        if (t.numel() == 1) return t.data[0];
        if (t.shape.size() == 2 && t.shape[0] == 1 && big.rows() > 1) return t.data[j];
        return t.data[i * cols + j];
    };
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            n.value.data[i * cols + j] = fetch(A, i, j) * fetch(B, i, j);
    return push(std::move(n));
}

TRef Tape::scale(TRef a, double c) {
    Node n;
    n.op = Op::Scale;
    n.in = {a.id};
    n.c = c;
    n.requires_grad = nodes_[a.id].requires_grad;
    n.value = nodes_[a.id].value;
    for (auto& x : n.value.data) x *= c;
    return push(std::move(n));
}

TRef Tape::matmul(TRef a, TRef b, bool trans_a, bool trans_b) {
    const Tensor& A = nodes_[a.id].value;
    const Tensor& B = nodes_[b.id].value;
    if (A.shape.size() != 2 || B.shape.size() != 2) throw NumericError("matmul: rank-2 only");
    std::size_t m = trans_a ? A.shape[1] : A.shape[0];
    std::size_t k = trans_a ? A.shape[0] : A.shape[1];
    std::size_t k2 = trans_b ? B.shape[1] : B.shape[0];
    std::size_t p = trans_b ? B.shape[0] : B.shape[1];
    if (k != k2) throw NumericError("matmul: inner dimension mismatch");

    Node n;
    n.op = Op::Matmul;
    n.in = {a.id, b.id};
    n.trans_a = trans_a;
    n.trans_b = trans_b;
    n.requires_grad = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
    n.value = Tensor({m, p});
    auto getA = [&](std::size_t i, std::size_t t) { return trans_a ? A.at(t, i) : A.at(i, t); };
    auto getB = [&](std::size_t t, std::size_t j) { return trans_b ? B.at(j, t) : B.at(t, j); };
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t t = 0; t < k; ++t) {
            double av = getA(i, t);
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < p; ++j) n.value.data[i * p + j] += av * getB(t, j);
        }
    return push(std::move(n));
}

TRef Tape::relu(TRef a) {
    Node n;
    n.op = Op::Relu;
    n.in = {a.id};
    n.requires_grad = nodes_[a.id].requires_grad;
    n.value = nodes_[a.id].value;
    for (auto& x : n.value.data) x = std::max(x, 0.0);
    return push(std::move(n));
}

TRef Tape::softmax_lastdim(TRef a) {
    const Tensor& A = nodes_[a.id].value;
    Node n;
    n.op = Op::Softmax;
    n.in = {a.id};
    n.requires_grad = nodes_[a.id].requires_grad;
    n.value = Tensor(A.shape);
    std::size_t rows = A.rows(), cols = A.cols();
    for (std::size_t i = 0; i < rows; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < cols; ++j) mx = std::max(mx, A.at(i, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            double e = std::exp(A.at(i, j) - mx);
            n.value.data[i * cols + j] = e;
            sum += e;
        }
        for (std::size_t j = 0; j < cols; ++j) n.value.data[i * cols + j] /= sum;
    }
    return push(std::move(n));
}

TRef Tape::layer_norm_core(TRef a, double eps) {
    const Tensor& A = nodes_[a.id].value;
    Node n;
    n.op = Op::LayerNorm;
    n.in = {a.id};
    n.c = eps;
    n.requires_grad = nodes_[a.id].requires_grad;
    n.value = Tensor(A.shape);
    std::size_t rows = A.rows(), cols = A.cols();
    n.auxd.resize(rows); // 1/sigma per row
    for (std::size_t i = 0; i < rows; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < cols; ++j) mean += A.at(i, j);
        mean /= cols;
        double var = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            double d = A.at(i, j) - mean;
            var += d * d;
        }
        var /= cols;
        double inv = 1.0 / std::sqrt(var + eps);
        n.auxd[i] = inv;
        for (std::size_t j = 0; j < cols; ++j)
            n.value.data[i * cols + j] = (A.at(i, j) - mean) * inv;
    }
    return push(std::move(n));
}

TRef Tape::concat_lastdim(const std::vector<TRef>& parts) {
    if (parts.empty()) throw NumericError("concat: no inputs");
    std::size_t rows = nodes_[parts[0].id].value.rows();
    std::size_t total = 0;
    bool rg = false;
    for (auto p : parts) {
        const Tensor& t = nodes_[p.id].value;
        if (t.rows() != rows) throw NumericError("concat: row mismatch");
        total += t.cols();
        rg = rg || nodes_[p.id].requires_grad;
    }
    Node n;
    n.op = Op::Concat;
    for (auto p : parts) n.in.push_back(p.id);
    n.requires_grad = rg;
    n.value = Tensor({rows, total});
    std::size_t off = 0;
    for (auto p : parts) {
        const Tensor& t = nodes_[p.id].value;
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < t.cols(); ++j) n.value.at(i, off + j) = t.at(i, j);
        off += t.cols();
    }
    return push(std::move(n));
}

TRef Tape::gather_rows(TRef a, std::vector<std::size_t> idx) {
    const Tensor& A = nodes_[a.id].value;
    Node n;
    n.op = Op::GatherRows;
    n.in = {a.id};
    n.requires_grad = nodes_[a.id].requires_grad;
    n.idx = std::move(idx);
    n.value = Tensor({n.idx.size(), A.cols()});
    for (std::size_t i = 0; i < n.idx.size(); ++i) {
        if (n.idx[i] >= A.rows()) throw NumericError("gather_rows: index out of range");
        for (std::size_t j = 0; j < A.cols(); ++j) n.value.at(i, j) = A.at(n.idx[i], j);
    }
    return push(std::move(n));
}

TRef Tape::mean_axis0(TRef a) {
    const Tensor& A = nodes_[a.id].value;
    Node n;
    n.op = Op::MeanAxis0;
    n.in = {a.id};
    n.requires_grad = nodes_[a.id].requires_grad;
    n.value = Tensor({1, A.cols()});
    for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t j = 0; j < A.cols(); ++j) n.value.data[j] += A.at(i, j);
    for (auto& x : n.value.data) x /= static_cast<double>(A.rows());
    return push(std::move(n));
}

TRef Tape::sum_all(TRef a) {
    Node n;
    n.op = Op::SumAll;
    n.in = {a.id};
    n.requires_grad = nodes_[a.id].requires_grad;
    double s = 0.0;
    for (double x : nodes_[a.id].value.data) s += x;
    n.value = Tensor::scalar(s);
    return push(std::move(n));
}

TRef Tape::frobenius_sq(TRef a) {
    Node n;
    n.op = Op::FrobeniusSq;
    n.in = {a.id};
    n.requires_grad = nodes_[a.id].requires_grad;
    double s = 0.0;
    for (double x : nodes_[a.id].value.data) s += x * x;
    n.value = Tensor::scalar(s);
    return push(std::move(n));
}

TRef Tape::mse(TRef a, TRef b) {
    const Tensor& A = nodes_[a.id].value;
    const Tensor& B = nodes_[b.id].value;
    if (A.shape != B.shape) throw NumericError("mse: shape mismatch");
    Node n;
    n.op = Op::Mse;
    n.in = {a.id, b.id};
    n.requires_grad = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
    double s = 0.0;
    for (std::size_t i = 0; i < A.data.size(); ++i) {
        double d = A.data[i] - B.data[i];
        s += d * d;
    }
    n.value = Tensor::scalar(s / static_cast<double>(A.data.size()));
    return push(std::move(n));
}

TRef Tape::mean_row_norm(TRef a) {
    const Tensor& A = nodes_[a.id].value;
    Node n;
    n.op = Op::MeanRowNorm;
    n.in = {a.id};
    n.requires_grad = nodes_[a.id].requires_grad;
    std::size_t rows = A.rows(), cols = A.cols();
    n.auxd.resize(rows);
    double s = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        double r2 = 0.0;
        for (std::size_t j = 0; j < cols; ++j) r2 += A.at(i, j) * A.at(i, j);
        n.auxd[i] = std::sqrt(r2);
        s += n.auxd[i];
    }
    n.value = Tensor::scalar(s / static_cast<double>(rows));
    return push(std::move(n));
}

TRef Tape::cosine_similarity_matrix(TRef a) {
    const Tensor& A = nodes_[a.id].value;
    std::size_t rows = A.rows(), cols = A.cols();
    Node n;
    n.op = Op::CosineSim;
    n.in = {a.id};
    n.requires_grad = nodes_[a.id].requires_grad;
    // auxd: normalized rows (rows*cols) followed by clamped norms (rows).
    n.auxd.resize(rows * cols + rows);
    for (std::size_t i = 0; i < rows; ++i) {
        double r2 = 0.0;
        for (std::size_t j = 0; j < cols; ++j) r2 += A.at(i, j) * A.at(i, j);
        double r = std::max(std::sqrt(r2), 1e-12);
        n.auxd[rows * cols + i] = r;
        for (std::size_t j = 0; j < cols; ++j) n.auxd[i * cols + j] = A.at(i, j) / r;
    }
    n.value = Tensor({rows, rows});
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = i; j < rows; ++j) {
            double dot = 0.0;
            for (std::size_t t = 0; t < cols; ++t)
                dot += n.auxd[i * cols + t] * n.auxd[j * cols + t];
            n.value.at(i, j) = dot;
            n.value.at(j, i) = dot;
        }
    return push(std::move(n));
}

TRef Tape::cross_entropy(TRef logits, const std::vector<std::int32_t>& labels) {
    const Tensor& A = nodes_[logits.id].value;
    std::size_t rows = A.rows(), cols = A.cols();
    if (labels.size() != rows) throw NumericError("cross_entropy: label count mismatch");
    Node n;
    n.op = Op::CrossEntropy;
    n.in = {logits.id};
    n.labels = labels;
    n.requires_grad = nodes_[logits.id].requires_grad;
    n.auxd.resize(rows * cols); // softmax probs
    double loss = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        std::int32_t y = labels[i];
        if (y < 0 || std::size_t(y) >= cols) throw NumericError("cross_entropy: bad label");
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < cols; ++j) mx = std::max(mx, A.at(i, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            double e = std::exp(A.at(i, j) - mx);
            n.auxd[i * cols + j] = e;
            sum += e;
        }
        for (std::size_t j = 0; j < cols; ++j) n.auxd[i * cols + j] /= sum;
        loss -= std::log(std::max(n.auxd[i * cols + y], 1e-300));
    }
    n.value = Tensor::scalar(loss / static_cast<double>(rows));
    return push(std::move(n));
}

TRef Tape::stack_weighted_sum(TRef w, const std::vector<TRef>& consts) {
    const Tensor& W = nodes_[w.id].value;
    if (W.numel() != consts.size()) throw NumericError("stack_weighted_sum: weight count mismatch");
    if (consts.empty()) throw NumericError("stack_weighted_sum: no inputs");
    Node n;
    n.op = Op::StackWeightedSum;
    n.in = {w.id};
    bool rg = nodes_[w.id].requires_grad;
    for (auto c : consts) {
        n.in.push_back(c.id);
        rg = rg || nodes_[c.id].requires_grad;
    }
    n.requires_grad = rg;
    n.value = Tensor(nodes_[consts[0].id].value.shape);
    for (std::size_t s = 0; s < consts.size(); ++s) {
        const Tensor& C = nodes_[consts[s].id].value;
        if (C.shape != n.value.shape) throw NumericError("stack_weighted_sum: shape mismatch");
        double ws = W.data[s];
        for (std::size_t i = 0; i < C.data.size(); ++i) n.value.data[i] += ws * C.data[i];
    }
    return push(std::move(n));
}

TRef Tape::scalar_sqrt(TRef a) {
    const Tensor& A = nodes_[a.id].value;
    if (A.numel() != 1) throw NumericError("scalar_sqrt: scalar only");
    Node n;
    n.op = Op::ScalarSqrt;
    n.in = {a.id};
    n.requires_grad = nodes_[a.id].requires_grad;
    n.value = Tensor::scalar(std::sqrt(std::max(A.data[0], 0.0)));
    return push(std::move(n));
}

TRef Tape::dropout(TRef a, double rate, Rng& rng) {
    if (rate <= 0.0) return a;
    if (rate >= 1.0) throw ConfigError("dropout: rate must be < 1");
    const Tensor& A = nodes_[a.id].value;
    Node n;
    n.op = Op::Dropout;
    n.in = {a.id};
    n.requires_grad = nodes_[a.id].requires_grad;
    n.auxd.resize(A.data.size());
    double keep = 1.0 - rate;
    for (std::size_t i = 0; i < A.data.size(); ++i)
        n.auxd[i] = (rng.uniform() < keep) ? 1.0 / keep : 0.0;
    n.value = A;
    for (std::size_t i = 0; i < A.data.size(); ++i) n.value.data[i] *= n.auxd[i];
    return push(std::move(n));
}

void Tape::backward(TRef loss) {
    Node& last = nodes_.at(loss.id);
    if (last.value.numel() != 1) throw NumericError("backward: loss must be scalar");

    auto ensure = [&](int id) -> Tensor& {
        Node& n = nodes_[id];
        if (!n.has_grad) {
            n.grad = Tensor(n.value.shape, 0.0);
            n.has_grad = true;
        }
        return n.grad;
    };
    ensure(loss.id).data[0] = 1.0;

    for (int id = loss.id; id >= 0; --id) {
        Node& n = nodes_[id];
        if (!n.has_grad || !n.requires_grad) continue;
        const Tensor& g = n.grad;
        switch (n.op) {
        case Op::Constant:
            break;
        case Op::Param:
            n.store->set_grad(n.pname, g);
            break;
        case Op::Add: {
            const Tensor& A = nodes_[n.in[0]].value;
            const Tensor& B = nodes_[n.in[1]].value;
            Bcast mode = classify(A, B);
            if (nodes_[n.in[0]].requires_grad) {
                Tensor ga = reduce_to(g, A, mode, true);
                Tensor& acc = ensure(n.in[0]);
                for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += ga.data[i];
            }
            if (nodes_[n.in[1]].requires_grad) {
                Tensor gb = reduce_to(g, B, mode, false);
                Tensor& acc = ensure(n.in[1]);
                for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += gb.data[i];
            }
            break;
        }
        case Op::Mul: {
            const Tensor& A = nodes_[n.in[0]].value;
            const Tensor& B = nodes_[n.in[1]].value;
            Bcast mode = classify(A, B);
            std::size_t rows = n.value.rows(), cols = n.value.cols();
            auto fetch = [&](const Tensor& t, std::size_t i, std::size_t j) {
                if (t.numel() == 1) return t.data[0];
                if (t.shape.size() == 2 && t.shape[0] == 1 && n.value.rows() > 1) return t.data[j];
                return t.data[i * cols + j];
            };
            if (nodes_[n.in[0]].requires_grad) {
                Tensor full(n.value.shape);
                for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t j = 0; j < cols; ++j)
                        full.data[i * cols + j] = g.data[i * cols + j] * fetch(B, i, j);
                Tensor ga = reduce_to(full, A, mode, true);
                Tensor& acc = ensure(n.in[0]);
                for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += ga.data[i];
            }
            if (nodes_[n.in[1]].requires_grad) {
                Tensor full(n.value.shape);
                for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t j = 0; j < cols; ++j)
                        full.data[i * cols + j] = g.data[i * cols + j] * fetch(A, i, j);
                Tensor gb = reduce_to(full, B, mode, false);
                Tensor& acc = ensure(n.in[1]);
                for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += gb.data[i];
            }
            break;
        }
        case Op::Scale: {
            if (!nodes_[n.in[0]].requires_grad) break;
            Tensor& acc = ensure(n.in[0]);
            for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += n.c * g.data[i];
            break;
        }
        case Op::Matmul: {
            const Tensor& A = nodes_[n.in[0]].value;
            const Tensor& B = nodes_[n.in[1]].value;
            std::size_t m = n.value.shape[0], p = n.value.shape[1];
            std::size_t k = n.trans_a ? A.shape[0] : A.shape[1];
            auto getA = [&](std::size_t i, std::size_t t) {
                return n.trans_a ? A.at(t, i) : A.at(i, t);
            };
            auto getB = [&](std::size_t t, std::size_t j) {
                return n.trans_b ? B.at(j, t) : B.at(t, j);
            };
            if (nodes_[n.in[0]].requires_grad) {
                Tensor& acc = ensure(n.in[0]);
                // dA'[i,t] = sum_j g[i,j] B'[t,j]
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t t = 0; t < k; ++t) {
                        double s = 0.0;
                        for (std::size_t j = 0; j < p; ++j) s += g.at(i, j) * getB(t, j);
                        if (n.trans_a)
                            acc.at(t, i) += s;
                        else
                            acc.at(i, t) += s;
                    }
            }
            if (nodes_[n.in[1]].requires_grad) {
                Tensor& acc = ensure(n.in[1]);
                // dB'[t,j] = sum_i A'[i,t] g[i,j]
                for (std::size_t t = 0; t < k; ++t)
                    for (std::size_t j = 0; j < p; ++j) {
                        double s = 0.0;
                        for (std::size_t i = 0; i < m; ++i) s += getA(i, t) * g.at(i, j);
                        if (n.trans_b)
                            acc.at(j, t) += s;
                        else
                            acc.at(t, j) += s;
                    }
            }
            break;
        }
        case Op::Relu: {
            if (!nodes_[n.in[0]].requires_grad) break;
            const Tensor& X = nodes_[n.in[0]].value;
            Tensor& acc = ensure(n.in[0]);
            for (std::size_t i = 0; i < acc.data.size(); ++i)
                if (X.data[i] > 0.0) acc.data[i] += g.data[i];
            break;
        }
        case Op::Softmax: {
            if (!nodes_[n.in[0]].requires_grad) break;
            const Tensor& Y = n.value;
            Tensor& acc = ensure(n.in[0]);
            std::size_t rows = Y.rows(), cols = Y.cols();
            for (std::size_t i = 0; i < rows; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < cols; ++j) dot += g.at(i, j) * Y.at(i, j);
                for (std::size_t j = 0; j < cols; ++j)
                    acc.at(i, j) += Y.at(i, j) * (g.at(i, j) - dot);
            }
            break;
        }
        case Op::LayerNorm: {
            if (!nodes_[n.in[0]].requires_grad) break;
            const Tensor& Y = n.value;
            Tensor& acc = ensure(n.in[0]);
            std::size_t rows = Y.rows(), cols = Y.cols();
            for (std::size_t i = 0; i < rows; ++i) {
                double gmean = 0.0, gymean = 0.0;
                for (std::size_t j = 0; j < cols; ++j) {
                    gmean += g.at(i, j);
                    gymean += g.at(i, j) * Y.at(i, j);
                }
                gmean /= cols;
                gymean /= cols;
                double inv = n.auxd[i];
                for (std::size_t j = 0; j < cols; ++j)
                    acc.at(i, j) += inv * (g.at(i, j) - gmean - Y.at(i, j) * gymean);
            }
            break;
        }
        case Op::Concat: {
            std::size_t off = 0;
            for (int src : n.in) {
                const Tensor& part = nodes_[src].value;
                if (nodes_[src].requires_grad) {
                    Tensor& acc = ensure(src);
                    for (std::size_t i = 0; i < part.rows(); ++i)
                        for (std::size_t j = 0; j < part.cols(); ++j)
                            acc.at(i, j) += g.at(i, off + j);
                }
                off += part.cols();
            }
            break;
        }
        case Op::GatherRows: {
            if (!nodes_[n.in[0]].requires_grad) break;
            Tensor& acc = ensure(n.in[0]);
            for (std::size_t i = 0; i < n.idx.size(); ++i)
                for (std::size_t j = 0; j < acc.cols(); ++j)
                    acc.at(n.idx[i], j) += g.at(i, j);
            break;
        }
        case Op::MeanAxis0: {
            if (!nodes_[n.in[0]].requires_grad) break;
            Tensor& acc = ensure(n.in[0]);
            double inv = 1.0 / static_cast<double>(acc.rows());
            for (std::size_t i = 0; i < acc.rows(); ++i)
                for (std::size_t j = 0; j < acc.cols(); ++j) acc.at(i, j) += inv * g.data[j];
            break;
        }
        case Op::SumAll: {
            if (!nodes_[n.in[0]].requires_grad) break;
            Tensor& acc = ensure(n.in[0]);
            for (auto& x : acc.data) x += g.data[0];
            break;
        }
        case Op::FrobeniusSq: {
            if (!nodes_[n.in[0]].requires_grad) break;
            const Tensor& X = nodes_[n.in[0]].value;
            Tensor& acc = ensure(n.in[0]);
            for (std::size_t i = 0; i < acc.data.size(); ++i)
                acc.data[i] += 2.0 * X.data[i] * g.data[0];
            break;
        }
        case Op::Mse: {
            const Tensor& A = nodes_[n.in[0]].value;
            const Tensor& B = nodes_[n.in[1]].value;
            double scale = 2.0 * g.data[0] / static_cast<double>(A.data.size());
            if (nodes_[n.in[0]].requires_grad) {
                Tensor& acc = ensure(n.in[0]);
                for (std::size_t i = 0; i < acc.data.size(); ++i)
                    acc.data[i] += scale * (A.data[i] - B.data[i]);
            }
            if (nodes_[n.in[1]].requires_grad) {
                Tensor& acc = ensure(n.in[1]);
                for (std::size_t i = 0; i < acc.data.size(); ++i)
                    acc.data[i] -= scale * (A.data[i] - B.data[i]);
            }
            break;
        }
        case Op::MeanRowNorm: {
            if (!nodes_[n.in[0]].requires_grad) break;
            const Tensor& X = nodes_[n.in[0]].value;
            Tensor& acc = ensure(n.in[0]);
            std::size_t rows = X.rows(), cols = X.cols();
            double inv_n = g.data[0] / static_cast<double>(rows);
            for (std::size_t i = 0; i < rows; ++i) {
                double r = n.auxd[i];
                if (r < 1e-12) continue; // subgradient 0 at the kink
                for (std::size_t j = 0; j < cols; ++j)
                    acc.at(i, j) += inv_n * X.at(i, j) / r;
            }
            break;
        }
        case Op::CosineSim: {
            if (!nodes_[n.in[0]].requires_grad) break;
            Tensor& acc = ensure(n.in[0]);
            std::size_t rows = n.value.rows();
            std::size_t cols = acc.cols();
            const double* zhat = n.auxd.data();
            const double* norms = n.auxd.data() + rows * cols;
            // dL/dz_i = sum_j (g_ij + g_ji) (zhat_j - C_ij zhat_i) / r_i;
            // the diagonal term vanishes because C_ii = 1.
            for (std::size_t i = 0; i < rows; ++i) {
                for (std::size_t j = 0; j < rows; ++j) {
                    double gij = g.at(i, j) + g.at(j, i);
                    if (gij == 0.0) continue;
                    double cij = n.value.at(i, j);
                    for (std::size_t t = 0; t < cols; ++t)
                        acc.at(i, t) += gij * (zhat[j * cols + t] - cij * zhat[i * cols + t]) /
                                        norms[i];
                }
            }
            break;
        }
        case Op::CrossEntropy: {
            if (!nodes_[n.in[0]].requires_grad) break;
            Tensor& acc = ensure(n.in[0]);
            std::size_t rows = acc.rows(), cols = acc.cols();
            double inv = g.data[0] / static_cast<double>(rows);
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < cols; ++j) {
                    double p = n.auxd[i * cols + j];
                    double y = (std::size_t(n.labels[i]) == j) ? 1.0 : 0.0;
                    acc.at(i, j) += inv * (p - y);
                }
            break;
        }
        case Op::StackWeightedSum: {
            const Tensor& W = nodes_[n.in[0]].value;
            if (nodes_[n.in[0]].requires_grad) {
                Tensor& accw = ensure(n.in[0]);
                for (std::size_t s = 0; s + 1 < n.in.size(); ++s) {
                    const Tensor& C = nodes_[n.in[s + 1]].value;
                    double dot = 0.0;
                    for (std::size_t i = 0; i < C.data.size(); ++i) dot += g.data[i] * C.data[i];
                    accw.data[s] += dot;
                }
            }
            for (std::size_t s = 0; s + 1 < n.in.size(); ++s) {
                if (!nodes_[n.in[s + 1]].requires_grad) continue;
                Tensor& acc = ensure(n.in[s + 1]);
                double ws = W.data[s];
                for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += ws * g.data[i];
            }
            break;
        }
        case Op::ScalarSqrt: {
            if (!nodes_[n.in[0]].requires_grad) break;
            Tensor& acc = ensure(n.in[0]);
            double y = n.value.data[0];
            acc.data[0] += (y > 1e-12) ? g.data[0] / (2.0 * y) : 0.0;
            break;
        }
        case Op::Dropout: {
            if (!nodes_[n.in[0]].requires_grad) break;
            Tensor& acc = ensure(n.in[0]);
            for (std::size_t i = 0; i < acc.data.size(); ++i)
                acc.data[i] += g.data[i] * n.auxd[i];
            break;
        }
        }
    }
}

} // namespace ugt
