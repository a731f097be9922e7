#include "ugt/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ugt {

EigenDecomposition jacobi_eigen(const std::vector<double>& sym, std::size_t n) {
    if (sym.size() != n * n) throw NumericError("jacobi_eigen: bad matrix size");
    std::vector<double> a = sym;
    std::vector<double> v(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i + n * i] = 1.0;

    auto off_norm2 = [&]() {
        double s = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) s += a[p * n + q] * a[p * n + q];
        return s;
    };

    double scale = 0.0;
    for (double x : a) scale = std::max(scale, std::fabs(x));
    if (scale == 0.0) scale = 1.0;
    const double tol = 1e-14 * scale;

    for (int sweep = 0; sweep < 200; ++sweep) {
        if (off_norm2() < 1e-28 * scale * scale * double(n * n)) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double apq = a[p * n + q];
                if (std::fabs(apq) <= tol) continue;
                double app = a[p * n + p], aqq = a[q * n + q];
                double theta = (aqq - app) / (2.0 * apq);
                double t = (theta >= 0.0 ? 1.0 : -1.0) /
                           (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;

                for (std::size_t i = 0; i < n; ++i) {
                    double aip = a[i * n + p], aiq = a[i * n + q];
                    a[i * n + p] = c * aip - s * aiq;
                    a[i * n + q] = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    double api = a[p * n + i], aqi = a[q * n + i];
                    a[p * n + i] = c * api - s * aqi;
                    a[q * n + i] = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    double vip = v[i + n * p], viq = v[i + n * q];
                    v[i + n * p] = c * vip - s * viq;
                    v[i + n * q] = s * vip + c * viq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i) diag[i] = a[i * n + i];
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return diag[x] < diag[y]; });

    EigenDecomposition out;
    out.n = n;
    out.values.resize(n);
    out.vectors.resize(n * n);
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = diag[order[j]];
        for (std::size_t i = 0; i < n; ++i) out.vectors[i + n * j] = v[i + n * order[j]];
    }
    return out;
}

namespace {

/// Canonical sign for an eigenvector column. Tries permutation-invariant
/// odd functionals first so that relabeling a graph permutes the PE rows
/// instead of scrambling signs; falls back to first-nonzero-positive.
void canonicalize_sign(double* col, std::size_t n, const Graph& g) {
    const double tau = 1e-7;
    double s3 = 0.0, sd = 0.0, s1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s3 += col[i] * col[i] * col[i];
        sd += double(g.degree(static_cast<NodeId>(i))) * col[i];
        s1 += col[i];
    }
    double pick = 0.0;
    if (std::fabs(s3) > tau)
        pick = s3;
    else if (std::fabs(sd) > tau)
        pick = sd;
    else if (std::fabs(s1) > tau)
        pick = s1;
    else {
        for (std::size_t i = 0; i < n; ++i) {
            if (std::fabs(col[i]) > 1e-10) {
                pick = col[i];
                break;
            }
        }
    }
    if (pick < 0.0)
        for (std::size_t i = 0; i < n; ++i) col[i] = -col[i];
}

} // namespace

LaplacianPE laplacian_pe(const Graph& g, std::size_t k_pe, bool combinatorial) {
    const std::size_t n = g.n_nodes();
    if (k_pe >= n) throw ConfigError("laplacian_pe: k_pe must be < n_nodes");

    std::vector<double> L(n * n, 0.0);
    if (combinatorial) {
        for (NodeId v = 0; v < n; ++v) {
            L[v * n + v] = static_cast<double>(g.degree(v));
            for (auto it = g.neighbors_begin(v); it != g.neighbors_end(v); ++it)
                L[v * n + *it] = -1.0;
        }
    } else {
        std::vector<double> dinv(n, 0.0);
        for (NodeId v = 0; v < n; ++v)
            if (g.degree(v) > 0) dinv[v] = 1.0 / std::sqrt(static_cast<double>(g.degree(v)));
        for (NodeId v = 0; v < n; ++v) {
            L[v * n + v] = g.degree(v) > 0 ? 1.0 : 0.0; // isolated rows stay zero
            for (auto it = g.neighbors_begin(v); it != g.neighbors_end(v); ++it)
                L[v * n + *it] = -dinv[v] * dinv[*it];
        }
    }

    EigenDecomposition eig = jacobi_eigen(L, n);

    LaplacianPE pe;
    pe.n = n;
    pe.k = k_pe;
    pe.matrix.assign(n * k_pe, 0.0);
    pe.eigenvalues.assign(k_pe, 0.0);

    const double zero_tol = 1e-8;
    std::size_t col = 0;
    for (std::size_t j = 0; j < n && col < k_pe; ++j) {
        if (std::fabs(eig.values[j]) < zero_tol) continue; // skip null space
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = eig.vectors[i + n * j];
        canonicalize_sign(v.data(), n, g);
        for (std::size_t i = 0; i < n; ++i) pe.matrix[i * k_pe + col] = v[i];
        pe.eigenvalues[col] = eig.values[j];
        ++col;
    }
    // Fewer nonzero eigenvalues than k_pe (many components): zero columns.
    return pe;
}

std::vector<double> sign_flip(const LaplacianPE& pe, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> out = pe.matrix;
    for (std::size_t j = 0; j < pe.k; ++j) {
        if (rng.uniform() < 0.5) continue;
        for (std::size_t i = 0; i < pe.n; ++i) out[i * pe.k + j] = -out[i * pe.k + j];
    }
    return out;
}

TransitionStack transition_stack(const Graph& g, unsigned p) {
    if (p < 1) throw ConfigError("transition_stack: p must be >= 1");
    const std::size_t n = g.n_nodes();
    TransitionStack out;
    out.p = p;
    out.n = n;
    out.mats.resize(p);

    std::vector<double>& a1 = out.mats[0];
    a1.assign(n * n, 0.0);
    for (NodeId v = 0; v < n; ++v) {
        double d = static_cast<double>(g.degree(v));
        if (d == 0.0) continue; // isolated: all-zero row
        for (auto it = g.neighbors_begin(v); it != g.neighbors_end(v); ++it)
            a1[v * n + *it] = 1.0 / d;
    }
    for (unsigned s = 1; s < p; ++s) {
        const std::vector<double>& prev = out.mats[s - 1];
        std::vector<double>& cur = out.mats[s];
        cur.assign(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t t = 0; t < n; ++t) {
                double x = prev[i * n + t];
                if (x == 0.0) continue;
                const double* row = a1.data() + t * n;
                double* dst = cur.data() + i * n;
                for (std::size_t j = 0; j < n; ++j) dst[j] += x * row[j];
            }
        }
    }
    return out;
}

LogTargetStack log_scale_targets(const TransitionStack& stack, std::size_t neg_count,
                                 double floor, bool row_normalized) {
    if (neg_count < 1) throw ConfigError("log_scale_targets: neg_count must be >= 1");
    const std::size_t n = stack.n;
    LogTargetStack out;
    out.p = stack.p;
    out.n = n;
    out.neg_count = neg_count;
    out.mats.resize(stack.p);

    const double noise = std::log(static_cast<double>(neg_count) / static_cast<double>(n));
    for (unsigned s = 0; s < stack.p; ++s) {
        const auto& a = stack.mats[s];
        auto& t = out.mats[s];
        t.assign(n * n, 0.0);
        std::vector<double> denom(n, 0.0);
        if (row_normalized) {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) denom[i] += a[i * n + j];
        } else {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) denom[j] += a[i * n + j];
        }
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                double aij = a[i * n + j];
                double d = row_normalized ? denom[i] : denom[j];
                if (aij == 0.0 || d == 0.0) continue;
                double val = std::log(aij / d) - noise;
                t[i * n + j] = (val < floor) ? 0.0 : val;
            }
        }
    }
    return out;
}

} // namespace ugt
