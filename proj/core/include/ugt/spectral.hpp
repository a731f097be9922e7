#pragma once

#include <cstdint>
#include <vector>

#include "ugt/graph.hpp"

namespace ugt {

/// Dense symmetric eigendecomposition by cyclic Jacobi rotations.
/// Eigenpairs are returned sorted by ascending eigenvalue. Deterministic.
struct EigenDecomposition {
    std::vector<double> values;  // ascending
    std::vector<double> vectors; // column-major: vectors[i + n*j] = v_j[i]
    std::size_t n = 0;
};

EigenDecomposition jacobi_eigen(const std::vector<double>& sym, std::size_t n);

struct LaplacianPE {
    std::size_t n = 0;
    std::size_t k = 0;
    std::vector<double> matrix;      // row-major n x k
    std::vector<double> eigenvalues; // the k selected eigenvalues, ascending
    double at(NodeId v, std::size_t j) const { return matrix[v * k + j]; }
};

/// Eigenvectors of the k_pe smallest nonzero eigenvalues of the
/// symmetric-normalized Laplacian (or D - A when combinatorial = true).
/// Columns are sign-canonicalized: the first functional in
/// {sum v^3, sum d_i v_i, sum v_i} with magnitude above tolerance is made
/// positive; the first nonzero coordinate breaks any remaining tie.
/// If fewer than k_pe nonzero eigenvalues exist the tail columns are zero.
LaplacianPE laplacian_pe(const Graph& g, std::size_t k_pe, bool combinatorial = false);

/// Each column independently multiplied by +-1 with probability 1/2.
std::vector<double> sign_flip(const LaplacianPE& pe, std::uint64_t seed);

struct TransitionStack {
    unsigned p = 0;
    std::size_t n = 0;
    std::vector<std::vector<double>> mats; // mats[s] = A^{s+1}, row-major n x n
    double at(unsigned step, NodeId i, NodeId j) const { return mats[step][i * n + j]; }
};

/// A^1 = row-normalized adjacency (all-zero rows for isolated nodes);
/// A^s = A^{s-1} * A^1.
TransitionStack transition_stack(const Graph& g, unsigned p);

struct LogTargetStack {
    unsigned p = 0;
    std::size_t n = 0;
    std::size_t neg_count = 1;
    std::vector<std::vector<double>> mats;
};

/// Entrywise log(A^p_ij / colsum_j) - log(neg_count/|V|), with zero entries
/// and results below `floor` clamped to zero (shifted-PMI style). Columns
/// that sum to zero produce zero columns. row_normalized switches the
/// denominator to the row sum.
LogTargetStack log_scale_targets(const TransitionStack& stack, std::size_t neg_count,
                                 double floor = 0.0, bool row_normalized = false);

} // namespace ugt
