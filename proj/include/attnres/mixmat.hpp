#pragma once

#include <span>
#include <string>
#include <vector>

#include "attnres/attnres_full.hpp"

namespace attnres {

/// Lower-triangular L x L map from source outputs to layer inputs: row l
/// (1-based) weights sources v_0 .. v_{l-1}, where v_0 is the embedding and
/// v_i = f_i(h_i). Entries above the diagonal are exactly zero.
struct DepthMixMatrix {
    int L = 0;
    std::string variant;
    std::vector<double> data;  // row-major, L*L

    double& at(int row, int col) { return data[static_cast<std::size_t>(row) * L + col]; }
    double at(int row, int col) const {
        return data[static_cast<std::size_t>(row) * L + col];
    }

    /// h_l = sum_i M[l][i] * values[i], rows evaluated independently.
    std::vector<Vec> apply(std::span<const Vec> values) const;

    /// Row-major CSV with a header carrying the variant name and L.
    std::string to_csv() const;
};

/// Unit-weight accumulation: all-ones lower triangle.
DepthMixMatrix mix_standard(int L);

/// Gated recurrence h_l = (1-g_l) h_{l-1} + g_l v_{l-1} with scalar gates
/// g_2..g_L in [0,1]. Rows telescope to sum 1.
DepthMixMatrix mix_highway(std::span<const double> gates);

/// Parameters of an m-stream recurrence H_l = H_{l-1} A_l + v_{l-1} b_{l-1}^T
/// read out through per-layer mixing vectors.
struct MhcParams {
    std::vector<Vec> alphas;               // read-out vector per layer, size L
    std::vector<Vec> betas;                // write vector per source, size L
    std::vector<std::vector<double>> As;   // m x m transitions A_2..A_L (row-major)
    int m = 0;

    /// When set, transition matrices are checked (not projected) to be
    /// doubly stochastic within the given tolerance.
    bool require_doubly_stochastic = false;
    double stochastic_tol = 1e-9;
};

/// Unrolled weight M[i -> l] = beta_i^T (A_{i+2} ... A_l) alpha_l.
DepthMixMatrix mix_mhc(const MhcParams& p);

/// Per-row softmax over the kernel scores of a query list against the source
/// values; rows are strictly positive and sum to 1.
DepthMixMatrix mix_attnres_full(std::span<const Vec> queries, std::span<const Vec> keys,
                                const RmsNorm& norm);

/// Expands a block-variant trace into the L x L convention: the weight a
/// layer assigns to a completed block (or to the running partial sum) is
/// replicated across the columns of that block's members.
DepthMixMatrix mix_attnres_block(int block_size, const ForwardTrace& trace);

/// Max over split points t of the numerical rank of the lower-left submatrix
/// rows t+1.., columns ..t. Singular values below tol * sigma_max count as
/// zero.
int semiseparable_rank(const DepthMixMatrix& M, double tol = 1e-9);

/// Numerical rank of the whole matrix at the same relative tolerance.
int numerical_rank(const DepthMixMatrix& M, double tol = 1e-9);

}  // namespace attnres
