#pragma once

#include <optional>
#include <vector>

#include "hypou/linalg.hpp"

namespace hypou {

// Rank analysis of the controllability ladder [B, AB, ..., A^k B].
struct KalmanResult {
    int rank = 0;
    // Smallest k at which the ladder rank reaches N, if any.
    std::optional<int> minimal_k;
    // rank of [B, AB, ..., A^j B] for j = 0..k_max.
    std::vector<int> ladder_ranks;
};

// k_max < 0 selects the dimension of A, which always suffices.
KalmanResult kalman_rank(const Mat& A, const Mat& B, int k_max = -1);

// Drift-diffusion pair with a nondegenerate d0 x d0 diffusion core.
struct OUSystem {
    int N = 0;
    int d0 = 0;
    int d1 = 0;       // N - d0 degenerate directions
    Mat A;            // N x N drift
    Mat B0;           // d0 x d0 symmetric positive definite core
    double nu = 0.0;  // ellipticity bound: spec(B0) within [nu, 1/nu]
    bool hypoelliptic = false;
    std::optional<int> minimal_k;

    // N x N diffusion matrix: B0 embedded in the leading d0 x d0 corner.
    Mat B() const;

    // Validates shapes, symmetry, the spectral bounds of B0, and the ladder
    // rank. A rank-deficient ladder throws StructureError unless permissive
    // is set, in which case the system is returned with hypoelliptic=false.
    static OUSystem create(const Mat& A, const Mat& B0, double nu,
                           bool permissive = false);
    // Same, with nu taken as the largest admissible bound for B0.
    static OUSystem create(const Mat& A, const Mat& B0, bool permissive = false);
};

// Invariant block decomposition induced by the ladder rank increments.
struct BlockStructure {
    int N = 0;
    int d0 = 0;
    std::vector<int> sizes;       // block sizes d_1..d_k (excludes the core)
    std::vector<Mat> embeddings;  // E_0..E_k, N x d_i column selectors
    std::vector<double> alphas;   // 1/(1+2i) for blocks i = 1..k

    int k() const { return static_cast<int>(sizes.size()); }
    int block_count() const { return static_cast<int>(embeddings.size()); }
    int block_size(int i) const { return static_cast<int>(embeddings[i].cols()); }
    // Column offset of block i in the coordinate ordering.
    int block_offset(int i) const;
};

// Derives the block sizes from the ladder rank increments and checks that
// each subdiagonal coupling block of A has full column rank. Throws
// StructureError naming the offending block when the chain degenerates.
BlockStructure extract_block_structure(const OUSystem& sys);

// Dilation diag(v I_{d0}, v^2 I_{d1}, ..., v^{k+1} I_{dk}).
Mat scale_matrix(double v, const BlockStructure& bs);

// |x - x'| + sum_i |y_i - y_i'|^{1/(1+2i)} with block-wise Euclidean norms.
double anisotropic_distance(const Vec& z, const Vec& w, const BlockStructure& bs);

} // namespace hypou
