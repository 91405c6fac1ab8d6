#include "hypou/structure.hpp"

#include <cmath>
#include <string>

#include "hypou/errors.hpp"

namespace hypou {

KalmanResult kalman_rank(const Mat& A, const Mat& B, int k_max) {
    if (A.rows() != A.cols() || B.rows() != B.cols() || A.rows() != B.rows())
        throw DimensionError("kalman_rank: A and B must be square and of equal size");
    const int N = static_cast<int>(A.rows());
    if (k_max < 0) k_max = N;

    KalmanResult res;
    Mat ladder(N, static_cast<Eigen::Index>(N) * (k_max + 1));
    Mat power = B;
    for (int j = 0; j <= k_max; ++j) {
        ladder.middleCols(static_cast<Eigen::Index>(j) * N, N) = power;
        const int r = numerical_rank(ladder.leftCols(static_cast<Eigen::Index>(j + 1) * N));
        res.ladder_ranks.push_back(r);
        if (r == N && !res.minimal_k) res.minimal_k = j;
        power = A * power;
    }
    res.rank = res.ladder_ranks.back();
    return res;
}

Mat OUSystem::B() const {
    Mat full = Mat::Zero(N, N);
    full.topLeftCorner(d0, d0) = B0;
    return full;
}

OUSystem OUSystem::create(const Mat& A, const Mat& B0, double nu, bool permissive) {
    if (A.rows() != A.cols())
        throw DimensionError("OUSystem: A must be square");
    if (B0.rows() != B0.cols())
        throw DimensionError("OUSystem: B0 must be square");
    const int N = static_cast<int>(A.rows());
    const int d0 = static_cast<int>(B0.rows());
    if (d0 < 1 || d0 > N)
        throw DimensionError("OUSystem: B0 size must lie in [1, N]");
    if (!(nu > 0.0))
        throw StructureError("OUSystem: ellipticity bound nu must be positive");

    const double scale = std::max(1.0, B0.cwiseAbs().maxCoeff());
    if ((B0 - B0.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw StructureError("OUSystem: B0 must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(B0), Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().maxCoeff();
    const double slack = 1e-12 * std::max(1.0, lmax);
    if (lmin < nu - slack || lmax > 1.0 / nu + slack)
        throw StructureError("OUSystem: spectrum of B0 lies outside [nu, 1/nu]");

    OUSystem sys;
    sys.N = N;
    sys.d0 = d0;
    sys.d1 = N - d0;
    sys.A = A;
    sys.B0 = symmetrize(B0);
    sys.nu = nu;

    const KalmanResult kr = kalman_rank(A, sys.B(), N);
    sys.hypoelliptic = (kr.rank == N);
    sys.minimal_k = kr.minimal_k;
    if (!sys.hypoelliptic && !permissive)
        throw StructureError("OUSystem: pair (A, B) fails the rank condition; ladder rank " +
                             std::to_string(kr.rank) + " < " + std::to_string(N));
    return sys;
}

OUSystem OUSystem::create(const Mat& A, const Mat& B0, bool permissive) {
    if (B0.rows() != B0.cols() || B0.rows() < 1)
        throw DimensionError("OUSystem: B0 must be square and non-empty");
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(B0), Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().maxCoeff();
    if (!(lmin > 0.0))
        throw StructureError("OUSystem: B0 must be positive definite");
    return create(A, B0, std::min(lmin, 1.0 / lmax), permissive);
}

int BlockStructure::block_offset(int i) const {
    int off = 0;
    for (int j = 0; j < i; ++j) off += block_size(j);
    return off;
}

BlockStructure extract_block_structure(const OUSystem& sys) {
    if (!sys.hypoelliptic || !sys.minimal_k)
        throw StructureError("extract_block_structure: system fails the rank condition");
    const int N = sys.N;
    const int k = *sys.minimal_k;

    const KalmanResult kr = kalman_rank(sys.A, sys.B(), k);
    BlockStructure bs;
    bs.N = N;
    bs.d0 = sys.d0;
    if (kr.ladder_ranks[0] != sys.d0)
        throw StructureError("extract_block_structure: core rank " +
                             std::to_string(kr.ladder_ranks[0]) +
                             " does not match d0 = " + std::to_string(sys.d0), 0);
    for (int i = 1; i <= k; ++i)
        bs.sizes.push_back(kr.ladder_ranks[i] - kr.ladder_ranks[i - 1]);

    std::vector<int> all_sizes;
    all_sizes.push_back(sys.d0);
    all_sizes.insert(all_sizes.end(), bs.sizes.begin(), bs.sizes.end());
    int off = 0;
    for (int i = 0; i <= k; ++i) {
        Mat E = Mat::Zero(N, all_sizes[i]);
        E.middleRows(off, all_sizes[i]) = Mat::Identity(all_sizes[i], all_sizes[i]);
        bs.embeddings.push_back(E);
        off += all_sizes[i];
    }
    for (int i = 1; i <= k; ++i)
        bs.alphas.push_back(1.0 / (1.0 + 2.0 * i));

    const double ztol = rank_tolerance(N, std::max(1.0, sys.A.cwiseAbs().maxCoeff()));
    for (int i = 1; i <= k; ++i) {
        const Mat sub = bs.embeddings[i].transpose() * sys.A * bs.embeddings[i - 1];
        if (numerical_rank(sub) != all_sizes[i])
            throw StructureError("extract_block_structure: coupling block " + std::to_string(i) +
                                 " has rank below " + std::to_string(all_sizes[i]), i);
        for (int j = 0; j < i - 1; ++j) {
            const Mat below = bs.embeddings[i].transpose() * sys.A * bs.embeddings[j];
            if (below.cwiseAbs().maxCoeff() > ztol)
                throw StructureError("extract_block_structure: block (" + std::to_string(i) +
                                     "," + std::to_string(j) +
                                     ") below the coupling band is nonzero", i);
        }
    }
    return bs;
}

Mat scale_matrix(double v, const BlockStructure& bs) {
    if (!(v > 0.0))
        throw DimensionError("scale_matrix: v must be positive");
    Vec diag(bs.N);
    int off = 0;
    for (int i = 0; i < bs.block_count(); ++i) {
        const double p = std::pow(v, i + 1);
        for (int j = 0; j < bs.block_size(i); ++j) diag(off + j) = p;
        off += bs.block_size(i);
    }
    return diag.asDiagonal();
}

double anisotropic_distance(const Vec& z, const Vec& w, const BlockStructure& bs) {
    if (z.size() != bs.N || w.size() != bs.N)
        throw DimensionError("anisotropic_distance: point dimension mismatch");
    double d = 0.0;
    int off = 0;
    for (int i = 0; i < bs.block_count(); ++i) {
        const double blk = (z.segment(off, bs.block_size(i)) -
                            w.segment(off, bs.block_size(i))).norm();
        d += (i == 0) ? blk : std::pow(blk, 1.0 / (1.0 + 2.0 * i));
        off += bs.block_size(i);
    }
    return d;
}

} // namespace hypou
