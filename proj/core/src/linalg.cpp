#include "hypou/linalg.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include "hypou/errors.hpp"

namespace hypou {

Mat matrix_exp(const Mat& M) {
    if (M.rows() != M.cols())
        throw DimensionError("matrix_exp: matrix must be square");
    return M.exp();
}

Mat matrix_exp(const Mat& A, double t) {
    if (t == 0.0) return Mat::Identity(A.rows(), A.cols());
    return matrix_exp((A * t).eval());
}

double rank_tolerance(int dim, double sigma_max) {
    return static_cast<double>(dim) * sigma_max * std::ldexp(1.0, -40);
}

int numerical_rank(const Mat& M) {
    if (M.size() == 0) return 0;
    Eigen::JacobiSVD<Mat> svd(M);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) == 0.0) return 0;
    const double tol = rank_tolerance(static_cast<int>(std::max(M.rows(), M.cols())), sv(0));
    int r = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) > tol) ++r;
    return r;
}

Mat symmetrize(const Mat& M) { return 0.5 * (M + M.transpose()); }

Mat psd_clamp(const Mat& M, double tol) {
    Mat S = symmetrize(M);
    Eigen::SelfAdjointEigenSolver<Mat> es(S);
    Vec lam = es.eigenvalues();
    if (lam.size() > 0 && lam.minCoeff() < -tol)
        throw PsdError("psd_clamp: matrix has eigenvalue " +
                       std::to_string(lam.minCoeff()) + " below -" + std::to_string(tol));
    for (int i = 0; i < lam.size(); ++i) lam(i) = std::max(lam(i), 0.0);
    return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

bool is_psd(const Mat& M, double tol) {
    Mat S = symmetrize(M);
    Eigen::SelfAdjointEigenSolver<Mat> es(S, Eigen::EigenvaluesOnly);
    return es.eigenvalues().size() == 0 || es.eigenvalues().minCoeff() >= -tol;
}

Mat psd_factor(const Mat& C, double drop_rel) {
    Mat S = symmetrize(C);
    Eigen::SelfAdjointEigenSolver<Mat> es(S);
    const Vec& lam = es.eigenvalues();
    const double lmax = lam.size() ? std::max(lam.maxCoeff(), 0.0) : 0.0;
    const double cut = lmax * drop_rel;
    int r = 0;
    for (int i = 0; i < lam.size(); ++i)
        if (lam(i) > cut) ++r;
    Mat F(S.rows(), r);
    int c = 0;
    for (int i = 0; i < lam.size(); ++i) {
        if (lam(i) > cut) F.col(c++) = es.eigenvectors().col(i) * std::sqrt(lam(i));
    }
    return F;
}

Mat sqrt_psd(const Mat& S, double tol) {
    Mat sym = symmetrize(S);
    Eigen::SelfAdjointEigenSolver<Mat> es(sym);
    Vec lam = es.eigenvalues();
    const double scale = lam.size() ? std::max(1.0, lam.cwiseAbs().maxCoeff()) : 1.0;
    for (int i = 0; i < lam.size(); ++i) {
        if (lam(i) < -tol * scale)
            throw PsdError("sqrt_psd: matrix has a negative eigenvalue");
        // The square root amplifies eigenvalue noise, so values within the
        // tolerance band round to exactly zero before taking it.
        lam(i) = lam(i) <= tol * scale ? 0.0 : std::sqrt(lam(i));
    }
    return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

double spectral_norm(const Mat& M) {
    if (M.size() == 0) return 0.0;
    Eigen::JacobiSVD<Mat> svd(M);
    return svd.singularValues()(0);
}

double max_eigenvalue_sym(const Mat& M) {
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(M), Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

} // namespace hypou
