#pragma once

#include <Eigen/Dense>

namespace hypou {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Matrix exponential e^M (scaling-and-squaring with Pade approximants).
Mat matrix_exp(const Mat& M);

/// e^{tA}; identity at t = 0.
Mat matrix_exp(const Mat& A, double t);

/// Singular values below dim * sigma_max * 2^-40 count as zero.
double rank_tolerance(int dim, double sigma_max);

/// Numerical rank with the library-wide tolerance rule.
int numerical_rank(const Mat& M);

Mat symmetrize(const Mat& M);

/// Symmetrize and clamp negative eigenvalues in [-tol, 0) to zero.
/// Eigenvalues below -tol indicate an invalid input and throw PsdError.
Mat psd_clamp(const Mat& M, double tol = 1e-10);

/// True when min eigenvalue >= -tol after symmetrization.
bool is_psd(const Mat& M, double tol = 1e-10);

/// Factor F (n x r, r = numerical rank) with F F^T == C to 1e-10 relative
/// Frobenius error; columns are sqrt(eigenvalue)-scaled eigenvectors.
Mat psd_factor(const Mat& C, double drop_rel = 1e-13);

/// Unique symmetric non-negative square root. Eigenvalues in [-tol, tol]
/// clamp to zero; anything more negative throws PsdError.
Mat sqrt_psd(const Mat& S, double tol = 1e-10);

double spectral_norm(const Mat& M);
double max_eigenvalue_sym(const Mat& M);

} // namespace hypou
