#pragma once

#include <cstdint>
#include <string>

#include "hypou/grid.hpp"
#include "hypou/linalg.hpp"
#include "hypou/psd_path.hpp"
#include "hypou/source.hpp"
#include "hypou/structure.hpp"

namespace hypou {

// Controls for the representation solvers. The spatial average against each
// increment law runs in whitened coordinates; per axis it uses Hermite nodes
// when the standard deviation is small next to the source support radius and
// composite Legendre panels across the support otherwise.
struct SolveCfg {
    std::string mode = "auto"; // "auto": quadrature up to dim 3, MC beyond
    int gh_nodes = 9;
    int gl_nodes = 12;
    int max_panels = 6;
    double gh_switch = 0.08;   // Hermite when sigma < gh_switch * support radius
    double panel_factor = 0.6; // Legendre panels ~ panel_factor * radius / sigma
    int time_substeps = 1;     // quadrature subintervals per output time step
    int mc_paths = 4096;
    int workers = 1;
    double cov_tol = 1e-10;    // increment covariance quadrature tolerance
};

// Zero-mean-or-shifted Gaussian law of a stochastic increment.
struct GaussianIncrementLaw {
    Vec mean;
    Mat covariance;
    Mat factor; // N x r with factor * factor^T == covariance

    static GaussianIncrementLaw from_covariance(const Vec& mean, const Mat& cov);
};

// Law of sqrt(2) * int_s^t Q(r)^{1/2} dW_r: mean zero, covariance
// 2 * int_s^t Q(r) dr by adaptive quadrature.
GaussianIncrementLaw increment_covariance(const TimePSDPath& Q, double s, double t,
                                          double tol = 1e-10);

// Law of sqrt(2) * int_s^t e^{(t-r)A} B^{1/2} dW_r: mean zero, covariance
// 2 * int_0^{t-s} e^{rA} B e^{rA^T} dr.
GaussianIncrementLaw ou_covariance(const OUSystem& sys, double s, double t,
                                   double tol = 1e-10);

// Transition density at time v from z to zp: Gaussian with mean e^{Av} z and
// covariance ou_covariance(0, v).
double ou_density(const OUSystem& sys, double v, const Vec& z, const Vec& zp);

// v(t,z) = int_0^t E[ f(s, z + I_{s,t}) ] ds for the driftless problem
// dv/dt = Tr(Q(t) D^2 v) + f, v(0) = 0.
Field solve_driftless(const TimePSDPath& Q, const SourceFunction& f,
                      const SpaceTimeGrid& grid, const SolveCfg& cfg = {},
                      std::uint64_t seed = 0);

// u(t,z) = int_0^t E[ f(s, e^{(t-s)A} z + I^{ou}_{s,t}) ] ds for
// du/dt = Tr(B D^2 u) + <Az, Du> + f, u(0) = 0.
Field solve_ou(const OUSystem& sys, const SourceFunction& f, const SpaceTimeGrid& grid,
               const SolveCfg& cfg = {}, std::uint64_t seed = 0);

// Same with diffusion B + S(t), S a non-negative time-dependent perturbation.
Field solve_ou_perturbed(const OUSystem& sys, const TimePSDPath& S,
                         const SourceFunction& f, const SpaceTimeGrid& grid,
                         const SolveCfg& cfg = {}, std::uint64_t seed = 0);

// v(t,z) = u(t, e^{-tA} z) and u(t,z) = v(t, e^{tA} z), resampled on the
// field's own grid by cubic interpolation.
Field pull_to_driftless(const Field& u, const Mat& A);
Field push_to_ou(const Field& v, const Mat& A);

// f~(t,z) = f(t, e^{-tA} z); pairs with pull_to_driftless.
SourceFunction source_pullback(const SourceFunction& f, const Mat& A, double T);
// f-(t,z) = f(t, e^{tA} z); pairs with push_to_ou.
SourceFunction source_pushforward(const SourceFunction& f, const Mat& A, double T);

// max over interior nodes of |v(t,z) - int_0^t (f + Tr(Q D^2 v)) ds| with
// centered second differences and trapezoidal time integration.
double residual(const Field& field, const TimePSDPath& Q, const SourceFunction& f);

} // namespace hypou
