#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hypou/gaussian.hpp"
#include "hypou/grid.hpp"
#include "hypou/linalg.hpp"
#include "hypou/psd_path.hpp"
#include "hypou/source.hpp"

namespace hypou {

// One realization of a Poisson process on [0, T]: jump times are the
// cumulative sums of exponential(lambda) gaps, truncated at T.
struct PoissonPath {
    double lambda = 1.0;
    double T = 1.0;
    std::vector<double> jump_times;
    std::uint64_t seed = 0;

    // jumps with sigma_k <= t
    int count(double t) const;
    // jumps with sigma_k < t, the left limit of the counting process
    int count_before(double t) const;
};

PoissonPath sample_poisson_path(double lambda, double T, std::uint64_t seed);

// b_t = int_0^t c(s) dpi_s = sum of c(sigma_k) over jumps with sigma_k <= t.
Vec poisson_integral(const std::function<Vec(double)>& c, const PoissonPath& path,
                     double t);

// Monte Carlo check of E int_0^t xi_{s-} dpi_s = lambda int_0^t E[xi_s] ds.
// xi(path, s) must evaluate the left limit of the integrand at s. The jump
// side sums xi over the realized jump times; the time side integrates xi
// along each path with a midpoint rule. The z-score comes from the per-path
// paired difference, whose mean vanishes under the identity.
struct ExpectationCheck {
    double jump_side = 0.0;
    double time_side = 0.0;
    double standard_error = 0.0;
    double z_score = 0.0;
    int n_paths = 0;
};

ExpectationCheck expectation_identity_check(
    const std::function<double(const PoissonPath&, double)>& xi, double lambda,
    double t, int n_paths, std::uint64_t seed, int time_cells = 256);

// X(t) = sum_{sigma_j <= t} l(sigma_j) with l(t) = sqrt(Q'(t)) e_k, the
// chosen column of the symmetric square root of the perturbation.
struct JumpDrivenShift {
    PoissonPath path;
    TimePSDPath qprime;
    int direction = 0;
    double epsilon = 0.0;

    static JumpDrivenShift create(PoissonPath path, const TimePSDPath& qprime,
                                  int direction, double epsilon);

    Vec l(double t) const;
    Vec X(double t) const;
    // sup over [0, T] of |epsilon * X(t)|
    double sup_shift() const;
};

// Solution for one realization: solve_driftless with the source translated
// by epsilon X(t). The jump times become time breakpoints of the source, so
// the time quadrature splits at every jump.
Field shifted_solve(const TimePSDPath& Q, const SourceFunction& f,
                    const JumpDrivenShift& shift, const SpaceTimeGrid& grid,
                    const SolveCfg& cfg = {}, std::uint64_t seed = 0);

// bar v_eps(t, z) = E[v_eps(t, z + eps X_t)] at intensity lambda = 1/eps^2,
// averaged over n_paths realizations with per-path derived seeds; per-node
// standard errors are reported. Results do not depend on the worker count.
Field averaged_shifted_solve(const TimePSDPath& Q, const TimePSDPath& qprime,
                             const SourceFunction& f, double epsilon, int direction,
                             const SpaceTimeGrid& grid, int n_paths,
                             std::uint64_t seed, const SolveCfg& cfg = {},
                             int workers = 1);

// Stepping control for the deterministic finite-difference problems.
// substeps_per_slice = 0 picks the smallest count with lambda * dt <= 1/2; a
// user-pinned count violating that guard raises SplitStepError.
struct FDCfg {
    int substeps_per_slice = 0;
};

// dw/dt = Tr(Q D^2 w) + lambda (w(t, z + eps l(t)) - w(t, z)) + f with
// lambda = 1/eps^2, integrated on the periodic grid box: per substep the
// diffusion and shift symbols are advanced exactly in Fourier space with
// coefficients frozen at the substep midpoint, and the source enters through
// a trapezoid Duhamel term.
Field solve_fd_one(const TimePSDPath& Q, const TimePSDPath& qprime, double epsilon,
                   int direction, const SourceFunction& f, const SpaceTimeGrid& grid,
                   const FDCfg& cfg = {});

// Central form: dw/dt = Tr(Q D^2 w)
//   + (w(t, z + eps l(t)) - 2 w(t, z) + w(t, z - eps l(t))) / eps^2 + f.
Field solve_fd_two(const TimePSDPath& Q, const TimePSDPath& qprime, double epsilon,
                   int direction, const SourceFunction& f, const SpaceTimeGrid& grid,
                   const FDCfg& cfg = {});

struct ConvergenceRow {
    double epsilon = 0.0;
    double sup_error = 0.0;
    double l2_error = 0.0;
    double runtime_s = 0.0;
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;
    bool monotone = true;  // sup_error strictly decreasing along the ladder
    double slope = 0.0;    // log-log fitted order of sup_error in epsilon
};

struct PerturbedSolve {
    Field field;   // finite-difference solution at the smallest epsilon
    Field target;  // direct solve of dv/dt = Tr((Q + Q') D^2 v) + f
    ConvergenceTable table;
};

// Central finite-difference solves with every direction k = 1..N active at
// once, for each epsilon of the decreasing ladder, compared on the inner box
// against the direct summed-diffusion solution. mode is forwarded to the
// direct solver ("auto", "gauss" or "mc"). A non-decreasing error table is
// reported through table.monotone rather than an exception.
PerturbedSolve perturbed_solve_iterative(const TimePSDPath& Q, const TimePSDPath& qprime,
                                         const SourceFunction& f, const SpaceTimeGrid& grid,
                                         const std::vector<double>& eps_ladder,
                                         const std::string& mode = "auto",
                                         const FDCfg& fd = {}, std::uint64_t seed = 0,
                                         int workers = 1);

} // namespace hypou
