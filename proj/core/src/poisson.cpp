#include "hypou/poisson.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>

#include "hypou/errors.hpp"
#include "hypou/fft.hpp"
#include "hypou/parallel.hpp"
#include "hypou/rng.hpp"

namespace hypou {

namespace {

// Interpolates one slice at z + offset, trusting only the inner box: outer
// points whose target leaves the sampled region contribute zero, an inner
// point doing so is a genuine coverage failure.
double eval_shifted(const SpaceTimeGrid& g, Eigen::Ref<const Vec> slice,
                    Eigen::Index flat, const Vec& offset) {
    const Vec w = g.point(flat) + offset;
    for (int a = 0; a < g.dim(); ++a) {
        const double last = g.lo(a) + (g.n[a] - 1) * g.spacing(a);
        if (w(a) < g.lo(a) - 1e-9 || w(a) > last + 1e-9) {
            if (g.is_inner(flat))
                throw CoverageError("averaged shift leaves the sampled box on the inner "
                                    "region; enlarge the grid");
            return 0.0;
        }
    }
    return interp_cubic(g, slice, w);
}

} // namespace

int PoissonPath::count(double t) const {
    return static_cast<int>(std::upper_bound(jump_times.begin(), jump_times.end(), t) -
                            jump_times.begin());
}

int PoissonPath::count_before(double t) const {
    return static_cast<int>(std::lower_bound(jump_times.begin(), jump_times.end(), t) -
                            jump_times.begin());
}

PoissonPath sample_poisson_path(double lambda, double T, std::uint64_t seed) {
    if (!(lambda > 0.0) || !(T > 0.0))
        throw std::invalid_argument("sample_poisson_path: lambda and T must be positive");
    PoissonPath path;
    path.lambda = lambda;
    path.T = T;
    path.seed = seed;
    Rng rng(seed);
    double acc = rng.exponential(lambda);
    while (acc <= T) {
        path.jump_times.push_back(acc);
        acc += rng.exponential(lambda);
    }
    return path;
}

Vec poisson_integral(const std::function<Vec(double)>& c, const PoissonPath& path,
                     double t) {
    Vec acc = c(0.0);
    acc.setZero();
    for (double sigma : path.jump_times) {
        if (sigma > t) break;
        acc += c(sigma);
    }
    return acc;
}

ExpectationCheck expectation_identity_check(
    const std::function<double(const PoissonPath&, double)>& xi, double lambda,
    double t, int n_paths, std::uint64_t seed, int time_cells) {
    if (!(lambda > 0.0) || !(t > 0.0))
        throw std::invalid_argument("expectation_identity_check: lambda and t positive");
    if (n_paths < 2 || time_cells < 1)
        throw SchemaError("expectation_identity_check: need at least 2 paths and 1 cell");

    const double h = t / time_cells;
    double sum_jump = 0.0, sum_time = 0.0, sum_d = 0.0, sum_d2 = 0.0;
    for (int p = 0; p < n_paths; ++p) {
        const PoissonPath path = sample_poisson_path(lambda, t, task_seed(seed, p));
        double jump = 0.0;
        for (double sigma : path.jump_times) jump += xi(path, sigma);
        double along = 0.0;
        for (int i = 0; i < time_cells; ++i) along += xi(path, (i + 0.5) * h);
        along *= h * lambda;
        sum_jump += jump;
        sum_time += along;
        const double d = jump - along;
        sum_d += d;
        sum_d2 += d * d;
    }
    ExpectationCheck rep;
    rep.n_paths = n_paths;
    rep.jump_side = sum_jump / n_paths;
    rep.time_side = sum_time / n_paths;
    const double mean_d = sum_d / n_paths;
    const double var_d =
        std::max(0.0, sum_d2 / n_paths - mean_d * mean_d) * n_paths / (n_paths - 1.0);
    rep.standard_error = std::sqrt(var_d / n_paths);
    rep.z_score = rep.standard_error > 0.0 ? mean_d / rep.standard_error : 0.0;
    return rep;
}

JumpDrivenShift JumpDrivenShift::create(PoissonPath path, const TimePSDPath& qprime,
                                        int direction, double epsilon) {
    if (!qprime.valid()) throw DimensionError("JumpDrivenShift: empty perturbation path");
    if (direction < 0 || direction >= qprime.dim())
        throw DimensionError("JumpDrivenShift: direction index out of range");
    if (!(epsilon >= 0.0))
        throw std::invalid_argument("JumpDrivenShift: epsilon must be non-negative");
    if (qprime.horizon() < path.T - 1e-12)
        throw DimensionError("JumpDrivenShift: perturbation horizon shorter than the path");
    JumpDrivenShift s;
    s.path = std::move(path);
    s.qprime = qprime;
    s.direction = direction;
    s.epsilon = epsilon;
    return s;
}

Vec JumpDrivenShift::l(double t) const {
    return sqrt_psd(qprime.evaluate(t)).col(direction);
}

Vec JumpDrivenShift::X(double t) const {
    Vec acc = Vec::Zero(qprime.dim());
    for (double sigma : path.jump_times) {
        if (sigma > t) break;
        acc += l(sigma);
    }
    return acc;
}

double JumpDrivenShift::sup_shift() const {
    Vec acc = Vec::Zero(qprime.dim());
    double worst = 0.0;
    for (double sigma : path.jump_times) {
        acc += l(sigma);
        worst = std::max(worst, acc.norm());
    }
    return epsilon * worst;
}

Field shifted_solve(const TimePSDPath& Q, const SourceFunction& f,
                    const JumpDrivenShift& shift, const SpaceTimeGrid& grid,
                    const SolveCfg& cfg, std::uint64_t seed) {
    if (shift.qprime.dim() != f.dim())
        throw DimensionError("shifted_solve: shift and source dimensions disagree");
    // A shift that never moves anything must not perturb the time quadrature
    // through the extra jump breakpoints, so it short-circuits exactly.
    if (shift.epsilon == 0.0 || shift.path.jump_times.empty() || shift.sup_shift() == 0.0)
        return solve_driftless(Q, f, grid, cfg, seed);
    const double eps = shift.epsilon;
    const JumpDrivenShift local = shift;
    const SourceFunction moved = f.shifted(
        [local, eps](double t) { return Vec(eps * local.X(t)); }, shift.sup_shift(),
        shift.path.jump_times);
    return solve_driftless(Q, moved, grid, cfg, seed);
}

Field averaged_shifted_solve(const TimePSDPath& Q, const TimePSDPath& qprime,
                             const SourceFunction& f, double epsilon, int direction,
                             const SpaceTimeGrid& grid, int n_paths,
                             std::uint64_t seed, const SolveCfg& cfg, int workers) {
    if (!(epsilon > 0.0))
        throw std::invalid_argument("averaged_shifted_solve: epsilon must be positive");
    if (n_paths < 2)
        throw SchemaError("averaged_shifted_solve: Monte Carlo budget must be >= 2 paths");
    if (qprime.dim() != grid.dim())
        throw DimensionError("averaged_shifted_solve: perturbation dimension mismatch");
    const double lambda = 1.0 / (epsilon * epsilon);
    const Eigen::Index nz = grid.space_points();
    const int cols = grid.nt + 1;

    Mat acc = Mat::Zero(nz, cols);
    Mat acc2 = Mat::Zero(nz, cols);
    const int W = std::max(1, workers);
    std::vector<Mat> bufs(W);
    for (int start = 0; start < n_paths; start += W) {
        const int wave = std::min(W, n_paths - start);
        parallel_for(wave, workers, [&](int w) {
            const int p = start + w;
            const PoissonPath path =
                sample_poisson_path(lambda, grid.T, task_seed(seed, p));
            const JumpDrivenShift shift =
                JumpDrivenShift::create(path, qprime, direction, epsilon);
            const Field v = shifted_solve(Q, f, shift, grid, cfg, 0);
            Mat& B = bufs[w];
            B.setZero(nz, cols);
            for (int j = 0; j <= grid.nt; ++j) {
                const Vec off = epsilon * shift.X(grid.time(j));
                if (off.cwiseAbs().maxCoeff() == 0.0) {
                    B.col(j) = v.values.col(j);
                    continue;
                }
                for (Eigen::Index flat = 0; flat < nz; ++flat)
                    B(flat, j) = eval_shifted(grid, v.values.col(j), flat, off);
            }
        });
        for (int w = 0; w < wave; ++w) {
            acc += bufs[w];
            acc2 += bufs[w].cwiseProduct(bufs[w]);
        }
    }

    Field out = Field::zero(grid, "averaged_shifted", seed);
    out.values = acc / n_paths;
    out.standard_error =
        ((acc2 / n_paths - out.values.cwiseProduct(out.values)).cwiseMax(0.0) /
         (n_paths - 1.0))
            .cwiseSqrt();
    return out;
}

namespace {

// Shared spectral stepper for the finite-difference problems: the diffusion
// and shift parts are both Fourier multipliers on the periodic box, so each
// substep advances their combined symbol exactly with coefficients frozen at
// the substep midpoint; the source enters by a trapezoid Duhamel term with
// sided evaluation at the substep ends.
Field fd_core(const TimePSDPath& Q, const TimePSDPath& qprime, double epsilon,
              const std::vector<int>& dirs, const SourceFunction& f,
              const SpaceTimeGrid& grid, const FDCfg& cfg, bool two_sided,
              const char* name) {
    const int N = grid.dim();
    if (Q.dim() != N || qprime.dim() != N || f.dim() != N)
        throw DimensionError(std::string(name) +
                             ": grid, source, diffusion and perturbation dims disagree");
    if (Q.horizon() < grid.T - 1e-12 || qprime.horizon() < grid.T - 1e-12)
        throw DimensionError(std::string(name) + ": path horizon shorter than the grid");
    if (!(epsilon > 0.0))
        throw std::invalid_argument(std::string(name) + ": epsilon must be positive");
    for (int k : dirs)
        if (k < 0 || k >= N)
            throw DimensionError(std::string(name) + ": direction index out of range");
    if (cfg.substeps_per_slice < 0)
        throw SchemaError(std::string(name) + ": negative substep count");

    const double lambda = 1.0 / (epsilon * epsilon);
    const double dt_slice = grid.dt();
    int m = cfg.substeps_per_slice;
    if (m == 0) m = std::max(1, static_cast<int>(std::ceil(lambda * dt_slice / 0.5 - 1e-12)));
    const double dt = dt_slice / m;
    if (lambda * dt > 0.5 + 1e-9)
        throw SplitStepError(std::string(name) + ": lambda * dt = " +
                             std::to_string(lambda * dt) +
                             " exceeds 1/2; increase substeps_per_slice");

    const double R = f.support_radius();
    if (std::isfinite(R)) {
        double lam_max = 0.0, l_max = 0.0;
        for (int i = 0; i <= 64; ++i) {
            const double r = grid.T * i / 64.0;
            lam_max = std::max(lam_max,
                               max_eigenvalue_sym(Q.evaluate(r) + qprime.evaluate(r)));
            if (!two_sided)
                l_max = std::max(
                    l_max, std::sqrt(std::max(0.0, max_eigenvalue_sym(qprime.evaluate(r)))));
        }
        const double need = R + 4.0 * std::sqrt(2.0 * std::max(lam_max, 0.0) * grid.T) +
                            (two_sided ? 0.0 : grid.T * l_max / epsilon);
        for (int j = 0; j < N; ++j)
            if (grid.lo(j) > -need + 1e-9 || grid.hi(j) < need - 1e-9)
                throw CoverageError(std::string(name) +
                                    ": grid box does not cover the source support plus "
                                    "the diffusion and shift reach");
    }

    const Eigen::Index nz = grid.space_points();
    std::vector<std::vector<double>> kappa(N);
    for (int j = 0; j < N; ++j) kappa[j] = fft_wavenumbers(grid.n[j], grid.spacing(j));
    const Mat pts = grid.points();

    std::vector<std::complex<double>> mult(nz);
    auto build_mult = [&](double tm) {
        const Mat Qm = Q.evaluate(tm);
        const Mat sq = sqrt_psd(qprime.evaluate(tm));
        std::vector<Vec> ls;
        ls.reserve(dirs.size());
        for (int k : dirs) ls.push_back(sq.col(k));
        std::vector<int> idx(N, 0);
        Vec kv(N);
        for (Eigen::Index flat = 0; flat < nz; ++flat) {
            for (int a = 0; a < N; ++a) kv(a) = kappa[a][idx[a]];
            std::complex<double> sym(-kv.dot(Qm * kv), 0.0);
            for (const Vec& l : ls) {
                const double theta = epsilon * kv.dot(l);
                if (two_sided)
                    sym += lambda * (2.0 * std::cos(theta) - 2.0);
                else
                    sym += lambda * (std::complex<double>(std::cos(theta) - 1.0,
                                                          std::sin(theta)));
            }
            mult[flat] = std::exp(dt * sym);
            for (int a = N - 1; a >= 0; --a) {
                if (++idx[a] < grid.n[a]) break;
                idx[a] = 0;
            }
        }
    };
    const bool frozen = Q.kind() == "constant" && qprime.kind() == "constant";
    if (frozen) build_mult(0.0);

    Vec fvals;
    std::vector<std::complex<double>> fhat0(nz), fhat1(nz), what(nz, {0.0, 0.0}),
        scratch(nz);
    auto load_fhat = [&](double t, int side, std::vector<std::complex<double>>& dst) {
        f.evaluate_batch(t, pts, side, fvals);
        for (Eigen::Index i = 0; i < nz; ++i) dst[i] = fvals(i);
        fftn(dst, grid.n, false);
    };

    Field out = Field::zero(grid, name);
    for (int j = 1; j <= grid.nt; ++j) {
        const double t0 = grid.time(j - 1);
        for (int s = 0; s < m; ++s) {
            const double a = t0 + s * dt;
            const double b = a + dt;
            if (!frozen) build_mult(a + 0.5 * dt);
            load_fhat(a, +1, fhat0);
            load_fhat(b, -1, fhat1);
            const double half = 0.5 * dt;
            for (Eigen::Index i = 0; i < nz; ++i)
                what[i] = mult[i] * (what[i] + half * fhat0[i]) + half * fhat1[i];
        }
        scratch = what;
        fftn(scratch, grid.n, true);
        for (Eigen::Index i = 0; i < nz; ++i) out.values(i, j) = scratch[i].real();
    }
    return out;
}

} // namespace

Field solve_fd_one(const TimePSDPath& Q, const TimePSDPath& qprime, double epsilon,
                   int direction, const SourceFunction& f, const SpaceTimeGrid& grid,
                   const FDCfg& cfg) {
    return fd_core(Q, qprime, epsilon, {direction}, f, grid, cfg, false, "fd1");
}

Field solve_fd_two(const TimePSDPath& Q, const TimePSDPath& qprime, double epsilon,
                   int direction, const SourceFunction& f, const SpaceTimeGrid& grid,
                   const FDCfg& cfg) {
    return fd_core(Q, qprime, epsilon, {direction}, f, grid, cfg, true, "fd2");
}

PerturbedSolve perturbed_solve_iterative(const TimePSDPath& Q, const TimePSDPath& qprime,
                                         const SourceFunction& f, const SpaceTimeGrid& grid,
                                         const std::vector<double>& eps_ladder,
                                         const std::string& mode, const FDCfg& fd,
                                         std::uint64_t seed, int workers) {
    if (eps_ladder.empty())
        throw SchemaError("perturbed_solve_iterative: empty epsilon ladder");
    for (std::size_t i = 0; i < eps_ladder.size(); ++i) {
        if (!(eps_ladder[i] > 0.0))
            throw SchemaError("perturbed_solve_iterative: epsilons must be positive");
        if (i > 0 && !(eps_ladder[i] < eps_ladder[i - 1]))
            throw SchemaError("perturbed_solve_iterative: ladder must decrease");
    }

    SolveCfg direct_cfg;
    direct_cfg.mode = mode;
    PerturbedSolve out;
    out.target = solve_driftless(Q + qprime, f, grid, direct_cfg, seed);

    std::vector<int> dirs(grid.dim());
    std::iota(dirs.begin(), dirs.end(), 0);
    const int L = static_cast<int>(eps_ladder.size());
    std::vector<Field> fields(L);
    std::vector<double> runtimes(L);
    parallel_for(L, workers, [&](int i) {
        const auto start = std::chrono::steady_clock::now();
        fields[i] = fd_core(Q, qprime, eps_ladder[i], dirs, f, grid, fd, true, "fd2");
        runtimes[i] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    });

    const std::vector<Eigen::Index> inner = grid.inner_indices();
    out.table.rows.reserve(L);
    for (int i = 0; i < L; ++i) {
        double sup = 0.0, ss = 0.0;
        for (int j = 0; j <= grid.nt; ++j)
            for (Eigen::Index flat : inner) {
                const double d =
                    std::abs(fields[i].values(flat, j) - out.target.values(flat, j));
                sup = std::max(sup, d);
                ss += d * d;
            }
        ConvergenceRow row;
        row.epsilon = eps_ladder[i];
        row.sup_error = sup;
        row.l2_error = std::sqrt(ss / (static_cast<double>(inner.size()) * (grid.nt + 1)));
        row.runtime_s = runtimes[i];
        out.table.rows.push_back(row);
        if (i > 0 && !(sup < out.table.rows[i - 1].sup_error)) out.table.monotone = false;
    }

    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const ConvergenceRow& row : out.table.rows) {
        const double x = std::log(row.epsilon);
        const double y = std::log(std::max(row.sup_error, 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double denom = L * sxx - sx * sx;
    out.table.slope = denom > 0.0 ? (L * sxy - sx * sy) / denom : 0.0;
    out.field = fields[L - 1];
    return out;
}

} // namespace hypou
