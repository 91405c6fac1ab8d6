#include "hypou/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "hypou/errors.hpp"
#include "hypou/parallel.hpp"
#include "hypou/quadrature.hpp"
#include "hypou/rng.hpp"

namespace hypou {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr Eigen::Index kChunk = 512;

double gauss_pdf(double d, double sigma) {
    return std::exp(-0.5 * d * d / (sigma * sigma)) / (sigma * std::sqrt(2.0 * M_PI));
}

std::vector<double> merge_sorted(std::vector<double> a, const std::vector<double>& b) {
    a.insert(a.end(), b.begin(), b.end());
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    return a;
}

Mat adaptive_simpson_psd(const std::function<Mat(double)>& F, double a, double b,
                         double tol, const std::string& who) {
    const int dim = static_cast<int>(F(a).rows());
    if (!(b > a)) return Mat::Zero(dim, dim);
    Mat prev = simpson_matrix(F, a, b, 4);
    for (int panels = 8; panels <= 8192; panels *= 2) {
        Mat cur = simpson_matrix(F, a, b, panels);
        if ((cur - prev).norm() <= tol * std::max(1.0, cur.norm())) return cur;
        prev = cur;
    }
    throw QuadratureError(who + ": tolerance not reached");
}

// f(s, .) averaged against N(0, cov) at each eval point, cov given by its
// eigensystem; axis rule and window filtering as documented on SolveCfg.
struct ConvJob {
    const SourceFunction& f;
    double s;
    int side;
    const SolveCfg& cfg;
    const QuadRule& ghr;
    const QuadRule& glr;
};

void conv_direct(const ConvJob& job, const Mat& pts, Vec& out) {
    job.f.evaluate_batch(job.s, pts, job.side, out);
}

void run_chunks(Eigen::Index total, int workers,
                const std::function<void(Eigen::Index, Eigen::Index)>& body) {
    const Eigen::Index nchunks = (total + kChunk - 1) / kChunk;
    parallel_for(static_cast<int>(nchunks), workers, [&](int c) {
        const Eigen::Index begin = static_cast<Eigen::Index>(c) * kChunk;
        body(begin, std::min(begin + kChunk, total));
    });
}

void conv_hermite_tensor(const ConvJob& job, const Mat& V, const Vec& sigma,
                         const SourceWindow& win, const Mat& pts, Vec& out) {
    const int N = static_cast<int>(sigma.size());
    const int m = static_cast<int>(job.ghr.nodes.size());
    Eigen::Index total = 1;
    for (int a = 0; a < N; ++a) total *= m;

    Mat offs(total, N);
    Vec wts(total);
    std::vector<int> k(N, 0);
    Vec w(N);
    for (Eigen::Index r = 0; r < total; ++r) {
        double wt = 1.0;
        for (int a = 0; a < N; ++a) {
            w(a) = job.ghr.nodes(k[a]) * sigma(a);
            wt *= job.ghr.weights(k[a]);
        }
        offs.row(r) = (V * w).transpose();
        wts(r) = wt;
        for (int a = N - 1; a >= 0; --a) {
            if (++k[a] < m) break;
            k[a] = 0;
        }
    }

    const bool windowed = std::isfinite(win.radius);
    const double reach = win.radius + job.ghr.nodes.cwiseAbs().maxCoeff() * sigma.norm();
    run_chunks(pts.rows(), job.cfg.workers, [&](Eigen::Index begin, Eigen::Index end) {
        Mat buf(total, N);
        Vec vals(total);
        for (Eigen::Index z = begin; z < end; ++z) {
            if (windowed && (pts.row(z).transpose() - win.center).norm() > reach) {
                out(z) = 0.0;
                continue;
            }
            buf = offs.rowwise() + pts.row(z);
            job.f.evaluate_batch(job.s, buf, job.side, vals);
            out(z) = wts.dot(vals);
        }
    });
}

struct LegendreAxis {
    Vec nodes;   // ascending, spanning [center - rad, center + rad]
    Vec weights; // plain Legendre weights; Gaussian factor applied per point
};

LegendreAxis legendre_axis(const QuadRule& glr, double center, double rad, double sigma,
                           const SolveCfg& cfg) {
    const int panels = std::clamp(
        static_cast<int>(std::ceil(cfg.panel_factor * rad / sigma)), 1, cfg.max_panels);
    const int per = static_cast<int>(glr.nodes.size());
    LegendreAxis ax;
    ax.nodes.resize(panels * per);
    ax.weights.resize(panels * per);
    for (int p = 0; p < panels; ++p) {
        const double a = center - rad + 2.0 * rad * p / panels;
        const double b = center - rad + 2.0 * rad * (p + 1) / panels;
        const QuadRule mapped = map_to_interval(glr, a, b);
        ax.nodes.segment(p * per, per) = mapped.nodes;
        ax.weights.segment(p * per, per) = mapped.weights;
    }
    return ax;
}

void conv_legendre_2d(const ConvJob& job, const Mat& V, const Vec& sigma,
                      const SourceWindow& win, const Mat& pts, Vec& out) {
    const Vec p = V.transpose() * win.center;
    const LegendreAxis ax0 = legendre_axis(job.glr, p(0), win.radius, sigma(0), job.cfg);
    const LegendreAxis ax1 = legendre_axis(job.glr, p(1), win.radius, sigma(1), job.cfg);
    const Eigen::Index n0 = ax0.nodes.size();
    const Eigen::Index n1 = ax1.nodes.size();

    Mat nodes2(n0 * n1, 2);
    for (Eigen::Index i = 0; i < n0; ++i)
        for (Eigen::Index j = 0; j < n1; ++j) {
            const Vec w = (Vec(2) << ax0.nodes(i), ax1.nodes(j)).finished();
            nodes2.row(i * n1 + j) = (V * w).transpose();
        }
    Vec fv(n0 * n1);
    job.f.evaluate_batch(job.s, nodes2, job.side, fv);
    Mat F(n0, n1);
    for (Eigen::Index i = 0; i < n0; ++i)
        for (Eigen::Index j = 0; j < n1; ++j) F(i, j) = fv(i * n1 + j);

    run_chunks(pts.rows(), job.cfg.workers, [&](Eigen::Index begin, Eigen::Index end) {
        Vec g0(n0), g1(n1);
        for (Eigen::Index z = begin; z < end; ++z) {
            const Vec mu = V.transpose() * pts.row(z).transpose();
            for (Eigen::Index i = 0; i < n0; ++i)
                g0(i) = ax0.weights(i) * gauss_pdf(ax0.nodes(i) - mu(0), sigma(0));
            for (Eigen::Index j = 0; j < n1; ++j)
                g1(j) = ax1.weights(j) * gauss_pdf(ax1.nodes(j) - mu(1), sigma(1));
            out(z) = g0.dot(F * g1);
        }
    });
}

void conv_mixed_2d(const ConvJob& job, const Mat& V, const Vec& sigma,
                   const SourceWindow& win, int axis_h, const Mat& pts, Vec& out) {
    const int axis_g = 1 - axis_h;
    const Vec p = V.transpose() * win.center;
    const double rad = win.radius;
    const LegendreAxis ax = legendre_axis(job.glr, p(axis_g), rad, sigma(axis_g), job.cfg);
    const Eigen::Index ng = ax.nodes.size();
    const int mh = static_cast<int>(job.ghr.nodes.size());
    const double sh = sigma(axis_h);
    const double sg = sigma(axis_g);

    run_chunks(pts.rows(), job.cfg.workers, [&](Eigen::Index begin, Eigen::Index end) {
        Mat buf(mh * ng, 2);
        Vec wts(mh * ng), vals(mh * ng);
        Vec w(2);
        for (Eigen::Index z = begin; z < end; ++z) {
            const Vec mu = V.transpose() * pts.row(z).transpose();
            Eigen::Index rows = 0;
            for (int k = 0; k < mh; ++k) {
                const double wh = mu(axis_h) + sh * job.ghr.nodes(k);
                const double d = wh - p(axis_h);
                if (std::abs(d) >= rad) continue;
                const double rp = std::sqrt(rad * rad - d * d);
                const double wlo = std::max(p(axis_g) - rp, mu(axis_g) - 8.0 * sg);
                const double whi = std::min(p(axis_g) + rp, mu(axis_g) + 8.0 * sg);
                const double* nb = ax.nodes.data();
                const Eigen::Index i0 = std::lower_bound(nb, nb + ng, wlo) - nb;
                const Eigen::Index i1 = std::upper_bound(nb, nb + ng, whi) - nb;
                for (Eigen::Index i = i0; i < i1; ++i) {
                    w(axis_h) = wh;
                    w(axis_g) = ax.nodes(i);
                    buf.row(rows) = (V * w).transpose();
                    wts(rows) = job.ghr.weights(k) * ax.weights(i) *
                                gauss_pdf(ax.nodes(i) - mu(axis_g), sg);
                    ++rows;
                }
            }
            if (rows == 0) {
                out(z) = 0.0;
                continue;
            }
            job.f.evaluate_batch(job.s, buf.topRows(rows), job.side, vals);
            out(z) = wts.head(rows).dot(vals.head(rows));
        }
    });
}

void conv_gaussian(const ConvJob& job, const Mat& cov, const Mat& pts, Vec& out) {
    const int N = static_cast<int>(cov.rows());
    out.resize(pts.rows());
    Eigen::SelfAdjointEigenSolver<Mat> es(cov);
    const Vec sigma = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Mat V = es.eigenvectors();
    const SourceWindow win = job.f.window(job.s);
    const bool windowed = std::isfinite(win.radius) && win.radius > 0.0;

    int legendre_count = 0;
    int axis_h = 0;
    if (N == 2 && windowed) {
        for (int a = 0; a < 2; ++a) {
            if (sigma(a) >= job.cfg.gh_switch * win.radius)
                ++legendre_count;
            else
                axis_h = a;
        }
    }
    if (legendre_count == 2)
        conv_legendre_2d(job, V, sigma, win, pts, out);
    else if (legendre_count == 1)
        conv_mixed_2d(job, V, sigma, win, axis_h, pts, out);
    else
        conv_hermite_tensor(job, V, sigma, win, pts, out);
}

// Shared Monte Carlo increment averaging: one noise draw per path reused at
// every eval point, so results do not depend on the worker count.
void mc_average(const ConvJob& job, const Mat& cov, const Mat& pts, Rng& rng,
                Vec& mean, Vec& var_of_mean) {
    const Eigen::Index nz = pts.rows();
    mean.resize(nz);
    var_of_mean = Vec::Zero(nz);
    const Mat F = psd_factor(cov);
    const int r = static_cast<int>(F.cols());
    if (r == 0) {
        job.f.evaluate_batch(job.s, pts, job.side, mean);
        return;
    }
    const int paths = job.cfg.mc_paths;
    Vec acc = Vec::Zero(nz), acc2 = Vec::Zero(nz), vals(nz), xi(r);
    Mat buf(nz, pts.cols());
    for (int p = 0; p < paths; ++p) {
        for (int a = 0; a < r; ++a) xi(a) = rng.normal();
        const Vec off = F * xi;
        buf = pts.rowwise() + off.transpose();
        job.f.evaluate_batch(job.s, buf, job.side, vals);
        acc += vals;
        acc2 += vals.cwiseProduct(vals);
    }
    mean = acc / paths;
    if (paths > 1)
        var_of_mean =
            (acc2 / paths - mean.cwiseProduct(mean)).cwiseMax(0.0) / (paths - 1);
}

std::string resolve_mode(const SolveCfg& cfg, int dim) {
    if (cfg.mode == "auto") return dim <= 3 ? "gauss" : "mc";
    if (cfg.mode == "gauss" || cfg.mode == "mc") return cfg.mode;
    throw SchemaError("SolveCfg: unknown mode '" + cfg.mode + "'");
}

void require_coverage(const std::function<Mat(double)>& rho, const SourceFunction& f,
                      const SpaceTimeGrid& grid) {
    const double R = f.support_radius();
    if (!std::isfinite(R)) return;
    double lam = 0.0;
    for (int i = 0; i <= 128; ++i)
        lam = std::max(lam, max_eigenvalue_sym(0.5 * rho(grid.T * i / 128.0)));
    const double need = R + 4.0 * std::sqrt(2.0 * lam * grid.T);
    for (int j = 0; j < grid.dim(); ++j)
        if (grid.lo(j) > -need + 1e-9 || grid.hi(j) < need - 1e-9)
            throw CoverageError("solver grid box does not cover the source support "
                                "inflated by 4 terminal standard deviations");
}

int gap_panels(double gap) {
    return std::clamp(static_cast<int>(std::ceil(gap * 64.0)), 2, 256);
}

Field solve_core(const Mat& A, const TimePSDPath& C, const SourceFunction& f,
                 const SpaceTimeGrid& grid, const SolveCfg& cfg, std::uint64_t seed,
                 const std::string& name) {
    const int N = grid.dim();
    if (f.dim() != N || C.dim() != N || A.rows() != N || A.cols() != N)
        throw DimensionError(name + ": grid, source, diffusion and drift dimensions disagree");
    if (C.horizon() < grid.T - 1e-12)
        throw DimensionError(name + ": diffusion path horizon shorter than the grid");
    if (cfg.time_substeps < 1 || cfg.gh_nodes < 1 || cfg.gl_nodes < 2 ||
        cfg.max_panels < 1 || cfg.mc_paths < 2)
        throw SchemaError(name + ": invalid solver configuration");
    const std::string mode = resolve_mode(cfg, N);

    auto rho = [&](double r) -> Mat {
        const Mat E = matrix_exp(A, r);
        return 2.0 * E * C.evaluate(r) * E.transpose();
    };
    require_coverage(rho, f, grid);

    Field out = Field::zero(grid, name + "[" + mode + "]", seed);
    const Mat zpts = grid.points();
    const Eigen::Index nz = zpts.rows();
    const QuadRule ghr = gauss_hermite(cfg.gh_nodes);
    const QuadRule glr = gauss_legendre(cfg.gl_nodes);
    const std::vector<double> brk = merge_sorted(f.time_breakpoints(), C.breakpoints());
    const bool mc = mode == "mc";
    Mat se2;
    if (mc) se2 = Mat::Zero(nz, grid.nt + 1);

    Vec contrib(nz), varvec(nz);
    for (int j = 1; j <= grid.nt; ++j) {
        const double tj = grid.time(j);
        const std::vector<TimeNode> nodes =
            trapezoid_nodes(0.0, tj, j * cfg.time_substeps, brk);
        const int K = static_cast<int>(nodes.size());

        std::vector<Mat> P(K);
        P[0] = Mat::Zero(N, N);
        for (int i = 1; i < K; ++i) {
            const double gap = nodes[i].t - nodes[i - 1].t;
            P[i] = gap > 0.0 ? Mat(P[i - 1] + simpson_matrix(rho, nodes[i - 1].t, nodes[i].t,
                                                             gap_panels(gap)))
                             : P[i - 1];
        }
        const double pscale = std::max(1.0, P[K - 1].cwiseAbs().maxCoeff());

        for (int i = 0; i < K; ++i) {
            const ConvJob job{f, nodes[i].t, nodes[i].side, cfg, ghr, glr};
            const Mat E = matrix_exp(A, tj - nodes[i].t);
            const Mat pts = zpts * E.transpose();
            const Mat delta = P[K - 1] - P[i];
            if (mc) {
                const Mat Einv = matrix_exp(A, -nodes[i].t);
                const Mat cov = psd_clamp(symmetrize(Einv * delta * Einv.transpose()),
                                          kTolPsd * pscale);
                Rng rng(task_seed(seed, static_cast<std::uint64_t>(j) * 100000 + i));
                mc_average(job, cov, pts, rng, contrib, varvec);
                out.values.col(j) += nodes[i].weight * contrib;
                se2.col(j) += nodes[i].weight * nodes[i].weight * varvec;
            } else if (delta.cwiseAbs().maxCoeff() <= 1e-13 * pscale) {
                conv_direct(job, pts, contrib);
                out.values.col(j) += nodes[i].weight * contrib;
            } else {
                const Mat Einv = matrix_exp(A, -nodes[i].t);
                const Mat cov = psd_clamp(symmetrize(Einv * delta * Einv.transpose()),
                                          kTolPsd * pscale);
                conv_gaussian(job, cov, pts, contrib);
                out.values.col(j) += nodes[i].weight * contrib;
            }
        }
    }
    if (mc) out.standard_error = se2.cwiseSqrt();
    return out;
}

} // namespace

GaussianIncrementLaw GaussianIncrementLaw::from_covariance(const Vec& mean, const Mat& cov) {
    if (cov.rows() != cov.cols() || mean.size() != cov.rows())
        throw DimensionError("GaussianIncrementLaw: mean and covariance dimensions disagree");
    GaussianIncrementLaw law;
    law.mean = mean;
    const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
    law.covariance = psd_clamp(symmetrize(cov), kTolPsd * scale);
    law.factor = psd_factor(law.covariance);
    return law;
}

GaussianIncrementLaw increment_covariance(const TimePSDPath& Q, double s, double t, double tol) {
    const double slack = 1e-12 * std::max(1.0, Q.horizon());
    if (s < -slack || t < s - slack || t > Q.horizon() + slack)
        throw std::invalid_argument("increment_covariance: need 0 <= s <= t <= horizon");
    const int N = Q.dim();
    Mat acc = Mat::Zero(N, N);
    std::vector<double> cuts{s};
    for (double b : Q.breakpoints())
        if (b > s + slack && b < t - slack) cuts.push_back(b);
    cuts.push_back(t);
    auto integrand = [&Q](double r) -> Mat { return 2.0 * Q.evaluate(r); };
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        acc += adaptive_simpson_psd(integrand, cuts[i], cuts[i + 1], tol,
                                    "increment_covariance");
    return GaussianIncrementLaw::from_covariance(Vec::Zero(N), acc);
}

GaussianIncrementLaw ou_covariance(const OUSystem& sys, double s, double t, double tol) {
    if (t < s) throw std::invalid_argument("ou_covariance: need s <= t");
    const double tau = t - s;
    const Mat B = sys.B();
    const Mat& A = sys.A;
    auto integrand = [&](double r) -> Mat {
        const Mat E = matrix_exp(A, r);
        return 2.0 * E * B * E.transpose();
    };
    const Mat cov = adaptive_simpson_psd(integrand, 0.0, tau, tol, "ou_covariance");
    return GaussianIncrementLaw::from_covariance(Vec::Zero(sys.N), cov);
}

double ou_density(const OUSystem& sys, double v, const Vec& z, const Vec& zp) {
    if (z.size() != sys.N || zp.size() != sys.N)
        throw DimensionError("ou_density: point dimension mismatch");
    if (!(v > 0.0)) throw SingularCovariance("ou_density: time must be positive");
    const GaussianIncrementLaw law = ou_covariance(sys, 0.0, v);
    Eigen::SelfAdjointEigenSolver<Mat> es(law.covariance);
    const Vec lam = es.eigenvalues();
    const double lmax = lam.maxCoeff();
    const double lmin = lam.minCoeff();
    if (!(lmin > 0.0) || lmax / lmin > 1e12)
        throw SingularCovariance("ou_density: covariance condition number above 1e12");
    const Vec q = es.eigenvectors().transpose() * (zp - matrix_exp(sys.A, v) * z);
    double expo = 0.0, norm = 1.0;
    for (int a = 0; a < sys.N; ++a) {
        expo += q(a) * q(a) / lam(a);
        norm *= 2.0 * M_PI * lam(a);
    }
    return std::exp(-0.5 * expo) / std::sqrt(norm);
}

Field solve_driftless(const TimePSDPath& Q, const SourceFunction& f,
                      const SpaceTimeGrid& grid, const SolveCfg& cfg, std::uint64_t seed) {
    return solve_core(Mat::Zero(grid.dim(), grid.dim()), Q, f, grid, cfg, seed,
                      "solve_driftless");
}

Field solve_ou(const OUSystem& sys, const SourceFunction& f, const SpaceTimeGrid& grid,
               const SolveCfg& cfg, std::uint64_t seed) {
    return solve_core(sys.A, TimePSDPath::constant(sys.B(), grid.T), f, grid, cfg, seed,
                      "solve_ou");
}

Field solve_ou_perturbed(const OUSystem& sys, const TimePSDPath& S, const SourceFunction& f,
                         const SpaceTimeGrid& grid, const SolveCfg& cfg, std::uint64_t seed) {
    return solve_core(sys.A, TimePSDPath::constant(sys.B(), grid.T) + S, f, grid, cfg,
                      seed, "solve_ou_perturbed");
}

namespace {

// Values are interpolated wherever the flow image stays in the sampled box.
// Points of the inner box must always be reachable; outside it, unreachable
// points are set to zero rather than failing the whole resample.
Field flow_resample(const Field& in, const Mat& A, double sign, const char* tag) {
    const SpaceTimeGrid& g = in.grid;
    if (A.rows() != g.dim() || A.cols() != g.dim())
        throw DimensionError("flow resample: drift dimension mismatch");
    auto sampled = [&g](const Vec& w) {
        for (int a = 0; a < g.dim(); ++a) {
            const double last = g.lo(a) + (g.n[a] - 1) * g.spacing(a);
            if (w(a) < g.lo(a) - 1e-9 || w(a) > last + 1e-9) return false;
        }
        return true;
    };
    Field out = Field::zero(g, in.provenance + "|" + tag, in.seed);
    const Eigen::Index nz = g.space_points();
    for (int j = 0; j <= g.nt; ++j) {
        const Mat E = matrix_exp(A, sign * g.time(j));
        for (Eigen::Index flat = 0; flat < nz; ++flat) {
            const Vec w = E * g.point(flat);
            if (!sampled(w)) {
                if (g.is_inner(flat))
                    throw CoverageError("flow resample: the flow image of the inner box "
                                        "escapes the sampled region");
                continue;
            }
            out.values(flat, j) = interp_cubic(g, in.values.col(j), w);
        }
    }
    return out;
}

} // namespace

Field pull_to_driftless(const Field& u, const Mat& A) {
    return flow_resample(u, A, -1.0, "pull_to_driftless");
}

Field push_to_ou(const Field& v, const Mat& A) {
    return flow_resample(v, A, +1.0, "push_to_ou");
}

SourceFunction source_pullback(const SourceFunction& f, const Mat& A, double T) {
    return f.flow_mapped(A, -1.0, T);
}

SourceFunction source_pushforward(const SourceFunction& f, const Mat& A, double T) {
    return f.flow_mapped(A, +1.0, T);
}

double residual(const Field& field, const TimePSDPath& Q, const SourceFunction& f) {
    const SpaceTimeGrid& g = field.grid;
    const int N = g.dim();
    if (Q.dim() != N || f.dim() != N)
        throw DimensionError("residual: dimension mismatch");

    std::vector<Eigen::Index> interior;
    std::vector<int> idx(N);
    const Eigen::Index nz = g.space_points();
    for (Eigen::Index flat = 0; flat < nz; ++flat) {
        if (!g.is_inner(flat)) continue;
        g.unravel(flat, idx);
        bool ok = true;
        for (int a = 0; a < N; ++a)
            if (idx[a] < 1 || idx[a] > g.n[a] - 2) ok = false;
        if (ok) interior.push_back(flat);
    }
    if (interior.empty()) return 0.0;

    const Eigen::Index ni = static_cast<Eigen::Index>(interior.size());
    Mat ipts(ni, N);
    for (Eigen::Index r = 0; r < ni; ++r) ipts.row(r) = g.point(interior[r]).transpose();

    std::vector<Eigen::Index> strides(N);
    for (int a = 0; a < N; ++a) strides[a] = g.stride(a);

    auto integrand_slice = [&](int j, Vec& out_vals) {
        const double t = g.time(j);
        f.evaluate_batch(t, ipts, 0, out_vals);
        const Mat Qt = Q.evaluate(t);
        const auto v = field.values.col(j);
        for (Eigen::Index r = 0; r < ni; ++r) {
            const Eigen::Index c = interior[r];
            double tr = 0.0;
            for (int a = 0; a < N; ++a) {
                const double ha = g.spacing(a);
                const double second =
                    (v(c + strides[a]) - 2.0 * v(c) + v(c - strides[a])) / (ha * ha);
                tr += Qt(a, a) * second;
                for (int b = a + 1; b < N; ++b) {
                    const double hb = g.spacing(b);
                    const double cross = (v(c + strides[a] + strides[b]) -
                                          v(c + strides[a] - strides[b]) -
                                          v(c - strides[a] + strides[b]) +
                                          v(c - strides[a] - strides[b])) /
                                         (4.0 * ha * hb);
                    tr += 2.0 * Qt(a, b) * cross;
                }
            }
            out_vals(r) += tr;
        }
    };

    double worst = 0.0;
    Vec integral = Vec::Zero(ni), prev(ni), cur(ni);
    integrand_slice(0, prev);
    for (int j = 1; j <= g.nt; ++j) {
        integrand_slice(j, cur);
        integral += 0.5 * g.dt() * (prev + cur);
        for (Eigen::Index r = 0; r < ni; ++r)
            worst = std::max(worst, std::abs(field.values(interior[r], j) - integral(r)));
        prev.swap(cur);
    }
    return worst;
}

} // namespace hypou
