#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "hypou/errors.hpp"
#include "hypou/gaussian.hpp"
#include "hypou/grid.hpp"
#include "hypou/linalg.hpp"
#include "hypou/psd_path.hpp"
#include "hypou/source.hpp"
#include "hypou/structure.hpp"

using namespace hypou;

namespace {

Mat mat2(double a, double b, double c, double d) {
    Mat m(2, 2);
    m << a, b, c, d;
    return m;
}

Vec vec2(double x, double y) {
    Vec v(2);
    v << x, y;
    return v;
}

Mat kolmo_A() { return mat2(0.0, 0.0, 1.0, 0.0); }

OUSystem kolmo_sys() {
    Mat B0(1, 1);
    B0 << 1.0;
    return OUSystem::create(kolmo_A(), B0);
}

// ---------------------------------------------------------------------------
// Oracles. Reference values are computed with elementary rules (midpoint
// sums, closed forms) written independently of the library internals, so a
// disagreement points at the code under test rather than at the check.

// Composite midpoint rule for a matrix-valued integrand.
Mat midpoint_matrix(const std::function<Mat(double)>& F, double a, double b, int m) {
    Mat acc = F(a);
    acc.setZero();
    const double h = (b - a) / m;
    for (int i = 0; i < m; ++i) acc += F(a + (i + 0.5) * h);
    return acc * h;
}

// Closed form of 2 int_0^tau e^{rA} B e^{rA^T} dr for the Kolmogorov pair
// A = [[0,0],[1,0]], B = diag(1,0).
Mat kolmo_cov(double tau) {
    const double t2 = tau * tau;
    return 2.0 * mat2(tau, 0.5 * t2, 0.5 * t2, t2 * tau / 3.0);
}

// Running integral of max(0, sin(2 pi r)) from 0, valid on [0, 1].
double positive_sine_integral(double x) {
    const double halfwave = 1.0 / M_PI;
    if (x <= 0.5) return (1.0 - std::cos(2.0 * M_PI * x)) / (2.0 * M_PI);
    return halfwave;
}

// Explicit bivariate Gaussian density.
double gauss2(const Vec& x, const Vec& mean, const Mat& cov) {
    const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
    const double d0 = x(0) - mean(0), d1 = x(1) - mean(1);
    const double q = (cov(1, 1) * d0 * d0 - 2.0 * cov(0, 1) * d0 * d1 +
                      cov(0, 0) * d1 * d1) / det;
    return std::exp(-0.5 * q) / (2.0 * M_PI * std::sqrt(det));
}

// Dense midpoint convolution of f(s,.) against N(mean, cov), integrated over
// the support box of f. Midpoint sums are spectrally accurate for the smooth
// compactly supported integrands used below, so m around 400 gives far more
// digits than the solver tolerances under test.
double conv_oracle(const SourceFunction& f, double s, int side, const Vec& mean,
                   const Mat& cov, int m) {
    const double R = f.support_radius();
    const double h = 2.0 * R / m;
    Mat pts(static_cast<Eigen::Index>(m) * m, 2);
    Eigen::Index r = 0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            pts(r, 0) = -R + (i + 0.5) * h;
            pts(r, 1) = -R + (j + 0.5) * h;
            ++r;
        }
    Vec vals;
    f.evaluate_batch(s, pts, side, vals);
    double acc = 0.0;
    for (Eigen::Index q = 0; q < pts.rows(); ++q) {
        if (vals(q) == 0.0) continue;
        acc += vals(q) * gauss2(pts.row(q).transpose(), mean, cov);
    }
    return acc * h * h;
}

// One dimensional analogue along a line z = mean + w dir for rank-one
// covariance var * dir dir^T.
double conv_line_oracle(const SourceFunction& f, double s, const Vec& mean,
                        const Vec& dir, double var, int m) {
    if (var < 1e-16) return f.evaluate(s, mean);
    const double sigma = std::sqrt(var);
    const double lim = 8.0 * sigma;
    const double h = 2.0 * lim / m;
    double acc = 0.0;
    for (int i = 0; i < m; ++i) {
        const double w = -lim + (i + 0.5) * h;
        acc += f.evaluate(s, mean + w * dir) * std::exp(-0.5 * w * w / var);
    }
    return acc * h / (sigma * std::sqrt(2.0 * M_PI));
}

// Replicates the contractual composite trapezoid rule in time at one space
// point, with the Gaussian averages computed by the dense oracle above.
// cov_at(s) is the covariance of the increment over [s, t_j] and mean_at(s)
// the flowed start point.
double point_oracle(const SourceFunction& f, int j, int nt, double T, const Vec& z,
                    const std::function<Mat(double)>& cov_at,
                    const std::function<Vec(double)>& mean_at, int m) {
    const double tj = T * j / nt;
    const double h = tj / j;
    double acc = 0.0;
    for (int i = 0; i <= j; ++i) {
        const double s = tj * i / j;
        const double w = (i == 0 || i == j) ? 0.5 * h : h;
        if (i == j)
            acc += w * f.evaluate(s, z, -1);
        else
            acc += w * conv_oracle(f, s, i == 0 ? +1 : 0, mean_at(s), cov_at(s), m);
    }
    return acc;
}

double max_abs_diff(const Mat& a, const Mat& b) { return (a - b).cwiseAbs().maxCoeff(); }

} // namespace

// ---------------------------------------------------------------------------
// Increment laws

TEST_CASE("increment law: factor reproduces the covariance") {
    std::mt19937 gen(42);
    std::normal_distribution<double> nd;
    Mat G(4, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) G(i, j) = nd(gen);
    const Mat C = G * G.transpose();
    Vec mean(4);
    mean << 1.0, -2.0, 0.5, 0.0;
    const GaussianIncrementLaw law = GaussianIncrementLaw::from_covariance(mean, C);
    CHECK((law.factor * law.factor.transpose() - C).norm() <= 1e-10 * C.norm());
    CHECK((law.mean - mean).norm() == 0.0);

    Vec v(3);
    v << 1.0, 2.0, -1.0;
    const Mat R1 = v * v.transpose();
    const GaussianIncrementLaw rank1 = GaussianIncrementLaw::from_covariance(Vec::Zero(3), R1);
    CHECK((rank1.factor * rank1.factor.transpose() - R1).norm() <= 1e-10 * R1.norm());

    CHECK_THROWS_AS(GaussianIncrementLaw::from_covariance(vec2(0.0, 0.0),
                                                          mat2(-1.0, 0.0, 0.0, 1.0)),
                    PsdError);
    CHECK_THROWS_AS(GaussianIncrementLaw::from_covariance(Vec::Zero(3),
                                                          mat2(1.0, 0.0, 0.0, 1.0)),
                    DimensionError);
}

TEST_CASE("increment covariance: constant, conjugated and kinked paths") {
    const TimePSDPath id = TimePSDPath::constant(Mat::Identity(2, 2), 1.0);
    const GaussianIncrementLaw full = increment_covariance(id, 0.0, 1.0);
    CHECK(max_abs_diff(full.covariance, 2.0 * Mat::Identity(2, 2)) <= 1e-12);

    const GaussianIncrementLaw empty = increment_covariance(id, 0.4, 0.4);
    CHECK(empty.covariance.cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((empty.factor * empty.factor.transpose()).cwiseAbs().maxCoeff() <= 1e-14);

    const TimePSDPath conj =
        TimePSDPath::constant(mat2(1.0, 0.0, 0.0, 0.0), 1.0).conjugated_by_flow(kolmo_A());
    for (double t : {0.3, 1.0})
        CHECK(max_abs_diff(increment_covariance(conj, 0.0, t).covariance, kolmo_cov(t)) <= 1e-9);

    const Mat S = mat2(0.4, 0.0, 0.0, 0.6);
    const TimePSDPath ramp = TimePSDPath::piecewise_linear(
        {0.0, 0.3, 0.5, 1.0}, {Mat::Zero(2, 2), Mat::Zero(2, 2), S, S});
    const Mat want = midpoint_matrix(
        [&](double r) -> Mat { return 2.0 * ramp.evaluate(r); }, 0.1, 0.9, 20000);
    CHECK(max_abs_diff(increment_covariance(ramp, 0.1, 0.9).covariance, want) <= 1e-8);

    const Vec dir = vec2(1.0, 1.0) / std::sqrt(2.0);
    const TimePSDPath pulse = TimePSDPath::rank1_vanishing(dir, 2.0 * M_PI, 1.0);
    const double mass =
        2.0 * (positive_sine_integral(0.8) - positive_sine_integral(0.2));
    CHECK(max_abs_diff(increment_covariance(pulse, 0.2, 0.8).covariance,
                       mass * dir * dir.transpose()) <= 1e-9);

    CHECK_THROWS_AS(increment_covariance(id, 0.6, 0.4), std::invalid_argument);
    CHECK_THROWS_AS(increment_covariance(id, 0.0, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(increment_covariance(id, -0.2, 0.5), std::invalid_argument);
    CHECK_NOTHROW(increment_covariance(ramp, 0.0, 1.0, 1e-2));
}

TEST_CASE("ou covariance: closed form, homogeneity and the flow identity") {
    const OUSystem sys = kolmo_sys();
    CHECK(max_abs_diff(ou_covariance(sys, 0.0, 1.0).covariance, kolmo_cov(1.0)) <= 1e-9);
    CHECK(ou_covariance(sys, 0.3, 0.3).covariance.cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(max_abs_diff(ou_covariance(sys, 0.2, 0.9).covariance, kolmo_cov(0.7)) <= 1e-9);

    const TimePSDPath conj =
        TimePSDPath::constant(sys.B(), 1.0).conjugated_by_flow(sys.A);
    CHECK(max_abs_diff(ou_covariance(sys, 0.0, 0.8).covariance,
                       increment_covariance(conj, 0.0, 0.8).covariance) <= 1e-10);

    const double triples[][3] = {{0.0, 0.4, 1.0}, {0.1, 0.5, 0.8}, {0.25, 0.5, 0.75}};
    for (const auto& q : triples) {
        const Mat lhs = ou_covariance(sys, q[0], q[2]).covariance;
        const Mat E = matrix_exp(sys.A, q[2] - q[1]);
        const Mat rhs = E * ou_covariance(sys, q[0], q[1]).covariance * E.transpose() +
                        ou_covariance(sys, q[1], q[2]).covariance;
        CHECK(max_abs_diff(lhs, rhs) <= 1e-9 * std::max(1.0, lhs.norm()));
    }

    CHECK_THROWS_AS(ou_covariance(sys, 0.5, 0.2), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Transition density

TEST_CASE("ou density: explicit Gaussian form and unit mass") {
    const OUSystem sys = kolmo_sys();
    const double v = 0.5;
    const Vec z = vec2(0.3, -0.2);
    const Vec mean = matrix_exp(sys.A, v) * z;
    const Mat cov = ou_covariance(sys, 0.0, v).covariance;

    std::mt19937 gen(7);
    std::normal_distribution<double> nd;
    for (int k = 0; k < 20; ++k) {
        const Vec zp = mean + vec2(nd(gen), 0.3 * nd(gen));
        CHECK(ou_density(sys, v, z, zp) ==
              doctest::Approx(gauss2(zp, mean, cov)).epsilon(1e-12));
    }

    const double lim = 8.0 * std::sqrt(max_eigenvalue_sym(cov));
    const int m = 500;
    const double h = 2.0 * lim / m;
    double mass = 0.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            const Vec zp = mean + vec2(-lim + (i + 0.5) * h, -lim + (j + 0.5) * h);
            mass += gauss2(zp, mean, cov);
        }
    mass *= h * h;
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));

    CHECK_THROWS_AS(ou_density(sys, 1e-6, z, z), SingularCovariance);
    CHECK_THROWS_AS(ou_density(sys, 0.0, z, z), SingularCovariance);
    CHECK_THROWS_AS(ou_density(sys, -0.3, z, z), SingularCovariance);
    CHECK_THROWS_AS(ou_density(sys, 0.5, Vec::Zero(3), Vec::Zero(3)), DimensionError);
}

TEST_CASE("ou density: Chapman-Kolmogorov composition") {
    const OUSystem sys = kolmo_sys();
    const double s = 0.25, t = 0.25;
    const Vec z = vec2(0.3, -0.2);
    const Mat Es = matrix_exp(sys.A, s);
    const Mat Et = matrix_exp(sys.A, t);
    const Mat cov_s = ou_covariance(sys, 0.0, s).covariance;
    const Mat cov_t = ou_covariance(sys, 0.0, t).covariance;
    const Vec mean_s = Es * z;

    // Sanity: the inline Gaussian matches ou_density on the integration path.
    CHECK(ou_density(sys, s, z, mean_s + vec2(0.4, 0.02)) ==
          doctest::Approx(gauss2(mean_s + vec2(0.4, 0.02), mean_s, cov_s)).epsilon(1e-12));

    const double lim = 8.0 * std::sqrt(max_eigenvalue_sym(cov_s));
    const int m = 400;
    const double h = 2.0 * lim / m;
    for (const Vec& zp : {vec2(0.5, 0.1), vec2(0.1, -0.3)}) {
        double lhs = 0.0;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) {
                const Vec w = mean_s + vec2(-lim + (i + 0.5) * h, -lim + (j + 0.5) * h);
                lhs += gauss2(w, mean_s, cov_s) * gauss2(zp, Et * w, cov_t);
            }
        lhs *= h * h;
        const double rhs = ou_density(sys, s + t, z, zp);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-6));
    }
}

TEST_CASE("ou density: anisotropic envelope of the spatial Hessian") {
    const OUSystem sys = kolmo_sys();
    const BlockStructure bs = extract_block_structure(sys);
    const Vec z = vec2(0.4, -0.3);

    // |D^2_z p| <= C v^{-3} exp(-v |T_v^{-1} (z' - e^{Av} z)|^2 / C) with the
    // anisotropic dilation T_v: fit the smallest admissible C by bisection
    // (the bound is monotone increasing in C) and require it stays modest.
    double c_fit = 1.0;
    for (double v : {0.3, 0.8}) {
        const Mat E = matrix_exp(sys.A, v);
        const Mat cov = ou_covariance(sys, 0.0, v).covariance;
        const Mat inv = cov.inverse();
        const Mat Tv = scale_matrix(v, bs);
        const Vec mean = E * z;
        for (double a : {-2.5, -1.0, 0.0, 1.0, 2.5})
            for (double b : {-2.5, -1.0, 0.0, 1.0, 2.5}) {
                const Vec offset = Tv * vec2(a, b);
                const Vec zp = mean + offset;
                const double p = ou_density(sys, v, z, zp);
                const Mat hess =
                    p * (E.transpose() * (inv * offset * offset.transpose() * inv - inv) * E);
                const double lhs = hess.norm();
                const double q = v * (Tv.inverse() * offset).squaredNorm();
                const double scale = lhs * v * v * v;
                if (scale <= std::exp(-q)) continue; // C = 1 already works
                double lo = 1.0, hi = 1.0;
                while (hi * std::exp(-q / hi) < scale && hi < 1e8) hi *= 2.0;
                REQUIRE(hi < 1e8);
                for (int it = 0; it < 80; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    (mid * std::exp(-q / mid) < scale ? lo : hi) = mid;
                }
                c_fit = std::max(c_fit, hi);
            }
    }
    CHECK(c_fit >= 1.0);
    CHECK(c_fit <= 1e4);
}

// ---------------------------------------------------------------------------
// Driftless solver

TEST_CASE("solve driftless: spatially constant sources integrate the time profile") {
    const SpaceTimeGrid g =
        SpaceTimeGrid::uniform(1.0, 4, vec2(-2.0, -2.0), vec2(2.0, 2.0), {6, 6});
    const TimePSDPath Q = TimePSDPath::constant(Mat::Identity(2, 2), 1.0);
    const double inf = std::numeric_limits<double>::infinity();

    const SourceFunction flat = SourceFunction::analytic(
        2, [](double, const Vec&) { return 0.4; }, inf, {}, 0.4);
    const Field u = solve_driftless(Q, flat, g);
    for (int j = 0; j <= g.nt; ++j)
        for (Eigen::Index flat_i = 0; flat_i < g.space_points(); ++flat_i)
            CHECK(std::abs(u.at(j, flat_i) - 0.4 * g.time(j)) <= 1e-12);

    const SourceFunction ramp = SourceFunction::analytic(
        2, [](double t, const Vec&) { return t; }, inf, {}, 1.0);
    const Field w = solve_driftless(Q, ramp, g);
    for (int j = 0; j <= g.nt; ++j) {
        const double tj = g.time(j);
        CHECK(std::abs(w.at(j, 0) - 0.5 * tj * tj) <= 1e-12);
    }
}

TEST_CASE("solve driftless: zero diffusion integrates the source in place") {
    const SpaceTimeGrid g =
        SpaceTimeGrid::uniform(1.0, 5, vec2(-2.5, -2.5), vec2(2.5, 2.5), {8, 8});
    const SourceFunction f =
        SourceFunction::bump(vec2(0.3, -0.2), 1.0, 1.0, TimeProfile::constant());
    const Field u = solve_driftless(TimePSDPath::zero(2, 1.0), f, g);
    for (int j = 0; j <= g.nt; ++j)
        for (Eigen::Index q = 0; q < g.space_points(); ++q)
            CHECK(std::abs(u.at(j, q) - g.time(j) * f.evaluate(0.0, g.point(q))) <= 1e-12);
}

TEST_CASE("solve driftless: wide covariance matches the dense oracle") {
    const double th = M_PI / 6.0;
    Mat R(2, 2);
    R << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    const Mat Qm = R * mat2(0.8, 0.0, 0.0, 0.1) * R.transpose();
    const TimePSDPath Q = TimePSDPath::constant(Qm, 1.0);
    const SourceFunction f =
        SourceFunction::bump(vec2(0.0, 0.0), 1.0, 1.0, TimeProfile::constant());
    const SpaceTimeGrid g =
        SpaceTimeGrid::uniform(1.0, 8, vec2(-6.1, -6.1), vec2(6.1, 6.1), {16, 16});
    const Field u = solve_driftless(Q, f, g);
    CHECK(u.provenance.find("gauss") != std::string::npos);

    for (int j : {3, 8}) {
        const double tj = g.time(j);
        auto cov_at = [&](double s) { return Mat(2.0 * (tj - s) * Qm); };
        for (const std::vector<int>& idx : {std::vector<int>{8, 8}, {9, 7}}) {
            const Eigen::Index flat = g.ravel(idx);
            const Vec z = g.point(flat);
            auto mean_at = [&](double) { return z; };
            const double want = point_oracle(f, j, g.nt, g.T, z, cov_at, mean_at, 420);
            CHECK(std::abs(u.at(j, flat) - want) <= 3e-5);
        }
    }
}

TEST_CASE("solve driftless: narrow covariance matches the dense oracle") {
    const Mat Qm = 0.01 * Mat::Identity(2, 2);
    const TimePSDPath Q = TimePSDPath::constant(Qm, 1.0);
    const SourceFunction f =
        SourceFunction::bump(vec2(0.3, -0.2), 2.0, 1.0, TimeProfile::constant());
    const SpaceTimeGrid g =
        SpaceTimeGrid::uniform(1.0, 8, vec2(-3.0, -3.0), vec2(3.0, 3.0), {12, 12});
    const Field u = solve_driftless(Q, f, g);

    for (int j : {2, 8}) {
        const double tj = g.time(j);
        auto cov_at = [&](double s) { return Mat(2.0 * (tj - s) * Qm); };
        for (const std::vector<int>& idx : {std::vector<int>{6, 6}, {7, 5}}) {
            const Eigen::Index flat = g.ravel(idx);
            const Vec z = g.point(flat);
            auto mean_at = [&](double) { return z; };
            const double want = point_oracle(f, j, g.nt, g.T, z, cov_at, mean_at, 480);
            CHECK(std::abs(u.at(j, flat) - want) <= 2e-5);
        }
    }
}

TEST_CASE("solve driftless: rank-one vanishing diffusion matches the line oracle") {
    const Vec dir = vec2(1.0, 1.0) / std::sqrt(2.0);
    const TimePSDPath Q = TimePSDPath::rank1_vanishing(dir, 2.0 * M_PI, 1.0);
    const SourceFunction f =
        SourceFunction::bump(vec2(0.0, 0.0), 1.0, 1.0, TimeProfile::constant());
    const SpaceTimeGrid g =
        SpaceTimeGrid::uniform(1.0, 8, vec2(-6.7, -6.7), vec2(6.7, 6.7), {12, 12});
    const Field u = solve_driftless(Q, f, g);

    for (int j : {4, 6, 8}) {
        const double tj = g.time(j);
        const double h = tj / j;
        for (const std::vector<int>& idx : {std::vector<int>{6, 6}, {7, 6}}) {
            const Eigen::Index flat = g.ravel(idx);
            const Vec z = g.point(flat);
            double want = 0.0;
            for (int i = 0; i <= j; ++i) {
                const double s = tj * i / j;
                const double w = (i == 0 || i == j) ? 0.5 * h : h;
                const double mass =
                    2.0 * (positive_sine_integral(tj) - positive_sine_integral(s));
                want += w * conv_line_oracle(f, s, z, dir, mass, 4001);
            }
            CHECK(std::abs(u.at(j, flat) - want) <= 2e-5);
        }
    }
}

TEST_CASE("solve driftless: sided breakpoints of a step profile are exact") {
    const SourceFunction f =
        SourceFunction::bump(vec2(0.0, 0.2), 0.7, 1.0, TimeProfile::step(0.5, 1.0, 0.35));
    auto profile_mass = [](double t) {
        return t <= 0.5 ? t : 0.5 + (t - 0.5) * 0.35;
    };
    for (int nt : {8, 5}) { // slice times aligned and misaligned with the step
        const SpaceTimeGrid g =
            SpaceTimeGrid::uniform(1.0, nt, vec2(-1.0, -1.0), vec2(1.0, 1.0), {8, 8});
        const Field u = solve_driftless(TimePSDPath::zero(2, 1.0), f, g);
        for (int j = 0; j <= nt; ++j)
            for (Eigen::Index q = 0; q < g.space_points(); ++q) {
                const double spatial = f.evaluate(0.0, g.point(q));
                CHECK(std::abs(u.at(j, q) - profile_mass(g.time(j)) * spatial) <= 1e-12);
            }
    }
}

TEST_CASE("solve: linearity in the source") {
    const TimePSDPath Q = TimePSDPath::constant(mat2(0.3, 0.0, 0.0, 0.2), 1.0);
    const SourceFunction f1 =
        SourceFunction::bump(vec2(0.0, 0.0), 1.0, 1.0, TimeProfile::constant());
    const SourceFunction f2 =
        SourceFunction::bump(vec2(0.5, 0.3), 0.7, 0.8, TimeProfile::constant());
    const SpaceTimeGrid g =
        SpaceTimeGrid::uniform(1.0, 4, vec2(-4.6, -4.6), vec2(4.6, 4.6), {12, 12});
    const Field u = solve_driftless(Q, f1.scaled(2.0) + f2.scaled(3.0), g);
    const Field u1 = solve_driftless(Q, f1, g);
    const Field u2 = solve_driftless(Q, f2, g);
    // The summed source carries a wider support window, so its quadrature
    // nodes differ from the single-bump runs; linearity holds to solver
    // tolerance, not to machine precision.
    CHECK((u.values - 2.0 * u1.values - 3.0 * u2.values).cwiseAbs().maxCoeff() <=
          1.5e-3 * u.sup_abs());
}

TEST_CASE("solve: positivity and the maximum principle") {
    const OUSystem sys = kolmo_sys();
    const SourceFunction f =
        SourceFunction::bump(vec2(0.3, -0.2), 0.9, 1.0, TimeProfile::constant());
    const SpaceTimeGrid g =
        SpaceTimeGrid::uniform(1.0, 6, vec2(-9.3, -9.3), vec2(9.3, 9.3), {12, 12});
    const Field u = solve_ou(sys, f, g);
    CHECK(u.values.minCoeff() >= -1e-12);
    CHECK(u.sup_abs() <= g.T * f.sup_abs() + 1e-8);

    const Vec dir = vec2(1.0, 1.0) / std::sqrt(2.0);
    const TimePSDPath Q = TimePSDPath::rank1_vanishing(dir, 2.0 * M_PI, 1.0);
    const SourceFunction fs =
        SourceFunction::bump(vec2(0.0, 0.0), 1.0, 1.5, TimeProfile::sinusoidal(0.7));
    const SpaceTimeGrid g2 =
        SpaceTimeGrid::uniform(1.0, 6, vec2(-6.7, -6.7), vec2(6.7, 6.7), {12, 12});
    const Field w = solve_driftless(Q, fs, g2);
    CHECK(w.values.minCoeff() >= -1e-12);
    CHECK(w.sup_abs() <= g2.T * fs.sup_abs() + 1e-8);
}

// ---------------------------------------------------------------------------
// Drifted solver

TEST_CASE("solve ou: zero drift reduces to the driftless solver") {
    const OUSystem sys = OUSystem::create(Mat::Zero(2, 2), mat2(1.0, 0.0, 0.0, 0.5));
    const SourceFunction f =
        SourceFunction::bump(vec2(0.3, 0.0), 0.8, 1.0, TimeProfile::constant());
    const SpaceTimeGrid g =
        SpaceTimeGrid::uniform(1.0, 6, vec2(-7.0, -7.0), vec2(7.0, 7.0), {12, 12});
    const Field a = solve_ou(sys, f, g);
    const Field b = solve_driftless(TimePSDPath::constant(sys.B(), 1.0), f, g);
    CHECK((a.values - b.values).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("solve ou: Kolmogorov drift matches the dense oracle") {
    const OUSystem sys = kolmo_sys();
    const SourceFunction f =
        SourceFunction::bump(vec2(0.3, -0.2), 0.9, 1.0, TimeProfile::constant());
    const SpaceTimeGrid g =
        SpaceTimeGrid::uniform(1.0, 8, vec2(-9.3, -9.3), vec2(9.3, 9.3), {16, 16});
    const Field u = solve_ou(sys, f, g);

    for (int j : {2, 8}) {
        const double tj = g.time(j);
        auto cov_at = [&](double s) { return kolmo_cov(tj - s); };
        for (const std::vector<int>& idx : {std::vector<int>{8, 8}, {9, 8}}) {
            const Eigen::Index flat = g.ravel(idx);
            const Vec z = g.point(flat);
            auto mean_at = [&](double s) { return Vec(vec2(z(0), z(1) + (tj - s) * z(0))); };
            const double want = point_oracle(f, j, g.nt, g.T, z, cov_at, mean_at, 500);
            CHECK(std::abs(u.at(j, flat) - want) <= 2e-5);
        }
    }
}

TEST_CASE("solve ou perturbed: zero perturbation reproduces the base solver") {
    const OUSystem sys = kolmo_sys();
    const SourceFunction f =
        SourceFunction::bump(vec2(0.3, -0.2), 0.9, 1.0, TimeProfile::constant());
    const SpaceTimeGrid g =
        SpaceTimeGrid::uniform(1.0, 4, vec2(-9.3, -9.3), vec2(9.3, 9.3), {12, 12});
    const Field base = solve_ou(sys, f, g);
    const Field same = solve_ou_perturbed(sys, TimePSDPath::zero(2, 1.0), f, g);
    CHECK((base.values - same.values).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("solve ou perturbed: constant perturbation equals the summed diffusion") {
    const OUSystem sys = OUSystem::create(Mat::Zero(2, 2), mat2(0.6, 0.0, 0.0, 0.4));
    const Mat S = mat2(0.2, 0.1, 0.1, 0.3);
    const SourceFunction f =
        SourceFunction::bump(vec2(0.0, 0.0), 1.0, 1.0, TimeProfile::constant());
    const SpaceTimeGrid g =
        SpaceTimeGrid::uniform(1.0, 4, vec2(-7.0, -7.0), vec2(7.0, 7.0), {12, 12});
    const Field a = solve_ou_perturbed(sys, TimePSDPath::constant(S, 1.0), f, g);
    const Field b = solve_driftless(TimePSDPath::constant(sys.B() + S, 1.0), f, g);
    CHECK((a.values - b.values).cwiseAbs().maxCoeff() <= 1e-10);
}

// ---------------------------------------------------------------------------
// Monte Carlo mode

TEST_CASE("solve mc: agrees with quadrature within the reported error") {
    const TimePSDPath Q = TimePSDPath::constant(0.3 * Mat::Identity(2, 2), 1.0);
    const SourceFunction f =
        SourceFunction::bump(vec2(0.0, 0.0), 1.0, 1.0, TimeProfile::constant());
    const SpaceTimeGrid g =
        SpaceTimeGrid::uniform(1.0, 4, vec2(-4.2, -4.2), vec2(4.2, 4.2), {10, 10});
    SolveCfg gauss;
    gauss.mode = "gauss";
    SolveCfg mc;
    mc.mode = "mc";
    mc.mc_paths = 4000;
    const Field ug = solve_driftless(Q, f, g, gauss);
    const Field um = solve_driftless(Q, f, g, mc, 7);
    REQUIRE(um.has_standard_error());
    CHECK(um.standard_error.maxCoeff() > 0.0);
    CHECK(um.provenance.find("mc") != std::string::npos);
    CHECK(um.seed == 7);

    const Mat err = (um.values - ug.values).cwiseAbs();
    const Mat bound = 4.0 * um.standard_error.array().max(2.5e-4).matrix();
    CHECK((err - bound).maxCoeff() <= 0.0);
}

TEST_CASE("solve mc: deterministic in the seed and the worker count") {
    const TimePSDPath Q = TimePSDPath::constant(0.3 * Mat::Identity(2, 2), 1.0);
    const SourceFunction f =
        SourceFunction::bump(vec2(0.0, 0.0), 1.0, 1.0, TimeProfile::constant());
    const SpaceTimeGrid g =
        SpaceTimeGrid::uniform(1.0, 3, vec2(-4.2, -4.2), vec2(4.2, 4.2), {10, 10});
    SolveCfg one;
    one.mode = "mc";
    one.mc_paths = 600;
    SolveCfg three = one;
    three.workers = 3;
    const Field a = solve_driftless(Q, f, g, one, 11);
    const Field b = solve_driftless(Q, f, g, one, 11);
    const Field c = solve_driftless(Q, f, g, three, 11);
    CHECK((a.values - b.values).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.values - c.values).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.standard_error - c.standard_error).cwiseAbs().maxCoeff() == 0.0);

    const Field d = solve_driftless(Q, f, g, one, 12);
    CHECK((a.values - d.values).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("solve gauss: worker count does not change the values") {
    const TimePSDPath Q = TimePSDPath::constant(0.3 * Mat::Identity(2, 2), 1.0);
    const SourceFunction f =
        SourceFunction::bump(vec2(0.0, 0.0), 1.0, 1.0, TimeProfile::constant());
    const SpaceTimeGrid g =
        SpaceTimeGrid::uniform(1.0, 3, vec2(-4.2, -4.2), vec2(4.2, 4.2), {48, 48});
    SolveCfg one;
    SolveCfg four;
    four.workers = 4;
    const Field a = solve_driftless(Q, f, g, one);
    const Field b = solve_driftless(Q, f, g, four);
    CHECK((a.values - b.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("solve: automatic mode picks quadrature in low dimension, MC beyond") {
    const double inf = std::numeric_limits<double>::infinity();
    const SourceFunction f2 = SourceFunction::analytic(
        2, [](double, const Vec& z) { return std::exp(-z.squaredNorm()); }, inf, {}, 1.0);
    const SpaceTimeGrid g2 =
        SpaceTimeGrid::uniform(1.0, 2, vec2(-2.0, -2.0), vec2(2.0, 2.0), {6, 6});
    const Field u2 = solve_driftless(TimePSDPath::constant(Mat::Identity(2, 2), 1.0), f2, g2);
    CHECK(u2.provenance.find("gauss") != std::string::npos);
    CHECK(!u2.has_standard_error());

    const SourceFunction f4 = SourceFunction::analytic(
        4, [](double, const Vec& z) { return std::exp(-z.squaredNorm()); }, inf, {}, 1.0);
    Vec lo4 = Vec::Constant(4, -2.0), hi4 = Vec::Constant(4, 2.0);
    const SpaceTimeGrid g4 = SpaceTimeGrid::uniform(1.0, 2, lo4, hi4, {4, 4, 4, 4});
    SolveCfg cfg;
    cfg.mc_paths = 400;
    const Field u4 =
        solve_driftless(TimePSDPath::constant(0.1 * Mat::Identity(4, 4), 1.0), f4, g4, cfg, 3);
    CHECK(u4.provenance.find("mc") != std::string::npos);
    CHECK(u4.has_standard_error());
}

// ---------------------------------------------------------------------------
// Validation and coverage

TEST_CASE("solve: configuration and dimension validation") {
    const TimePSDPath Q = TimePSDPath::constant(Mat::Identity(2, 2), 1.0);
    const SourceFunction f =
        SourceFunction::bump(vec2(0.0, 0.0), 1.0, 1.0, TimeProfile::constant());
    const SpaceTimeGrid g =
        SpaceTimeGrid::uniform(1.0, 4, vec2(-6.7, -6.7), vec2(6.7, 6.7), {8, 8});

    SolveCfg bad;
    bad.mode = "quantum";
    CHECK_THROWS_AS(solve_driftless(Q, f, g, bad), SchemaError);
    SolveCfg zero_sub;
    zero_sub.time_substeps = 0;
    CHECK_THROWS_AS(solve_driftless(Q, f, g, zero_sub), SchemaError);

    CHECK_THROWS_AS(solve_driftless(TimePSDPath::zero(3, 1.0), f, g), DimensionError);
    CHECK_THROWS_AS(solve_driftless(TimePSDPath::zero(2, 0.5), f, g), DimensionError);

    const SpaceTimeGrid small =
        SpaceTimeGrid::uniform(1.0, 4, vec2(-2.0, -2.0), vec2(2.0, 2.0), {8, 8});
    CHECK_THROWS_AS(solve_driftless(Q, f, small), CoverageError);

    const double inf = std::numeric_limits<double>::infinity();
    const SourceFunction global = SourceFunction::analytic(
        2, [](double, const Vec&) { return 1.0; }, inf, {}, 1.0);
    CHECK_NOTHROW(solve_driftless(Q, global, small));
}

// ---------------------------------------------------------------------------
// Flow maps between the drifted and driftless pictures

TEST_CASE("pull and push: identity at zero drift") {
    const SpaceTimeGrid g =
        SpaceTimeGrid::uniform(1.0, 3, vec2(-2.0, -2.0), vec2(2.0, 2.0), {10, 10});
    Field u = Field::zero(g, "probe");
    for (int j = 0; j <= g.nt; ++j)
        for (Eigen::Index q = 0; q < g.space_points(); ++q) {
            const Vec z = g.point(q);
            u.values(q, j) = std::sin(z(0)) * std::cos(0.7 * z(1)) * g.time(j);
        }
    const Mat A0 = Mat::Zero(2, 2);
    const Field pushed = push_to_ou(u, A0);
    const Field pulled = pull_to_driftless(u, A0);
    CHECK((pushed.values - u.values).cwiseAbs().maxCoeff() <= 1e-13);
    CHECK((pulled.values - u.values).cwiseAbs().maxCoeff() <= 1e-13);
    CHECK(pushed.provenance.find("push_to_ou") != std::string::npos);
}

TEST_CASE("pull and push: smooth round trip within the interpolation budget") {
    const Mat A = kolmo_A();
    const SpaceTimeGrid g = SpaceTimeGrid::uniform(0.25, 4, vec2(-4.0, -4.0),
                                                   vec2(4.0, 4.0), {96, 96}, vec2(1.0, 1.0));
    Field u = Field::zero(g, "probe");
    for (int j = 0; j <= g.nt; ++j)
        for (Eigen::Index q = 0; q < g.space_points(); ++q)
            u.values(q, j) = g.time(j) * std::exp(-g.point(q).squaredNorm());
    const Field back = pull_to_driftless(push_to_ou(u, A), A);
    double worst = 0.0;
    for (int j = 0; j <= g.nt; ++j)
        for (Eigen::Index q = 0; q < g.space_points(); ++q) {
            if (g.point(q).cwiseAbs().maxCoeff() > 2.0) continue;
            worst = std::max(worst, std::abs(back.values(q, j) - u.values(q, j)));
        }
    CHECK(worst <= 5e-4);
}

TEST_CASE("pull and push: coverage error when the flow leaves the box") {
    const Mat A = kolmo_A();
    const SpaceTimeGrid g = SpaceTimeGrid::uniform(2.0, 4, vec2(-2.0, -2.0),
                                                   vec2(2.0, 2.0), {8, 8}, vec2(0.25, 0.25));
    const Field u = Field::zero(g, "probe");
    CHECK_THROWS_AS(push_to_ou(u, A), CoverageError);
    CHECK_THROWS_AS(pull_to_driftless(u, A), CoverageError);
}

TEST_CASE("drift removal: both source pairings close the loop") {
    const OUSystem sys = kolmo_sys();
    const Mat A = sys.A;
    const double T = 0.25;
    const SourceFunction f =
        SourceFunction::bump(vec2(0.3, -0.2), 0.9, 1.0, TimeProfile::constant());
    const SpaceTimeGrid g = SpaceTimeGrid::uniform(T, 8, vec2(-5.0, -5.0), vec2(5.0, 5.0),
                                                   {128, 128}, vec2(1.1, 1.1));
    const TimePSDPath Q_A = TimePSDPath::constant(sys.B(), T).conjugated_by_flow(A);

    const Field u_direct = solve_ou(sys, f, g);
    const double sup = u_direct.sup_abs();
    REQUIRE(sup > 0.01);

    const Field v = solve_driftless(Q_A, source_pullback(f, A, T), g);
    const Field u_mapped = push_to_ou(v, A);
    double worst1 = 0.0;
    for (int j = 0; j <= g.nt; ++j)
        for (Eigen::Index q = 0; q < g.space_points(); ++q) {
            if (g.point(q).cwiseAbs().maxCoeff() > 2.5) continue;
            worst1 = std::max(worst1, std::abs(u_mapped.values(q, j) - u_direct.values(q, j)));
        }
    CHECK(worst1 <= 5e-3 * sup);

    const Field u_fwd = solve_ou(sys, source_pushforward(f, A, T), g);
    const Field w = pull_to_driftless(u_fwd, A);
    const Field v_direct = solve_driftless(Q_A, f, g);
    double worst2 = 0.0;
    for (int j = 0; j <= g.nt; ++j)
        for (Eigen::Index q = 0; q < g.space_points(); ++q) {
            if (g.point(q).cwiseAbs().maxCoeff() > 2.5) continue;
            worst2 = std::max(worst2, std::abs(w.values(q, j) - v_direct.values(q, j)));
        }
    CHECK(worst2 <= 5e-3 * std::max(sup, v_direct.sup_abs()));
}

// ---------------------------------------------------------------------------
// Residual

TEST_CASE("residual: quadratic space and linear time fixture is exact") {
    const Mat M = mat2(0.3, 0.1, 0.1, 0.5);
    const Mat Qm = mat2(0.4, 0.1, 0.1, 0.2);
    const double c0 = 0.7;
    const double trq = (Qm * 2.0 * M).trace(); // Tr(Q D^2 v) = trq * t
    const SpaceTimeGrid g = SpaceTimeGrid::uniform(1.0, 8, vec2(-2.0, -2.0),
                                                   vec2(2.0, 2.0), {16, 16}, vec2(0.5, 0.5));
    Field v = Field::zero(g, "fixture");
    for (int j = 0; j <= g.nt; ++j)
        for (Eigen::Index q = 0; q < g.space_points(); ++q) {
            const Vec z = g.point(q);
            v.values(q, j) = g.time(j) * (z.dot(M * z) + c0);
        }
    const double inf = std::numeric_limits<double>::infinity();
    const SourceFunction f = SourceFunction::analytic(
        2, [&](double t, const Vec& z) { return z.dot(M * z) + c0 - trq * t; }, inf, {}, inf);
    CHECK(residual(v, TimePSDPath::constant(Qm, 1.0), f) <= 1e-8);

    const Field zero_field = Field::zero(g, "zero");
    const SourceFunction zf = SourceFunction::analytic(
        2, [](double, const Vec&) { return 0.0; }, inf, {}, 0.0);
    CHECK(residual(zero_field, TimePSDPath::constant(Qm, 1.0), zf) == 0.0);
}

TEST_CASE("residual: second order decay under spatial refinement") {
    const Mat Qm = mat2(0.4, 0.1, 0.1, 0.2);
    const TimePSDPath Q = TimePSDPath::constant(Qm, 1.0);
    const double inf = std::numeric_limits<double>::infinity();
    const SourceFunction f = SourceFunction::analytic(
        2,
        [&](double t, const Vec& z) {
            const double e = std::exp(-z.squaredNorm());
            const double quad = 4.0 * z.dot(Qm * z) - 2.0 * Qm.trace();
            return e * (1.0 - t * quad);
        },
        inf, {}, inf);
    auto make = [&](int n) {
        const SpaceTimeGrid g = SpaceTimeGrid::uniform(
            1.0, 8, vec2(-3.0, -3.0), vec2(3.0, 3.0), {n, n}, vec2(0.75, 0.75));
        Field v = Field::zero(g, "manufactured");
        for (int j = 0; j <= g.nt; ++j)
            for (Eigen::Index q = 0; q < g.space_points(); ++q)
                v.values(q, j) = g.time(j) * std::exp(-g.point(q).squaredNorm());
        return residual(v, Q, f);
    };
    const double coarse = make(24);
    const double fine = make(48);
    CHECK(coarse / fine >= 3.4);
    CHECK(coarse / fine <= 4.6);
}
