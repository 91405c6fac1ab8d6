#include "hypou/source.hpp"

#include <algorithm>
#include <cmath>

#include "hypou/errors.hpp"

namespace hypou {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> merge_breakpoints(const std::vector<double>& a,
                                      const std::vector<double>& b) {
    std::vector<double> out = a;
    out.insert(out.end(), b.begin(), b.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// sup |d^j/dx^j profile| estimated by high-resolution central differences of
// the radial section; feeds error-control heuristics only.
std::array<double, 5> bump_derivative_bounds(double radius, double amplitude) {
    const int n = 8192;
    const double h = 2.0 * radius / n;
    std::vector<double> p(n + 1);
    for (int i = 0; i <= n; ++i) {
        const double x = -radius + i * h;
        const double r2 = (x * x) / (radius * radius);
        p[i] = r2 < 1.0 ? amplitude * std::exp(1.0 - 1.0 / (1.0 - r2)) : 0.0;
    }
    std::array<double, 5> bounds{};
    std::vector<double> cur = p;
    bounds[0] = amplitude;
    for (int order = 1; order <= 4; ++order) {
        std::vector<double> next(cur.size(), 0.0);
        for (std::size_t i = 1; i + 1 < cur.size(); ++i)
            next[i] = (cur[i + 1] - cur[i - 1]) / (2.0 * h);
        double m = 0.0;
        for (double v : next) m = std::max(m, std::abs(v));
        bounds[order] = m;
        cur = std::move(next);
    }
    return bounds;
}

} // namespace

TimeProfile::TimeProfile() : fn_([](double, int) { return 1.0; }) {}

double TimeProfile::value(double t, int side) const { return fn_(t, side); }

TimeProfile TimeProfile::constant(double level) {
    TimeProfile p;
    p.fn_ = [level](double, int) { return level; };
    p.sup_ = std::abs(level);
    return p;
}

TimeProfile TimeProfile::sinusoidal(double period) {
    if (!(period > 0.0)) throw DimensionError("TimeProfile::sinusoidal: period must be positive");
    TimeProfile p;
    p.fn_ = [period](double t, int) {
        return 0.5 * (1.0 + std::sin(2.0 * M_PI * t / period));
    };
    p.sup_ = 1.0;
    return p;
}

TimeProfile TimeProfile::step(double t0, double before, double after) {
    TimeProfile p;
    p.fn_ = [t0, before, after](double t, int side) {
        if (t < t0) return before;
        if (t > t0) return after;
        return side < 0 ? before : after;
    };
    p.breakpoints_ = {t0};
    p.sup_ = std::max(std::abs(before), std::abs(after));
    return p;
}

SourceWindow SourceFunction::window(double t) const {
    if (window_) return window_(t);
    SourceWindow w;
    w.center = Vec::Zero(dim_);
    w.radius = support_radius_;
    return w;
}

double SourceFunction::evaluate(double t, const Vec& z, int side) const {
    Vec out(1);
    evaluate_batch(t, z.transpose(), side, out);
    return out(0);
}

void SourceFunction::evaluate_batch(double t, const Eigen::Ref<const Mat>& pts,
                                    int side, Vec& out) const {
    if (!core_) throw DimensionError("SourceFunction: evaluating a default-constructed source");
    if (pts.cols() != dim_)
        throw DimensionError("SourceFunction: point dimension mismatch");
    out.resize(pts.rows());
    core_(t, pts, side, out);
}

SourceFunction SourceFunction::bump(const Vec& center, double radius, double amplitude,
                                    const TimeProfile& profile) {
    if (!(radius > 0.0)) throw DimensionError("SourceFunction::bump: radius must be positive");
    SourceFunction f;
    f.dim_ = static_cast<int>(center.size());
    f.support_radius_ = center.norm() + radius;
    f.breakpoints_ = profile.breakpoints();
    f.derivative_bounds_ = bump_derivative_bounds(radius, amplitude * profile.sup_abs());
    f.sup_ = std::abs(amplitude) * profile.sup_abs();
    Vec c = center;
    f.core_ = [c, radius, amplitude, profile](double t, const Eigen::Ref<const Mat>& pts,
                                              int side, Vec& out) {
        const double g = amplitude * profile.value(t, side);
        const double inv_r2 = 1.0 / (radius * radius);
        if (pts.cols() == 2) {
            const double cx = c(0), cy = c(1);
            for (Eigen::Index i = 0; i < pts.rows(); ++i) {
                const double dx = pts(i, 0) - cx;
                const double dy = pts(i, 1) - cy;
                const double r2 = (dx * dx + dy * dy) * inv_r2;
                out(i) = r2 < 1.0 ? g * std::exp(1.0 - 1.0 / (1.0 - r2)) : 0.0;
            }
            return;
        }
        for (Eigen::Index i = 0; i < pts.rows(); ++i) {
            const double r2 = (pts.row(i).transpose() - c).squaredNorm() * inv_r2;
            out(i) = r2 < 1.0 ? g * std::exp(1.0 - 1.0 / (1.0 - r2)) : 0.0;
        }
    };
    f.window_ = [c, radius](double) {
        SourceWindow w;
        w.center = c;
        w.radius = radius;
        return w;
    };
    return f;
}

SourceFunction SourceFunction::analytic(int dim, std::function<double(double, const Vec&)> fn,
                                        double support_radius,
                                        std::vector<double> breakpoints, double sup_bound) {
    SourceFunction f;
    f.dim_ = dim;
    f.support_radius_ = support_radius;
    f.breakpoints_ = std::move(breakpoints);
    f.derivative_bounds_.fill(kInf);
    f.derivative_bounds_[0] = sup_bound;
    f.sup_ = sup_bound;
    f.core_ = [fn](double t, const Eigen::Ref<const Mat>& pts, int, Vec& out) {
        for (Eigen::Index i = 0; i < pts.rows(); ++i)
            out(i) = fn(t, pts.row(i).transpose());
    };
    return f;
}

SourceFunction SourceFunction::scaled(double a) const {
    SourceFunction f = *this;
    for (double& b : f.derivative_bounds_) b *= std::abs(a);
    f.sup_ *= std::abs(a);
    auto base = core_;
    f.core_ = [base, a](double t, const Eigen::Ref<const Mat>& pts, int side, Vec& out) {
        base(t, pts, side, out);
        out *= a;
    };
    return f;
}

SourceFunction SourceFunction::operator+(const SourceFunction& g) const {
    if (dim_ != g.dim_) throw DimensionError("SourceFunction: adding sources of different dimension");
    SourceFunction f;
    f.dim_ = dim_;
    f.support_radius_ = std::max(support_radius_, g.support_radius_);
    f.breakpoints_ = merge_breakpoints(breakpoints_, g.breakpoints_);
    for (std::size_t j = 0; j < f.derivative_bounds_.size(); ++j)
        f.derivative_bounds_[j] = derivative_bounds_[j] + g.derivative_bounds_[j];
    f.sup_ = sup_ + g.sup_;
    auto a = core_;
    auto b = g.core_;
    f.core_ = [a, b](double t, const Eigen::Ref<const Mat>& pts, int side, Vec& out) {
        a(t, pts, side, out);
        Vec tmp(pts.rows());
        b(t, pts, side, tmp);
        out += tmp;
    };
    auto wa = [self = *this](double t) { return self.window(t); };
    auto wb = [other = g](double t) { return other.window(t); };
    f.window_ = [wa, wb](double t) {
        const SourceWindow u = wa(t);
        const SourceWindow v = wb(t);
        if (!std::isfinite(u.radius) || !std::isfinite(v.radius)) {
            SourceWindow w;
            w.center = Vec::Zero(u.center.size());
            return w;
        }
        const Vec d = v.center - u.center;
        const double dist = d.norm();
        SourceWindow w;
        if (dist + v.radius <= u.radius) return u;
        if (dist + u.radius <= v.radius) return v;
        w.radius = 0.5 * (dist + u.radius + v.radius);
        w.center = u.center;
        if (dist > 0) w.center += ((w.radius - u.radius) / dist) * d;
        return w;
    };
    return f;
}

SourceFunction SourceFunction::flow_mapped(const Mat& A, double sign, double T) const {
    if (A.rows() != dim_ || A.cols() != dim_)
        throw DimensionError("SourceFunction::flow_mapped: drift dimension mismatch");
    double max_fwd = 1.0, max_inv = 1.0;
    for (int i = 0; i <= 64; ++i) {
        const double t = T * i / 64.0;
        max_fwd = std::max(max_fwd, spectral_norm(matrix_exp(A, sign * t)));
        max_inv = std::max(max_inv, spectral_norm(matrix_exp(A, -sign * t)));
    }
    SourceFunction f = *this;
    f.support_radius_ = support_radius_ * max_inv;
    for (std::size_t j = 1; j < f.derivative_bounds_.size(); ++j)
        f.derivative_bounds_[j] = derivative_bounds_[j] * std::pow(max_fwd, static_cast<double>(j));
    auto base = core_;
    f.core_ = [base, A, sign](double t, const Eigen::Ref<const Mat>& pts, int side, Vec& out) {
        const Mat E = matrix_exp(A, sign * t);
        const Mat mapped = pts * E.transpose();
        base(t, mapped, side, out);
    };
    auto wbase = [self = *this](double t) { return self.window(t); };
    f.window_ = [wbase, A, sign](double t) {
        SourceWindow w = wbase(t);
        const Mat Einv = matrix_exp(A, -sign * t);
        w.center = Einv * w.center;
        if (std::isfinite(w.radius)) w.radius *= spectral_norm(Einv);
        return w;
    };
    return f;
}

SourceFunction SourceFunction::shifted(std::function<Vec(double)> shift, double shift_bound,
                                       const std::vector<double>& jump_times) const {
    SourceFunction f = *this;
    f.support_radius_ = support_radius_ + shift_bound;
    f.breakpoints_ = merge_breakpoints(breakpoints_, jump_times);
    auto base = core_;
    const int dim = dim_;
    f.core_ = [base, shift, dim](double t, const Eigen::Ref<const Mat>& pts, int side, Vec& out) {
        const Vec s = shift(t);
        if (s.size() != dim) throw DimensionError("SourceFunction::shifted: shift dimension mismatch");
        const Mat moved = pts.rowwise() - s.transpose();
        base(t, moved, side, out);
    };
    auto wbase = [self = *this](double t) { return self.window(t); };
    f.window_ = [wbase, shift](double t) {
        SourceWindow w = wbase(t);
        w.center += shift(t);
        return w;
    };
    return f;
}

} // namespace hypou
