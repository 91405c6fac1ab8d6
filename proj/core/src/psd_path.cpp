#include "hypou/psd_path.hpp"

#include <algorithm>
#include <cmath>

#include "hypou/errors.hpp"

namespace hypou {

namespace {

void require_psd_input(const Mat& M, const std::string& where) {
    if (M.rows() != M.cols())
        throw DimensionError(where + ": matrix must be square");
    const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw PsdError(where + ": matrix must be symmetric");
    if (!is_psd(M, kTolPsd))
        throw PsdError(where + ": matrix is not non-negative definite");
}

std::vector<double> merge_sorted(std::vector<double> a, const std::vector<double>& b) {
    a.insert(a.end(), b.begin(), b.end());
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    return a;
}

} // namespace

TimePSDPath::TimePSDPath(std::string kind, int dim, double T,
                         std::function<Mat(double)> eval)
    : kind_(std::move(kind)), dim_(dim), T_(T), eval_(std::move(eval)) {}

Mat TimePSDPath::evaluate(double t) const {
    if (!eval_) throw DimensionError("TimePSDPath: evaluating a default-constructed path");
    const double slack = 1e-9 * std::max(1.0, T_);
    if (t < -slack || t > T_ + slack)
        throw DimensionError("TimePSDPath: time " + std::to_string(t) +
                             " outside [0, " + std::to_string(T_) + "]");
    const Mat S = eval_(std::clamp(t, 0.0, T_));
    return psd_clamp(S, kTolPsd);
}

double TimePSDPath::continuity_certificate(int samples) const {
    if (samples < 2) throw DimensionError("continuity_certificate: need at least 2 samples");
    double worst = 0.0;
    Mat prev = evaluate(0.0);
    for (int i = 1; i < samples; ++i) {
        const Mat cur = evaluate(T_ * i / (samples - 1));
        worst = std::max(worst, spectral_norm(cur - prev));
        prev = cur;
    }
    return worst;
}

TimePSDPath TimePSDPath::zero(int dim, double T) {
    return constant(Mat::Zero(dim, dim), T);
}

TimePSDPath TimePSDPath::constant(const Mat& S, double T) {
    require_psd_input(S, "TimePSDPath::constant");
    const Mat sym = symmetrize(S);
    return TimePSDPath("constant", static_cast<int>(S.rows()), T,
                       [sym](double) { return sym; });
}

TimePSDPath TimePSDPath::piecewise_linear(const std::vector<double>& times,
                                          const std::vector<Mat>& samples) {
    if (times.size() != samples.size() || times.size() < 2)
        throw DimensionError("TimePSDPath::piecewise_linear: need matching times/samples, >= 2");
    for (std::size_t i = 0; i + 1 < times.size(); ++i)
        if (!(times[i] < times[i + 1]))
            throw DimensionError("TimePSDPath::piecewise_linear: times must increase");
    const int dim = static_cast<int>(samples.front().rows());
    for (const Mat& S : samples) {
        require_psd_input(S, "TimePSDPath::piecewise_linear");
        if (S.rows() != dim)
            throw DimensionError("TimePSDPath::piecewise_linear: sample dimensions differ");
    }
    std::vector<double> ts = times;
    std::vector<Mat> ss = samples;
    auto eval = [ts, ss](double t) -> Mat {
        if (t <= ts.front()) return ss.front();
        if (t >= ts.back()) return ss.back();
        const auto it = std::upper_bound(ts.begin(), ts.end(), t);
        const std::size_t hi = static_cast<std::size_t>(it - ts.begin());
        const double w = (t - ts[hi - 1]) / (ts[hi] - ts[hi - 1]);
        return (1.0 - w) * ss[hi - 1] + w * ss[hi];
    };
    TimePSDPath path("piecewise-linear", dim, times.back(), std::move(eval));
    path.breakpoints_ = times;
    return path;
}

TimePSDPath TimePSDPath::sinusoidal(const Mat& M, double amp, double mod, double omega,
                                    double T, double phase) {
    require_psd_input(M, "TimePSDPath::sinusoidal");
    if (amp < 0.0 || std::abs(mod) > 1.0)
        throw PsdError("TimePSDPath::sinusoidal: need amp >= 0 and |mod| <= 1");
    const Mat sym = symmetrize(M);
    auto eval = [sym, amp, mod, omega, phase](double t) -> Mat {
        return amp * (1.0 + mod * std::sin(omega * t + phase)) * sym;
    };
    return TimePSDPath("sinusoidal-psd", static_cast<int>(M.rows()), T, std::move(eval));
}

TimePSDPath TimePSDPath::rank1_vanishing(const Vec& v, double omega, double T) {
    if (!(omega > 0.0)) throw DimensionError("TimePSDPath::rank1_vanishing: omega must be positive");
    const Mat P = v * v.transpose();
    auto eval = [P, omega](double t) -> Mat {
        return std::max(0.0, std::sin(omega * t)) * P;
    };
    TimePSDPath path("rank1-vanishing", static_cast<int>(v.size()), T, std::move(eval));
    for (int k = 1; k * M_PI / omega < T; ++k)
        path.breakpoints_.push_back(k * M_PI / omega);
    return path;
}

TimePSDPath TimePSDPath::conjugated_by_flow(const Mat& A) const {
    if (A.rows() != dim_ || A.cols() != dim_)
        throw DimensionError("conjugated_by_flow: drift dimension mismatch");
    auto base = eval_;
    auto eval = [base, A](double t) -> Mat {
        const Mat E = matrix_exp(A, t);
        return E * base(t) * E.transpose();
    };
    TimePSDPath path("conjugated(" + kind_ + ")", dim_, T_, std::move(eval));
    path.breakpoints_ = breakpoints_;
    return path;
}

TimePSDPath TimePSDPath::operator+(const TimePSDPath& other) const {
    if (dim_ != other.dim_)
        throw DimensionError("TimePSDPath: adding paths of different dimension");
    auto a = eval_;
    auto b = other.eval_;
    auto eval = [a, b](double t) -> Mat { return a(t) + b(t); };
    TimePSDPath path("sum(" + kind_ + "," + other.kind_ + ")", dim_,
                     std::min(T_, other.T_), std::move(eval));
    path.breakpoints_ = merge_sorted(breakpoints_, other.breakpoints_);
    return path;
}

TimePSDPath TimePSDPath::scaled(double c) const {
    if (c < 0.0) throw PsdError("TimePSDPath::scaled: factor must be non-negative");
    auto base = eval_;
    auto eval = [base, c](double t) -> Mat { return c * base(t); };
    TimePSDPath path(kind_, dim_, T_, std::move(eval));
    path.breakpoints_ = breakpoints_;
    return path;
}

} // namespace hypou
