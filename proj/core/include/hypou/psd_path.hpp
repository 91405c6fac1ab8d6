#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hypou/linalg.hpp"

namespace hypou {

inline constexpr double kTolPsd = 1e-10;

// Continuous path t -> symmetric non-negative matrix on [0, T]. Houses the
// diffusion Q(t), the perturbation S(t), and derived combinations.
class TimePSDPath {
  public:
    TimePSDPath() = default;

    const std::string& kind() const { return kind_; }
    double horizon() const { return T_; }
    int dim() const { return dim_; }
    bool valid() const { return static_cast<bool>(eval_); }

    // Symmetric value with eigenvalues in [-kTolPsd, 0) clamped to zero;
    // anything more negative throws PsdError.
    Mat evaluate(double t) const;

    // Max jump between consecutive samples of a uniform scan, in spectral
    // norm; small values certify continuity at the scan resolution.
    double continuity_certificate(int samples = 257) const;

    // Times where the path is not smooth; quadratures split there.
    const std::vector<double>& breakpoints() const { return breakpoints_; }

    static TimePSDPath zero(int dim, double T);
    static TimePSDPath constant(const Mat& S, double T);
    // Linear interpolation between PSD samples at increasing times; constant
    // extrapolation outside the sample range.
    static TimePSDPath piecewise_linear(const std::vector<double>& times,
                                        const std::vector<Mat>& samples);
    // amp * (1 + mod * sin(omega t + phase)) * M with |mod| <= 1, amp >= 0.
    static TimePSDPath sinusoidal(const Mat& M, double amp, double mod, double omega,
                                  double T, double phase = 0.0);
    // max(0, sin(omega t)) * v v^T: degenerate, vanishing on subintervals.
    static TimePSDPath rank1_vanishing(const Vec& v, double omega, double T);

    // t -> e^{tA} S(t) e^{tA^T}.
    TimePSDPath conjugated_by_flow(const Mat& A) const;
    TimePSDPath operator+(const TimePSDPath& other) const;
    TimePSDPath scaled(double c) const;

  private:
    TimePSDPath(std::string kind, int dim, double T, std::function<Mat(double)> eval);

    std::string kind_;
    int dim_ = 0;
    double T_ = 0.0;
    std::function<Mat(double)> eval_;
    std::vector<double> breakpoints_;
};

} // namespace hypou
