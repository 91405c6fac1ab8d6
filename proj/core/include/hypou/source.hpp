#pragma once

#include <array>
#include <functional>
#include <limits>
#include <vector>

#include "hypou/linalg.hpp"

namespace hypou {

// Piecewise-continuous scalar time factor with explicit discontinuities.
class TimeProfile {
  public:
    TimeProfile();  // constant 1

    // side < 0 evaluates the left limit at a breakpoint, side >= 0 the value
    // (right-continuous convention).
    double value(double t, int side = 0) const;
    const std::vector<double>& breakpoints() const { return breakpoints_; }
    double sup_abs() const { return sup_; }

    static TimeProfile constant(double level = 1.0);
    // (1 + sin(2 pi t / period)) / 2
    static TimeProfile sinusoidal(double period);
    static TimeProfile step(double t0, double before, double after);

  private:
    std::function<double(double, int)> fn_;
    std::vector<double> breakpoints_;
    double sup_ = 1.0;
};

// Ball known to contain the spatial support at a fixed time; radius is
// infinite when no bound is available.
struct SourceWindow {
    Vec center;
    double radius = std::numeric_limits<double>::infinity();
};

// Source in B_b(0,T; C_0^inf): compactly supported in space, piecewise
// continuous in time. Evaluation is batched so solvers can amortize
// per-source dispatch over many points.
class SourceFunction {
  public:
    SourceFunction() = default;

    int dim() const { return dim_; }
    // Spatial support lies in the origin-centered ball of this radius.
    double support_radius() const { return support_radius_; }
    const std::vector<double>& time_breakpoints() const { return breakpoints_; }
    // sup |D^j f| estimates for j = 0..4, over space and time.
    const std::array<double, 5>& derivative_bounds() const { return derivative_bounds_; }
    double sup_abs() const { return sup_; }
    SourceWindow window(double t) const;

    double evaluate(double t, const Vec& z, int side = 0) const;
    // out(i) = f(t, pts.row(i)); pts is (count x dim).
    void evaluate_batch(double t, const Eigen::Ref<const Mat>& pts, int side,
                        Vec& out) const;

    // amplitude * g(t) * exp(1 - 1/(1 - |z-c|^2/r^2)) inside the ball, 0 outside.
    static SourceFunction bump(const Vec& center, double radius, double amplitude,
                               const TimeProfile& profile);
    // Arbitrary function; pass a finite support radius and sup bound when known.
    static SourceFunction analytic(
        int dim, std::function<double(double, const Vec&)> fn,
        double support_radius = std::numeric_limits<double>::infinity(),
        std::vector<double> breakpoints = {},
        double sup_bound = std::numeric_limits<double>::infinity());

    SourceFunction scaled(double a) const;
    SourceFunction operator+(const SourceFunction& g) const;
    // z -> f(t, e^{sign t A} z); sign -1 gives the pullback along the flow.
    SourceFunction flow_mapped(const Mat& A, double sign, double T) const;
    // z -> f(t, z - shift(t)); jump_times are added to the breakpoints.
    SourceFunction shifted(std::function<Vec(double)> shift, double shift_bound,
                           const std::vector<double>& jump_times = {}) const;

  private:
    using Core = std::function<void(double, const Eigen::Ref<const Mat>&, int, Vec&)>;
    using WindowFn = std::function<SourceWindow(double)>;

    int dim_ = 0;
    double support_radius_ = std::numeric_limits<double>::infinity();
    std::vector<double> breakpoints_;
    std::array<double, 5> derivative_bounds_{};
    double sup_ = std::numeric_limits<double>::infinity();
    Core core_;
    WindowFn window_;
};

} // namespace hypou
