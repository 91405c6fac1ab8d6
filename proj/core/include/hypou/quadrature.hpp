#pragma once

#include <functional>
#include <vector>

#include "hypou/linalg.hpp"

namespace hypou {

struct QuadRule {
    Vec nodes;
    Vec weights;
};

// Gauss-Hermite rule for weight e^{-x^2/2}/sqrt(2 pi): integrates
// polynomials of degree < 2n exactly against the standard normal density.
QuadRule gauss_hermite(int n);

// Gauss-Legendre rule on [-1, 1].
QuadRule gauss_legendre(int n);

// Affine image of a rule on [-1, 1] onto [a, b].
QuadRule map_to_interval(const QuadRule& base, double a, double b);

// Composite Simpson with m >= 1 panels per subinterval of [a, b].
Mat simpson_matrix(const std::function<Mat(double)>& F, double a, double b, int panels);
double simpson_scalar(const std::function<double(double)>& f, double a, double b, int panels);

// Uniform trapezoid nodes on [0, T] refined so that every breakpoint is a
// node; weights halve at endpoints and at interior breakpoints so sided
// limits of piecewise-continuous integrands combine correctly.
struct TimeNode {
    double t = 0.0;
    double weight = 0.0;
    // -1: evaluate the left limit, +1: right limit, 0: interior point.
    int side = 0;
};

std::vector<TimeNode> trapezoid_nodes(double t0, double t1, int n,
                                      const std::vector<double>& breakpoints = {});

} // namespace hypou
