#include "hypou/quadrature.hpp"

#include <algorithm>
#include <cmath>

#include "hypou/errors.hpp"

namespace hypou {

namespace {

// Golub-Welsch: nodes are eigenvalues of the Jacobi matrix, weights are
// mu0 * (first eigenvector component)^2.
QuadRule golub_welsch(const Vec& offdiag, double mu0) {
    const int n = static_cast<int>(offdiag.size()) + 1;
    Mat J = Mat::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i) {
        J(i, i + 1) = offdiag(i);
        J(i + 1, i) = offdiag(i);
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(J);
    QuadRule rule;
    rule.nodes = es.eigenvalues();
    rule.weights = Vec(n);
    for (int i = 0; i < n; ++i) {
        const double v0 = es.eigenvectors()(0, i);
        rule.weights(i) = mu0 * v0 * v0;
    }
    return rule;
}

} // namespace

QuadRule gauss_hermite(int n) {
    if (n < 1) throw QuadratureError("gauss_hermite: need at least one node");
    Vec off(n - 1);
    for (int j = 1; j < n; ++j) off(j - 1) = std::sqrt(static_cast<double>(j));
    return golub_welsch(off, 1.0);
}

QuadRule gauss_legendre(int n) {
    if (n < 1) throw QuadratureError("gauss_legendre: need at least one node");
    Vec off(n - 1);
    for (int j = 1; j < n; ++j)
        off(j - 1) = j / std::sqrt(4.0 * j * j - 1.0);
    return golub_welsch(off, 2.0);
}

QuadRule map_to_interval(const QuadRule& base, double a, double b) {
    QuadRule rule;
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    rule.nodes = (base.nodes.array() * half + mid).matrix();
    rule.weights = base.weights * half;
    return rule;
}

Mat simpson_matrix(const std::function<Mat(double)>& F, double a, double b, int panels) {
    if (panels < 1) throw QuadratureError("simpson_matrix: need at least one panel");
    const int m = 2 * panels;
    const double h = (b - a) / m;
    Mat acc = F(a) + F(b);
    for (int j = 1; j < m; ++j)
        acc += F(a + j * h) * ((j % 2) ? 4.0 : 2.0);
    return acc * (h / 3.0);
}

double simpson_scalar(const std::function<double(double)>& f, double a, double b, int panels) {
    if (panels < 1) throw QuadratureError("simpson_scalar: need at least one panel");
    const int m = 2 * panels;
    const double h = (b - a) / m;
    double acc = f(a) + f(b);
    for (int j = 1; j < m; ++j)
        acc += f(a + j * h) * ((j % 2) ? 4.0 : 2.0);
    return acc * (h / 3.0);
}

std::vector<TimeNode> trapezoid_nodes(double t0, double t1, int n,
                                      const std::vector<double>& breakpoints) {
    std::vector<TimeNode> nodes;
    const double len = t1 - t0;
    if (!(len > 0.0) || n < 1) return nodes;

    std::vector<double> cuts;
    cuts.push_back(t0);
    const double eps = 1e-13 * len;
    std::vector<double> sorted(breakpoints);
    std::sort(sorted.begin(), sorted.end());
    for (double b : sorted)
        if (b > t0 + eps && b < t1 - eps && b > cuts.back() + eps) cuts.push_back(b);
    cuts.push_back(t1);

    for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
        const double a = cuts[p];
        const double b = cuts[p + 1];
        const int m = std::max(1, static_cast<int>(std::lround(n * (b - a) / len)));
        const double h = (b - a) / m;
        for (int j = 0; j <= m; ++j) {
            TimeNode nd;
            nd.t = (j == 0) ? a : (j == m) ? b : a + j * h;
            nd.weight = (j == 0 || j == m) ? 0.5 * h : h;
            nd.side = (j == 0) ? +1 : (j == m) ? -1 : 0;
            nodes.push_back(nd);
        }
    }
    return nodes;
}

} // namespace hypou
