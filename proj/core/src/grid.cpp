#include "hypou/grid.hpp"

#include <cmath>

#include "hypou/errors.hpp"

namespace hypou {

namespace {

void check_box(double T, int nt, const Vec& lo, const Vec& hi, const std::vector<int>& n) {
    if (!(T > 0.0)) throw DimensionError("SpaceTimeGrid: horizon must be positive");
    if (nt < 2) throw DimensionError("SpaceTimeGrid: need at least two time steps");
    const int d = static_cast<int>(n.size());
    if (d < 1 || lo.size() != d || hi.size() != d)
        throw DimensionError("SpaceTimeGrid: box corners and point counts disagree");
    for (int j = 0; j < d; ++j) {
        if (n[j] < 4) throw DimensionError("SpaceTimeGrid: need at least four points per axis");
        if (!(hi(j) > lo(j))) throw DimensionError("SpaceTimeGrid: empty box");
    }
}

} // namespace

SpaceTimeGrid SpaceTimeGrid::uniform(double T, int nt, const Vec& lo, const Vec& hi,
                                     const std::vector<int>& n) {
    return uniform(T, nt, lo, hi, n, Vec::Zero(lo.size()));
}

SpaceTimeGrid SpaceTimeGrid::uniform(double T, int nt, const Vec& lo, const Vec& hi,
                                     const std::vector<int>& n, const Vec& margin) {
    check_box(T, nt, lo, hi, n);
    if (margin.size() != lo.size())
        throw DimensionError("SpaceTimeGrid: margin dimension mismatch");
    SpaceTimeGrid g;
    g.T = T;
    g.nt = nt;
    g.lo = lo;
    g.hi = hi;
    g.n = n;
    g.inner_lo = lo + margin;
    g.inner_hi = hi - margin;
    for (int j = 0; j < g.dim(); ++j)
        if (!(g.inner_hi(j) > g.inner_lo(j)))
            throw DimensionError("SpaceTimeGrid: margin leaves an empty inner box");
    return g;
}

Eigen::Index SpaceTimeGrid::space_points() const {
    Eigen::Index total = 1;
    for (int nj : n) total *= nj;
    return total;
}

Vec SpaceTimeGrid::axis(int j) const {
    Vec x(n[j]);
    const double h = spacing(j);
    for (int i = 0; i < n[j]; ++i) x(i) = lo(j) + i * h;
    return x;
}

Eigen::Index SpaceTimeGrid::stride(int j) const {
    Eigen::Index s = 1;
    for (int a = j + 1; a < dim(); ++a) s *= n[a];
    return s;
}

Eigen::Index SpaceTimeGrid::ravel(const std::vector<int>& idx) const {
    if (static_cast<int>(idx.size()) != dim())
        throw DimensionError("SpaceTimeGrid::ravel: index dimension mismatch");
    Eigen::Index flat = 0;
    for (int j = 0; j < dim(); ++j) flat = flat * n[j] + idx[j];
    return flat;
}

void SpaceTimeGrid::unravel(Eigen::Index flat, std::vector<int>& idx) const {
    idx.resize(dim());
    for (int j = dim() - 1; j >= 0; --j) {
        idx[j] = static_cast<int>(flat % n[j]);
        flat /= n[j];
    }
}

Vec SpaceTimeGrid::point(Eigen::Index flat) const {
    Vec z(dim());
    for (int j = dim() - 1; j >= 0; --j) {
        const int i = static_cast<int>(flat % n[j]);
        z(j) = lo(j) + i * spacing(j);
        flat /= n[j];
    }
    return z;
}

Mat SpaceTimeGrid::points() const {
    const Eigen::Index total = space_points();
    Mat pts(total, dim());
    std::vector<int> idx(dim(), 0);
    for (Eigen::Index flat = 0; flat < total; ++flat) {
        for (int j = 0; j < dim(); ++j) pts(flat, j) = lo(j) + idx[j] * spacing(j);
        for (int j = dim() - 1; j >= 0; --j) {
            if (++idx[j] < n[j]) break;
            idx[j] = 0;
        }
    }
    return pts;
}

bool SpaceTimeGrid::is_inner(Eigen::Index flat) const {
    for (int j = dim() - 1; j >= 0; --j) {
        const int i = static_cast<int>(flat % n[j]);
        const double x = lo(j) + i * spacing(j);
        if (x < inner_lo(j) - 1e-12 || x > inner_hi(j) + 1e-12) return false;
        flat /= n[j];
    }
    return true;
}

std::vector<Eigen::Index> SpaceTimeGrid::inner_indices() const {
    std::vector<Eigen::Index> out;
    const Eigen::Index total = space_points();
    for (Eigen::Index flat = 0; flat < total; ++flat)
        if (is_inner(flat)) out.push_back(flat);
    return out;
}

Field Field::zero(const SpaceTimeGrid& grid, std::string provenance, std::uint64_t seed) {
    Field f;
    f.grid = grid;
    f.values = Mat::Zero(grid.space_points(), grid.nt + 1);
    f.provenance = std::move(provenance);
    f.seed = seed;
    return f;
}

double Field::sup_abs() const {
    if (values.size() == 0) return 0.0;
    return values.cwiseAbs().maxCoeff();
}

double interp_cubic(const SpaceTimeGrid& grid, Eigen::Ref<const Vec> slice, const Vec& z) {
    const int N = grid.dim();
    if (z.size() != N) throw DimensionError("interp_cubic: point dimension mismatch");
    if (slice.size() != grid.space_points())
        throw DimensionError("interp_cubic: slice size mismatch");

    std::vector<std::array<double, 4>> w(N);
    std::vector<Eigen::Index> base(N);
    for (int j = 0; j < N; ++j) {
        const double s = (z(j) - grid.lo(j)) / grid.spacing(j);
        const int nj = grid.n[j];
        long b = static_cast<long>(std::floor(s));
        if (b < 1) b = 1;
        if (b > nj - 3) b = nj - 3;
        const double u = s - b;
        if (u < -1.0 - 1e-9 || u > 2.0 + 1e-9)
            throw CoverageError("interp_cubic: point escapes the sampled box");
        w[j][0] = -u * (u - 1.0) * (u - 2.0) / 6.0;
        w[j][1] = (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0;
        w[j][2] = -(u + 1.0) * u * (u - 2.0) / 2.0;
        w[j][3] = (u + 1.0) * u * (u - 1.0) / 6.0;
        base[j] = b;
    }

    double acc = 0.0;
    const int total = 1 << (2 * N);
    for (int m = 0; m < total; ++m) {
        double wt = 1.0;
        Eigen::Index flat = 0;
        for (int j = 0; j < N; ++j) {
            const int o = (m >> (2 * (N - 1 - j))) & 3;
            wt *= w[j][o];
            flat = flat * grid.n[j] + (base[j] - 1 + o);
        }
        acc += wt * slice(flat);
    }
    return acc;
}

} // namespace hypou
