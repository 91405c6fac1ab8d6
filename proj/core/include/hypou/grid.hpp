#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hypou/linalg.hpp"

namespace hypou {

// Uniform lattice on [0,T] x box. Spatial axes are endpoint exclusive: axis j
// holds n_j points lo_j + i*h_j with h_j = (hi_j - lo_j)/n_j, so the lattice
// is compatible with periodic transforms. Fields are computed on the whole
// box; norms and residuals only trust the inner box.
struct SpaceTimeGrid {
    double T = 1.0;
    int nt = 2;
    Vec lo;
    Vec hi;
    std::vector<int> n;
    Vec inner_lo;
    Vec inner_hi;

    // inner box defaults to the full box
    static SpaceTimeGrid uniform(double T, int nt, const Vec& lo, const Vec& hi,
                                 const std::vector<int>& n);
    // margin shrinks the inner box by the given amount per axis
    static SpaceTimeGrid uniform(double T, int nt, const Vec& lo, const Vec& hi,
                                 const std::vector<int>& n, const Vec& margin);

    int dim() const { return static_cast<int>(n.size()); }
    double dt() const { return T / nt; }
    double spacing(int axis) const { return (hi(axis) - lo(axis)) / n[axis]; }
    double time(int it) const { return T * it / nt; }

    Eigen::Index space_points() const;
    Vec axis(int j) const;
    Eigen::Index stride(int j) const;
    Eigen::Index ravel(const std::vector<int>& idx) const;
    void unravel(Eigen::Index flat, std::vector<int>& idx) const;
    Vec point(Eigen::Index flat) const;
    Mat points() const; // space_points x dim

    bool is_inner(Eigen::Index flat) const;
    std::vector<Eigen::Index> inner_indices() const;
};

// Space-time sample of a solution. Column it of values is the spatial slice
// at time(it); the t=0 slice is identically zero for every problem in scope.
struct Field {
    SpaceTimeGrid grid;
    Mat values; // space_points x (nt+1)
    std::string provenance;
    std::uint64_t seed = 0;
    Mat standard_error; // same shape as values when filled by the MC solver

    static Field zero(const SpaceTimeGrid& grid, std::string provenance = {},
                      std::uint64_t seed = 0);

    int slices() const { return grid.nt + 1; }
    double at(int it, Eigen::Index flat) const { return values(flat, it); }
    double sup_abs() const;
    bool has_standard_error() const { return standard_error.size() != 0; }
};

// Cubic Lagrange interpolation of one spatial slice. The 4-point stencil per
// axis must fit inside the lattice; points outside the sampled box raise
// CoverageError.
double interp_cubic(const SpaceTimeGrid& grid, Eigen::Ref<const Vec> slice, const Vec& z);

} // namespace hypou
