#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "hypou/grid.hpp"
#include "hypou/structure.hpp"

namespace hypou {

// Optional time weight g(t) multiplying the slice measure; an empty function
// means g == 1.
using TimeWeight = std::function<double(double)>;

/// Weight of the drift-adapted space-time measure det(e^{-At}) dt dz. Equals
/// exp(-t tr A), so trace-free drifts leave the measure unweighted.
TimeWeight flow_weight(const Mat& A);

/// One evaluated norm with its per-part breakdown, ready for serialization.
struct NormReport {
    std::string kind;
    double exponent = 0.0; // p for integral norms, gamma for Holder
    double value = 0.0;
    std::vector<std::pair<std::string, double>> components;
    std::string weight = "unweighted";
    std::string provenance;
};

/// ( int_0^T g(t) int |u|^p dz dt )^{1/p}. Trapezoid rule across the time
/// slices, lattice cell sum over the inner box in space. p must lie in
/// (1, inf).
double lp_norm(const Field& u, double p, const TimeWeight& weight = {});

/// L^p norm, in the same measure as lp_norm, of the Frobenius magnitude of
/// the Hessian restricted to the core block, by centered second differences.
/// Points whose stencil leaves the sampled box contribute zero, so the inner
/// box should keep at least one cell of margin.
double d2_block_seminorm(const Field& u, const BlockStructure& bs, double p,
                         const TimeWeight& weight = {});

/// Fractional Laplacian of one spatial slice along degenerate block i, with
/// the bare kernel |w|^{-(d_i + 2 beta)} and no normalizing constant. The
/// principal-value integral splits into a Taylor surrogate over the inner
/// cells, a (w, -w) paired lattice sum with the slice extended by zero
/// outside the box, and an analytic far tail. beta must lie in (0, 1).
Vec frac_laplacian(const SpaceTimeGrid& grid, Eigen::Ref<const Vec> slice, int block,
                   double beta, const BlockStructure& bs);

/// ( ||Delta_x u||_p^p + sum_i ||Delta^{alpha_i}_{y_i} u||_p^p )^{1/p} with
/// alpha_i = 1/(1+2i). Delta_x is the ordinary Laplacian over the core
/// block; each degenerate block contributes the L^p norm of its fractional
/// Laplacian. Components are listed as "dx", "y1", ..., "yk".
NormReport sobolev_seminorm(const Field& u, const BlockStructure& bs, double p,
                            const TimeWeight& weight = {});

/// Anisotropic Zygmund-Holder norm of the time slice it. Block i carries the
/// exponent gamma/(1+2i); an exponent in (0,1) uses the difference quotient,
/// exactly 1 the midpoint quotient, and larger ones peel off derivative sups
/// until the fractional remainder is reached. Difference pairs stay inside
/// the inner box and within a quarter of the block extent, so the result is
/// a certified lower bound of the continuum norm. gamma must lie in (0, 3).
NormReport holder_norm(const Field& u, int it, double gamma, const BlockStructure& bs);

} // namespace hypou
