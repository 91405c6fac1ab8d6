#include "hypou/norms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hypou/errors.hpp"

namespace hypou {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double cell_volume(const SpaceTimeGrid& g) {
    double v = 1.0;
    for (int a = 0; a < g.dim(); ++a)
        v *= g.spacing(a);
    return v;
}

// Trapezoid weights for the time integral, folded with the optional g(t).
std::vector<double> time_weights(const SpaceTimeGrid& g, const TimeWeight& weight) {
    std::vector<double> w(g.nt + 1);
    for (int j = 0; j <= g.nt; ++j) {
        const double ends = (j == 0 || j == g.nt) ? 0.5 : 1.0;
        w[j] = ends * g.dt() * (weight ? weight(g.time(j)) : 1.0);
    }
    return w;
}

double sphere_area(int d) {
    return 2.0 * std::pow(M_PI, 0.5 * d) / std::tgamma(0.5 * d);
}

void check_p(double p, const char* who) {
    if (!(p > 1.0) || !std::isfinite(p))
        throw ExponentError(std::string(who) + ": p must lie in (1, inf)");
}

// Centered second difference along axes a, b of the core slice; NaN when the
// stencil leaves the sampled box.
double second_diff(const SpaceTimeGrid& g, Eigen::Ref<const Vec> s,
                   const std::vector<int>& idx, Eigen::Index flat, int a, int b) {
    if (idx[a] < 1 || idx[a] + 1 >= g.n[a] || idx[b] < 1 || idx[b] + 1 >= g.n[b])
        return kNan;
    const Eigen::Index sa = g.stride(a);
    const Eigen::Index sb = g.stride(b);
    if (a == b) {
        const double h = g.spacing(a);
        return (s(flat + sa) - 2.0 * s(flat) + s(flat - sa)) / (h * h);
    }
    const double num = s(flat + sa + sb) - s(flat + sa - sb) -
                       s(flat - sa + sb) + s(flat - sa - sb);
    return num / (4.0 * g.spacing(a) * g.spacing(b));
}

double first_diff(const SpaceTimeGrid& g, Eigen::Ref<const Vec> s,
                  const std::vector<int>& idx, Eigen::Index flat, int a) {
    if (idx[a] < 1 || idx[a] + 1 >= g.n[a])
        return kNan;
    return (s(flat + g.stride(a)) - s(flat - g.stride(a))) / (2.0 * g.spacing(a));
}

// One lattice offset of a block fiber with its kernel weight times the cell
// volume.
struct LatticeTerm {
    std::vector<int> m;
    double weight;
};

// Half-space lattice offsets (first nonzero component positive) of the block
// fiber within the radial cutoff.
std::vector<LatticeTerm> half_lattice(const std::vector<double>& h,
                                      const std::vector<int>& nmax, double cutoff,
                                      double kernel_pow, double cell,
                                      double inner_cutoff = 0.0) {
    const int d = static_cast<int>(h.size());
    std::vector<LatticeTerm> terms;
    std::vector<int> m(d);
    for (int a = 0; a < d; ++a)
        m[a] = -nmax[a];
    while (true) {
        int lead = 0;
        while (lead < d && m[lead] == 0)
            ++lead;
        if (lead < d && m[lead] > 0) {
            double r2 = 0.0;
            for (int a = 0; a < d; ++a)
                r2 += m[a] * h[a] * m[a] * h[a];
            const double r = std::sqrt(r2);
            if (r > inner_cutoff && r <= cutoff)
                terms.push_back({m, std::pow(r, -kernel_pow) * cell});
        }
        int a = d - 1;
        while (a >= 0 && m[a] == nmax[a]) {
            m[a] = -nmax[a];
            --a;
        }
        if (a < 0)
            break;
        ++m[a];
    }
    return terms;
}

double sup_inner(const Vec& s, const std::vector<Eigen::Index>& inner) {
    double best = 0.0;
    for (Eigen::Index flat : inner)
        if (!std::isnan(s(flat)))
            best = std::max(best, std::abs(s(flat)));
    return best;
}

// Largest difference quotient of s over pairs that differ only in block
// coordinates, stay inside the inner box and within a quarter of the block
// extent. midpoint switches to the three-point Zygmund quotient.
double block_quotient(const SpaceTimeGrid& g, const Vec& s, int off, int d,
                      double e, bool midpoint) {
    std::vector<double> h(d);
    std::vector<int> nmax(d);
    double cutoff = std::numeric_limits<double>::infinity();
    for (int a = 0; a < d; ++a) {
        h[a] = g.spacing(off + a);
        nmax[a] = g.n[off + a] - 1;
        cutoff = std::min(cutoff, 0.25 * (g.hi(off + a) - g.lo(off + a)));
    }
    if (midpoint)
        cutoff *= 0.5;
    const auto terms = half_lattice(h, nmax, cutoff, 0.0, 1.0);
    const auto inner = g.inner_indices();
    std::vector<int> idx(g.dim());
    double best = 0.0;
    for (Eigen::Index flat : inner) {
        if (std::isnan(s(flat)))
            continue;
        g.unravel(flat, idx);
        for (const auto& t : terms) {
            Eigen::Index part = flat;
            bool ok = true;
            double r2 = 0.0;
            for (int a = 0; a < d; ++a) {
                const int q = idx[off + a] + (midpoint ? 2 : 1) * t.m[a];
                if (q < 0 || q >= g.n[off + a]) {
                    ok = false;
                    break;
                }
                part += static_cast<Eigen::Index>((midpoint ? 2 : 1) * t.m[a]) *
                        g.stride(off + a);
                r2 += t.m[a] * h[a] * t.m[a] * h[a];
            }
            if (!ok || !g.is_inner(part) || std::isnan(s(part)))
                continue;
            double num;
            double dist;
            if (midpoint) {
                Eigen::Index mid = flat;
                for (int a = 0; a < d; ++a)
                    mid += static_cast<Eigen::Index>(t.m[a]) * g.stride(off + a);
                if (!g.is_inner(mid) || std::isnan(s(mid)))
                    continue;
                num = std::abs(s(part) + s(flat) - 2.0 * s(mid));
                dist = 2.0 * std::sqrt(r2);
            } else {
                num = std::abs(s(part) - s(flat));
                dist = std::sqrt(r2);
            }
            best = std::max(best, num / std::pow(dist, e));
        }
    }
    return best;
}

// Holder contribution of one block: derivative sups peel off the integer part
// of the exponent, the fractional remainder becomes a difference quotient and
// an exponent landing exactly on an integer becomes a midpoint quotient.
double block_part(const SpaceTimeGrid& g, const Vec& s, int off, int d, double e) {
    const double kIntTol = 1e-12;
    if (e < 1.0 - kIntTol)
        return block_quotient(g, s, off, d, e, false);
    if (std::abs(e - 1.0) <= kIntTol)
        return block_quotient(g, s, off, d, 1.0, true);

    const auto inner = g.inner_indices();
    std::vector<int> idx(g.dim());
    std::vector<Vec> d1(d);
    for (int a = 0; a < d; ++a) {
        d1[a] = Vec::Constant(g.space_points(), kNan);
        for (Eigen::Index flat = 0; flat < g.space_points(); ++flat) {
            g.unravel(flat, idx);
            d1[a](flat) = first_diff(g, s, idx, flat, off + a);
        }
    }
    double part = 0.0;
    for (int a = 0; a < d; ++a)
        part = std::max(part, sup_inner(d1[a], inner));

    if (e < 2.0 - kIntTol) {
        double q = 0.0;
        for (int a = 0; a < d; ++a)
            q = std::max(q, block_quotient(g, d1[a], off, d, e - 1.0, false));
        return part + q;
    }
    if (std::abs(e - 2.0) <= kIntTol) {
        double q = 0.0;
        for (int a = 0; a < d; ++a)
            q = std::max(q, block_quotient(g, d1[a], off, d, 1.0, true));
        return part + q;
    }

    double sup2 = 0.0;
    double q = 0.0;
    for (int a = 0; a < d; ++a)
        for (int b = a; b < d; ++b) {
            Vec d2 = Vec::Constant(g.space_points(), kNan);
            for (Eigen::Index flat = 0; flat < g.space_points(); ++flat) {
                g.unravel(flat, idx);
                d2(flat) = second_diff(g, s, idx, flat, off + a, off + b);
            }
            sup2 = std::max(sup2, sup_inner(d2, inner));
            q = std::max(q, block_quotient(g, d2, off, d, e - 2.0, false));
        }
    return part + sup2 + q;
}

} // namespace

TimeWeight flow_weight(const Mat& A) {
    const double tr = A.trace();
    return [tr](double t) { return std::exp(-t * tr); };
}

double lp_norm(const Field& u, double p, const TimeWeight& weight) {
    check_p(p, "lp_norm");
    const SpaceTimeGrid& g = u.grid;
    const double vol = cell_volume(g);
    const auto tw = time_weights(g, weight);
    const auto inner = g.inner_indices();
    double acc = 0.0;
    for (int j = 0; j <= g.nt; ++j) {
        double s = 0.0;
        for (Eigen::Index flat : inner)
            s += std::pow(std::abs(u.values(flat, j)), p);
        acc += tw[j] * vol * s;
    }
    return std::pow(acc, 1.0 / p);
}

double d2_block_seminorm(const Field& u, const BlockStructure& bs, double p,
                         const TimeWeight& weight) {
    check_p(p, "d2_block_seminorm");
    const SpaceTimeGrid& g = u.grid;
    if (bs.N != g.dim())
        throw DimensionError("d2_block_seminorm: block structure does not match the grid");
    const double vol = cell_volume(g);
    const auto tw = time_weights(g, weight);
    const auto inner = g.inner_indices();
    std::vector<int> idx(g.dim());
    double acc = 0.0;
    for (int j = 0; j <= g.nt; ++j) {
        double s = 0.0;
        for (Eigen::Index flat : inner) {
            g.unravel(flat, idx);
            double fro2 = 0.0;
            bool ok = true;
            for (int a = 0; a < bs.d0 && ok; ++a)
                for (int b = a; b < bs.d0; ++b) {
                    const double v = second_diff(g, u.values.col(j), idx, flat, a, b);
                    if (std::isnan(v)) {
                        ok = false;
                        break;
                    }
                    fro2 += (a == b ? 1.0 : 2.0) * v * v;
                }
            if (ok)
                s += std::pow(std::sqrt(fro2), p);
        }
        acc += tw[j] * vol * s;
    }
    return std::pow(acc, 1.0 / p);
}

Vec frac_laplacian(const SpaceTimeGrid& g, Eigen::Ref<const Vec> slice, int block,
                   double beta, const BlockStructure& bs) {
    if (!(beta > 0.0 && beta < 1.0))
        throw ExponentError("frac_laplacian: beta must lie in (0, 1)");
    if (bs.N != g.dim())
        throw DimensionError("frac_laplacian: block structure does not match the grid");
    if (block < 0 || block >= bs.block_count())
        throw StructureError("frac_laplacian: block index out of range", block);
    if (slice.size() != g.space_points())
        throw DimensionError("frac_laplacian: slice does not match the grid");

    const int off = bs.block_offset(block);
    const int d = bs.block_size(block);
    std::vector<double> h(d);
    std::vector<int> nn(d), nmax(d);
    std::vector<Eigen::Index> st(d);
    double cell = 1.0;
    double wcut = std::numeric_limits<double>::infinity();
    for (int a = 0; a < d; ++a) {
        h[a] = g.spacing(off + a);
        nn[a] = g.n[off + a];
        nmax[a] = nn[a] - 1;
        st[a] = g.stride(off + a);
        cell *= h[a];
        wcut = std::min(wcut, (nn[a] - 0.5) * h[a]);
    }

    const double kpow = d + 2.0 * beta;
    const double s_area = sphere_area(d);
    const double tail = s_area * std::pow(wcut, -2.0 * beta) / (2.0 * beta);

    // Inner region: the integrand is replaced by a Taylor surrogate around
    // each point. A univariate fiber takes the two-term expansion out to 2.5
    // cells with fourth-order differences, which keeps the midpoint sum away
    // from the kernel's strongest curvature; a multivariate fiber keeps the
    // central cell, exact over the inscribed ball and summed by midpoints
    // over the corner remainder.
    const double win = d == 1 ? std::min(2.5 * h[0], wcut) : 0.5 * h[0];
    const auto terms = half_lattice(h, nmax, wcut, kpow, cell, d == 1 ? win : 0.0);
    double m2 = 0.0;
    double m4 = 0.0;
    std::vector<double> c_axis(d, 0.0);
    if (d == 1) {
        m2 = std::pow(win, 2.0 - 2.0 * beta) / (2.0 - 2.0 * beta);
        m4 = std::pow(win, 4.0 - 2.0 * beta) / (4.0 - 2.0 * beta) / 12.0;
    } else {
        const double r0 = 0.5 * *std::min_element(h.begin(), h.end());
        const double ball =
            s_area / d * std::pow(r0, 2.0 - 2.0 * beta) / (2.0 - 2.0 * beta);
        c_axis.assign(d, ball);
        const int sub = d == 2 ? 32 : (d == 3 ? 12 : 6);
        std::vector<int> m(d, 0);
        std::vector<double> w(d);
        double subvol = 1.0;
        for (int a = 0; a < d; ++a)
            subvol *= h[a] / sub;
        while (true) {
            double r2 = 0.0;
            for (int a = 0; a < d; ++a) {
                w[a] = (m[a] + 0.5) / sub * h[a] - 0.5 * h[a];
                r2 += w[a] * w[a];
            }
            if (r2 > r0 * r0) {
                const double k = std::pow(std::sqrt(r2), -kpow) * subvol;
                for (int a = 0; a < d; ++a)
                    c_axis[a] += w[a] * w[a] * k;
            }
            int a = d - 1;
            while (a >= 0 && m[a] == sub - 1)
                m[a--] = 0;
            if (a < 0)
                break;
            ++m[a];
        }
    }

    Vec out(g.space_points());
    std::vector<int> idx(g.dim());
    for (Eigen::Index flat = 0; flat < g.space_points(); ++flat) {
        g.unravel(flat, idx);
        const double s0 = slice(flat);
        double val = -s0 * tail;
        if (d == 1) {
            const int i0 = idx[off];
            auto rd = [&](int dm) {
                const int q = i0 + dm;
                return q >= 0 && q < nn[0] ? slice(flat + dm * st[0]) : 0.0;
            };
            const double h2 = h[0] * h[0];
            const double um2 = rd(-2), um1 = rd(-1), up1 = rd(1), up2 = rd(2);
            const double du2 =
                (-up2 + 16.0 * up1 - 30.0 * s0 + 16.0 * um1 - um2) / (12.0 * h2);
            const double du4 = (up2 - 4.0 * up1 + 6.0 * s0 - 4.0 * um1 + um2) / (h2 * h2);
            val += du2 * m2 + du4 * m4;
        } else {
            for (int a = 0; a < d; ++a) {
                const double up = idx[off + a] + 1 < nn[a] ? slice(flat + st[a]) : 0.0;
                const double dn = idx[off + a] - 1 >= 0 ? slice(flat - st[a]) : 0.0;
                val += 0.5 * c_axis[a] * (up - 2.0 * s0 + dn) / (h[a] * h[a]);
            }
        }
        for (const auto& t : terms) {
            double pair = -2.0 * s0;
            for (int sgn : {1, -1}) {
                Eigen::Index f = flat;
                bool in = true;
                for (int a = 0; a < d; ++a) {
                    const int q = idx[off + a] + sgn * t.m[a];
                    if (q < 0 || q >= nn[a]) {
                        in = false;
                        break;
                    }
                    f += static_cast<Eigen::Index>(sgn) * t.m[a] * st[a];
                }
                if (in)
                    pair += slice(f);
            }
            val += pair * t.weight;
        }
        out(flat) = val;
    }
    return out;
}

NormReport sobolev_seminorm(const Field& u, const BlockStructure& bs, double p,
                            const TimeWeight& weight) {
    check_p(p, "sobolev_seminorm");
    const SpaceTimeGrid& g = u.grid;
    if (bs.N != g.dim())
        throw DimensionError("sobolev_seminorm: block structure does not match the grid");
    const double vol = cell_volume(g);
    const auto tw = time_weights(g, weight);
    const auto inner = g.inner_indices();
    std::vector<int> idx(g.dim());

    NormReport report;
    report.kind = "sobolev_aniso";
    report.exponent = p;
    report.weight = weight ? "custom" : "unweighted";
    report.provenance = u.provenance;

    double acc_dx = 0.0;
    for (int j = 0; j <= g.nt; ++j) {
        double s = 0.0;
        for (Eigen::Index flat : inner) {
            g.unravel(flat, idx);
            double lap = 0.0;
            bool ok = true;
            for (int a = 0; a < bs.d0; ++a) {
                const double v = second_diff(g, u.values.col(j), idx, flat, a, a);
                if (std::isnan(v)) {
                    ok = false;
                    break;
                }
                lap += v;
            }
            if (ok)
                s += std::pow(std::abs(lap), p);
        }
        acc_dx += tw[j] * vol * s;
    }
    report.components.emplace_back("dx", std::pow(acc_dx, 1.0 / p));

    for (int i = 1; i <= bs.k(); ++i) {
        double acc = 0.0;
        for (int j = 0; j <= g.nt; ++j) {
            const Vec fr = frac_laplacian(g, u.values.col(j), i, bs.alphas[i - 1], bs);
            double s = 0.0;
            for (Eigen::Index flat : inner)
                s += std::pow(std::abs(fr(flat)), p);
            acc += tw[j] * vol * s;
        }
        report.components.emplace_back("y" + std::to_string(i), std::pow(acc, 1.0 / p));
    }

    double total = 0.0;
    for (const auto& [name, value] : report.components)
        total += std::pow(value, p);
    report.value = std::pow(total, 1.0 / p);
    return report;
}

NormReport holder_norm(const Field& u, int it, double gamma, const BlockStructure& bs) {
    if (!(gamma > 0.0 && gamma < 3.0))
        throw ExponentError("holder_norm: gamma must lie in (0, 3)");
    const SpaceTimeGrid& g = u.grid;
    if (bs.N != g.dim())
        throw DimensionError("holder_norm: block structure does not match the grid");
    if (it < 0 || it > g.nt)
        throw std::invalid_argument("holder_norm: slice index out of range");

    const Vec s = u.values.col(it);
    const auto inner = g.inner_indices();

    NormReport report;
    report.kind = "holder_aniso";
    report.exponent = gamma;
    report.provenance = u.provenance;

    double value = sup_inner(s, inner);
    report.components.emplace_back("sup", value);
    for (int i = 0; i < bs.block_count(); ++i) {
        const double e = gamma / (1.0 + 2.0 * i);
        const double part = block_part(g, s, bs.block_offset(i), bs.block_size(i), e);
        report.components.emplace_back(i == 0 ? "x" : "y" + std::to_string(i), part);
        value += part;
    }
    report.value = value;
    return report;
}

} // namespace hypou
