#ifndef HENONLAB_GREEN_HPP
#define HENONLAB_GREEN_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "henon.hpp"
#include "types.hpp"

namespace henonlab {
namespace green {

enum class GreenStatus { converged, classified_zero, budget_exhausted };

struct GreenValue {
    double value = 0.0;
    int iterations_used = 0;
    GreenStatus status = GreenStatus::classified_zero;
};

inline constexpr double kDefaultTol = 1e-10;
inline constexpr int kDefaultMaxIter = 400;

// Smallest R >= 1 such that for |x| >= |y| and |x| > R each factor multiplies
// the dominant coordinate by at least 2 max(1,|a|), keeping the orbit inside
// the escape sector.  Derived from the triangle inequality on |p(x) + a y|.
inline double escape_radius(const HenonComposition& f) {
    double R = 1.0;
    for (const auto& fac : f.factors) {
        double lead = std::abs(fac.p_coeffs.back());
        double amod = std::abs(fac.a);
        int deg = fac.degree();
        auto margin = [&](double t) {
            double low = 0.0;
            double tk = 1.0;
            for (int k = 0; k < deg; ++k) {
                low += std::abs(fac.p_coeffs[k]) * tk;
                tk *= t;
            }
            // lead * t^deg - sum_{k<deg} |c_k| t^k - |a| t >= 2 max(1,|a|) t
            return lead * tk - low - amod * t - 2.0 * std::max(1.0, amod) * t;
        };
        double hi = 1.0;
        while (margin(hi) < 0.0 && hi < 1e150) hi *= 2.0;
        double lo = hi * 0.5;
        if (margin(lo) >= 0.0) lo = 0.0;
        for (int it = 0; it < 80; ++it) {
            double mid = 0.5 * (lo + hi);
            (margin(mid) >= 0.0 ? hi : lo) = mid;
        }
        R = std::max(R, hi);
    }
    return R;
}

namespace detail {

// Point in log-scaled form: x = ux * exp(lx) with |ux| = 1, likewise y.
struct ScaledPoint {
    cplx ux{1.0};
    double lx = 0.0;
    cplx uy{1.0};
    double ly = 0.0;
};

inline ScaledPoint to_scaled(const ComplexPoint& z) {
    ScaledPoint s;
    double ax = std::abs(z.x), ay = std::abs(z.y);
    s.lx = std::log(ax);
    s.ux = z.x / ax;
    if (ay > 0.0) {
        s.ly = std::log(ay);
        s.uy = z.y / ay;
    } else {
        s.ly = -1e308;
        s.uy = 1.0;
    }
    return s;
}

// Applies one Henon factor in scaled form; valid in the sector lx >= ly,
// lx >= log R where the leading monomial dominates.
inline ScaledPoint apply_factor_scaled(const HenonFactor& f, const ScaledPoint& z) {
    int deg = f.degree();
    // q(w) = c_d + c_{d-1} w + ... + c_0 w^deg evaluated at w = 1/x.
    cplx w = (z.lx < 700.0) ? std::conj(z.ux) * std::exp(-z.lx) : cplx(0.0);
    cplx q{0.0};
    for (int k = 0; k <= deg; ++k) q = q * w + f.p_coeffs[k];
    // a y / x^deg, representable because ly - deg*lx is very negative.
    double e = z.ly - double(deg) * z.lx;
    cplx cross = (e > -700.0) ? f.a * z.uy * std::pow(std::conj(z.ux), deg) * std::exp(e)
                              : cplx(0.0);
    cplx t = q + cross;  // X = x^deg * t
    ScaledPoint out;
    double at = std::abs(t);
    out.lx = double(deg) * z.lx + std::log(at);
    cplx u = std::pow(z.ux, deg) * (t / at);
    out.ux = u / std::abs(u);  // renormalize drift
    out.ly = z.lx + std::log(std::abs(f.a));
    out.uy = z.ux * (f.a / std::abs(f.a));
    return out;
}

}  // namespace detail

// Green function G^+(z) = lim d^-n log^+ ||f^n(z)|| with the max norm.
// Phase 1 iterates in plain doubles until the orbit enters the escape sector
// {|x| >= |y|, |x| > R}; phase 2 continues in log-scaled form, so the estimate
// is refined far beyond double overflow and converges geometrically.
inline GreenValue green_plus(const HenonComposition& f, const ComplexPoint& z,
                             double tol = kDefaultTol, int max_iter = kDefaultMaxIter,
                             double R = -1.0) {
    if (tol <= 0.0) throw std::invalid_argument("green_plus needs tol > 0");
    if (R <= 0.0) R = escape_radius(f);
    double d = double(f.dynamical_degree());
    GreenValue out;

    ComplexPoint w = z;
    int n = 0;
    bool escaped = false;
    while (n < max_iter) {
        if (std::abs(w.x) >= std::abs(w.y) && std::abs(w.x) > R) {
            escaped = true;
            break;
        }
        if (sup_norm(w) > 1e60) {
            // Huge |y|: one more plain step lands in the escape sector.
            try {
                w = f.apply(w);
            } catch (const NumericalEscape&) {
                out.status = GreenStatus::budget_exhausted;
                out.iterations_used = n;
                return out;
            }
            ++n;
            if (std::abs(w.x) >= std::abs(w.y) && std::abs(w.x) > R) {
                escaped = true;
                break;
            }
            out.status = GreenStatus::budget_exhausted;
            out.iterations_used = n;
            return out;
        }
        try {
            w = f.apply(w);
        } catch (const NumericalEscape&) {
            out.status = GreenStatus::budget_exhausted;
            out.iterations_used = n;
            return out;
        }
        ++n;
    }
    if (!escaped) {
        out.status = GreenStatus::classified_zero;
        out.value = 0.0;
        out.iterations_used = n;
        return out;
    }

    detail::ScaledPoint s = detail::to_scaled(w);
    double scale = std::pow(d, -double(n));
    double g = scale * s.lx;
    for (int k = 0; k < max_iter; ++k) {
        for (const auto& fac : f.factors) s = detail::apply_factor_scaled(fac, s);
        ++n;
        scale /= d;
        double g_next = scale * s.lx;
        double delta = std::abs(g_next - g);
        g = g_next;
        if (delta < tol) {
            out.status = GreenStatus::converged;
            out.value = std::max(0.0, g);
            out.iterations_used = n;
            return out;
        }
    }
    out.status = GreenStatus::budget_exhausted;
    out.value = std::max(0.0, g);
    out.iterations_used = n;
    return out;
}

// G^- via the swap-conjugated inverse normal form: G^-_f(z) = G^+_g(s(z)).
inline GreenValue green_minus(const HenonComposition& f, const ComplexPoint& z,
                              double tol = kDefaultTol, int max_iter = kDefaultMaxIter,
                              double R = -1.0) {
    HenonComposition g = inverse_normal_form(f);
    return green_plus(g, swap_coords(z), tol, max_iter, R > 0.0 ? R : escape_radius(g));
}

enum class PointClass { K, K_plus_only, K_minus_only, escaping_both };

struct Classification {
    PointClass cls = PointClass::K;
    GreenValue plus, minus;
    bool budget_flag = false;  // some side hit the iteration budget
};

// Resolution floor: a converged Green value below this is treated as zero in
// joint classification.  A point of K known only to double precision escapes
// once round-off is amplified past the filtration radius; with a strongly
// contracting multiplier the spurious backward value reaches d^-n0 for n0 as
// small as ~10 steps, i.e. order 1e-3.  Points with a true Green value below
// this floor are not resolvable in double precision.
inline constexpr double kZeroFloor = 1e-2;

// Per-map floor: a point known to relative precision eps leaves an invariant
// set after about n0 = ln(1/eps)/ln(rate) steps when errors are amplified by
// `rate` per step, leaving a spurious Green value of order d^-n0.  Strongly
// contracting maps (rate >> 1) therefore need a floor well above kZeroFloor.
inline double resolution_floor(double rate_per_step, double degree, double magnitude = 1.0,
                               double eps = 1e-15) {
    if (rate_per_step <= 1.0 || degree <= 1.0) return kZeroFloor;
    double n0 = std::log(1.0 / eps) / std::log(rate_per_step);
    double scale = 10.0 + std::log(std::max(1.0, magnitude));
    return std::min(1.0, std::max(kZeroFloor, scale * std::pow(degree, -n0)));
}

inline Classification classify_point(const HenonComposition& f, const ComplexPoint& z,
                                     int max_iter = kDefaultMaxIter,
                                     double zero_floor = kZeroFloor) {
    Classification c;
    c.plus = green_plus(f, z, kDefaultTol, max_iter);
    c.minus = green_minus(f, z, kDefaultTol, max_iter);
    bool fwd_bounded = c.plus.status != GreenStatus::converged || c.plus.value < zero_floor;
    bool bwd_bounded = c.minus.status != GreenStatus::converged || c.minus.value < zero_floor;
    c.budget_flag = c.plus.status == GreenStatus::budget_exhausted ||
                    c.minus.status == GreenStatus::budget_exhausted;
    if (fwd_bounded && bwd_bounded)
        c.cls = PointClass::K;
    else if (fwd_bounded)
        c.cls = PointClass::K_plus_only;
    else if (bwd_bounded)
        c.cls = PointClass::K_minus_only;
    else
        c.cls = PointClass::escaping_both;
    return c;
}

inline const char* to_string(PointClass c) {
    switch (c) {
        case PointClass::K: return "K";
        case PointClass::K_plus_only: return "K+only";
        case PointClass::K_minus_only: return "K-only";
        default: return "escaping-both";
    }
}

inline const char* to_string(GreenStatus s) {
    switch (s) {
        case GreenStatus::converged: return "converged";
        case GreenStatus::classified_zero: return "classified_zero";
        default: return "budget_exhausted";
    }
}

}  // namespace green
}  // namespace henonlab

#endif
