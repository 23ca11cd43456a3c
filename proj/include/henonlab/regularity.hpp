#ifndef HENONLAB_REGULARITY_HPP
#define HENONLAB_REGULARITY_HPP

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "family.hpp"
#include "green.hpp"
#include "manifold.hpp"
#include "periodic.hpp"

namespace henonlab {
namespace regularity {

inline constexpr double kThetaTangent = 1e-3;
inline constexpr double kDeltaDistinct = 1e-6;
inline constexpr double kEpsExposed = 1e-8;

// Angle in [0, pi/2] between the complex lines spanned by a and b.
inline double line_angle(const ComplexPoint& a, const ComplexPoint& b) {
    double na = euclid_norm(a), nb = euclid_norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    double c = std::abs(hermitian_dot(a, b)) / (na * nb);
    return std::acos(std::clamp(c, 0.0, 1.0));
}

namespace detail {

// Largest |zeta| whose image circle stays within ambient distance r_amb of the
// base point; extends past rho_cert through the dynamical extension.
inline double ambient_zeta_radius(const manifold::LocalManifold& m, double r_amb,
                                  int n_angles = 16) {
    auto reach = [&](double t) {
        double worst = 0.0;
        for (int a = 0; a < n_angles; ++a) {
            try {
                auto e = manifold::evaluate(m, t * std::polar(1.0, 2.0 * M_PI * a / n_angles));
                worst = std::max(worst, sup_norm(e.z - m.p));
            } catch (...) {
                return 1e300;
            }
        }
        return worst;
    };
    double hi = m.rho_cert > 0.0 ? m.rho_cert : 1.0;
    int grow = 0;
    while (reach(hi) <= r_amb && grow++ < 60) hi *= 2.0;
    if (grow > 60) return hi;
    double lo = 0.0;
    for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        (reach(mid) <= r_amb ? lo : hi) = mid;
    }
    return lo;
}

inline std::vector<ComplexPoint> sample_ambient(const manifold::LocalManifold& m, double r_amb,
                                                int n_rings = 8, int n_angles = 24) {
    double t = ambient_zeta_radius(m, r_amb);
    std::vector<ComplexPoint> out;
    out.push_back(m.p);
    for (int j = 1; j <= n_rings; ++j)
        for (int a = 0; a < n_angles; ++a)
            out.push_back(
                manifold::evaluate(m, t * j / n_rings *
                                          std::polar(1.0, 2.0 * M_PI * a / n_angles)).z);
    return out;
}

inline double hausdorff(const std::vector<ComplexPoint>& A, const std::vector<ComplexPoint>& B) {
    auto one_sided = [](const std::vector<ComplexPoint>& X, const std::vector<ComplexPoint>& Y) {
        double worst = 0.0;
        for (const auto& x : X) {
            double best = 1e300;
            for (const auto& y : Y) best = std::min(best, sup_norm(x - y));
            worst = std::max(worst, best);
        }
        return worst;
    };
    return std::max(one_sided(A, B), one_sided(B, A));
}

}  // namespace detail

// ---- intersections ---------------------------------------------------------

struct IntersectionPoint {
    std::string id_u, id_s;   // saddle orbit ids
    cplx zeta{0.0}, xi{0.0};  // intrinsic parameters on W^u resp. W^s
    ComplexPoint point;
    double theta = 0.0;  // transversality angle in [0, pi/2]
    double residual = 0.0;
    bool tangency = false;  // theta below theta_tangent
};

struct SearchOptions {
    double scale_u = 0.0, scale_s = 0.0;  // search radii; 0 = auto from the escape radius
    int n_radii = 6, n_angles = 8;        // geometric seed grid per manifold
    double tol = 1e-10;
    int max_iter = 60;
    double dedup = 1e-7;
    double theta_tangent = kThetaTangent;
    double domain_cap = 2.0;  // abandon iterates beyond cap * scale
};

namespace detail {

// Newton on psi_u(zeta) - psi_s(xi) = 0 from one seed.
inline std::optional<IntersectionPoint> newton_intersection(
    const manifold::LocalManifold& mu, const manifold::LocalManifold& ms, cplx zeta, cplx xi,
    double cap_u, double cap_s, const SearchOptions& opts) {
    for (int it = 0; it < opts.max_iter; ++it) {
        if (std::abs(zeta) > cap_u || std::abs(xi) > cap_s) return std::nullopt;
        manifold::ManifoldEval eu, es;
        try {
            eu = manifold::evaluate(mu, zeta);
            es = manifold::evaluate(ms, xi);
        } catch (const std::domain_error&) {
            return std::nullopt;
        } catch (const NumericalEscape&) {
            return std::nullopt;
        }
        ComplexPoint F = eu.z - es.z;
        double scale = std::max(1.0, std::max(sup_norm(eu.z), sup_norm(es.z)));
        if (sup_norm(F) < opts.tol * scale) {
            IntersectionPoint out;
            out.id_u = mu.orbit_id;
            out.id_s = ms.orbit_id;
            out.zeta = zeta;
            out.xi = xi;
            out.point = eu.z;
            out.residual = sup_norm(F);
            out.theta = line_angle(eu.dz, es.dz);
            out.tangency = out.theta < opts.theta_tangent;
            return out;
        }
        ComplexMatrix2 J{eu.dz.x, -es.dz.x, eu.dz.y, -es.dz.y};
        ComplexPoint step;
        try {
            step = solve2x2(J, {-F.x, -F.y});
        } catch (const std::domain_error&) {
            return std::nullopt;
        }
        zeta += step.x;
        xi += step.y;
    }
    return std::nullopt;
}

}  // namespace detail

// Polishes one candidate (zeta, xi); used for equivariance checks too.
inline std::optional<IntersectionPoint> polish_intersection(const manifold::LocalManifold& mu,
                                                            const manifold::LocalManifold& ms,
                                                            cplx zeta, cplx xi,
                                                            const SearchOptions& opts = {}) {
    double su = opts.scale_u > 0.0 ? opts.scale_u : mu.rho_cert;
    double ss = opts.scale_s > 0.0 ? opts.scale_s : ms.rho_cert;
    double cap_u = std::max(opts.domain_cap * su, 2.0 * std::abs(zeta));
    double cap_s = std::max(opts.domain_cap * ss, 2.0 * std::abs(xi));
    return detail::newton_intersection(mu, ms, zeta, xi, cap_u, cap_s, opts);
}

// Grid-seeded Newton search for W^u(p) meeting W^s(q).  The trivial root
// zeta = xi = 0 of a homoclinic search (same base point) is filtered out.
inline std::vector<IntersectionPoint> find_intersections(const manifold::LocalManifold& mu,
                                                         const manifold::LocalManifold& ms,
                                                         const SearchOptions& opts = {}) {
    if (mu.branch != manifold::Branch::unstable || ms.branch != manifold::Branch::stable)
        throw std::invalid_argument("find_intersections wants an unstable and a stable manifold");
    // Default scale: far enough along each manifold to sweep the whole
    // filtration region, regardless of how small rho_cert happens to be.
    // Returning pieces carry intrinsic parameters of order 1/|mu|^n, so keep
    // at least the series radius as well.
    double reach = 2.0 * green::escape_radius(mu.f);
    double su = opts.scale_u > 0.0
                    ? opts.scale_u
                    : std::max(mu.rho_cert, detail::ambient_zeta_radius(mu, reach));
    double ss = opts.scale_s > 0.0
                    ? opts.scale_s
                    : std::max(ms.rho_cert, detail::ambient_zeta_radius(ms, reach));
    if (su <= 0.0 || ss <= 0.0) throw std::invalid_argument("search scales must be positive");
    bool same_base = sup_norm(mu.p - ms.p) < 1e-12;

    std::vector<IntersectionPoint> found;
    auto keep = [&](const IntersectionPoint& pt) {
        if (same_base && std::abs(pt.zeta) < 1e-8 * su && std::abs(pt.xi) < 1e-8 * ss)
            return;  // the shared base point is not an intersection point
        for (const auto& q : found)
            if (std::abs(q.zeta - pt.zeta) < opts.dedup * std::max(1.0, su) &&
                std::abs(q.xi - pt.xi) < opts.dedup * std::max(1.0, ss))
                return;
        found.push_back(pt);
    };

    for (int ju = 0; ju < opts.n_radii; ++ju)
        for (int au = 0; au < opts.n_angles; ++au)
            for (int js = 0; js < opts.n_radii; ++js)
                for (int as = 0; as < opts.n_angles; ++as) {
                    cplx z0 = su * std::pow(0.5, ju) *
                              std::polar(1.0, 2.0 * M_PI * au / opts.n_angles);
                    cplx x0 = ss * std::pow(0.5, js) *
                              std::polar(1.0, 2.0 * M_PI * as / opts.n_angles);
                    auto pt = detail::newton_intersection(mu, ms, z0, x0, opts.domain_cap * su,
                                                         opts.domain_cap * ss, opts);
                    if (pt) keep(*pt);
                }
    std::sort(found.begin(), found.end(), [](const IntersectionPoint& a,
                                             const IntersectionPoint& b) {
        return std::abs(a.zeta) < std::abs(b.zeta);
    });
    return found;
}

// ---- exposure --------------------------------------------------------------

struct ExposureReport {
    double g = 0.0;  // sup of sampled opposite-side Green values
    bool exposed = false;
    bool undecided = false;
    int samples = 0;
};

// Exposure of a local manifold: W^s sits in K+, so the informative function is
// G- (and G+ for W^u).  g = max over samples of psi(D(0, region)).
inline ExposureReport exposure(const HenonComposition& f, const manifold::LocalManifold& m,
                               double region, double eps_exposed = kEpsExposed,
                               int n_radii = 8, int n_angles = 16,
                               int max_iter = green::kDefaultMaxIter) {
    if (region <= 0.0) throw std::invalid_argument("exposure region must be positive");
    ExposureReport rep;
    bool any = false;
    for (int j = 1; j <= n_radii; ++j)
        for (int a = 0; a < n_angles; ++a) {
            cplx zeta = region * j / n_radii * std::polar(1.0, 2.0 * M_PI * a / n_angles);
            ComplexPoint z;
            try {
                z = manifold::evaluate(m, zeta).z;
            } catch (const std::domain_error&) {
                continue;
            } catch (const NumericalEscape&) {
                continue;
            }
            green::GreenValue v = m.branch == manifold::Branch::unstable
                                      ? green::green_plus(f, z, green::kDefaultTol, max_iter)
                                      : green::green_minus(f, z, green::kDefaultTol, max_iter);
            ++rep.samples;
            if (v.status == green::GreenStatus::budget_exhausted) continue;
            any = true;
            if (v.status == green::GreenStatus::converged) rep.g = std::max(rep.g, v.value);
        }
    rep.undecided = !any;
    rep.exposed = any && rep.g > eps_exposed;
    return rep;
}

// ---- saddle atlas ----------------------------------------------------------

// A saddle together with both parameterized local manifolds and their
// certified bounded-geometry sizes.
struct CertifiedSaddle {
    periodic::PeriodicOrbit orbit;
    manifold::LocalManifold wu, ws;
};

inline std::vector<CertifiedSaddle> build_atlas(const HenonComposition& f,
                                                const std::vector<periodic::PeriodicOrbit>& orbits,
                                                int M = manifold::kDefaultOrder,
                                                const manifold::CertifyOptions& copts = {},
                                                int jobs = 1) {
    std::vector<const periodic::PeriodicOrbit*> saddles;
    for (const auto& o : orbits)
        if (o.type == periodic::OrbitType::saddle && !o.defective) saddles.push_back(&o);
    std::vector<CertifiedSaddle> atlas(saddles.size());
    auto work = [&](std::size_t begin, std::size_t stride) {
        for (std::size_t i = begin; i < saddles.size(); i += stride) {
            atlas[i].orbit = *saddles[i];
            atlas[i].wu = manifold::parameterize(f, *saddles[i], manifold::Branch::unstable, M);
            atlas[i].ws = manifold::parameterize(f, *saddles[i], manifold::Branch::stable, M);
            manifold::max_certified_size(atlas[i].wu, 0.0, copts);
            manifold::max_certified_size(atlas[i].ws, 0.0, copts);
        }
    };
    if (jobs <= 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(work, std::size_t(t), std::size_t(jobs));
        for (auto& th : pool) th.join();
    }
    return atlas;
}

// ---- regular-point certificates --------------------------------------------

enum class Direction { stable, unstable, both };

struct Witness {
    std::string orbit_id;
    double distance = 0.0;
    double size = 0.0;
};

struct RegularityCertificate {
    ComplexPoint p;
    Direction direction = Direction::both;
    double r = 0.0;
    std::vector<Witness> witnesses;
    double exposure_g = 0.0;
    bool transverse = false;
    double angle = 0.0;      // angle between limit tangent directions (direction both)
    double hausdorff = 0.0;  // distance between the two limit graphs (direction both)
    bool pass = false;
    std::string note;
};

// Operationalizes "a sequence of saddles converging to p": k witnesses at
// geometrically decreasing distances (factor <= 1/2), each certified at
// bounded-geometry scale >= r.
inline RegularityCertificate certify_regular(const HenonComposition& f, const ComplexPoint& p,
                                             const std::vector<CertifiedSaddle>& atlas, double r,
                                             int k = 3, Direction dir = Direction::both,
                                             double delta_distinct = kDeltaDistinct) {
    if (r <= 0.0) throw std::invalid_argument("scale must be positive");
    RegularityCertificate cert;
    cert.p = p;
    cert.direction = dir;
    cert.r = r;

    auto size_of = [&](const CertifiedSaddle& s) {
        switch (dir) {
            case Direction::unstable: return s.wu.r_cert;
            case Direction::stable: return s.ws.r_cert;
            default: return std::min(s.wu.r_cert, s.ws.r_cert);
        }
    };
    std::vector<std::pair<double, const CertifiedSaddle*>> cand;
    for (const auto& s : atlas) {
        double d = 1e300;
        for (const auto& q : s.orbit.points) d = std::min(d, sup_norm(q - p));
        cand.push_back({d, &s});
    }
    std::sort(cand.begin(), cand.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    if (cand.empty() || cand.front().first > r) {
        cert.note = "no witness saddle within radius " + std::to_string(r);
        return cert;
    }

    const CertifiedSaddle* nearest = cand.front().second;
    if (cand.front().first < 1e-9) {
        // p is itself a saddle point: the constant sequence witnesses it.
        if (size_of(*nearest) < r) {
            cert.note = "saddle at p has certified size below r";
            return cert;
        }
        for (int j = 0; j < k; ++j) cert.witnesses.push_back({nearest->orbit.id, 0.0, size_of(*nearest)});
    } else {
        double limit = r;
        for (int j = 0; j < k; ++j) {
            // Take the farthest admissible witness so the factor-1/2 chain can
            // descend through as many shells as the atlas supports.
            const CertifiedSaddle* pick = nullptr;
            double best = -1.0;
            for (const auto& [d, s] : cand) {
                if (d > limit) break;
                if (size_of(*s) < r) continue;
                bool used = false;
                for (const auto& w : cert.witnesses) used |= w.orbit_id == s->orbit.id && w.distance == d;
                if (used) continue;
                if (d > best) { best = d; pick = s; }
            }
            if (!pick) {
                cert.note = "no witness of size >= r within radius " + std::to_string(limit) +
                            " (shell " + std::to_string(j) + ")";
                return cert;
            }
            cert.witnesses.push_back({pick->orbit.id, best, size_of(*pick)});
            limit = best / 2.0;
        }
    }

    if (dir == Direction::both) {
        double half = r / 2.0;
        auto cu = detail::sample_ambient(nearest->wu, half);
        auto cs = detail::sample_ambient(nearest->ws, half);
        cert.hausdorff = detail::hausdorff(cu, cs);
        cert.angle = line_angle(nearest->wu.coeffs[0], nearest->ws.coeffs[0]);
        cert.transverse = cert.angle > kThetaTangent;
        if (cert.hausdorff <= delta_distinct) {
            cert.note = "limit stable and unstable graphs coincide";
            return cert;
        }
    }
    const manifold::LocalManifold& expo_m =
        dir == Direction::stable ? nearest->ws : nearest->wu;
    cert.exposure_g = exposure(f, expo_m, std::min(expo_m.rho_cert, 1.0)).g;
    cert.pass = true;
    return cert;
}

// ---- convergence of manifolds ----------------------------------------------

struct ConvergenceReport {
    std::vector<double> distances;  // per witness: max graph distance to the limit
    std::vector<bool> single_valued;
    bool monotone = false;
    bool multiplicity_one = false;
};

// Re-expresses each witness manifold as a graph over the limit's tangent disk
// of radius r and measures graph-to-graph distances.
inline ConvergenceReport convergence_check(const std::vector<manifold::LocalManifold>& witnesses,
                                           const manifold::LocalManifold& limit, double r,
                                           const manifold::CertifyOptions& opts = {}) {
    if (witnesses.size() < 3) throw std::invalid_argument("need at least 3 witnesses");
    manifold::TangentFrame fr = manifold::frame(limit);
    int n_ang = 16, n_rad = 8;

    // phi(x) per manifold via ray-marched graph continuation in the limit frame.
    auto graph = [&](const manifold::LocalManifold& m, std::vector<cplx>* ring) {
        std::vector<cplx> phis;
        ring->clear();
        cplx align = hermitian_dot(m.coeffs[0], fr.e1);
        for (int a = 0; a < n_ang; ++a) {
            double th = 2.0 * M_PI * a / n_ang;
            cplx zeta{0.0};
            for (int j = 1; j <= n_rad; ++j) {
                cplx x = r * j / n_rad * std::polar(1.0, th);
                // The off-axis fallback keeps Newton out of real-line traps
                // when the witness tangent is orthogonal to the frame.
                cplx seed = j == 1 ? (std::abs(align) > 1e-12 ? (x - fr.x(m.p)) / align
                                                              : x * cplx(0.8, 0.6))
                                   : zeta * (double(j) / (j - 1));
                auto gp = manifold::detail::solve_graph_point(m, fr, x, seed, opts);
                if (!gp) throw std::runtime_error("scale too large");
                zeta = gp->zeta;
                phis.push_back(gp->phi);
                if (j == n_rad) ring->push_back(gp->zeta);
            }
        }
        return phis;
    };

    ConvergenceReport rep;
    std::vector<cplx> ring;
    std::vector<cplx> phi_lim = graph(limit, &ring);
    for (const auto& w : witnesses) {
        std::vector<cplx> ring_w;
        std::vector<cplx> phi_w = graph(w, &ring_w);
        double d = 0.0;
        for (std::size_t i = 0; i < phi_w.size(); ++i) d = std::max(d, std::abs(phi_w[i] - phi_lim[i]));
        rep.distances.push_back(d);
        cplx center{0.0};
        for (cplx z : ring_w) center += z;
        center /= double(ring_w.size());
        // A single-valued graph has a closed outer ring winding once; branch
        // hopping shows up as winding defects or jumps between sheets.
        double max_gap = 0.0, total = 0.0;
        for (std::size_t a = 0; a < ring_w.size(); ++a) {
            double gap = std::abs(ring_w[(a + 1) % ring_w.size()] - ring_w[a]);
            max_gap = std::max(max_gap, gap);
            total += gap;
        }
        bool continuous = max_gap <= 5.0 * total / double(ring_w.size()) + 1e-300;
        rep.single_valued.push_back(
            continuous && manifold::detail::winding_number(ring_w, center) == 1);
    }
    rep.monotone = true;
    for (std::size_t i = 1; i < rep.distances.size(); ++i)
        rep.monotone &= rep.distances[i] <= rep.distances[i - 1] * (1.0 + 1e-6) + 1e-12;
    rep.multiplicity_one =
        std::all_of(rep.single_valued.begin(), rep.single_valued.end(), [](bool b) { return b; });
    return rep;
}

// ---- uniform regularity audit ----------------------------------------------

struct SaddleAuditEntry {
    std::string id;
    int period = 0;
    double size_u = 0.0, size_s = 0.0;
    double angle = 0.0;            // between E^u and E^s at the saddle
    double min_homoclinic = M_PI;  // smallest homoclinic angle found
    int n_homoclinic = 0;
    bool pass = false;
};

struct UniformReport {
    bool pass = false;
    double min_size = 1e300, min_angle = 1e300;
    std::vector<SaddleAuditEntry> entries;
    std::string note;
};

// Finite-period surrogate of the uniform-regularity criterion: every orbit of
// period <= N must be a saddle whose both manifolds certify at scale >= r and
// whose invariant directions / homoclinic crossings stay >= theta_min apart.
inline UniformReport uniform_regularity_audit(const HenonComposition& f, int N, double r,
                                              double theta_min,
                                              const periodic::NewtonOptions& nopts = {},
                                              const manifold::CertifyOptions& copts = {},
                                              int M = manifold::kDefaultOrder, int jobs = 1,
                                              const SearchOptions& sopts = {}) {
    if (N < 1) throw std::invalid_argument("nothing to audit");
    auto orbits = periodic::census(f, N, periodic::filtration_box(f), nopts);
    if (orbits.empty()) throw std::runtime_error("nothing to audit");

    UniformReport rep;
    for (const auto& o : orbits)
        if (o.type != periodic::OrbitType::saddle) {
            rep.note = "non-saddle orbit " + o.id + " of period " + std::to_string(o.period);
            rep.pass = false;
        }

    std::vector<const periodic::PeriodicOrbit*> saddles;
    for (const auto& o : orbits)
        if (o.type == periodic::OrbitType::saddle && !o.defective) saddles.push_back(&o);
    if (saddles.empty()) throw std::runtime_error("nothing to audit");

    rep.entries.resize(saddles.size());
    auto work = [&](std::size_t begin, std::size_t stride) {
        for (std::size_t i = begin; i < saddles.size(); i += stride) {
            const auto& o = *saddles[i];
            SaddleAuditEntry e;
            e.id = o.id;
            e.period = o.period;
            auto wu = manifold::parameterize(f, o, manifold::Branch::unstable, M);
            auto ws = manifold::parameterize(f, o, manifold::Branch::stable, M);
            e.size_u = manifold::max_certified_size(wu, r, copts);
            e.size_s = manifold::max_certified_size(ws, r, copts);
            e.angle = line_angle(o.eu, o.es);
            for (const auto& pt : find_intersections(wu, ws, sopts)) {
                e.min_homoclinic = std::min(e.min_homoclinic, pt.theta);
                ++e.n_homoclinic;
            }
            e.pass = e.size_u >= r && e.size_s >= r && e.angle >= theta_min &&
                     (e.n_homoclinic == 0 || e.min_homoclinic >= theta_min);
            rep.entries[i] = e;
        }
    };
    if (jobs <= 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(work, std::size_t(t), std::size_t(jobs));
        for (auto& th : pool) th.join();
    }

    bool all = rep.note.empty();
    for (const auto& e : rep.entries) {
        all &= e.pass;
        rep.min_size = std::min({rep.min_size, e.size_u, e.size_s});
        rep.min_angle = std::min(rep.min_angle, e.angle);
        if (e.n_homoclinic > 0) rep.min_angle = std::min(rep.min_angle, e.min_homoclinic);
    }
    rep.pass = all;
    return rep;
}

// ---- quasi-expansion audit --------------------------------------------------

struct QESaddleEntry {
    std::string id;
    bool embedded_u = false, embedded_s = false;  // graph single-valued in B(p, r)
    double area_u = 0.0, area_s = 0.0;
    double g_plus = 0.0, g_minus = 0.0;  // sup G+ on W^u_delta, sup G- on W^s_delta
    bool pass = false;
};

struct QEReport {
    bool pass = true;
    std::vector<QESaddleEntry> entries;
    double suggest_r = 0.0, suggest_delta = 0.0, suggest_eta = 0.0, suggest_A = 0.0;
    std::vector<std::string> failures;
};

namespace detail {

inline bool single_valued_in_ball(const manifold::LocalManifold& m, double r,
                                  const manifold::CertifyOptions& copts) {
    manifold::CertifyOptions o = copts;
    o.slope_tol = 1e300;  // only continuation + winding matter here
    double t = ambient_zeta_radius(m, r);
    if (t <= 0.0) return false;
    return manifold::certify_size(m, t, o).status == manifold::CertifyStatus::certified;
}

inline double green_sup_on_disk(const HenonComposition& f, const manifold::LocalManifold& m,
                                double zeta_radius, bool plus, int n_rings = 4,
                                int n_angles = 16) {
    double g = 0.0;
    for (int j = 1; j <= n_rings; ++j)
        for (int a = 0; a < n_angles; ++a) {
            cplx zeta = zeta_radius * j / n_rings * std::polar(1.0, 2.0 * M_PI * a / n_angles);
            ComplexPoint z;
            try {
                z = manifold::evaluate(m, zeta).z;
            } catch (...) {
                continue;
            }
            green::GreenValue v = plus ? green::green_plus(f, z) : green::green_minus(f, z);
            if (v.status == green::GreenStatus::converged) g = std::max(g, v.value);
        }
    return g;
}

}  // namespace detail

// Per saddle: W^u_r(p) properly embedded in B(p, r) as a single-valued graph,
// area at most A, and sup G+ on W^u_delta at least eta; symmetrically for the
// stable branch with G-.
inline QEReport qe_audit(const HenonComposition& f, const std::vector<CertifiedSaddle>& atlas,
                         double r, double delta, double eta, double A,
                         const manifold::CertifyOptions& copts = {}) {
    if (atlas.empty()) throw std::invalid_argument("nothing to audit");
    QEReport rep;
    double max_area = 0.0, min_g = 1e300;
    for (const auto& s : atlas) {
        QESaddleEntry e;
        e.id = s.orbit.id;
        e.embedded_u = detail::single_valued_in_ball(s.wu, r, copts);
        e.embedded_s = detail::single_valued_in_ball(s.ws, r, copts);
        double tu = detail::ambient_zeta_radius(s.wu, r);
        double ts = detail::ambient_zeta_radius(s.ws, r);
        e.area_u = manifold::area(s.wu, tu);
        e.area_s = manifold::area(s.ws, ts);
        double du = detail::ambient_zeta_radius(s.wu, delta);
        double ds = detail::ambient_zeta_radius(s.ws, delta);
        e.g_plus = detail::green_sup_on_disk(f, s.wu, du, true);
        e.g_minus = detail::green_sup_on_disk(f, s.ws, ds, false);
        e.pass = e.embedded_u && e.embedded_s && e.area_u <= A && e.area_s <= A &&
                 e.g_plus >= eta && e.g_minus >= eta;
        if (!e.pass) {
            std::string why;
            if (!e.embedded_u || !e.embedded_s) why = "embedding";
            else if (e.area_u > A || e.area_s > A) why = "area bound";
            else why = "expansion floor eta";
            rep.failures.push_back("saddle " + e.id + ": " + why);
        }
        max_area = std::max({max_area, e.area_u, e.area_s});
        min_g = std::min({min_g, e.g_plus, e.g_minus});
        rep.pass &= e.pass;
        rep.entries.push_back(e);
    }
    rep.suggest_r = r;
    rep.suggest_delta = delta;
    rep.suggest_eta = 0.95 * min_g;
    rep.suggest_A = 1.05 * max_area;
    return rep;
}

// ---- marked-point tracker for homoclinic points ------------------------------

// Tracker for natural_continuation: re-solves the saddle(s) and the
// intersection equation psi^u(zeta) = psi^s(xi) at each parameter.
inline manifold::MarkedTracker homoclinic_tracker(periodic::PeriodicOrbit saddle_u,
                                                  periodic::PeriodicOrbit saddle_s,
                                                  cplx zeta0, cplx xi0,
                                                  int M = manifold::kDefaultOrder) {
    struct State {
        periodic::PeriodicOrbit su, ss;
        cplx zeta, xi;
        ComplexPoint c1u, c1s;
        bool first = true;
    };
    auto st = std::make_shared<State>();
    st->su = std::move(saddle_u);
    st->ss = std::move(saddle_s);
    st->zeta = zeta0;
    st->xi = xi0;

    return [st, M](const HenonComposition& f, cplx, const ComplexPoint&)
               -> std::optional<ComplexPoint> {
        periodic::NewtonOptions nopts;
        auto refresh = [&](periodic::PeriodicOrbit& o) {
            auto res = periodic::detail::newton_periodic(f, o.period, o.points[0], nopts);
            if (!res) return false;
            o.points[0] = res->z;
            for (int i = 1; i < o.period; ++i) o.points[i] = f.apply(o.points[i - 1]);
            o.residual = periodic::orbit_residual(f, o.points);
            periodic::compute_multipliers(f, o);
            o.type = periodic::classify(o.u, o.s, nopts.eps_unit);
            return o.type == periodic::OrbitType::saddle;
        };
        if (!refresh(st->su) || !refresh(st->ss)) return std::nullopt;
        auto wu = manifold::parameterize(f, st->su, manifold::Branch::unstable, M);
        auto ws = manifold::parameterize(f, st->ss, manifold::Branch::stable, M);
        cplx zs = st->zeta, xs = st->xi;
        if (!st->first) {
            cplx ou = hermitian_dot(wu.coeffs[0], st->c1u);
            cplx os = hermitian_dot(ws.coeffs[0], st->c1s);
            if (std::abs(ou) > 0.0) zs *= std::conj(ou) / std::abs(ou);
            if (std::abs(os) > 0.0) xs *= std::conj(os) / std::abs(os);
        }
        auto pt = polish_intersection(wu, ws, zs, xs);
        if (!pt) pt = polish_intersection(wu, ws, st->zeta, st->xi);
        if (!pt) return std::nullopt;
        st->zeta = pt->zeta;
        st->xi = pt->xi;
        st->c1u = wu.coeffs[0];
        st->c1s = ws.coeffs[0];
        st->first = false;
        return pt->point;
    };
}

// ---- JSON reports ------------------------------------------------------------

inline nlohmann::json uniform_report_to_json(const UniformReport& rep) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["kind"] = "uniform_regularity_audit";
    j["pass"] = rep.pass;
    j["min_size"] = rep.min_size;
    j["min_angle"] = rep.min_angle;
    if (!rep.note.empty()) j["note"] = rep.note;
    j["saddles"] = nlohmann::json::array();
    for (const auto& e : rep.entries)
        j["saddles"].push_back({{"id", e.id},
                                {"period", e.period},
                                {"size_u", e.size_u},
                                {"size_s", e.size_s},
                                {"angle", e.angle},
                                {"n_homoclinic", e.n_homoclinic},
                                {"min_homoclinic_angle", e.min_homoclinic},
                                {"pass", e.pass}});
    return j;
}

inline nlohmann::json qe_report_to_json(const QEReport& rep) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["kind"] = "qe_audit";
    j["pass"] = rep.pass;
    j["suggest"] = {{"r", rep.suggest_r},
                    {"delta", rep.suggest_delta},
                    {"eta", rep.suggest_eta},
                    {"A", rep.suggest_A}};
    j["failures"] = rep.failures;
    j["saddles"] = nlohmann::json::array();
    for (const auto& e : rep.entries)
        j["saddles"].push_back({{"id", e.id},
                                {"embedded_u", e.embedded_u},
                                {"embedded_s", e.embedded_s},
                                {"area_u", e.area_u},
                                {"area_s", e.area_s},
                                {"g_plus", e.g_plus},
                                {"g_minus", e.g_minus},
                                {"pass", e.pass}});
    return j;
}

}  // namespace regularity
}  // namespace henonlab

#endif
