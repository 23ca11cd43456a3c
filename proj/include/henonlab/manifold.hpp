#ifndef HENONLAB_MANIFOLD_HPP
#define HENONLAB_MANIFOLD_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "continuation.hpp"
#include "family.hpp"
#include "io.hpp"
#include "periodic.hpp"
#include "types.hpp"

namespace henonlab {
namespace manifold {

enum class Branch { stable, unstable };

inline const char* to_string(Branch b) {
    return b == Branch::stable ? "stable" : "unstable";
}

// psi(zeta) = p + sum_{k=1..M} c_k zeta^k with f^n(psi(zeta)) = psi(mu zeta).
// period == 0 marks a synthetic manifold (series only, no dynamics attached).
struct LocalManifold {
    Branch branch = Branch::unstable;
    std::string orbit_id;
    int period = 0;
    HenonComposition f;  // unused when period == 0
    ComplexPoint p;
    cplx mu{0.0};
    std::vector<ComplexPoint> coeffs;  // coeffs[k-1] = c_k
    double rho_cert = 0.0;
    double r_cert = 0.0;  // bounded-geometry scale, 0 = uncertified
};

struct ManifoldEval {
    ComplexPoint z;
    ComplexPoint dz;  // psi'(zeta)
    int depth = 0;    // conjugacy-recursion levels used
};

inline constexpr int kDefaultOrder = 24;
inline constexpr double kDefaultResidualTol = 1e-9;
inline constexpr int kMaxExtensionDepth = 64;

namespace detail {

// Truncated power series in zeta; index = degree.
using Series = std::vector<cplx>;

inline Series smul(const Series& a, const Series& b, int M) {
    Series out(std::size_t(M) + 1, cplx(0.0));
    for (std::size_t i = 0; i < a.size() && int(i) <= M; ++i)
        for (std::size_t j = 0; j < b.size() && int(i + j) <= M; ++j)
            out[i + j] += a[i] * b[j];
    return out;
}

inline Series poly_series(const std::vector<cplx>& p, const Series& X, int M) {
    Series acc{p.back()};
    for (std::size_t k = p.size() - 1; k-- > 0;) {
        acc = smul(acc, X, M);
        if (acc.size() <= 0) acc.resize(1);
        acc.resize(std::size_t(M) + 1, cplx(0.0));
        acc[0] += p[k];
    }
    acc.resize(std::size_t(M) + 1, cplx(0.0));
    return acc;
}

// (X, Y) -> (p(X) + a Y, a X) on truncated series.
inline void apply_factor_series(const HenonFactor& fac, Series& X, Series& Y, int M) {
    Series Xn = poly_series(fac.p_coeffs, X, M);
    Y.resize(std::size_t(M) + 1, cplx(0.0));
    for (int k = 0; k <= M; ++k) Xn[k] += fac.a * Y[k];
    Series Yn(std::size_t(M) + 1, cplx(0.0));
    for (int k = 0; k <= M && k < int(X.size()); ++k) Yn[k] = fac.a * X[k];
    X = std::move(Xn);
    Y = std::move(Yn);
}

inline void apply_fn_series(const HenonComposition& f, int n, Series& X, Series& Y, int M) {
    for (int it = 0; it < n; ++it)
        for (const auto& fac : f.factors) apply_factor_series(fac, X, Y, M);
}

inline ComplexPoint series_eval(const LocalManifold& m, cplx zeta, ComplexPoint* deriv) {
    ComplexPoint z{0.0, 0.0}, dz{0.0, 0.0};
    for (std::size_t k = m.coeffs.size(); k-- > 0;) {
        z = z * zeta + m.coeffs[k];
        if (deriv) dz = dz * zeta + double(k + 1) * m.coeffs[k];
    }
    z = m.p + z * zeta;
    if (deriv) *deriv = dz;
    return z;
}

}  // namespace detail

// Value and derivative of psi, extended past rho_cert by the conjugacy
//   unstable: psi(zeta) = f^n(psi(zeta/u)),  stable: psi(zeta) = f^-n(psi(s zeta)).
inline ManifoldEval evaluate(const LocalManifold& m, cplx zeta) {
    ManifoldEval out;
    cplx zred = zeta;
    if (m.period == 0) {
        if (std::abs(zeta) > m.rho_cert * (1.0 + 1e-12))
            throw std::domain_error("zeta outside the synthetic manifold domain");
    } else {
        cplx shrink = m.branch == Branch::unstable ? 1.0 / m.mu : m.mu;
        while (std::abs(zred) > m.rho_cert) {
            zred *= shrink;
            if (++out.depth > kMaxExtensionDepth)
                throw std::domain_error("zeta too large for the dynamical extension");
        }
    }
    out.z = detail::series_eval(m, zred, &out.dz);
    for (int level = 0; level < out.depth; ++level) {
        if (m.branch == Branch::unstable) {
            ComplexPoint image;
            ComplexMatrix2 J = m.f.derivative_n(out.z, m.period, &image);
            out.dz = (J * out.dz) * (1.0 / m.mu);
            out.z = image;
        } else {
            ComplexPoint pre = m.f.iterate(out.z, -m.period);
            ComplexMatrix2 J = m.f.derivative_n(pre, m.period);
            out.dz = (J.inverse() * out.dz) * m.mu;
            out.z = pre;
        }
    }
    return out;
}

// Conjugacy defect max_{|zeta|=rho} ||f^n(psi(zeta)) - psi(mu zeta)||, series only.
inline double conjugacy_residual(const LocalManifold& m, double rho, int samples = 64) {
    double worst = 0.0;
    for (int k = 0; k < samples; ++k) {
        cplx zeta = rho * std::polar(1.0, 2.0 * M_PI * k / samples);
        ComplexPoint lhs;
        try {
            lhs = m.f.iterate(detail::series_eval(m, zeta, nullptr), m.period);
        } catch (const NumericalEscape&) {
            return 1e300;
        }
        ComplexPoint rhs = detail::series_eval(m, m.mu * zeta, nullptr);
        worst = std::max(worst, sup_norm(lhs - rhs));
    }
    return worst;
}

// Parameterization method: solve (Df^n(p) - mu^k I) c_k = -T_k order by order,
// T_k the order-k Taylor coefficient of f^n o psi_{<k}.  rho_cert is the
// largest dyadic radius where the sampled conjugacy residual stays below tol.
inline LocalManifold parameterize(const HenonComposition& f,
                                  const periodic::PeriodicOrbit& orbit, Branch branch,
                                  int M = kDefaultOrder, double tol = kDefaultResidualTol,
                                  double eps_res = 1e-10) {
    if (M < 1) throw std::invalid_argument("series order must be >= 1");
    if (orbit.defective)
        throw std::invalid_argument("Df^n is defective; no analytic linearization basis");
    cplx mu = branch == Branch::unstable ? orbit.u : orbit.s;
    ComplexPoint c1 = branch == Branch::unstable ? orbit.eu : orbit.es;
    if (branch == Branch::unstable && std::abs(mu) <= 1.0)
        throw std::invalid_argument("unstable branch needs |u| > 1");
    if (branch == Branch::stable && (std::abs(mu) >= 1.0 || std::abs(mu) == 0.0))
        throw std::invalid_argument("stable branch needs 0 < |s| < 1");

    LocalManifold m;
    m.branch = branch;
    m.orbit_id = orbit.id;
    m.period = orbit.period;
    m.f = f;
    m.p = orbit.points[0];
    m.mu = mu;
    m.coeffs.assign(std::size_t(M), ComplexPoint{0.0, 0.0});
    m.coeffs[0] = c1;

    ComplexMatrix2 A = ComplexMatrix2::identity();
    for (const auto& q : orbit.points) A = f.derivative(q) * A;

    for (int k = 2; k <= M; ++k) {
        detail::Series X(std::size_t(k) + 1, cplx(0.0)), Y(std::size_t(k) + 1, cplx(0.0));
        X[0] = m.p.x;
        Y[0] = m.p.y;
        for (int j = 1; j < k; ++j) {
            X[j] = m.coeffs[j - 1].x;
            Y[j] = m.coeffs[j - 1].y;
        }
        detail::apply_fn_series(f, m.period, X, Y, k);
        ComplexPoint Tk{X[k], Y[k]};
        cplx muk = std::pow(mu, k);
        ComplexMatrix2 B = A - ComplexMatrix2::identity() * muk;
        // Resonance means mu^k collides with an eigenvalue of Df^n; measure the
        // relative separation (an absolute test misfires for |s| near zero).
        double sep = std::min(std::abs(muk - orbit.u) / (std::abs(orbit.u) + std::abs(muk)),
                              std::abs(muk - orbit.s) / (std::abs(orbit.s) + std::abs(muk)));
        if (sep < eps_res)
            throw std::runtime_error("resonance at order " + std::to_string(k));
        m.coeffs[std::size_t(k) - 1] = solve2x2(B, ComplexPoint{-Tk.x, -Tk.y});
    }

    double rho = 1.0;
    if (conjugacy_residual(m, rho) < tol) {
        while (rho < 1e6 && conjugacy_residual(m, 2.0 * rho) < tol) rho *= 2.0;
    } else {
        while (rho > 1e-15 && conjugacy_residual(m, rho) >= tol) rho *= 0.5;
        if (rho <= 1e-15) rho = 0.0;
    }
    m.rho_cert = rho;
    return m;
}

// Synthetic manifold from explicit coefficients (test hook; no dynamics).
inline LocalManifold synthetic_manifold(const ComplexPoint& p,
                                        std::vector<ComplexPoint> coeffs, double rho,
                                        Branch branch = Branch::unstable) {
    LocalManifold m;
    m.branch = branch;
    m.period = 0;
    m.p = p;
    m.coeffs = std::move(coeffs);
    m.rho_cert = rho;
    return m;
}

// Tangent-aligned unitary frame at the base point: e1 along psi'(0).
struct TangentFrame {
    ComplexPoint p, e1, e2;

    cplx x(const ComplexPoint& z) const { return hermitian_dot(z - p, e1); }
    cplx y(const ComplexPoint& z) const { return hermitian_dot(z - p, e2); }
};

inline TangentFrame frame(const LocalManifold& m) {
    ComplexPoint e1 = unit_vector(m.coeffs[0]);
    return {m.p, e1, ComplexPoint{-std::conj(e1.y), std::conj(e1.x)}};
}

// ---- bounded geometry (size) certification --------------------------------

enum class CertifyStatus { certified, violated, undecided };

inline const char* to_string(CertifyStatus s) {
    switch (s) {
        case CertifyStatus::certified: return "certified";
        case CertifyStatus::violated: return "violated";
        default: return "undecided";
    }
}

struct GraphSample {
    cplx x;       // tangent coordinate
    cplx phi;     // normal coordinate of the graph
    double slope; // |phi'(x)|
};

struct SizeCertificate {
    double r = 0.0;
    double slope_max = 0.0;
    CertifyStatus status = CertifyStatus::undecided;
    std::string note;
    ComplexPoint tangent;
    std::vector<GraphSample> samples;
};

struct CertifyOptions {
    int n_angles = 128;
    int n_radial = 256;
    double newton_tol = 1e-11;
    int newton_max_iter = 40;
    double slope_tol = 1e-9;   // slope <= 1 + slope_tol passes (extremal attains 1)
    int sample_stride = 1;     // keep every k-th sample in the certificate
};

namespace detail {

struct GraphPoint {
    cplx zeta;
    ManifoldEval eval;
    double slope = 0.0;
    cplx phi;
};

// Newton on e1^H (psi(zeta) - p) = x from a seed along the ray.
inline std::optional<GraphPoint> solve_graph_point(const LocalManifold& m,
                                                   const TangentFrame& fr, cplx x, cplx seed,
                                                   const CertifyOptions& opts) {
    cplx zeta = seed;
    for (int it = 0; it < opts.newton_max_iter; ++it) {
        ManifoldEval e;
        try {
            e = evaluate(m, zeta);
        } catch (const std::domain_error&) {
            return std::nullopt;
        } catch (const NumericalEscape&) {
            return std::nullopt;
        }
        cplx g = fr.x(e.z) - x;
        cplx dg = hermitian_dot(e.dz, fr.e1);
        if (std::abs(g) < opts.newton_tol * std::max(1.0, std::abs(x))) {
            GraphPoint out;
            out.zeta = zeta;
            out.eval = e;
            out.phi = fr.y(e.z);
            double denom = std::abs(dg);
            out.slope = denom == 0.0 ? 1e300
                                     : std::abs(hermitian_dot(e.dz, fr.e2)) / denom;
            return out;
        }
        if (std::abs(dg) == 0.0) return std::nullopt;
        zeta -= g / dg;
    }
    return std::nullopt;
}

}  // namespace detail

// Builds the graph x -> phi(x) of the manifold over its tangent disk D(0, r) by
// radial continuation, checking single-valuedness and max slope <= 1.
inline SizeCertificate certify_size(const LocalManifold& m, double r,
                                    const CertifyOptions& opts = {}) {
    if (r <= 0.0) throw std::invalid_argument("scale must be positive");
    SizeCertificate cert;
    cert.r = r;
    TangentFrame fr = frame(m);
    cert.tangent = fr.e1;

    std::vector<cplx> ring(static_cast<std::size_t>(opts.n_angles));
    for (int j = 0; j < opts.n_angles; ++j) {
        double theta = 2.0 * M_PI * j / opts.n_angles;
        cplx zeta{0.0};
        cplx zeta_prev{0.0};
        for (int i = 1; i <= opts.n_radial; ++i) {
            cplx x = (r * i / opts.n_radial) * std::polar(1.0, theta);
            cplx seed = (i == 1) ? x : zeta * (double(i) / (i - 1));
            auto gp = detail::solve_graph_point(m, fr, x, seed, opts);
            if (!gp) {
                cert.status = CertifyStatus::undecided;
                cert.note = "graph continuation failed at |x| = " +
                            std::to_string(std::abs(x));
                return cert;
            }
            // Branch-hopping guard: the parameter must move continuously.
            double step_scale = std::max(r / opts.n_radial, std::abs(zeta) / i);
            if (i > 1 && std::abs(gp->zeta - zeta_prev) > 50.0 * step_scale) {
                cert.status = CertifyStatus::undecided;
                cert.note = "parameter jump (possible second branch) at |x| = " +
                            std::to_string(std::abs(x));
                return cert;
            }
            zeta_prev = zeta;
            zeta = gp->zeta;
            cert.slope_max = std::max(cert.slope_max, gp->slope);
            if (gp->slope > 1.0 + opts.slope_tol) {
                cert.status = CertifyStatus::violated;
                cert.note = "slope " + std::to_string(gp->slope) + " at |x| = " +
                            std::to_string(std::abs(x));
                return cert;
            }
            // Schwarz consistency: slope <= 1 on the whole disk forces
            // |phi'(x)| <= |x|/r.  An off-grid slope peak (missed by every
            // sampled ray) still shows up here as excess interior slope.
            if (gp->slope > std::abs(x) / r + opts.slope_tol) {
                cert.status = CertifyStatus::violated;
                cert.note = "slope " + std::to_string(gp->slope) +
                            " exceeds the Schwarz bound |x|/r at |x| = " +
                            std::to_string(std::abs(x));
                return cert;
            }
            if (((j * opts.n_radial) + i) % opts.sample_stride == 0)
                cert.samples.push_back({x, gp->phi, gp->slope});
        }
        ring[std::size_t(j)] = zeta;
    }

    // Single-valuedness: the outer ring must close up with winding number 1.
    double winding = 0.0;
    for (int j = 0; j < opts.n_angles; ++j) {
        cplx za = ring[std::size_t(j)];
        cplx zb = ring[std::size_t((j + 1) % opts.n_angles)];
        if (std::abs(za) == 0.0 || std::abs(zb) == 0.0) {
            cert.status = CertifyStatus::undecided;
            cert.note = "outer ring touches the base point";
            return cert;
        }
        winding += std::arg(zb / za);
    }
    if (std::lround(winding / (2.0 * M_PI)) != 1) {
        cert.status = CertifyStatus::violated;
        cert.note = "outer ring winding != 1 (graph not single-valued)";
        return cert;
    }
    cert.status = CertifyStatus::certified;
    return cert;
}

// Largest certified scale by doubling/halving plus bisection; sets r_cert.
inline double max_certified_size(LocalManifold& m, double r_hint = 0.0,
                                 const CertifyOptions& opts = {}, int bisect_iters = 10) {
    double r = r_hint > 0.0 ? r_hint : std::max(m.rho_cert, 1e-6);
    auto ok = [&](double rr) {
        return certify_size(m, rr, opts).status == CertifyStatus::certified;
    };
    double lo = 0.0, hi = 0.0;
    if (ok(r)) {
        lo = r;
        while (lo < 1e6) {
            if (!ok(2.0 * lo)) {
                hi = 2.0 * lo;
                break;
            }
            lo *= 2.0;
        }
        if (hi == 0.0) {
            m.r_cert = lo;
            return lo;
        }
    } else {
        hi = r;
        while (hi > 1e-9 && !ok(0.5 * hi)) hi *= 0.5;
        if (hi <= 1e-9) {
            m.r_cert = 0.0;
            return 0.0;
        }
        lo = 0.5 * hi;
    }
    for (int it = 0; it < bisect_iters; ++it) {
        double mid = 0.5 * (lo + hi);
        (ok(mid) ? lo : hi) = mid;
    }
    m.r_cert = lo;
    return lo;
}

// ---- Koebe audits ----------------------------------------------------------

struct KoebeReport {
    bool pass = true;
    double max_bidisk_ratio = 0.0;   // max coordinate modulus / r on psi(D(0, r/4))
    double max_outer_ratio = 0.0;    // max |g| / (4|z|) over audited circles
    double min_inner_margin = 1e300; // min (4 min|g| / |z|) over audited circles
    std::vector<std::string> violations;
};

namespace detail {

inline int winding_number(const std::vector<cplx>& curve, cplx w) {
    double total = 0.0;
    for (std::size_t i = 0; i < curve.size(); ++i) {
        cplx a = curve[i] - w;
        cplx b = curve[(i + 1) % curve.size()] - w;
        total += std::arg(b / a);
    }
    return int(std::lround(total / (2.0 * M_PI)));
}

}  // namespace detail

// Audits psi(D(0, r/4)) c bidisk D(0,r)^2 (tangent-aligned coordinates) and
// the distortion inclusions D(0,|z|/4) c g(D(0,|z|)) c D(0,4|z|) for
// g = tangent projection of psi, on circles |z| <= r/8.
inline KoebeReport koebe_audit(const LocalManifold& m, int n_radii = 8, int n_angles = 64,
                               int n_boundary = 256) {
    if (m.r_cert <= 0.0) throw std::invalid_argument("manifold has no certified size");
    double r = m.r_cert;
    TangentFrame fr = frame(m);
    KoebeReport rep;

    for (int j = 1; j <= n_radii; ++j) {
        double rho = (r / 4.0) * j / n_radii;
        for (int k = 0; k < n_angles; ++k) {
            cplx zeta = rho * std::polar(1.0, 2.0 * M_PI * k / n_angles);
            ComplexPoint z;
            try {
                z = evaluate(m, zeta).z;
            } catch (const std::domain_error&) {
                rep.pass = false;
                rep.violations.push_back("bidisk sample unevaluable");
                return rep;
            }
            double ratio = std::max(std::abs(fr.x(z)), std::abs(fr.y(z))) / r;
            rep.max_bidisk_ratio = std::max(rep.max_bidisk_ratio, ratio);
            if (ratio > 1.0 + 1e-9) {
                rep.pass = false;
                rep.violations.push_back("psi(D(0,r/4)) leaves the bidisk at |zeta| = " +
                                         std::to_string(rho));
            }
        }
    }

    for (int j = 1; j <= n_radii; ++j) {
        double t = (r / 8.0) * j / n_radii;
        std::vector<cplx> g(static_cast<std::size_t>(n_boundary));
        double gmax = 0.0, gmin = 1e300;
        bool ok = true;
        for (int k = 0; k < n_boundary && ok; ++k) {
            cplx zeta = t * std::polar(1.0, 2.0 * M_PI * k / n_boundary);
            try {
                g[std::size_t(k)] = fr.x(evaluate(m, zeta).z);
            } catch (const std::domain_error&) {
                rep.pass = false;
                rep.violations.push_back("distortion sample unevaluable");
                ok = false;
            }
            gmax = std::max(gmax, std::abs(g[std::size_t(k)]));
            gmin = std::min(gmin, std::abs(g[std::size_t(k)]));
        }
        if (!ok) return rep;
        rep.max_outer_ratio = std::max(rep.max_outer_ratio, gmax / (4.0 * t));
        rep.min_inner_margin = std::min(rep.min_inner_margin, 4.0 * gmin / t);
        if (gmax > 4.0 * t * (1.0 + 1e-9)) {
            rep.pass = false;
            rep.violations.push_back("outer inclusion fails at |z| = " + std::to_string(t));
        }
        for (int k = 0; k < 16; ++k) {
            cplx w = (t / 4.0) * (1.0 - 1e-6) * std::polar(1.0, 2.0 * M_PI * k / 16.0);
            if (detail::winding_number(g, w) != 1) {
                rep.pass = false;
                rep.violations.push_back("inner inclusion fails at |z| = " + std::to_string(t));
                break;
            }
        }
    }
    return rep;
}

// Distortion-theorem bounds for a normalized univalent map h on D(0, r2)
// (h(0) = 0, h'(0) = 1): derivative within [(1-r1/r2)/16, 16/(1-r1/r2)^3] on
// |z| <= (r1+r2)/2, and dist(h(D(0,r1)), boundary of h(D(0,r2))) bounded below.
struct D12Report {
    bool pass = true;
    double min_deriv = 1e300, max_deriv = 0.0;
    double lo_bound = 0.0, hi_bound = 0.0;
    double min_dist = 1e300, dist_bound = 0.0;
    std::string note;
};

template <class H, class DH>
D12Report koebe_derivative_bounds(H&& h, DH&& dh, double r1, double r2, int n_radii = 8,
                                  int n_angles = 64, int n_boundary = 256) {
    if (!(0.0 < r1 && r1 < r2)) throw std::invalid_argument("need 0 < r1 < r2");
    double q = r1 / r2;
    D12Report rep;
    rep.lo_bound = (1.0 - q) / 16.0;
    rep.hi_bound = 16.0 / ((1.0 - q) * (1.0 - q) * (1.0 - q));
    rep.dist_bound = r2 * (1.0 - q) * (1.0 - q) / 32.0;

    double rmid = 0.5 * (r1 + r2);
    for (int j = 0; j <= n_radii; ++j) {
        double rho = rmid * j / n_radii;
        int na = j == 0 ? 1 : n_angles;
        for (int k = 0; k < na; ++k) {
            cplx z = rho * std::polar(1.0, 2.0 * M_PI * k / na);
            double d = std::abs(dh(z));
            rep.min_deriv = std::min(rep.min_deriv, d);
            rep.max_deriv = std::max(rep.max_deriv, d);
        }
    }
    if (rep.min_deriv < rep.lo_bound || rep.max_deriv > rep.hi_bound) rep.pass = false;

    std::vector<cplx> inner(static_cast<std::size_t>(n_boundary));
    std::vector<cplx> outer(static_cast<std::size_t>(n_boundary));
    for (int k = 0; k < n_boundary; ++k) {
        cplx dir = std::polar(1.0, 2.0 * M_PI * k / n_boundary);
        inner[std::size_t(k)] = h(r1 * dir);
        outer[std::size_t(k)] = h(r2 * dir);
    }
    for (const cplx& a : inner)
        for (const cplx& b : outer) rep.min_dist = std::min(rep.min_dist, std::abs(a - b));
    if (rep.min_dist < rep.dist_bound) rep.pass = false;
    return rep;
}

// Marches the inverse graph map along a ray; h = (pi o psi)^{-1} with the
// tangent projection pi, normalized h'(0) = 1.
inline cplx invert_graph(const LocalManifold& m, const TangentFrame& fr, cplx z,
                         double tol = 1e-11, int march_steps = 16) {
    CertifyOptions opts;
    opts.newton_tol = tol;
    cplx zeta{0.0};
    for (int i = 1; i <= march_steps; ++i) {
        cplx target = z * (double(i) / march_steps);
        cplx seed = (i == 1) ? target : zeta * (double(i) / (i - 1));
        auto gp = detail::solve_graph_point(m, fr, target, seed, opts);
        if (!gp) throw std::runtime_error("graph inversion failed");
        zeta = gp->zeta;
    }
    return zeta;
}

inline D12Report koebe_derivative_bounds(const LocalManifold& m, double r1, double r2,
                                         int n_radii = 8, int n_angles = 64,
                                         int n_boundary = 256) {
    TangentFrame fr = frame(m);
    auto h = [&](cplx z) { return invert_graph(m, fr, z); };
    auto dh = [&](cplx z) {
        cplx zeta = invert_graph(m, fr, z);
        ManifoldEval e = evaluate(m, zeta);
        return 1.0 / hermitian_dot(e.dz, fr.e1);
    };
    return koebe_derivative_bounds(h, dh, r1, r2, n_radii, n_angles, n_boundary);
}

// ---- area ------------------------------------------------------------------

// Closed form pi * sum k ||c_k||^2 rho^{2k} for the truncated series.
inline double series_area(const LocalManifold& m, double rho) {
    double total = 0.0;
    double r2k = 1.0;
    for (std::size_t k = 1; k <= m.coeffs.size(); ++k) {
        r2k *= rho * rho;
        const ComplexPoint& c = m.coeffs[k - 1];
        total += double(k) * (std::norm(c.x) + std::norm(c.y)) * r2k;
    }
    return M_PI * total;
}

// integral of ||psi'||^2 over D(0, rho): periodic trapezoid in angle, Simpson
// in radius, both doubled until the estimate stabilizes.
inline double area(const LocalManifold& m, double rho, double tol = 1e-8) {
    if (rho <= 0.0) throw std::invalid_argument("area needs rho > 0");
    auto density = [&](double r, double theta) {
        ManifoldEval e = evaluate(m, r * std::polar(1.0, theta));
        return (std::norm(e.dz.x) + std::norm(e.dz.y)) * r;
    };
    auto level = [&](int n_theta, int n_r) {
        // Simpson needs an even interval count.
        double sum = 0.0;
        for (int i = 0; i <= n_r; ++i) {
            double r = rho * i / n_r;
            double ang = 0.0;
            for (int j = 0; j < n_theta; ++j) ang += density(r, 2.0 * M_PI * j / n_theta);
            ang *= 2.0 * M_PI / n_theta;
            double w = (i == 0 || i == n_r) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
            sum += w * ang;
        }
        return sum * (rho / n_r) / 3.0;
    };
    int n_theta = 64, n_r = 32;
    double prev = level(n_theta, n_r);
    for (int it = 0; it < 5; ++it) {
        n_theta *= 2;
        n_r *= 2;
        double cur = level(n_theta, n_r);
        if (std::abs(cur - prev) <= tol * std::max(1.0, std::abs(cur))) return cur;
        prev = cur;
    }
    throw std::runtime_error("area quadrature did not converge; estimate " +
                             std::to_string(prev));
}

// ---- projection onto the manifold ------------------------------------------

// Gauss-Newton for psi(zeta) = q; converges when q lies on the manifold.
inline std::optional<cplx> project_to_manifold(const LocalManifold& m, const ComplexPoint& q,
                                               cplx seed, double tol = 1e-10,
                                               int max_iter = 60) {
    cplx zeta = seed;
    for (int it = 0; it < max_iter; ++it) {
        ManifoldEval e;
        try {
            e = evaluate(m, zeta);
        } catch (const std::domain_error&) {
            return std::nullopt;
        } catch (const NumericalEscape&) {
            return std::nullopt;
        }
        ComplexPoint r = e.z - q;
        if (sup_norm(r) < tol * std::max(1.0, sup_norm(q))) return zeta;
        double n2 = std::norm(e.dz.x) + std::norm(e.dz.y);
        if (n2 == 0.0) return std::nullopt;
        zeta -= hermitian_dot(r, e.dz) / n2;
    }
    return std::nullopt;
}

// ---- natural continuation ---------------------------------------------------

// Re-solves a marked point's defining equation at each parameter sample.
using MarkedTracker = std::function<std::optional<ComplexPoint>(
    const HenonComposition& f, cplx lambda, const ComplexPoint& previous)>;

struct NaturalSample {
    cplx lambda{0.0};
    LocalManifold manifold;  // rescaled: psi(0) = p_lambda, psi(1) = q_lambda
    cplx omega{0.0};
    ComplexPoint q;
};

struct NaturalContinuation {
    std::vector<NaturalSample> samples;
    std::vector<continuation::MotionEvent> events;
    bool completed = false;
};

// psi_scaled(zeta) = psi(omega zeta): same curve, marked point at parameter 1.
inline LocalManifold rescale(const LocalManifold& m, cplx omega) {
    LocalManifold out = m;
    cplx wk{1.0};
    for (std::size_t k = 0; k < out.coeffs.size(); ++k) {
        wk *= omega;
        out.coeffs[k] = m.coeffs[k] * wk;
    }
    out.rho_cert = m.rho_cert / std::abs(omega);
    return out;
}

// Continues saddle + marked point along the path and renormalizes each
// parameterization so the marked point sits at intrinsic parameter 1.
inline NaturalContinuation natural_continuation(
    const FamilySpec& fam, const periodic::PeriodicOrbit& saddle, Branch branch,
    const ComplexPoint& q0, cplx zeta0_hint, const MarkedTracker& track_q,
    const continuation::ParamPath& path, int M = kDefaultOrder,
    double tol = kDefaultResidualTol, const continuation::ContinuationOptions& copts = {}) {
    if (std::abs(zeta0_hint) == 0.0)
        throw std::invalid_argument("marked point must differ from the base point");
    continuation::MotionTrack base = continuation::continue_orbit(fam, saddle, path, copts);
    NaturalContinuation out;
    out.events = base.events;

    ComplexPoint q = q0;
    cplx zeta_prev = zeta0_hint;
    ComplexPoint c1_prev;
    bool first = true;
    for (const auto& s : base.samples) {
        HenonComposition f = instantiate(fam, s.lambda);
        periodic::PeriodicOrbit ol;
        ol.period = saddle.period;
        ol.points = s.points;
        ol.residual = s.residual;
        periodic::compute_multipliers(f, ol);
        ol.type = periodic::classify(ol.u, ol.s, copts.eps_unit);
        ol.id = saddle.id;
        if (ol.type != periodic::OrbitType::saddle) {
            out.events.push_back({s.lambda, continuation::EventKind::unit_circle_crossing,
                                  "orbit stopped being a saddle"});
            return out;
        }
        LocalManifold mani;
        try {
            mani = parameterize(f, ol, branch, M, tol);
        } catch (const std::exception& e) {
            out.events.push_back(
                {s.lambda, continuation::EventKind::newton_failure, e.what()});
            return out;
        }
        if (!first) {
            auto qn = track_q(f, s.lambda, q);
            if (!qn) {
                out.events.push_back({s.lambda, continuation::EventKind::newton_failure,
                                      "marked point continuation failed"});
                return out;
            }
            q = *qn;
        }
        // The eigenvector phase convention may jump between samples; correct
        // the seed by the overlap phase before projecting.
        cplx seed = zeta_prev;
        if (!first) {
            cplx overlap = hermitian_dot(mani.coeffs[0], c1_prev);
            if (std::abs(overlap) > 0.0) seed = zeta_prev * (std::conj(overlap) / std::abs(overlap));
        }
        auto zq = project_to_manifold(mani, q, seed);
        if (!zq) zq = project_to_manifold(mani, q, zeta_prev);
        if (!zq) {
            out.events.push_back({s.lambda, continuation::EventKind::newton_failure,
                                  "marked point left the evaluable manifold"});
            return out;
        }
        zeta_prev = *zq;
        c1_prev = mani.coeffs[0];
        first = false;
        out.samples.push_back({s.lambda, rescale(mani, *zq), *zq, q});
    }
    out.completed = base.completed;
    return out;
}

// ---- size persistence -------------------------------------------------------

struct PersistenceSample {
    cplx lambda{0.0};
    bool certified = false;
    double tangent_drift = 0.0;  // angle between c1(lambda) and c1(lambda0)
};

struct PersistenceResult {
    double delta = 0.0;
    std::vector<PersistenceSample> samples;
};

// Expands a disk around lambda0 by bisection, certifying size r1 on sampled
// circles until failure or the domain boundary.
inline PersistenceResult size_persistence_scan(const FamilySpec& fam,
                                               const periodic::PeriodicOrbit& saddle,
                                               cplx lambda0, Branch branch, double r1,
                                               int n_circle = 8, int M = kDefaultOrder,
                                               double tol = kDefaultResidualTol,
                                               const CertifyOptions& copts = {}) {
    PersistenceResult out;
    HenonComposition f0 = instantiate(fam, lambda0);
    LocalManifold m0 = parameterize(f0, saddle, branch, M, tol);
    ComplexPoint c1_0 = m0.coeffs[0];

    double delta_max = fam.domain_radius - std::abs(lambda0 - fam.domain_center);
    if (delta_max <= 0.0) return out;

    auto circle_ok = [&](double delta, std::vector<PersistenceSample>* rec) {
        bool all = true;
        for (int k = 0; k < n_circle; ++k) {
            cplx lam = lambda0 + delta * std::polar(1.0, 2.0 * M_PI * k / n_circle);
            PersistenceSample ps;
            ps.lambda = lam;
            continuation::MotionTrack tr = continuation::continue_orbit(
                fam, saddle, continuation::segment(lambda0, lam));
            if (!tr.completed) {
                all = false;
            } else {
                HenonComposition f = instantiate(fam, lam);
                periodic::PeriodicOrbit ol;
                ol.period = saddle.period;
                ol.points = tr.samples.back().points;
                periodic::compute_multipliers(f, ol);
                ol.type = periodic::classify(ol.u, ol.s);
                if (ol.type != periodic::OrbitType::saddle) {
                    all = false;
                } else {
                    try {
                        LocalManifold m = parameterize(f, ol, branch, M, tol);
                        SizeCertificate cert = certify_size(m, r1, copts);
                        ps.certified = cert.status == CertifyStatus::certified;
                        double ov = std::abs(hermitian_dot(c1_0, m.coeffs[0]));
                        ps.tangent_drift = std::acos(std::min(1.0, ov));
                    } catch (const std::exception&) {
                        ps.certified = false;
                    }
                    all = all && ps.certified;
                }
            }
            if (rec) rec->push_back(ps);
            if (!all && !rec) return false;
        }
        return all;
    };

    double boundary_eps = delta_max * (1.0 - 1e-9);
    if (circle_ok(boundary_eps, nullptr)) {
        out.delta = delta_max;
        circle_ok(boundary_eps, &out.samples);
        return out;
    }
    double lo = 0.0, hi = boundary_eps;
    for (int it = 0; it < 12; ++it) {
        double mid = 0.5 * (lo + hi);
        (circle_ok(mid, nullptr) ? lo : hi) = mid;
    }
    out.delta = lo;
    if (lo > 0.0) circle_ok(lo, &out.samples);
    return out;
}

// ---- serialization ----------------------------------------------------------

inline nlohmann::json manifold_to_json(const LocalManifold& m) {
    nlohmann::json coeffs = nlohmann::json::array();
    for (const auto& c : m.coeffs)
        coeffs.push_back({c.x.real(), c.x.imag(), c.y.real(), c.y.imag()});
    return {{"branch", to_string(m.branch)},
            {"orbit_id", m.orbit_id},
            {"period", m.period},
            {"p", {m.p.x.real(), m.p.x.imag(), m.p.y.real(), m.p.y.imag()}},
            {"mu", {m.mu.real(), m.mu.imag()}},
            {"coeffs", coeffs},
            {"rho_cert", m.rho_cert},
            {"r_cert", m.r_cert}};
}

// CSV columns: zeta_re, zeta_im, x_re, x_im, y_re, y_im.
inline void write_curve_csv(const LocalManifold& m, double rho, int n, std::ostream& os) {
    os << "zeta_re,zeta_im,x_re,x_im,y_re,y_im\n";
    for (int k = 0; k < n; ++k) {
        cplx zeta = rho * std::polar(1.0, 2.0 * M_PI * k / n);
        ComplexPoint z = evaluate(m, zeta).z;
        os << io::fmt17(zeta.real()) << ',' << io::fmt17(zeta.imag()) << ','
           << io::fmt17(z.x.real()) << ',' << io::fmt17(z.x.imag()) << ','
           << io::fmt17(z.y.real()) << ',' << io::fmt17(z.y.imag()) << '\n';
    }
}

}  // namespace manifold
}  // namespace henonlab

#endif
