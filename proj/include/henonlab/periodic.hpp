#ifndef HENONLAB_PERIODIC_HPP
#define HENONLAB_PERIODIC_HPP

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "green.hpp"
#include "henon.hpp"
#include "types.hpp"

namespace henonlab {
namespace periodic {

enum class OrbitType { saddle, attracting, repelling, semi_neutral };

inline const char* to_string(OrbitType t) {
    switch (t) {
        case OrbitType::saddle: return "saddle";
        case OrbitType::attracting: return "attracting";
        case OrbitType::repelling: return "repelling";
        default: return "semi-neutral";
    }
}

inline OrbitType type_from_string(const std::string& s) {
    if (s == "saddle") return OrbitType::saddle;
    if (s == "attracting") return OrbitType::attracting;
    if (s == "repelling") return OrbitType::repelling;
    return OrbitType::semi_neutral;
}

inline constexpr double kDefaultEpsUnit = 1e-6;

inline OrbitType classify(cplx u, cplx s, double eps_unit = kDefaultEpsUnit) {
    double au = std::abs(u), as = std::abs(s);
    if (au > 1.0 + eps_unit && as < 1.0 - eps_unit) return OrbitType::saddle;
    if (au < 1.0 - eps_unit && as < 1.0 - eps_unit) return OrbitType::attracting;
    if (au > 1.0 + eps_unit && as > 1.0 + eps_unit) return OrbitType::repelling;
    return OrbitType::semi_neutral;
}

struct PeriodicOrbit {
    int period = 1;  // minimal period
    std::vector<ComplexPoint> points;
    cplx u{0.0}, s{0.0};  // multipliers, |u| >= |s|
    ComplexPoint eu, es;  // unit eigenvectors of Df^n at points[0]
    OrbitType type = OrbitType::semi_neutral;
    double residual = 0.0;  // max over cycle of ||f(z_i) - z_{i+1}||
    bool near_degenerate = false;
    bool defective = false;
    std::string id;
};

struct NewtonOptions {
    double tol = 1e-12;
    int max_iter = 60;
    double dedup_tol = 1e-6;
    double eps_unit = kDefaultEpsUnit;
    int grid_per_axis = 8;      // 4D seed grid resolution
    int random_seeds = 4000;    // deterministic extra seeds
    std::uint64_t rng_seed = 0x5eedcafe1234ULL;
    double divergence_radius = 1e6;
    double degenerate_threshold = 1e8;  // ||(Df^n - I)^-1|| above this flags near-degeneracy
};

struct SeedBox {
    double x_lo = -3.0, x_hi = 3.0;  // bounds for both re/im of x
    double y_lo = -3.0, y_hi = 3.0;
};

namespace detail {

struct NewtonResult {
    ComplexPoint z;
    double residual = 0.0;
    bool near_degenerate = false;
};

inline std::optional<NewtonResult> newton_periodic(const HenonComposition& f, int n,
                                                   ComplexPoint z,
                                                   const NewtonOptions& opts) {
    for (int it = 0; it < opts.max_iter; ++it) {
        ComplexPoint fz;
        ComplexMatrix2 J;
        try {
            J = f.derivative_n(z, n, &fz);
        } catch (const NumericalEscape&) {
            return std::nullopt;
        }
        ComplexPoint F = fz - z;
        double res = sup_norm(F);
        ComplexMatrix2 A = J - ComplexMatrix2::identity();
        if (res < opts.tol) {
            NewtonResult out{z, res, false};
            auto sv = singular_values2x2(A);
            if (sv[1] < 1.0 / opts.degenerate_threshold) out.near_degenerate = true;
            return out;
        }
        ComplexPoint step;
        try {
            step = solve2x2(A, F);
        } catch (const std::domain_error&) {
            return std::nullopt;
        }
        z = z - step;
        if (!is_finite(z) || sup_norm(z) > opts.divergence_radius) return std::nullopt;
    }
    return std::nullopt;
}

inline bool points_close(const ComplexPoint& a, const ComplexPoint& b, double tol) {
    return sup_norm(a - b) < tol;
}

// Matches orbits pointwise after the best cyclic rotation.
inline bool same_orbit(const std::vector<ComplexPoint>& a, const std::vector<ComplexPoint>& b,
                       double tol) {
    if (a.size() != b.size()) return false;
    std::size_t n = a.size();
    for (std::size_t rot = 0; rot < n; ++rot) {
        bool ok = true;
        for (std::size_t i = 0; i < n && ok; ++i)
            ok = points_close(a[i], b[(i + rot) % n], tol);
        if (ok) return true;
    }
    return false;
}

// Canonical rotation: start at the lexicographically smallest point.
inline void canonicalize(std::vector<ComplexPoint>& pts) {
    auto key = [](const ComplexPoint& p) {
        return std::array<double, 4>{p.x.real(), p.x.imag(), p.y.real(), p.y.imag()};
    };
    std::size_t best = 0;
    for (std::size_t i = 1; i < pts.size(); ++i)
        if (key(pts[i]) < key(pts[best])) best = i;
    std::rotate(pts.begin(), pts.begin() + best, pts.end());
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string orbit_hash(const std::vector<ComplexPoint>& pts) {
    std::ostringstream os;
    os.precision(6);
    os << std::scientific;
    for (const auto& p : pts)
        os << p.x.real() << ',' << p.x.imag() << ',' << p.y.real() << ',' << p.y.imag() << ';';
    std::ostringstream id;
    id << std::hex << fnv1a(os.str());
    return id.str();
}

}  // namespace detail

// Eigen-data of Df^n along the orbit; |u| >= |s|.
inline void compute_multipliers(const HenonComposition& f, PeriodicOrbit& orbit) {
    ComplexMatrix2 A = ComplexMatrix2::identity();
    for (const auto& p : orbit.points) A = f.derivative(p) * A;
    Eigen2 eig = eigen2x2(A);
    orbit.u = eig.mu1;
    orbit.s = eig.mu2;
    orbit.eu = eig.v1;
    orbit.es = eig.v2;
    orbit.defective = eig.defective;
}

inline double orbit_residual(const HenonComposition& f, const std::vector<ComplexPoint>& pts) {
    double res = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        res = std::max(res, sup_norm(f.apply(pts[i]) - pts[(i + 1) % pts.size()]));
    return res;
}

// Builds the orbit record from one fixed point of f^n: determines the minimal
// period (divisor check), collects the cycle, multipliers, type.
inline PeriodicOrbit make_orbit(const HenonComposition& f, const ComplexPoint& z, int n,
                                const NewtonOptions& opts, bool near_degenerate) {
    PeriodicOrbit orbit;
    int minimal = n;
    for (int m = 1; m < n; ++m) {
        if (n % m != 0) continue;
        if (sup_norm(f.iterate(z, m) - z) < opts.dedup_tol) {
            minimal = m;
            break;
        }
    }
    orbit.period = minimal;
    orbit.points.resize(minimal);
    orbit.points[0] = z;
    for (int i = 1; i < minimal; ++i) orbit.points[i] = f.apply(orbit.points[i - 1]);
    detail::canonicalize(orbit.points);
    orbit.residual = orbit_residual(f, orbit.points);
    orbit.near_degenerate = near_degenerate;
    compute_multipliers(f, orbit);
    orbit.type = classify(orbit.u, orbit.s, opts.eps_unit);
    orbit.id = detail::orbit_hash(orbit.points);
    return orbit;
}

// Newton census of orbits whose period divides n, seeded on a deterministic
// grid plus pseudorandom points in the seed box.
inline std::vector<PeriodicOrbit> find_periodic(const HenonComposition& f, int n,
                                                const SeedBox& box = {},
                                                const NewtonOptions& opts = {}) {
    if (n < 1) throw std::invalid_argument("find_periodic needs n >= 1");
    std::vector<ComplexPoint> seeds;
    int g = opts.grid_per_axis;
    auto coord = [](double lo, double hi, int i, int g_) {
        return lo + (hi - lo) * (i + 0.5) / g_;
    };
    for (int i = 0; i < g; ++i)
        for (int j = 0; j < g; ++j)
            for (int k = 0; k < g; ++k)
                for (int l = 0; l < g; ++l)
                    seeds.push_back({cplx(coord(box.x_lo, box.x_hi, i, g),
                                          coord(box.x_lo, box.x_hi, j, g)),
                                     cplx(coord(box.y_lo, box.y_hi, k, g),
                                          coord(box.y_lo, box.y_hi, l, g))});
    std::mt19937_64 rng(opts.rng_seed);
    std::uniform_real_distribution<double> ux(box.x_lo, box.x_hi), uy(box.y_lo, box.y_hi);
    for (int i = 0; i < opts.random_seeds; ++i)
        seeds.push_back({cplx(ux(rng), ux(rng)), cplx(uy(rng), uy(rng))});

    std::vector<PeriodicOrbit> found;
    for (const auto& seed : seeds) {
        auto root = detail::newton_periodic(f, n, seed, opts);
        if (!root) continue;
        PeriodicOrbit orbit = make_orbit(f, root->z, n, opts, root->near_degenerate);
        bool dup = false;
        for (const auto& o : found) {
            if (o.period == orbit.period &&
                detail::same_orbit(o.points, orbit.points, opts.dedup_tol)) {
                dup = true;
                break;
            }
        }
        if (!dup) found.push_back(std::move(orbit));
    }
    std::sort(found.begin(), found.end(), [](const PeriodicOrbit& a, const PeriodicOrbit& b) {
        if (a.period != b.period) return a.period < b.period;
        return a.id < b.id;
    });
    return found;
}

// Census of all orbits with minimal period <= n_max.
inline std::vector<PeriodicOrbit> census(const HenonComposition& f, int n_max,
                                         const SeedBox& box = {}, const NewtonOptions& opts = {}) {
    std::vector<PeriodicOrbit> all;
    for (int n = 1; n <= n_max; ++n) {
        for (auto& orbit : find_periodic(f, n, box, opts)) {
            bool dup = false;
            for (const auto& o : all)
                if (o.period == orbit.period &&
                    detail::same_orbit(o.points, orbit.points, opts.dedup_tol)) {
                    dup = true;
                    break;
                }
            if (!dup) all.push_back(std::move(orbit));
        }
    }
    return all;
}

inline SeedBox filtration_box(const HenonComposition& f) {
    double R = green::escape_radius(f);
    return {-R, R, -R, R};
}

struct SaddleDB {
    std::string family_id;
    cplx lambda{0.0};
    int max_period = 0;
    std::vector<PeriodicOrbit> orbits;

    bool add(const PeriodicOrbit& orbit, double dedup_tol = 1e-6) {
        for (const auto& o : orbits)
            if (o.period == orbit.period &&
                detail::same_orbit(o.points, orbit.points, dedup_tol))
                return false;
        orbits.push_back(orbit);
        return true;
    }

    std::vector<const PeriodicOrbit*> saddles() const {
        std::vector<const PeriodicOrbit*> out;
        for (const auto& o : orbits)
            if (o.type == OrbitType::saddle) out.push_back(&o);
        return out;
    }
};

inline nlohmann::json orbit_to_json(const PeriodicOrbit& o) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : o.points)
        pts.push_back({p.x.real(), p.x.imag(), p.y.real(), p.y.imag()});
    return {{"id", o.id},
            {"period", o.period},
            {"points", pts},
            {"u", {o.u.real(), o.u.imag()}},
            {"s", {o.s.real(), o.s.imag()}},
            {"type", to_string(o.type)},
            {"residual", o.residual}};
}

inline PeriodicOrbit orbit_from_json(const nlohmann::json& j) {
    PeriodicOrbit o;
    o.id = j.at("id").get<std::string>();
    o.period = j.at("period").get<int>();
    for (const auto& p : j.at("points"))
        o.points.push_back({cplx(p[0].get<double>(), p[1].get<double>()),
                            cplx(p[2].get<double>(), p[3].get<double>())});
    o.u = cplx(j.at("u")[0].get<double>(), j.at("u")[1].get<double>());
    o.s = cplx(j.at("s")[0].get<double>(), j.at("s")[1].get<double>());
    o.type = type_from_string(j.at("type").get<std::string>());
    o.residual = j.at("residual").get<double>();
    return o;
}

inline void write_jsonl(const SaddleDB& db, std::ostream& os) {
    for (const auto& o : db.orbits) os << orbit_to_json(o).dump() << '\n';
}

inline SaddleDB read_jsonl(std::istream& is) {
    SaddleDB db;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        db.orbits.push_back(orbit_from_json(nlohmann::json::parse(line)));
        db.max_period = std::max(db.max_period, db.orbits.back().period);
    }
    return db;
}

}  // namespace periodic
}  // namespace henonlab

#endif
