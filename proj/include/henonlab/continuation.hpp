#ifndef HENONLAB_CONTINUATION_HPP
#define HENONLAB_CONTINUATION_HPP

#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "family.hpp"
#include "green.hpp"
#include "periodic.hpp"
#include "types.hpp"

namespace henonlab {
namespace continuation {

// Polyline of parameters inside the family domain disk.
struct ParamPath {
    std::vector<cplx> waypoints;
    bool adaptive = true;
};

inline ParamPath segment(cplx a, cplx b) { return {{a, b}, true}; }

enum class EventKind {
    unit_circle_crossing,
    indeterminate_crossing,
    collision,
    newton_failure,
    leaves_domain,
    step_underflow
};

inline const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::unit_circle_crossing: return "unit-circle crossing";
        case EventKind::indeterminate_crossing: return "indeterminate crossing";
        case EventKind::collision: return "collision";
        case EventKind::newton_failure: return "Newton failure";
        case EventKind::leaves_domain: return "leaves domain";
        default: return "step underflow";
    }
}

struct MotionEvent {
    cplx lambda_star{0.0};
    EventKind kind = EventKind::newton_failure;
    std::string note;
};

struct TrackSample {
    cplx lambda{0.0};
    std::vector<ComplexPoint> points;  // full cycle for orbits; single point otherwise
    cplx u{0.0}, s{0.0};
    periodic::OrbitType type = periodic::OrbitType::semi_neutral;
    double residual = 0.0;
};

struct MotionTrack {
    std::string kind = "orbit";  // orbit | intersection | basepoint
    std::vector<TrackSample> samples;
    std::vector<MotionEvent> events;
    bool completed = false;
};

struct ContinuationOptions {
    double newton_tol = 1e-12;
    int newton_max_iter = 40;
    double eps_unit = periodic::kDefaultEpsUnit;
    double lambda_star_tol = 1e-8;  // bisection refinement of event parameters
    double initial_rel_step = 0.01;  // fraction of the current polyline segment
    double max_rel_step = 0.05;
    double min_abs_step = 1e-10;
    double max_jump = 0.5;  // reject corrector landing this far from the predictor
};

namespace detail {

inline std::optional<ComplexPoint> solve_orbit_point(const FamilySpec& fam, cplx lambda, int n,
                                                     const ComplexPoint& guess,
                                                     const ContinuationOptions& opts) {
    periodic::NewtonOptions nop;
    nop.tol = opts.newton_tol;
    nop.max_iter = opts.newton_max_iter;
    HenonComposition f = instantiate(fam, lambda);
    auto r = periodic::detail::newton_periodic(f, n, guess, nop);
    if (!r) return std::nullopt;
    return r->z;
}

inline TrackSample orbit_sample(const FamilySpec& fam, cplx lambda, int n,
                                const ComplexPoint& z, const ContinuationOptions& opts) {
    HenonComposition f = instantiate(fam, lambda);
    TrackSample s;
    s.lambda = lambda;
    s.points.resize(n);
    s.points[0] = z;
    for (int i = 1; i < n; ++i) s.points[i] = f.apply(s.points[i - 1]);
    ComplexMatrix2 A = ComplexMatrix2::identity();
    for (const auto& p : s.points) A = f.derivative(p) * A;
    Eigen2 eig = eigen2x2(A);
    s.u = eig.mu1;
    s.s = eig.mu2;
    s.type = periodic::classify(s.u, s.s, opts.eps_unit);
    s.residual = periodic::orbit_residual(f, s.points);
    return s;
}

// Side of the unit band for a modulus: -1 below, 0 inside, +1 above.
inline int band_side(double m, double eps_unit) {
    if (m < 1.0 - eps_unit) return -1;
    if (m > 1.0 + eps_unit) return +1;
    return 0;
}

// Bisection between an out-of-band sample and the current one; the predicate
// is the sign of |multiplier| - 1, re-solving the orbit at each midpoint.
inline std::optional<cplx> refine_crossing(const FamilySpec& fam, int n, int which,
                                           cplx la, ComplexPoint za, int side_a, cplx lb,
                                           const ContinuationOptions& opts) {
    ComplexPoint z = za;
    for (int it = 0; it < 120 && std::abs(lb - la) > opts.lambda_star_tol; ++it) {
        cplx lm = 0.5 * (la + lb);
        auto r = solve_orbit_point(fam, lm, n, z, opts);
        if (!r) return std::nullopt;
        z = *r;
        TrackSample s = orbit_sample(fam, lm, n, z, opts);
        double m = which == 0 ? std::abs(s.u) : std::abs(s.s);
        if ((m > 1.0 ? +1 : -1) == side_a) {
            la = lm;
            za = z;
        } else {
            lb = lm;
        }
    }
    return 0.5 * (la + lb);
}

struct BandTracker {
    int last_side = 0;
    bool was_in_band = false;
    cplx last_out_lambda{0.0};
    ComplexPoint last_out_z;
};

}  // namespace detail

// Predictor-corrector continuation of a periodic orbit along a polyline path.
// Unit-circle crossings of either multiplier are refined by bisection; grazes
// that enter the band and retreat are reported as indeterminate.
inline MotionTrack continue_orbit(const FamilySpec& fam, const periodic::PeriodicOrbit& orbit,
                                  const ParamPath& path, const ContinuationOptions& opts = {}) {
    if (path.waypoints.size() < 2)
        throw std::invalid_argument("path needs at least two waypoints");
    for (cplx w : path.waypoints)
        if (!fam.contains(w)) throw std::invalid_argument("path leaves the family domain");

    const int n = orbit.period;
    MotionTrack track;

    cplx lam = path.waypoints.front();
    auto z0 = detail::solve_orbit_point(fam, lam, n, orbit.points[0], opts);
    if (!z0) {
        track.events.push_back({lam, EventKind::newton_failure, "orbit not verified at start"});
        return track;
    }
    ComplexPoint z = *z0;
    track.samples.push_back(detail::orbit_sample(fam, lam, n, z, opts));

    detail::BandTracker band[2];
    auto init_band = [&](const TrackSample& s) {
        double m[2] = {std::abs(s.u), std::abs(s.s)};
        for (int w = 0; w < 2; ++w) {
            band[w].last_side = detail::band_side(m[w], opts.eps_unit);
            band[w].last_out_lambda = s.lambda;
            band[w].last_out_z = s.points[0];
        }
    };
    init_band(track.samples.front());

    auto update_band = [&](const TrackSample& s) {
        double m[2] = {std::abs(s.u), std::abs(s.s)};
        for (int w = 0; w < 2; ++w) {
            int side = detail::band_side(m[w], opts.eps_unit);
            auto& b = band[w];
            if (side == 0) {
                b.was_in_band = true;
                continue;
            }
            if (b.last_side != 0 && side != b.last_side) {
                auto star = detail::refine_crossing(fam, n, w, b.last_out_lambda, b.last_out_z,
                                                    b.last_side, s.lambda, opts);
                track.events.push_back({star ? *star : s.lambda, EventKind::unit_circle_crossing,
                                        w == 0 ? "|u| crossed 1" : "|s| crossed 1"});
            } else if (b.last_side != 0 && side == b.last_side && b.was_in_band) {
                track.events.push_back({s.lambda, EventKind::indeterminate_crossing,
                                        w == 0 ? "|u| grazed the unit band" : "|s| grazed the unit band"});
            }
            b.last_side = side;
            b.was_in_band = false;
            b.last_out_lambda = s.lambda;
            b.last_out_z = s.points[0];
        }
    };

    cplx lam_prev = lam;
    ComplexPoint z_prev = z;
    bool have_prev = false;

    for (std::size_t seg = 0; seg + 1 < path.waypoints.size(); ++seg) {
        cplx w0 = path.waypoints[seg], w1 = path.waypoints[seg + 1];
        if (std::abs(w1 - w0) == 0.0) continue;
        double t = 0.0;
        double dt = opts.initial_rel_step;
        int streak = 0;
        while (t < 1.0) {
            double t_next = std::min(1.0, t + dt);
            cplx lam_next = w0 + (w1 - w0) * t_next;
            ComplexPoint pred = z;
            if (have_prev && std::abs(lam - lam_prev) > 0.0) {
                cplx ratio = (lam_next - lam) / (lam - lam_prev);
                pred = z + (z - z_prev) * ratio;
            }
            auto r = detail::solve_orbit_point(fam, lam_next, n, pred, opts);
            bool ok = r && sup_norm(*r - pred) <= opts.max_jump;
            if (ok) {
                lam_prev = lam;
                z_prev = z;
                have_prev = true;
                lam = lam_next;
                z = *r;
                t = t_next;
                TrackSample s = detail::orbit_sample(fam, lam, n, z, opts);
                update_band(s);
                track.samples.push_back(std::move(s));
                if (++streak >= 3 && path.adaptive) {
                    dt = std::min(dt * 2.0, opts.max_rel_step);
                    streak = 0;
                }
            } else {
                streak = 0;
                dt *= 0.5;
                if (dt * std::abs(w1 - w0) < opts.min_abs_step) {
                    track.events.push_back({lam, r ? EventKind::step_underflow
                                                   : EventKind::newton_failure,
                                            "continuation stalled"});
                    return track;
                }
            }
        }
    }
    track.completed = true;
    return track;
}

// ---- stability scan -------------------------------------------------------

struct ScanGrid {
    double re_lo = -1.0, re_hi = 1.0;
    double im_lo = -1.0, im_hi = 1.0;
    int nx = 8, ny = 8;

    cplx center(int i, int j) const {
        return {re_lo + (re_hi - re_lo) * (i + 0.5) / nx,
                im_lo + (im_hi - im_lo) * (j + 0.5) / ny};
    }
};

enum class CellVerdict { no_crossing, crossing, continuation_failure };

inline const char* to_string(CellVerdict v) {
    switch (v) {
        case CellVerdict::no_crossing: return "no-crossing";
        case CellVerdict::crossing: return "crossing";
        default: return "continuation-failure";
    }
}

struct ScanCell {
    int i = 0, j = 0;
    cplx lambda{0.0};
    CellVerdict verdict = CellVerdict::no_crossing;
    int n_orbits = 0;
    double min_multiplier_gap = 0.0;  // min over orbits/multipliers of ||m|-1|
};

struct ScanResult {
    ScanGrid grid;
    int period_max = 0;
    std::vector<ScanCell> cells;  // row-major, j*nx + i
};

// Census at every cell center, continued to the 4 neighbor centers; any
// crossing or graze anywhere in a cell's tracks marks the cell.
inline ScanResult stability_scan(const FamilySpec& fam, const ScanGrid& grid, int period_max,
                                 int jobs = 1, const periodic::NewtonOptions& nopts = {},
                                 const ContinuationOptions& copts = {}) {
    if (period_max < 1) throw std::invalid_argument("nothing to track");
    for (double re : {grid.re_lo, grid.re_hi})
        for (double im : {grid.im_lo, grid.im_hi})
            if (!fam.contains({re, im}))
                throw std::invalid_argument("scan grid leaves the family domain");

    ScanResult out;
    out.grid = grid;
    out.period_max = period_max;
    out.cells.resize(std::size_t(grid.nx) * grid.ny);

    auto do_cell = [&](int i, int j) {
        ScanCell cell;
        cell.i = i;
        cell.j = j;
        cell.lambda = grid.center(i, j);
        HenonComposition f = instantiate(fam, cell.lambda);
        auto orbits = periodic::census(f, period_max, periodic::filtration_box(f), nopts);
        cell.n_orbits = int(orbits.size());
        double gap = 1e300;
        for (const auto& o : orbits) {
            gap = std::min(gap, std::abs(std::abs(o.u) - 1.0));
            gap = std::min(gap, std::abs(std::abs(o.s) - 1.0));
        }
        cell.min_multiplier_gap = orbits.empty() ? 0.0 : gap;

        bool crossing = false, failure = orbits.empty();
        const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4 && !crossing; ++k) {
            int ni = i + di[k], nj = j + dj[k];
            if (ni < 0 || ni >= grid.nx || nj < 0 || nj >= grid.ny) continue;
            ParamPath leg = segment(cell.lambda, grid.center(ni, nj));
            for (const auto& o : orbits) {
                MotionTrack tr = continue_orbit(fam, o, leg, copts);
                for (const auto& e : tr.events)
                    if (e.kind == EventKind::unit_circle_crossing ||
                        e.kind == EventKind::indeterminate_crossing)
                        crossing = true;
                if (!tr.completed && !crossing) failure = true;
                if (crossing) break;
            }
        }
        cell.verdict = crossing ? CellVerdict::crossing
                                : (failure ? CellVerdict::continuation_failure
                                           : CellVerdict::no_crossing);
        out.cells[std::size_t(j) * grid.nx + i] = cell;
    };

    int total = grid.nx * grid.ny;
    jobs = std::max(1, std::min(jobs, total));
    if (jobs == 1) {
        for (int j = 0; j < grid.ny; ++j)
            for (int i = 0; i < grid.nx; ++i) do_cell(i, j);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < jobs; ++w)
            pool.emplace_back([&, w] {
                for (int c = w; c < total; c += jobs) do_cell(c % grid.nx, c / grid.nx);
            });
        for (auto& th : pool) th.join();
    }
    return out;
}

// ---- collision check ------------------------------------------------------

struct CollisionReport {
    double min_distance = 1e300;
    std::size_t track_i = 0, track_j = 0;
    cplx lambda{0.0};
    bool collision = false;
    double delta = 0.0;
};

namespace detail {

inline double track_point_distance(const TrackSample& a, const TrackSample& b) {
    double best = 1e300;
    for (const auto& pa : a.points)
        for (const auto& pb : b.points) best = std::min(best, sup_norm(pa - pb));
    return best;
}

inline const TrackSample& nearest_sample(const MotionTrack& t, cplx lambda) {
    std::size_t best = 0;
    double bd = 1e300;
    for (std::size_t k = 0; k < t.samples.size(); ++k) {
        double d = std::abs(t.samples[k].lambda - lambda);
        if (d < bd) {
            bd = d;
            best = k;
        }
    }
    return t.samples[best];
}

}  // namespace detail

// Minimum pairwise distance between tracked point sets, matched by nearest
// lambda sample; below delta the tracks are declared colliding.
inline CollisionReport collision_check(const std::vector<MotionTrack>& tracks,
                                       double delta = 1e-7) {
    if (tracks.size() < 2)
        throw std::invalid_argument("collision check needs at least two tracks");
    CollisionReport rep;
    rep.delta = delta;
    for (std::size_t i = 0; i < tracks.size(); ++i) {
        for (std::size_t j = i + 1; j < tracks.size(); ++j) {
            for (const auto& sa : tracks[i].samples) {
                if (tracks[j].samples.empty()) continue;
                const TrackSample& sb = detail::nearest_sample(tracks[j], sa.lambda);
                double d = detail::track_point_distance(sa, sb);
                if (d < rep.min_distance) {
                    rep.min_distance = d;
                    rep.track_i = i;
                    rep.track_j = j;
                    rep.lambda = sa.lambda;
                }
            }
        }
    }
    rep.collision = rep.min_distance < delta;
    return rep;
}

// ---- Green distortion along a motion --------------------------------------

struct DistortionReport {
    double max_distortion = 1.0;  // max over samples of max(ratio, 1/ratio)
    bool vacuous = false;         // G+ classified zero at the base point
    double harnack_bound = 0.0;   // (1+rho)/(1-rho)
    cplx worst_lambda{0.0};
    int samples_used = 0;
};

inline double harnack_constant(double rho) {
    if (rho < 0.0 || rho >= 1.0) throw std::invalid_argument("need 0 <= rho < 1");
    return (1.0 + rho) / (1.0 - rho);
}

inline DistortionReport motion_green_distortion(const FamilySpec& fam, const MotionTrack& track,
                                                double rho,
                                                double tol = green::kDefaultTol,
                                                int max_iter = green::kDefaultMaxIter) {
    if (track.samples.empty()) throw std::invalid_argument("empty track");
    DistortionReport rep;
    rep.harnack_bound = harnack_constant(rho);
    const TrackSample& base = track.samples.front();
    HenonComposition f0 = instantiate(fam, base.lambda);
    green::GreenValue g0 = green::green_plus(f0, base.points[0], tol, max_iter);
    if (g0.status != green::GreenStatus::converged || g0.value < green::kZeroFloor) {
        rep.vacuous = true;  // G+ == 0 along the motion: nothing to compare
        return rep;
    }
    for (const auto& s : track.samples) {
        HenonComposition fl = instantiate(fam, s.lambda);
        green::GreenValue g = green::green_plus(fl, s.points[0], tol, max_iter);
        if (g.status != green::GreenStatus::converged || g.value <= 0.0) continue;
        double ratio = g.value / g0.value;
        double dist = std::max(ratio, 1.0 / ratio);
        if (dist > rep.max_distortion) {
            rep.max_distortion = dist;
            rep.worst_lambda = s.lambda;
        }
        ++rep.samples_used;
    }
    return rep;
}

// ---- serialization --------------------------------------------------------

inline nlohmann::json sample_to_json(const TrackSample& s) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : s.points)
        pts.push_back({p.x.real(), p.x.imag(), p.y.real(), p.y.imag()});
    return {{"lambda", {s.lambda.real(), s.lambda.imag()}},
            {"points", pts},
            {"u", {s.u.real(), s.u.imag()}},
            {"s", {s.s.real(), s.s.imag()}},
            {"type", periodic::to_string(s.type)},
            {"residual", s.residual}};
}

inline void write_track_jsonl(const MotionTrack& track, std::ostream& os) {
    for (const auto& s : track.samples) os << sample_to_json(s).dump() << '\n';
}

}  // namespace continuation
}  // namespace henonlab

#endif
