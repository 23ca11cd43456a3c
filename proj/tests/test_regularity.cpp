#include <doctest.h>

#include <henonlab/regularity.hpp>

using namespace henonlab;
using namespace henonlab::regularity;

namespace {

HenonComposition horseshoe() {
    return HenonComposition({HenonFactor({cplx(-6.0), cplx(0.0), cplx(1.0)}, cplx(0.2))});
}

periodic::NewtonOptions light_census() {
    periodic::NewtonOptions o;
    o.grid_per_axis = 6;
    o.random_seeds = 1000;
    return o;
}

manifold::CertifyOptions fast_certify() {
    manifold::CertifyOptions o;
    o.n_angles = 32;
    o.n_radial = 64;
    return o;
}

periodic::PeriodicOrbit saddle_fixed_point(const HenonComposition& f) {
    for (const auto& o : periodic::find_periodic(f, 1, periodic::filtration_box(f)))
        if (o.type == periodic::OrbitType::saddle && o.points[0].x.real() > 0.0) return o;
    REQUIRE(false);
    return {};
}

// g_lambda = T o f o T^-1 with T(x,y) = (x+lambda, y+a*lambda) applied to the
// horseshoe map: everything moves by (lambda, a*lambda), exactly.
FamilySpec conjugated_horseshoe() {
    cplx c(-6.0), a(0.2);
    FamilySpec fam;
    FamilyFactor ff;
    ff.p = {{c, 1.0 - a * a, cplx(1.0)}, {cplx(0.0), cplx(-2.0)}, {cplx(1.0)}};
    ff.a = {a};
    fam.factors.push_back(ff);
    fam.domain_center = cplx(0.0);
    fam.domain_radius = 1.0;
    return fam;
}

}  // namespace

TEST_CASE("homoclinic search finds transverse crossings and filters the trivial root") {
    HenonComposition f = horseshoe();
    auto orbits = periodic::census(f, 3, periodic::filtration_box(f), light_census());
    int audited = 0;
    for (const auto& orbit : orbits) {
        if (orbit.type != periodic::OrbitType::saddle) continue;
        ++audited;
        auto wu = manifold::parameterize(f, orbit, manifold::Branch::unstable);
        auto ws = manifold::parameterize(f, orbit, manifold::Branch::stable);
        auto pts = find_intersections(wu, ws);
        REQUIRE(!pts.empty());
        bool transverse = false;
        for (const auto& pt : pts) {
            transverse |= !pt.tangency && pt.theta > 0.1;
            // The shared base point is not a homoclinic point.
            CHECK((std::abs(pt.zeta) > 1e-6 * wu.rho_cert ||
                   std::abs(pt.xi) > 1e-6 * ws.rho_cert));
            // Each point re-verifies its defining equation.
            ComplexPoint gap = manifold::evaluate(wu, pt.zeta).z - manifold::evaluate(ws, pt.xi).z;
            CHECK(sup_norm(gap) < 1e-9 * std::max(1.0, sup_norm(pt.point)));
        }
        CHECK(transverse);
    }
    CHECK(audited >= 3);  // two fixed saddles, a 2-cycle, and 3-cycles
}

TEST_CASE("intersections are equivariant under (zeta, xi) -> (u zeta, s xi)") {
    HenonComposition f = horseshoe();
    periodic::PeriodicOrbit orbit = saddle_fixed_point(f);
    auto wu = manifold::parameterize(f, orbit, manifold::Branch::unstable);
    auto ws = manifold::parameterize(f, orbit, manifold::Branch::stable);
    auto pts = find_intersections(wu, ws);
    REQUIRE(!pts.empty());
    int verified = 0;
    for (std::size_t i = 0; i < pts.size() && verified < 3; ++i) {
        auto img = polish_intersection(wu, ws, orbit.u * pts[i].zeta, orbit.s * pts[i].xi);
        if (!img) continue;
        ++verified;
        CHECK(sup_norm(img->point - f.apply(pts[i].point)) < 1e-7);
        CHECK(img->theta > 0.0);
    }
    CHECK(verified >= 1);
}

TEST_CASE("exposure: horseshoe manifolds are exposed, a basin-bound disk is not") {
    HenonComposition f = horseshoe();
    periodic::PeriodicOrbit orbit = saddle_fixed_point(f);
    auto wu = manifold::parameterize(f, orbit, manifold::Branch::unstable);
    auto ws = manifold::parameterize(f, orbit, manifold::Branch::stable);
    ExposureReport ru = exposure(f, wu, std::min(wu.rho_cert, 50.0));
    ExposureReport rs = exposure(f, ws, std::min(ws.rho_cert, 50.0));
    CHECK(ru.exposed);
    CHECK(ru.g > kEpsExposed);
    CHECK(rs.exposed);
    CHECK(rs.g > kEpsExposed);

    // A disk inside the basin of an attracting fixed point: G+ vanishes on all
    // of it, so an "unstable" manifold planted there is not exposed.
    HenonComposition g({HenonFactor({cplx(0.0), cplx(0.0), cplx(1.0)}, cplx(0.3))});
    auto flat = manifold::synthetic_manifold({0.0, 0.0}, {ComplexPoint{1.0, 0.0}}, 1e-3);
    ExposureReport rb = exposure(g, flat, 1e-3);
    CHECK(!rb.exposed);
    CHECK(rb.g == 0.0);
    CHECK(!rb.undecided);

    CHECK_THROWS_AS(exposure(f, wu, 0.0), std::invalid_argument);
}

TEST_CASE("regular-point certificates: saddles, homoclinic points, empty shells") {
    HenonComposition f = horseshoe();
    auto orbits = periodic::census(f, 6, periodic::filtration_box(f), light_census());
    auto atlas = build_atlas(f, orbits, 24, fast_certify(), 2);
    REQUIRE(atlas.size() >= 5);

    // p itself a saddle: the constant witness sequence certifies it.
    const CertifiedSaddle* fixed = nullptr;
    for (const auto& s : atlas)
        if (s.orbit.period == 1 && s.orbit.points[0].x.real() > 0.0) fixed = &s;
    REQUIRE(fixed);
    auto cert = certify_regular(f, fixed->orbit.points[0], atlas, 0.5, 3);
    CHECK(cert.pass);
    REQUIRE(cert.witnesses.size() == 3);
    for (const auto& w : cert.witnesses) {
        CHECK(w.distance == 0.0);
        CHECK(w.size >= 0.5);
    }
    CHECK(cert.transverse);
    CHECK(cert.hausdorff > kDeltaDistinct);
    CHECK(cert.exposure_g > 0.0);

    // No saddles anywhere near: failure names the missing shell.
    auto far = certify_regular(f, ComplexPoint{cplx(100.0), cplx(100.0)}, atlas, 0.5, 3);
    CHECK(!far.pass);
    CHECK(far.note.find("no witness") != std::string::npos);

    // A transverse homoclinic point is regular: witnesses at geometrically
    // decreasing distances from the period <= 6 census.
    auto pts = find_intersections(fixed->wu, fixed->ws);
    REQUIRE(!pts.empty());
    auto hc = certify_regular(f, pts[0].point, atlas, 0.8, 3);
    CHECK(hc.pass);
    REQUIRE(hc.witnesses.size() == 3);
    for (std::size_t i = 1; i < hc.witnesses.size(); ++i) {
        CHECK(hc.witnesses[i].distance < hc.witnesses[i - 1].distance);
        CHECK(hc.witnesses[i].distance <= hc.witnesses[i - 1].distance / 2.0);
    }
    for (const auto& w : hc.witnesses) CHECK(w.size >= 0.8);
    // Monotone in the scale: certifying at r implies certifying below r.
    CHECK(certify_regular(f, pts[0].point, atlas, 0.4, 3).pass);

    CHECK_THROWS_AS(certify_regular(f, pts[0].point, atlas, -1.0, 3), std::invalid_argument);
}

TEST_CASE("convergence check: constant sequences, nearby saddles, a second branch") {
    HenonComposition f = horseshoe();
    auto orbits = periodic::census(f, 6, periodic::filtration_box(f), light_census());
    periodic::PeriodicOrbit base = saddle_fixed_point(f);
    auto limit = manifold::parameterize(f, base, manifold::Branch::unstable);

    // Constant sequence: all distances zero.
    auto rep = convergence_check({limit, limit, limit}, limit, 0.3);
    for (double d : rep.distances) CHECK(d < 1e-12);
    CHECK(rep.monotone);
    CHECK(rep.multiplicity_one);

    // Saddles approaching a homoclinic point h on W^u(p): their unstable
    // leaves converge to the leaf of h, which is W^u(p) itself.
    auto ws = manifold::parameterize(f, base, manifold::Branch::stable);
    auto hpts = find_intersections(limit, ws);
    REQUIRE(!hpts.empty());
    ComplexPoint h = hpts[0].point;
    std::vector<std::pair<double, const periodic::PeriodicOrbit*>> near;
    for (const auto& o : orbits) {
        if (o.type != periodic::OrbitType::saddle || o.id == base.id) continue;
        double d = 1e300;
        for (const auto& q : o.points) d = std::min(d, sup_norm(q - h));
        near.push_back({d, &o});
    }
    std::sort(near.begin(), near.end());
    REQUIRE(near.size() >= 4);
    std::vector<manifold::LocalManifold> wits;
    for (int i = 3; i >= 0; --i) {
        // Rebase the orbit at its point closest to h so the witness leaf is
        // expressed near the limit graph.
        periodic::PeriodicOrbit o = *near[i].second;
        std::size_t best = 0;
        for (std::size_t j = 1; j < o.points.size(); ++j)
            if (sup_norm(o.points[j] - h) < sup_norm(o.points[best] - h)) best = j;
        std::rotate(o.points.begin(), o.points.begin() + best, o.points.end());
        periodic::compute_multipliers(f, o);
        wits.push_back(manifold::parameterize(f, o, manifold::Branch::unstable));
    }
    auto conv = convergence_check(wits, limit, 0.2);
    CHECK(conv.monotone);
    CHECK(conv.multiplicity_one);
    CHECK(conv.distances.front() > conv.distances.back());

    // Injected second branch: x = zeta^2 is not single-valued over the disk.
    auto good = manifold::synthetic_manifold({0.0, 0.0}, {ComplexPoint{1.0, 0.0}}, 1e6);
    auto folded = manifold::synthetic_manifold(
        {0.0, 0.0}, {ComplexPoint{0.0, 0.0}, ComplexPoint{1.0, 0.0}}, 1e6);
    auto multi = convergence_check({good, good, folded}, good, 0.3);
    CHECK(!multi.multiplicity_one);
    CHECK(!multi.single_valued.back());

    CHECK_THROWS_AS(convergence_check({limit}, limit, 0.3), std::invalid_argument);
}

TEST_CASE("uniform regularity audit passes in the horseshoe and fails past a crossing") {
    HenonComposition f = horseshoe();
    auto rep = uniform_regularity_audit(f, 2, 0.05, 0.1, light_census(), fast_certify(), 24, 2);
    CHECK(rep.pass);
    CHECK(!rep.entries.empty());
    CHECK(rep.min_size >= 0.05);
    CHECK(rep.min_angle >= 0.1);
    for (const auto& e : rep.entries) {
        CHECK(e.pass);
        CHECK(e.n_homoclinic > 0);
    }
    auto j = uniform_report_to_json(rep);
    CHECK(j["schema_version"] == 1);
    CHECK(j["pass"] == true);
    CHECK(j["saddles"].size() == rep.entries.size());

    // c = -0.7, a = 0.3 sits past the period-doubling of the quadratic family
    // c(lambda) = 0.2 - 1.5 lambda: the bifurcated 2-cycle is not a saddle.
    HenonComposition g({HenonFactor({cplx(-0.7), cplx(0.0), cplx(1.0)}, cplx(0.3))});
    auto bad = uniform_regularity_audit(g, 2, 0.05, 0.1, light_census(), fast_certify(), 24, 2);
    CHECK(!bad.pass);

    CHECK_THROWS_AS(uniform_regularity_audit(f, 0, 0.05, 0.1), std::invalid_argument);
}

TEST_CASE("quasi-expansion audit with suggested constants and threshold semantics") {
    HenonComposition f = horseshoe();
    auto orbits = periodic::census(f, 2, periodic::filtration_box(f), light_census());
    auto atlas = build_atlas(f, orbits, 24, fast_certify(), 2);
    REQUIRE(atlas.size() >= 3);

    auto rep = qe_audit(f, atlas, 1.0, 30.0, 0.01, 1e6, fast_certify());
    CHECK(rep.pass);
    CHECK(rep.failures.empty());
    for (const auto& e : rep.entries) {
        CHECK(e.embedded_u);
        CHECK(e.embedded_s);
        CHECK(e.g_plus > 0.01);
        CHECK(e.g_minus > 0.01);
    }
    // The suggested tuple is feasible by construction.
    CHECK(rep.suggest_eta > 0.0);
    CHECK(rep.suggest_A < 1e6);
    auto again = qe_audit(f, atlas, rep.suggest_r, rep.suggest_delta, rep.suggest_eta,
                          rep.suggest_A, fast_certify());
    CHECK(again.pass);

    // An unattainable expansion floor fails and names a witness saddle.
    auto fail = qe_audit(f, atlas, 1.0, 30.0, 1e9, 1e6, fast_certify());
    CHECK(!fail.pass);
    REQUIRE(!fail.failures.empty());
    CHECK(fail.failures[0].find("saddle ") == 0);
    CHECK(fail.failures[0].find("eta") != std::string::npos);

    // Reported areas agree with the manifolds module on the same disks.
    const auto& s0 = atlas[0];
    double t = regularity::detail::ambient_zeta_radius(s0.wu, 1.0);
    CHECK(rep.entries[0].area_u == doctest::Approx(manifold::area(s0.wu, t)).epsilon(1e-6));

    auto j = qe_report_to_json(rep);
    CHECK(j["schema_version"] == 1);
    CHECK(j["suggest"]["eta"] == doctest::Approx(rep.suggest_eta));

    CHECK_THROWS_AS(qe_audit(f, {}, 1.0, 30.0, 0.01, 1e6), std::invalid_argument);
}

TEST_CASE("homoclinic tracker follows the exactly-conjugated family") {
    FamilySpec fam = conjugated_horseshoe();
    cplx a(0.2);
    HenonComposition f = instantiate(fam, cplx(0.0));
    periodic::PeriodicOrbit orbit = saddle_fixed_point(f);
    auto wu = manifold::parameterize(f, orbit, manifold::Branch::unstable);
    auto ws = manifold::parameterize(f, orbit, manifold::Branch::stable);
    auto pts = find_intersections(wu, ws);
    REQUIRE(!pts.empty());
    const IntersectionPoint& h0 = pts[0];

    auto tracker = homoclinic_tracker(orbit, orbit, h0.zeta, h0.xi);
    auto motion = manifold::natural_continuation(fam, orbit, manifold::Branch::unstable,
                                                 h0.point, h0.zeta, tracker,
                                                 continuation::segment(cplx(0.0), cplx(0.3)));
    CHECK(motion.completed);
    REQUIRE(!motion.samples.empty());
    for (std::size_t i = 0; i < motion.samples.size(); i += motion.samples.size() / 4 + 1) {
        const auto& s = motion.samples[i];
        ComplexPoint expect{h0.point.x + s.lambda, h0.point.y + a * s.lambda};
        CHECK(sup_norm(s.q - expect) < 1e-6);
    }
    const auto& last = motion.samples.back();
    CHECK(std::abs(last.lambda - cplx(0.3)) < 1e-12);
    CHECK(sup_norm(last.q - ComplexPoint{h0.point.x + 0.3, h0.point.y + 0.06}) < 1e-6);

    // Exposure persists along the tracked family.
    for (std::size_t i = 0; i < motion.samples.size(); i += motion.samples.size() / 2 + 1) {
        const auto& s = motion.samples[i];
        HenonComposition fl = instantiate(fam, s.lambda);
        ExposureReport ex = exposure(fl, s.manifold, std::min(s.manifold.rho_cert, 50.0));
        CHECK(ex.exposed);
    }
}
