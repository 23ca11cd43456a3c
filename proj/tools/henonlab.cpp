// henonlab command-line front end: configuration, dispatch, and bit-exact
// output formats for the numerical laboratory.

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <henonlab/continuation.hpp>
#include <henonlab/family.hpp>
#include <henonlab/green.hpp>
#include <henonlab/henon.hpp>
#include <henonlab/io.hpp>
#include <henonlab/manifold.hpp>
#include <henonlab/periodic.hpp>
#include <henonlab/regularity.hpp>
#include <henonlab/types.hpp>

namespace hl = henonlab;
namespace fs = std::filesystem;
using nlohmann::json;

static constexpr const char* kToolVersion = "henonlab 0.1.0";
static constexpr int kManifestSchema = 1;

// Controlled exit with the error contract: single-line JSON on stderr.
struct CliError {
    int code;
    std::string msg;
};

// ---- configuration ---------------------------------------------------------

static const std::set<std::string> kKnownTolerances = {
    "green_tol",      "green_max_iter", "newton_tol",     "newton_max_iter",
    "dedup_tol",      "eps_unit",       "grid_per_axis",  "random_seeds",
    "residual_tol",   "slope_tol",      "certify_angles", "certify_radial",
    "theta_tangent",  "delta_distinct", "eps_exposed",    "delta_collision",
    "lambda_star_tol"};

struct Config {
    hl::FamilySpec family;
    std::uint64_t seed = 0;
    std::map<std::string, double> tol;
    std::string out_dir = "out";
    json raw;

    double tolv(const std::string& name, double fallback) const {
        auto it = tol.find(name);
        return it == tol.end() ? fallback : it->second;
    }
};

static void require_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw CliError{2, "unknown key '" + it.key() + "' in " + where};
}

static Config load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw CliError{2, "cannot open config file: " + path};
    json j;
    try {
        j = json::parse(is);
    } catch (const json::exception& e) {
        throw CliError{2, std::string("config is not valid JSON: ") + e.what()};
    }
    require_keys(j, {"family", "seed", "tolerances", "output_dir"}, "config");
    if (!j.contains("family")) throw CliError{2, "config needs a 'family' object"};
    require_keys(j.at("family"), {"factors", "domain", "id"}, "config.family");
    require_keys(j.at("family").at("domain"), {"center", "radius"}, "config.family.domain");
    for (const auto& jf : j.at("family").at("factors"))
        require_keys(jf, {"p", "a"}, "config.family.factors[]");

    Config c;
    c.raw = j;
    try {
        c.family = hl::family_from_json(j.at("family"));
    } catch (const std::exception& e) {
        throw CliError{2, std::string("invalid family: ") + e.what()};
    }
    if (j.at("family").contains("id")) c.family.id = j.at("family").at("id").get<std::string>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("tolerances")) {
        for (auto it = j.at("tolerances").begin(); it != j.at("tolerances").end(); ++it) {
            if (!kKnownTolerances.count(it.key()))
                throw CliError{2, "unknown tolerance '" + it.key() + "'"};
            if (!it.value().is_number())
                throw CliError{2, "tolerance '" + it.key() + "' must be a number"};
            c.tol[it.key()] = it.value().get<double>();
        }
    }
    if (j.contains("output_dir")) c.out_dir = j.at("output_dir").get<std::string>();
    return c;
}

// ---- run context: lock file, output registry, manifest ---------------------

struct DirLock {
    std::string path;
    int fd = -1;

    explicit DirLock(const std::string& dir) {
        path = dir + "/.henonlab.lock";
        fd = ::open(path.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0) throw CliError{2, "output directory is locked by another run: " + dir};
        std::string pid = std::to_string(::getpid()) + "\n";
        (void)!::write(fd, pid.data(), pid.size());
    }
    ~DirLock() {
        if (fd >= 0) {
            ::close(fd);
            ::unlink(path.c_str());
        }
    }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;
};

struct RunContext {
    Config cfg;
    std::string out_dir;
    int jobs = 1;
    std::string subcommand;
    json params = json::object();  // effective subcommand parameters, hashed
    std::vector<std::string> outputs;
    std::unique_ptr<DirLock> lock;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

    void open_dir() {
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (ec) throw CliError{2, "cannot create output directory: " + out_dir};
        lock = std::make_unique<DirLock>(out_dir);
    }

    std::ofstream open_out(const std::string& name, bool binary = false) {
        std::ofstream os(out_dir + "/" + name,
                         binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
        if (!os) throw CliError{2, "output directory is not writable: " + out_dir};
        outputs.push_back(name);
        return os;
    }

    std::string config_hash() const {
        json h = {{"config", cfg.raw},
                  {"tolerances", cfg.tol},
                  {"seed", cfg.seed},
                  {"subcommand", subcommand},
                  {"params", params}};
        std::ostringstream os;
        os << std::hex << hl::periodic::detail::fnv1a(h.dump());
        return os.str();
    }

    void write_manifest() {
        double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        json m = {{"schema_version", kManifestSchema},
                  {"tool_version", kToolVersion},
                  {"subcommand", subcommand},
                  {"params", params},
                  {"config_hash", config_hash()},
                  {"seed", cfg.seed},
                  {"wall_time_s", wall},
                  {"outputs", outputs}};
        std::ofstream os(out_dir + "/manifest.json", std::ios::trunc);
        if (!os) throw CliError{2, "output directory is not writable: " + out_dir};
        os << m.dump(2) << '\n';
    }
};

// ---- small parsers ---------------------------------------------------------

static hl::cplx parse_cplx(const std::string& s) {
    double re = 0.0, im = 0.0;
    char tail = 0;
    int n = std::sscanf(s.c_str(), "%lf,%lf%c", &re, &im, &tail);
    if (n == 2) return {re, im};
    n = std::sscanf(s.c_str(), "%lf%c", &re, &tail);
    if (n == 1) return {re, 0.0};
    throw CliError{2, "cannot parse complex number '" + s + "' (want re or re,im)"};
}

static hl::ComplexPoint parse_point(const std::string& s) {
    double a, b, c, d;
    char tail = 0;
    if (std::sscanf(s.c_str(), "%lf,%lf,%lf,%lf%c", &a, &b, &c, &d, &tail) != 4)
        throw CliError{2, "cannot parse point '" + s + "' (want x_re,x_im,y_re,y_im)"};
    return {hl::cplx(a, b), hl::cplx(c, d)};
}

static hl::manifold::Branch parse_branch(const std::string& s) {
    if (s == "stable") return hl::manifold::Branch::stable;
    if (s == "unstable") return hl::manifold::Branch::unstable;
    throw CliError{2, "branch must be 'stable' or 'unstable'"};
}

// ---- shared building blocks ------------------------------------------------

static hl::periodic::NewtonOptions newton_options(const RunContext& ctx) {
    hl::periodic::NewtonOptions nop;
    nop.tol = ctx.cfg.tolv("newton_tol", nop.tol);
    nop.max_iter = int(ctx.cfg.tolv("newton_max_iter", nop.max_iter));
    nop.dedup_tol = ctx.cfg.tolv("dedup_tol", nop.dedup_tol);
    nop.eps_unit = ctx.cfg.tolv("eps_unit", nop.eps_unit);
    // Grid seeding by default so verdicts do not depend on the seed; random
    // seeds are opt-in and then draw from the configured seed.
    nop.grid_per_axis = int(ctx.cfg.tolv("grid_per_axis", 6));
    nop.random_seeds = int(ctx.cfg.tolv("random_seeds", 0));
    if (ctx.cfg.seed != 0) nop.rng_seed = ctx.cfg.seed;
    return nop;
}

static hl::manifold::CertifyOptions certify_options(const RunContext& ctx) {
    hl::manifold::CertifyOptions co;
    co.n_angles = int(ctx.cfg.tolv("certify_angles", 64));
    co.n_radial = int(ctx.cfg.tolv("certify_radial", 128));
    co.slope_tol = ctx.cfg.tolv("slope_tol", co.slope_tol);
    return co;
}

static std::vector<hl::periodic::PeriodicOrbit> run_census(const RunContext& ctx,
                                                           const hl::HenonComposition& f,
                                                           int period) {
    if (period < 1) throw CliError{2, "nothing to audit: --period must be >= 1"};
    return hl::periodic::census(f, period, hl::periodic::filtration_box(f),
                                newton_options(ctx));
}

static const hl::periodic::PeriodicOrbit& select_orbit(
    const std::vector<hl::periodic::PeriodicOrbit>& orbits, int index) {
    if (index < 0 || std::size_t(index) >= orbits.size())
        throw CliError{2, "orbit index " + std::to_string(index) + " out of range (census has " +
                              std::to_string(orbits.size()) + " orbits)"};
    return orbits[std::size_t(index)];
}

// ---- subcommands -----------------------------------------------------------

static int cmd_green(RunContext& ctx, const std::string& lambda_s,
                     const std::string& points_path) {
    hl::cplx lambda = parse_cplx(lambda_s);
    ctx.params = {{"lambda", {lambda.real(), lambda.imag()}}, {"points", points_path}};
    hl::HenonComposition f = hl::instantiate(ctx.cfg.family, lambda);

    std::ifstream is(points_path);
    if (!is) throw CliError{2, "cannot open points file: " + points_path};
    std::vector<hl::ComplexPoint> pts;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        double a, b, c, d;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &a, &b, &c, &d) != 4) {
            if (pts.empty()) continue;  // header row
            throw CliError{2, "malformed points row: " + line};
        }
        pts.push_back({hl::cplx(a, b), hl::cplx(c, d)});
    }

    ctx.open_dir();
    int max_iter = int(ctx.cfg.tolv("green_max_iter", hl::green::kDefaultMaxIter));
    auto os = ctx.open_out("green.csv");
    os << "re_x,im_x,re_y,im_y,g_plus,g_minus,status_plus,status_minus,class\n";
    for (const auto& z : pts) {
        auto c = hl::green::classify_point(f, z, max_iter);
        os << hl::io::fmt17(z.x.real()) << ',' << hl::io::fmt17(z.x.imag()) << ','
           << hl::io::fmt17(z.y.real()) << ',' << hl::io::fmt17(z.y.imag()) << ','
           << hl::io::fmt17(c.plus.value) << ',' << hl::io::fmt17(c.minus.value) << ','
           << hl::green::to_string(c.plus.status) << ','
           << hl::green::to_string(c.minus.status) << ',' << hl::green::to_string(c.cls)
           << '\n';
    }
    std::cout << "green: evaluated " << pts.size() << " points\n";
    ctx.write_manifest();
    return 0;
}

static int cmd_periodic(RunContext& ctx, const std::string& lambda_s, int period) {
    hl::cplx lambda = parse_cplx(lambda_s);
    ctx.params = {{"lambda", {lambda.real(), lambda.imag()}}, {"period", period}};
    hl::HenonComposition f = hl::instantiate(ctx.cfg.family, lambda);
    auto orbits = run_census(ctx, f, period);

    hl::periodic::SaddleDB db;
    db.family_id = ctx.cfg.family.id;
    db.lambda = lambda;
    db.max_period = period;
    for (const auto& o : orbits) db.add(o);

    ctx.open_dir();
    auto os = ctx.open_out("orbits.jsonl");
    hl::periodic::write_jsonl(db, os);
    std::cout << "periodic: " << db.orbits.size() << " orbits (" << db.saddles().size()
              << " saddles) up to period " << period << '\n';
    ctx.write_manifest();
    return 0;
}

static int cmd_classify(RunContext& ctx, const std::string& input_path) {
    ctx.params = {{"input", input_path}};
    std::ifstream is(input_path);
    if (!is) throw CliError{2, "cannot open orbit database: " + input_path};
    hl::periodic::SaddleDB db = hl::periodic::read_jsonl(is);

    ctx.open_dir();
    auto os = ctx.open_out("classify.csv");
    os << "id,period,abs_u,abs_s,type,residual\n";
    for (const auto& o : db.orbits)
        os << o.id << ',' << o.period << ',' << hl::io::fmt17(std::abs(o.u)) << ','
           << hl::io::fmt17(std::abs(o.s)) << ',' << hl::periodic::to_string(o.type) << ','
           << hl::io::fmt17(o.residual) << '\n';
    std::cout << "classify: " << db.orbits.size() << " orbits\n";
    ctx.write_manifest();
    return 0;
}

static int cmd_track(RunContext& ctx, int period, int index, const std::string& from_s,
                     const std::string& to_s) {
    hl::cplx from = parse_cplx(from_s), to = parse_cplx(to_s);
    ctx.params = {{"period", period},
                  {"index", index},
                  {"from", {from.real(), from.imag()}},
                  {"to", {to.real(), to.imag()}}};
    hl::HenonComposition f = hl::instantiate(ctx.cfg.family, from);
    auto orbits = run_census(ctx, f, period);
    const auto& orbit = select_orbit(orbits, index);

    hl::continuation::ContinuationOptions copts;
    copts.newton_tol = ctx.cfg.tolv("newton_tol", copts.newton_tol);
    copts.eps_unit = ctx.cfg.tolv("eps_unit", copts.eps_unit);
    copts.lambda_star_tol = ctx.cfg.tolv("lambda_star_tol", copts.lambda_star_tol);
    hl::continuation::MotionTrack track =
        hl::continuation::continue_orbit(ctx.cfg.family, orbit,
                                         hl::continuation::segment(from, to), copts);

    ctx.open_dir();
    auto os = ctx.open_out("track.jsonl");
    hl::continuation::write_track_jsonl(track, os);
    std::cout << "track: " << track.samples.size() << " samples, " << track.events.size()
              << " events, " << (track.completed ? "completed" : "stalled") << '\n';
    for (const auto& e : track.events)
        std::cout << "  event: " << hl::continuation::to_string(e.kind) << " near lambda = ("
                  << e.lambda_star.real() << ", " << e.lambda_star.imag() << "): " << e.note
                  << '\n';
    ctx.write_manifest();
    return track.completed ? 0 : 3;
}

static int cmd_sweep(RunContext& ctx, int period, double re_lo, double re_hi, double im_lo,
                     double im_hi, int nx, int ny) {
    ctx.params = {{"period", period}, {"re_lo", re_lo}, {"re_hi", re_hi},
                  {"im_lo", im_lo},   {"im_hi", im_hi}, {"nx", nx},
                  {"ny", ny}};
    hl::continuation::ScanGrid grid{re_lo, re_hi, im_lo, im_hi, nx, ny};
    hl::continuation::ScanResult res = hl::continuation::stability_scan(
        ctx.cfg.family, grid, period, ctx.jobs, newton_options(ctx));

    ctx.open_dir();
    auto csv = ctx.open_out("sweep.csv");
    hl::io::write_scan_csv(res, csv);
    auto ppm = ctx.open_out("sweep.ppm", true);
    hl::io::write_scan_ppm(res, ppm);
    int crossings = 0;
    for (const auto& c : res.cells)
        if (c.verdict == hl::continuation::CellVerdict::crossing) ++crossings;
    std::cout << "sweep: " << res.cells.size() << " cells, " << crossings << " crossing\n";
    ctx.write_manifest();
    return 0;
}

static int cmd_manifold(RunContext& ctx, const std::string& lambda_s, int period, int index,
                        const std::string& branch_s, int order, double rho, int samples) {
    hl::cplx lambda = parse_cplx(lambda_s);
    hl::manifold::Branch branch = parse_branch(branch_s);
    ctx.params = {{"lambda", {lambda.real(), lambda.imag()}},
                  {"period", period},
                  {"index", index},
                  {"branch", branch_s},
                  {"order", order},
                  {"rho", rho},
                  {"samples", samples}};
    hl::HenonComposition f = hl::instantiate(ctx.cfg.family, lambda);
    auto orbits = run_census(ctx, f, period);
    const auto& orbit = select_orbit(orbits, index);
    if (orbit.type != hl::periodic::OrbitType::saddle)
        throw CliError{2, "orbit " + std::to_string(index) + " is " +
                              hl::periodic::to_string(orbit.type) + ", not a saddle"};

    double tol = ctx.cfg.tolv("residual_tol", hl::manifold::kDefaultResidualTol);
    hl::manifold::LocalManifold m = hl::manifold::parameterize(f, orbit, branch, order, tol);
    hl::manifold::max_certified_size(m, 0.0, certify_options(ctx));

    ctx.open_dir();
    auto js = ctx.open_out("manifold.json");
    js << hl::manifold::manifold_to_json(m).dump(2) << '\n';
    double rho_used = rho > 0.0 ? rho : m.rho_cert;
    auto csv = ctx.open_out("curve.csv");
    hl::manifold::write_curve_csv(m, rho_used, samples, csv);
    std::cout << "manifold: " << branch_s << " branch of orbit " << orbit.id
              << ", rho_cert = " << m.rho_cert << ", r_cert = " << m.r_cert << '\n';
    ctx.write_manifest();
    return 0;
}

static int cmd_homoclinic(RunContext& ctx, const std::string& lambda_s, int period,
                          int index_u, int index_s, int order) {
    hl::cplx lambda = parse_cplx(lambda_s);
    ctx.params = {{"lambda", {lambda.real(), lambda.imag()}},
                  {"period", period},
                  {"index_u", index_u},
                  {"index_s", index_s},
                  {"order", order}};
    hl::HenonComposition f = hl::instantiate(ctx.cfg.family, lambda);
    auto orbits = run_census(ctx, f, period);
    const auto& ou = select_orbit(orbits, index_u);
    const auto& os_ = select_orbit(orbits, index_s);
    if (ou.type != hl::periodic::OrbitType::saddle ||
        os_.type != hl::periodic::OrbitType::saddle)
        throw CliError{2, "homoclinic search needs two saddle orbits"};

    hl::manifold::LocalManifold mu =
        hl::manifold::parameterize(f, ou, hl::manifold::Branch::unstable, order);
    hl::manifold::LocalManifold ms =
        hl::manifold::parameterize(f, os_, hl::manifold::Branch::stable, order);
    hl::regularity::SearchOptions sopts;
    sopts.theta_tangent = ctx.cfg.tolv("theta_tangent", sopts.theta_tangent);
    auto pts = hl::regularity::find_intersections(mu, ms, sopts);

    ctx.open_dir();
    auto csv = ctx.open_out("homoclinic.csv");
    csv << "id_u,id_s,zeta_re,zeta_im,xi_re,xi_im,x_re,x_im,y_re,y_im,theta,residual,"
           "tangency\n";
    for (const auto& p : pts)
        csv << p.id_u << ',' << p.id_s << ',' << hl::io::fmt17(p.zeta.real()) << ','
            << hl::io::fmt17(p.zeta.imag()) << ',' << hl::io::fmt17(p.xi.real()) << ','
            << hl::io::fmt17(p.xi.imag()) << ',' << hl::io::fmt17(p.point.x.real()) << ','
            << hl::io::fmt17(p.point.x.imag()) << ',' << hl::io::fmt17(p.point.y.real())
            << ',' << hl::io::fmt17(p.point.y.imag()) << ',' << hl::io::fmt17(p.theta) << ','
            << hl::io::fmt17(p.residual) << ',' << (p.tangency ? 1 : 0) << '\n';
    std::cout << "homoclinic: " << pts.size() << " intersections\n";
    ctx.write_manifest();
    return 0;
}

static int cmd_persist_scan(RunContext& ctx, const std::string& lambda_s, int period,
                            int index, const std::string& branch_s, double r1) {
    hl::cplx lambda0 = parse_cplx(lambda_s);
    hl::manifold::Branch branch = parse_branch(branch_s);
    ctx.params = {{"lambda0", {lambda0.real(), lambda0.imag()}},
                  {"period", period},
                  {"index", index},
                  {"branch", branch_s},
                  {"r1", r1}};
    if (r1 <= 0.0) throw CliError{2, "--r1 must be positive"};
    hl::HenonComposition f = hl::instantiate(ctx.cfg.family, lambda0);
    auto orbits = run_census(ctx, f, period);
    const auto& orbit = select_orbit(orbits, index);
    if (orbit.type != hl::periodic::OrbitType::saddle)
        throw CliError{2, "size persistence needs a saddle orbit"};

    hl::manifold::PersistenceResult res = hl::manifold::size_persistence_scan(
        ctx.cfg.family, orbit, lambda0, branch, r1, 8, hl::manifold::kDefaultOrder,
        hl::manifold::kDefaultResidualTol, certify_options(ctx));

    ctx.open_dir();
    auto csv = ctx.open_out("persist.csv");
    csv << "lambda_re,lambda_im,certified,tangent_drift\n";
    for (const auto& s : res.samples)
        csv << hl::io::fmt17(s.lambda.real()) << ',' << hl::io::fmt17(s.lambda.imag()) << ','
            << (s.certified ? 1 : 0) << ',' << hl::io::fmt17(s.tangent_drift) << '\n';
    auto js = ctx.open_out("persist.json");
    js << json{{"schema_version", 1}, {"kind", "size_persistence"}, {"delta", res.delta}}
              .dump()
       << '\n';
    std::cout << "persist-scan: certified radius delta = " << res.delta << '\n';
    ctx.write_manifest();
    return 0;
}

// ---- audits ----------------------------------------------------------------

struct SaddleSelection {
    hl::HenonComposition f;
    hl::periodic::PeriodicOrbit orbit;
};

static SaddleSelection select_saddle(RunContext& ctx, const std::string& lambda_s, int period,
                                     int index) {
    hl::cplx lambda = parse_cplx(lambda_s);
    hl::HenonComposition f = hl::instantiate(ctx.cfg.family, lambda);
    auto orbits = run_census(ctx, f, period);
    const auto& orbit = select_orbit(orbits, index);
    if (orbit.type != hl::periodic::OrbitType::saddle)
        throw CliError{2, "orbit " + std::to_string(index) + " is " +
                              hl::periodic::to_string(orbit.type) + ", not a saddle"};
    return {std::move(f), orbit};
}

static int cmd_audit_size(RunContext& ctx, const std::string& lambda_s, int period, int index,
                          const std::string& branch_s, double r) {
    ctx.params = {{"lambda", lambda_s}, {"period", period},   {"index", index},
                  {"branch", branch_s}, {"r", r}};
    if (r <= 0.0) throw CliError{2, "--r must be positive"};
    SaddleSelection sel = select_saddle(ctx, lambda_s, period, index);
    hl::manifold::LocalManifold m =
        hl::manifold::parameterize(sel.f, sel.orbit, parse_branch(branch_s));
    hl::manifold::SizeCertificate cert = hl::manifold::certify_size(m, r, certify_options(ctx));

    ctx.open_dir();
    auto js = ctx.open_out("size.json");
    js << json{{"schema_version", 1},
               {"kind", "size_certificate"},
               {"orbit_id", sel.orbit.id},
               {"branch", branch_s},
               {"r", cert.r},
               {"slope_max", cert.slope_max},
               {"status", hl::manifold::to_string(cert.status)},
               {"note", cert.note}}
              .dump()
       << '\n';
    std::cout << "audit size: " << hl::manifold::to_string(cert.status)
              << " at r = " << r << " (max slope " << cert.slope_max << ")\n";
    ctx.write_manifest();
    switch (cert.status) {
        case hl::manifold::CertifyStatus::certified: return 0;
        case hl::manifold::CertifyStatus::violated: return 1;
        default: return 3;
    }
}

static int cmd_audit_koebe(RunContext& ctx, const std::string& lambda_s, int period, int index,
                           const std::string& branch_s) {
    ctx.params = {{"lambda", lambda_s}, {"period", period}, {"index", index},
                  {"branch", branch_s}};
    SaddleSelection sel = select_saddle(ctx, lambda_s, period, index);
    hl::manifold::LocalManifold m =
        hl::manifold::parameterize(sel.f, sel.orbit, parse_branch(branch_s));
    hl::manifold::max_certified_size(m, 0.0, certify_options(ctx));
    if (m.r_cert <= 0.0) throw CliError{3, "no certified bounded-geometry size"};
    hl::manifold::KoebeReport rep = hl::manifold::koebe_audit(m);

    ctx.open_dir();
    auto js = ctx.open_out("koebe.json");
    js << json{{"schema_version", 1},
               {"kind", "koebe_audit"},
               {"orbit_id", sel.orbit.id},
               {"branch", branch_s},
               {"r_cert", m.r_cert},
               {"pass", rep.pass},
               {"max_bidisk_ratio", rep.max_bidisk_ratio},
               {"max_outer_ratio", rep.max_outer_ratio},
               {"min_inner_margin", rep.min_inner_margin},
               {"violations", rep.violations}}
              .dump()
       << '\n';
    std::cout << "audit koebe: " << (rep.pass ? "pass" : "fail")
              << " at r_cert = " << m.r_cert << '\n';
    ctx.write_manifest();
    return rep.pass ? 0 : 1;
}

static int cmd_audit_exposure(RunContext& ctx, const std::string& lambda_s, int period,
                              int index, const std::string& branch_s, double region) {
    ctx.params = {{"lambda", lambda_s}, {"period", period},   {"index", index},
                  {"branch", branch_s}, {"region", region}};
    SaddleSelection sel = select_saddle(ctx, lambda_s, period, index);
    hl::manifold::LocalManifold m =
        hl::manifold::parameterize(sel.f, sel.orbit, parse_branch(branch_s));
    double reg = region > 0.0 ? region : std::min(m.rho_cert, 1.0);
    double eps = ctx.cfg.tolv("eps_exposed", hl::regularity::kEpsExposed);
    hl::regularity::ExposureReport rep = hl::regularity::exposure(sel.f, m, reg, eps);

    ctx.open_dir();
    auto js = ctx.open_out("exposure.json");
    js << json{{"schema_version", 1},
               {"kind", "exposure_audit"},
               {"orbit_id", sel.orbit.id},
               {"branch", branch_s},
               {"region", reg},
               {"g", rep.g},
               {"exposed", rep.exposed},
               {"undecided", rep.undecided},
               {"samples", rep.samples}}
              .dump()
       << '\n';
    std::cout << "audit exposure: "
              << (rep.exposed ? "exposed" : (rep.undecided ? "undecided" : "not exposed"))
              << ", g = " << rep.g << '\n';
    ctx.write_manifest();
    if (rep.undecided) return 3;
    return rep.exposed ? 0 : 1;
}

static int cmd_audit_regular(RunContext& ctx, const std::string& lambda_s, int period,
                             const std::string& point_s, double r, int k) {
    hl::cplx lambda = parse_cplx(lambda_s);
    hl::ComplexPoint p = parse_point(point_s);
    ctx.params = {{"lambda", {lambda.real(), lambda.imag()}},
                  {"period", period},
                  {"point", point_s},
                  {"r", r},
                  {"k", k}};
    if (r <= 0.0) throw CliError{2, "--r must be positive"};
    hl::HenonComposition f = hl::instantiate(ctx.cfg.family, lambda);
    auto orbits = run_census(ctx, f, period);
    auto atlas = hl::regularity::build_atlas(f, orbits, hl::manifold::kDefaultOrder,
                                             certify_options(ctx), ctx.jobs);
    if (atlas.empty()) throw CliError{3, "census found no saddles"};
    double delta = ctx.cfg.tolv("delta_distinct", hl::regularity::kDeltaDistinct);
    hl::regularity::RegularityCertificate cert = hl::regularity::certify_regular(
        f, p, atlas, r, k, hl::regularity::Direction::both, delta);

    ctx.open_dir();
    json jw = json::array();
    for (const auto& w : cert.witnesses)
        jw.push_back({{"orbit_id", w.orbit_id}, {"distance", w.distance}, {"size", w.size}});
    auto js = ctx.open_out("regular.json");
    js << json{{"schema_version", 1},
               {"kind", "regularity_certificate"},
               {"r", cert.r},
               {"pass", cert.pass},
               {"transverse", cert.transverse},
               {"angle", cert.angle},
               {"hausdorff", cert.hausdorff},
               {"exposure_g", cert.exposure_g},
               {"witnesses", jw},
               {"note", cert.note}}
              .dump()
       << '\n';
    std::cout << "audit regular: " << (cert.pass ? "pass" : "fail")
              << (cert.note.empty() ? "" : " (" + cert.note + ")") << '\n';
    ctx.write_manifest();
    return cert.pass ? 0 : 1;
}

static int cmd_audit_uniform(RunContext& ctx, const std::string& lambda_s, int period,
                             double r, double theta_min) {
    hl::cplx lambda = parse_cplx(lambda_s);
    ctx.params = {{"lambda", {lambda.real(), lambda.imag()}},
                  {"period", period},
                  {"r", r},
                  {"theta_min", theta_min}};
    hl::HenonComposition f = hl::instantiate(ctx.cfg.family, lambda);
    hl::regularity::SearchOptions sopts;
    sopts.theta_tangent = ctx.cfg.tolv("theta_tangent", sopts.theta_tangent);
    hl::regularity::UniformReport rep = hl::regularity::uniform_regularity_audit(
        f, period, r, theta_min, newton_options(ctx), certify_options(ctx),
        hl::manifold::kDefaultOrder, ctx.jobs, sopts);

    ctx.open_dir();
    auto js = ctx.open_out("uniform.json");
    js << hl::regularity::uniform_report_to_json(rep).dump() << '\n';
    std::cout << "audit uniform: " << (rep.pass ? "pass" : "fail") << ", min size "
              << rep.min_size << ", min angle " << rep.min_angle
              << (rep.note.empty() ? "" : " (" + rep.note + ")") << '\n';
    ctx.write_manifest();
    return rep.pass ? 0 : 1;
}

static int cmd_audit_qe(RunContext& ctx, const std::string& lambda_s, int period, double r,
                        double delta, double eta, double A) {
    hl::cplx lambda = parse_cplx(lambda_s);
    ctx.params = {{"lambda", {lambda.real(), lambda.imag()}}, {"period", period}, {"r", r},
                  {"delta", delta},                           {"eta", eta},       {"A", A}};
    hl::HenonComposition f = hl::instantiate(ctx.cfg.family, lambda);
    auto orbits = run_census(ctx, f, period);
    auto atlas = hl::regularity::build_atlas(f, orbits, hl::manifold::kDefaultOrder,
                                             certify_options(ctx), ctx.jobs);
    if (atlas.empty()) throw CliError{2, "nothing to audit: census found no saddles"};

    auto copts = certify_options(ctx);
    if (eta <= 0.0 || A <= 0.0) {
        // Measure the extremes first, then audit against the suggested tuple.
        hl::regularity::QEReport probe =
            hl::regularity::qe_audit(f, atlas, r, delta, 0.0, 1e300, copts);
        if (eta <= 0.0) eta = probe.suggest_eta;
        if (A <= 0.0) A = probe.suggest_A;
    }
    hl::regularity::QEReport rep = hl::regularity::qe_audit(f, atlas, r, delta, eta, A, copts);

    ctx.open_dir();
    json j = hl::regularity::qe_report_to_json(rep);
    j["constants"] = {{"r", r}, {"delta", delta}, {"eta", eta}, {"A", A}};
    auto js = ctx.open_out("qe.json");
    js << j.dump() << '\n';
    std::cout << "audit qe: " << (rep.pass ? "pass" : "fail") << " with (r, delta, eta, A) = ("
              << r << ", " << delta << ", " << eta << ", " << A << ")\n";
    ctx.write_manifest();
    return rep.pass ? 0 : 1;
}

// ---- main ------------------------------------------------------------------

int main(int argc, char** argv) {
    CLI::App app{"henonlab: a numerical laboratory for polynomial automorphisms of C^2"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    std::string config_path, out_override, lambda_s = "auto", points_path, input_path;
    std::string branch_s = "unstable", from_s, to_s, point_s;
    std::vector<std::string> tol_overrides;
    int jobs = 0, period = 1, index = 0, index_u = 0, index_s = 0;
    int order = hl::manifold::kDefaultOrder, samples = 256, nx = 8, ny = 8, k_wit = 3;
    std::uint64_t seed = 0;
    bool seed_set = false;
    double r = 0.0, r1 = 0.0, rho = 0.0, region = 0.0, theta_min = 1e-3;
    double qe_delta = 0.5, qe_eta = 0.0, qe_A = 0.0;
    double re_lo = -1.0, re_hi = 1.0, im_lo = -1.0, im_hi = 1.0;

    app.add_option("--config", config_path, "experiment configuration (JSON)")->required();
    app.add_option("--out", out_override, "output directory (overrides the config)");
    app.add_option("--jobs", jobs, "worker threads (fallback: HENONLAB_JOBS, then 1)");
    app.add_option("--tol", tol_overrides, "tolerance override NAME=VALUE (repeatable)");
    auto* seed_opt = app.add_option("--seed", seed, "seed for randomized sampling");

    auto add_lambda = [&](CLI::App* c) {
        c->add_option("--lambda", lambda_s, "parameter (re or re,im; default: domain center)");
    };

    auto* c_green = app.add_subcommand("green", "batch Green-function evaluation");
    add_lambda(c_green);
    c_green->add_option("--points", points_path, "input CSV (re_x,im_x,re_y,im_y)")
        ->required();

    auto* c_per = app.add_subcommand("periodic", "periodic-orbit census -> SaddleDB");
    add_lambda(c_per);
    c_per->add_option("--period", period, "maximum minimal period")->required();

    auto* c_cls = app.add_subcommand("classify", "classify orbits of a SaddleDB");
    c_cls->add_option("--input", input_path, "orbit database (JSONL)")->required();

    auto* c_trk = app.add_subcommand("track", "continue an orbit along a parameter segment");
    c_trk->add_option("--period", period, "census period at the start parameter")->required();
    c_trk->add_option("--index", index, "orbit index in the census");
    c_trk->add_option("--from", from_s, "start parameter re[,im]")->required();
    c_trk->add_option("--to", to_s, "end parameter re[,im]")->required();

    auto* c_swp = app.add_subcommand("sweep", "stability scan over a parameter grid");
    c_swp->add_option("--period", period, "maximum period per cell")->required();
    c_swp->add_option("--re-lo", re_lo, "");
    c_swp->add_option("--re-hi", re_hi, "");
    c_swp->add_option("--im-lo", im_lo, "");
    c_swp->add_option("--im-hi", im_hi, "");
    c_swp->add_option("--nx", nx, "grid cells (re axis)");
    c_swp->add_option("--ny", ny, "grid cells (im axis)");

    auto* c_man = app.add_subcommand("manifold", "parameterize and export a local manifold");
    add_lambda(c_man);
    c_man->add_option("--period", period, "census period")->required();
    c_man->add_option("--index", index, "orbit index in the census");
    c_man->add_option("--branch", branch_s, "stable | unstable");
    c_man->add_option("--order", order, "series order");
    c_man->add_option("--rho", rho, "sample radius for the curve CSV (0 = rho_cert)");
    c_man->add_option("--samples", samples, "points on the sampled curve");

    auto* c_aud = app.add_subcommand("audit", "quantitative audits");
    c_aud->require_subcommand(1);
    auto* a_size = c_aud->add_subcommand("size", "bounded-geometry certificate at scale r");
    auto* a_koebe = c_aud->add_subcommand("koebe", "distortion inclusions at r_cert");
    auto* a_expo = c_aud->add_subcommand("exposure", "opposite-side Green positivity");
    auto* a_reg = c_aud->add_subcommand("regular", "regular-point certificate");
    auto* a_uni = c_aud->add_subcommand("uniform", "uniform regularity over a census");
    auto* a_qe = c_aud->add_subcommand("qe", "quasi-expansion constants");
    for (CLI::App* a : {a_size, a_koebe, a_expo, a_reg, a_uni, a_qe}) {
        add_lambda(a);
        a->add_option("--period", period, "census period")->required();
    }
    for (CLI::App* a : {a_size, a_koebe, a_expo})
        a->add_option("--index", index, "orbit index in the census");
    for (CLI::App* a : {a_size, a_koebe, a_expo})
        a->add_option("--branch", branch_s, "stable | unstable");
    a_size->add_option("--r", r, "scale")->required();
    a_expo->add_option("--region", region, "intrinsic sample radius (0 = auto)");
    a_reg->add_option("--point", point_s, "point x_re,x_im,y_re,y_im")->required();
    a_reg->add_option("--r", r, "scale")->required();
    a_reg->add_option("--k", k_wit, "number of witnesses");
    a_uni->add_option("--r", r, "scale")->required();
    a_uni->add_option("--theta-min", theta_min, "minimum transversality angle");
    a_qe->add_option("--r", r, "embedding ball radius")->required();
    a_qe->add_option("--delta", qe_delta, "intrinsic Green-sample radius");
    a_qe->add_option("--eta", qe_eta, "expansion floor (0 = suggested)");
    a_qe->add_option("--A", qe_A, "area bound (0 = suggested)");

    auto* c_hom = app.add_subcommand("homoclinic", "stable/unstable intersection search");
    add_lambda(c_hom);
    c_hom->add_option("--period", period, "census period")->required();
    c_hom->add_option("--index-u", index_u, "saddle index for the unstable manifold");
    c_hom->add_option("--index-s", index_s, "saddle index for the stable manifold");
    c_hom->add_option("--order", order, "series order");

    auto* c_pst = app.add_subcommand("persist-scan", "size persistence over a parameter disk");
    add_lambda(c_pst);
    c_pst->add_option("--period", period, "census period")->required();
    c_pst->add_option("--index", index, "orbit index in the census");
    c_pst->add_option("--branch", branch_s, "stable | unstable");
    c_pst->add_option("--r1", r1, "persisted scale")->required();

    for (CLI::App* c : app.get_subcommands(nullptr)) {
        c->fallthrough();
        for (CLI::App* cc : c->get_subcommands(nullptr)) cc->fallthrough();
    }

    try {
        try {
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
            throw CliError{2, e.what()};
        }

        RunContext ctx;
        ctx.cfg = load_config(config_path);
        if (seed_opt->count()) {
            ctx.cfg.seed = seed;
            seed_set = true;
        }
        (void)seed_set;
        for (const auto& ov : tol_overrides) {
            auto eq = ov.find('=');
            if (eq == std::string::npos)
                throw CliError{2, "tolerance override must be NAME=VALUE: " + ov};
            std::string name = ov.substr(0, eq);
            if (!kKnownTolerances.count(name))
                throw CliError{2, "unknown tolerance '" + name + "'"};
            try {
                ctx.cfg.tol[name] = std::stod(ov.substr(eq + 1));
            } catch (const std::exception&) {
                throw CliError{2, "tolerance value is not a number: " + ov};
            }
        }
        ctx.out_dir = !out_override.empty() ? out_override : ctx.cfg.out_dir;
        if (jobs > 0) {
            ctx.jobs = jobs;
        } else if (const char* env = std::getenv("HENONLAB_JOBS")) {
            ctx.jobs = std::max(1, std::atoi(env));
        } else {
            ctx.jobs = 1;
        }
        if (lambda_s == "auto")
            lambda_s = hl::io::fmt17(ctx.cfg.family.domain_center.real()) + "," +
                       hl::io::fmt17(ctx.cfg.family.domain_center.imag());

        int code = 0;
        if (app.got_subcommand(c_green)) {
            ctx.subcommand = "green";
            code = cmd_green(ctx, lambda_s, points_path);
        } else if (app.got_subcommand(c_per)) {
            ctx.subcommand = "periodic";
            code = cmd_periodic(ctx, lambda_s, period);
        } else if (app.got_subcommand(c_cls)) {
            ctx.subcommand = "classify";
            code = cmd_classify(ctx, input_path);
        } else if (app.got_subcommand(c_trk)) {
            ctx.subcommand = "track";
            code = cmd_track(ctx, period, index, from_s, to_s);
        } else if (app.got_subcommand(c_swp)) {
            ctx.subcommand = "sweep";
            code = cmd_sweep(ctx, period, re_lo, re_hi, im_lo, im_hi, nx, ny);
        } else if (app.got_subcommand(c_man)) {
            ctx.subcommand = "manifold";
            code = cmd_manifold(ctx, lambda_s, period, index, branch_s, order, rho, samples);
        } else if (app.got_subcommand(c_hom)) {
            ctx.subcommand = "homoclinic";
            code = cmd_homoclinic(ctx, lambda_s, period, index_u, index_s, order);
        } else if (app.got_subcommand(c_pst)) {
            ctx.subcommand = "persist-scan";
            code = cmd_persist_scan(ctx, lambda_s, period, index, branch_s, r1);
        } else if (app.got_subcommand(c_aud)) {
            if (c_aud->got_subcommand(a_size)) {
                ctx.subcommand = "audit size";
                code = cmd_audit_size(ctx, lambda_s, period, index, branch_s, r);
            } else if (c_aud->got_subcommand(a_koebe)) {
                ctx.subcommand = "audit koebe";
                code = cmd_audit_koebe(ctx, lambda_s, period, index, branch_s);
            } else if (c_aud->got_subcommand(a_expo)) {
                ctx.subcommand = "audit exposure";
                code = cmd_audit_exposure(ctx, lambda_s, period, index, branch_s, region);
            } else if (c_aud->got_subcommand(a_reg)) {
                ctx.subcommand = "audit regular";
                code = cmd_audit_regular(ctx, lambda_s, period, point_s, r, k_wit);
            } else if (c_aud->got_subcommand(a_uni)) {
                ctx.subcommand = "audit uniform";
                code = cmd_audit_uniform(ctx, lambda_s, period, r, theta_min);
            } else {
                ctx.subcommand = "audit qe";
                code = cmd_audit_qe(ctx, lambda_s, period, r, qe_delta, qe_eta, qe_A);
            }
        }
        return code;
    } catch (const CliError& e) {
        std::cerr << json{{"error", e.msg}, {"exit_code", e.code}}.dump() << '\n';
        return e.code;
    } catch (const hl::DegenerateFamily& e) {
        std::cerr << json{{"error", e.what()}, {"exit_code", 2}}.dump() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << json{{"error", e.what()}, {"exit_code", 2}}.dump() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", e.what()}, {"exit_code", 3}}.dump() << '\n';
        return 3;
    }
}
