#ifndef HENONLAB_FAMILY_HPP
#define HENONLAB_FAMILY_HPP

#include <string>
#include <vector>

#include <json.hpp>

#include "henon.hpp"
#include "types.hpp"

namespace henonlab {

// One factor of a lambda-family: every coefficient of p, and a itself, is a
// polynomial in lambda (complex coefficients, low degree first).
struct FamilyFactor {
    std::vector<std::vector<cplx>> p;  // p[k] = lambda-polynomial of coefficient of x^k
    std::vector<cplx> a;

    HenonFactor at(cplx lambda) const {
        std::vector<cplx> coeffs(p.size());
        for (std::size_t k = 0; k < p.size(); ++k) coeffs[k] = poly_eval(p[k], lambda);
        return HenonFactor(std::move(coeffs), poly_eval(a, lambda));
    }
};

struct FamilySpec {
    std::vector<FamilyFactor> factors;
    cplx domain_center{0.0};
    double domain_radius = 1.0;
    std::string id = "family";

    bool contains(cplx lambda) const {
        return std::abs(lambda - domain_center) <= domain_radius * (1.0 + 1e-12);
    }
};

inline HenonComposition instantiate(const FamilySpec& fam, cplx lambda) {
    if (!fam.contains(lambda))
        throw std::invalid_argument("parameter outside the family domain disk");
    std::vector<HenonFactor> fs;
    fs.reserve(fam.factors.size());
    for (const auto& ff : fam.factors) {
        cplx a = poly_eval(ff.a, lambda);
        cplx lead = poly_eval(ff.p.back(), lambda);
        if (std::abs(a) < 1e-14 || std::abs(lead) < 1e-14)
            throw DegenerateFamily("family degenerates at lambda");
        fs.push_back(ff.at(lambda));
    }
    return HenonComposition(std::move(fs));
}

// Numerical non-degeneracy check on a boundary circle plus an interior grid.
inline void validate_family(const FamilySpec& fam, int boundary_samples = 64,
                            int interior_grid = 8) {
    if (fam.factors.empty()) throw std::invalid_argument("family has no factors");
    if (fam.domain_radius <= 0.0) throw std::invalid_argument("domain radius must be positive");
    auto check_at = [&](cplx lambda) { (void)instantiate(fam, lambda); };
    for (int k = 0; k < boundary_samples; ++k) {
        double t = 2.0 * M_PI * k / boundary_samples;
        check_at(fam.domain_center + fam.domain_radius * cplx(std::cos(t), std::sin(t)));
    }
    for (int i = 0; i < interior_grid; ++i) {
        for (int j = 0; j < interior_grid; ++j) {
            double u = -1.0 + (2.0 * i + 1.0) / interior_grid;
            double v = -1.0 + (2.0 * j + 1.0) / interior_grid;
            if (u * u + v * v >= 1.0) continue;
            check_at(fam.domain_center + fam.domain_radius * cplx(u, v));
        }
    }
    // Constant dynamical degree is automatic once leading coefficients are
    // nonvanishing over the closed disk.
}

// ---- JSON schema ----
// {"factors":[{"p":[[[re,im],...],...], "a":[[re,im],...]}],
//  "domain":{"center":[re,im],"radius":r}}

inline nlohmann::json to_json(const cplx& z) { return nlohmann::json::array({z.real(), z.imag()}); }

inline cplx cplx_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 2)
        throw std::invalid_argument("complex number must be a [re,im] pair");
    return {j[0].get<double>(), j[1].get<double>()};
}

inline nlohmann::json to_json(const FamilySpec& fam) {
    nlohmann::json jf = nlohmann::json::array();
    for (const auto& f : fam.factors) {
        nlohmann::json jp = nlohmann::json::array();
        for (const auto& coeff : f.p) {
            nlohmann::json jc = nlohmann::json::array();
            for (const auto& c : coeff) jc.push_back(to_json(c));
            jp.push_back(jc);
        }
        nlohmann::json ja = nlohmann::json::array();
        for (const auto& c : f.a) ja.push_back(to_json(c));
        jf.push_back({{"p", jp}, {"a", ja}});
    }
    return {{"factors", jf},
            {"domain", {{"center", to_json(fam.domain_center)}, {"radius", fam.domain_radius}}}};
}

inline FamilySpec family_from_json(const nlohmann::json& j) {
    FamilySpec fam;
    if (!j.contains("factors") || !j.contains("domain"))
        throw std::invalid_argument("family spec needs 'factors' and 'domain'");
    for (const auto& jf : j.at("factors")) {
        FamilyFactor f;
        for (const auto& jc : jf.at("p")) {
            std::vector<cplx> coeff;
            for (const auto& e : jc) coeff.push_back(cplx_from_json(e));
            if (coeff.empty()) coeff.push_back(cplx(0.0));
            f.p.push_back(std::move(coeff));
        }
        for (const auto& e : jf.at("a")) f.a.push_back(cplx_from_json(e));
        if (f.a.empty()) throw std::invalid_argument("factor needs an 'a' polynomial");
        fam.factors.push_back(std::move(f));
    }
    fam.domain_center = cplx_from_json(j.at("domain").at("center"));
    fam.domain_radius = j.at("domain").at("radius").get<double>();
    validate_family(fam);
    return fam;
}

// Convenience: the lambda-independent family wrapping a fixed composition.
inline FamilySpec constant_family(const HenonComposition& f, cplx center = 0.0,
                                  double radius = 1.0) {
    FamilySpec fam;
    for (const auto& factor : f.factors) {
        FamilyFactor ff;
        for (const auto& c : factor.p_coeffs) ff.p.push_back({c});
        ff.a = {factor.a};
        fam.factors.push_back(std::move(ff));
    }
    fam.domain_center = center;
    fam.domain_radius = radius;
    return fam;
}

}  // namespace henonlab

#endif
