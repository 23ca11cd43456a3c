#ifndef HENONLAB_HENON_HPP
#define HENONLAB_HENON_HPP

#include <cstdint>
#include <vector>

#include "types.hpp"

namespace henonlab {

// Limit beyond which dynamical state is declared numerically infinite.
inline constexpr double kEscapeOverflow = 1e300;

inline cplx poly_eval(const std::vector<cplx>& coeffs, cplx z) {
    cplx acc{0.0};
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * z + *it;
    return acc;
}

inline cplx poly_deriv_eval(const std::vector<cplx>& coeffs, cplx z) {
    cplx acc{0.0};
    for (std::size_t k = coeffs.size(); k-- > 1;)
        acc = acc * z + double(k) * coeffs[k];
    return acc;
}

// One generalized Henon factor (x, y) -> (p(x) + a y, a x).
struct HenonFactor {
    std::vector<cplx> p_coeffs;  // low degree first
    cplx a{0.0};

    HenonFactor() = default;
    HenonFactor(std::vector<cplx> coeffs, cplx a_) : p_coeffs(std::move(coeffs)), a(a_) {
        validate();
    }

    int degree() const { return int(p_coeffs.size()) - 1; }

    void validate() const {
        if (p_coeffs.size() < 3) throw std::invalid_argument("Henon factor needs deg(p) >= 2");
        if (std::abs(p_coeffs.back()) == 0.0)
            throw std::invalid_argument("Henon factor has vanishing leading coefficient");
        if (std::abs(a) == 0.0) throw std::invalid_argument("Henon factor needs a != 0");
    }

    ComplexPoint apply(const ComplexPoint& z) const {
        return {poly_eval(p_coeffs, z.x) + a * z.y, a * z.x};
    }

    // Closed-form inverse: (X, Y) -> (Y/a, (X - p(Y/a))/a).
    ComplexPoint apply_inverse(const ComplexPoint& z) const {
        cplx x = z.y / a;
        return {x, (z.x - poly_eval(p_coeffs, x)) / a};
    }

    ComplexMatrix2 differential(const ComplexPoint& z) const {
        return {poly_deriv_eval(p_coeffs, z.x), a, a, cplx(0.0)};
    }
};

inline void check_state(const ComplexPoint& z, const char* where) {
    if (!is_finite(z) || sup_norm(z) > kEscapeOverflow)
        throw NumericalEscape(std::string("escaped to numerical infinity in ") + where);
}

// Ordered composition of Henon factors; factors[0] is applied first.
struct HenonComposition {
    std::vector<HenonFactor> factors;

    HenonComposition() = default;
    explicit HenonComposition(std::vector<HenonFactor> fs) : factors(std::move(fs)) {
        if (factors.empty()) throw std::invalid_argument("empty Henon composition");
        for (const auto& f : factors) f.validate();
    }

    ComplexPoint apply(const ComplexPoint& z) const {
        check_state(z, "apply");
        ComplexPoint w = z;
        for (const auto& f : factors) {
            w = f.apply(w);
            check_state(w, "apply");
        }
        return w;
    }

    ComplexPoint apply_inverse(const ComplexPoint& z) const {
        check_state(z, "apply_inverse");
        ComplexPoint w = z;
        for (auto it = factors.rbegin(); it != factors.rend(); ++it) {
            w = it->apply_inverse(w);
            check_state(w, "apply_inverse");
        }
        return w;
    }

    ComplexPoint iterate(const ComplexPoint& z, int n) const {
        ComplexPoint w = z;
        for (int k = 0; k < n; ++k) w = apply(w);
        for (int k = 0; k > n; --k) w = apply_inverse(w);
        return w;
    }

    // Df(z) by the chain rule along the partial orbit through the factors.
    ComplexMatrix2 derivative(const ComplexPoint& z) const {
        check_state(z, "derivative");
        ComplexPoint w = z;
        ComplexMatrix2 J = ComplexMatrix2::identity();
        for (const auto& f : factors) {
            J = f.differential(w) * J;
            w = f.apply(w);
            check_state(w, "derivative");
        }
        return J;
    }

    // D(f^n)(z) together with f^n(z).
    ComplexMatrix2 derivative_n(const ComplexPoint& z, int n, ComplexPoint* image = nullptr) const {
        ComplexPoint w = z;
        ComplexMatrix2 J = ComplexMatrix2::identity();
        for (int k = 0; k < n; ++k) {
            J = derivative(w) * J;
            w = apply(w);
        }
        if (image) *image = w;
        return J;
    }

    std::int64_t dynamical_degree() const {
        std::int64_t d = 1;
        for (const auto& f : factors) d *= f.degree();
        return d;
    }

    // Jac(f) = prod(-a_i^2), constant on C^2.
    cplx jacobian_constant() const {
        cplx j{1.0};
        for (const auto& f : factors) j *= -(f.a * f.a);
        return j;
    }

    bool is_dissipative() const { return std::abs(jacobian_constant()) < 1.0; }

    // |Jac| < d^-2, the moderate dissipativity threshold.
    bool is_moderately_dissipative() const {
        double d = double(dynamical_degree());
        return std::abs(jacobian_constant()) < 1.0 / (d * d);
    }
};

// The inverse automorphism, conjugated by the coordinate swap s(x,y) = (y,x),
// is again a Henon composition:  s o f^-1 o s  has reversed factor order with
// p_i(x) replaced by -p_i(x/a_i)/a_i and a_i by 1/a_i.  Useful because it puts
// backward dynamics into the same normal form as forward dynamics, e.g.
// G^-_f(z) = G^+_g(s(z)) for g the returned composition.
inline HenonComposition inverse_normal_form(const HenonComposition& f) {
    std::vector<HenonFactor> out;
    out.reserve(f.factors.size());
    for (auto it = f.factors.rbegin(); it != f.factors.rend(); ++it) {
        std::vector<cplx> q(it->p_coeffs.size());
        cplx ak{1.0};
        for (std::size_t k = 0; k < q.size(); ++k) {
            ak *= it->a;  // a^(k+1)
            q[k] = -it->p_coeffs[k] / ak;
        }
        out.emplace_back(std::move(q), 1.0 / it->a);
    }
    return HenonComposition(std::move(out));
}

}  // namespace henonlab

#endif
