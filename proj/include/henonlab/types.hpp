#ifndef HENONLAB_TYPES_HPP
#define HENONLAB_TYPES_HPP

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace henonlab {

using cplx = std::complex<double>;

inline bool is_finite(const cplx& z) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
}

// Thrown when an orbit leaves the representable range. Callers that iterate
// dynamics treat this as "escaped to numerical infinity", never as silent NaN.
class NumericalEscape : public std::runtime_error {
public:
    explicit NumericalEscape(const std::string& what) : std::runtime_error(what) {}
};

class DegenerateFamily : public std::runtime_error {
public:
    explicit DegenerateFamily(const std::string& what) : std::runtime_error(what) {}
};

struct ComplexPoint {
    cplx x{0.0, 0.0};
    cplx y{0.0, 0.0};

    ComplexPoint() = default;
    ComplexPoint(cplx x_, cplx y_) : x(x_), y(y_) {}

    ComplexPoint operator+(const ComplexPoint& o) const { return {x + o.x, y + o.y}; }
    ComplexPoint operator-(const ComplexPoint& o) const { return {x - o.x, y - o.y}; }
    ComplexPoint operator*(const cplx& s) const { return {s * x, s * y}; }
    ComplexPoint& operator+=(const ComplexPoint& o) {
        x += o.x;
        y += o.y;
        return *this;
    }
};

inline ComplexPoint operator*(const cplx& s, const ComplexPoint& p) { return p * s; }

// Max norm on C^2; this is the norm used by the escape filtration.
inline double sup_norm(const ComplexPoint& p) {
    return std::max(std::abs(p.x), std::abs(p.y));
}

inline double euclid_norm(const ComplexPoint& p) {
    return std::sqrt(std::norm(p.x) + std::norm(p.y));
}

inline bool is_finite(const ComplexPoint& p) { return is_finite(p.x) && is_finite(p.y); }

inline ComplexPoint swap_coords(const ComplexPoint& p) { return {p.y, p.x}; }

// Hermitian inner product, conjugate-linear in the second slot.
inline cplx hermitian_dot(const ComplexPoint& u, const ComplexPoint& v) {
    return u.x * std::conj(v.x) + u.y * std::conj(v.y);
}

// Row-major 2x2 complex matrix [[a, b], [c, d]].
struct ComplexMatrix2 {
    cplx a{0.0}, b{0.0}, c{0.0}, d{0.0};

    static ComplexMatrix2 identity() { return {cplx(1.0), cplx(0.0), cplx(0.0), cplx(1.0)}; }

    ComplexMatrix2 operator*(const ComplexMatrix2& o) const {
        return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
    }
    ComplexPoint operator*(const ComplexPoint& p) const {
        return {a * p.x + b * p.y, c * p.x + d * p.y};
    }
    ComplexMatrix2 operator-(const ComplexMatrix2& o) const {
        return {a - o.a, b - o.b, c - o.c, d - o.d};
    }
    ComplexMatrix2 operator*(const cplx& s) const { return {s * a, s * b, s * c, s * d}; }

    cplx det() const { return a * d - b * c; }
    cplx trace() const { return a + d; }
    double frobenius() const {
        return std::sqrt(std::norm(a) + std::norm(b) + std::norm(c) + std::norm(d));
    }

    ComplexMatrix2 inverse() const {
        cplx dt = det();
        if (std::abs(dt) == 0.0) throw std::domain_error("singular 2x2 matrix");
        cplx inv = 1.0 / dt;
        return {d * inv, -b * inv, -c * inv, a * inv};
    }
};

// Solves A z = rhs with partial pivoting on the rows.
inline ComplexPoint solve2x2(const ComplexMatrix2& A, const ComplexPoint& rhs) {
    cplx a = A.a, b = A.b, c = A.c, d = A.d;
    cplx r1 = rhs.x, r2 = rhs.y;
    if (std::abs(c) > std::abs(a)) {
        std::swap(a, c);
        std::swap(b, d);
        std::swap(r1, r2);
    }
    if (std::abs(a) == 0.0) throw std::domain_error("singular system in solve2x2");
    cplx m = c / a;
    cplx dd = d - m * b;
    cplx rr = r2 - m * r1;
    if (std::abs(dd) == 0.0) throw std::domain_error("singular system in solve2x2");
    cplx yy = rr / dd;
    cplx xx = (r1 - b * yy) / a;
    return {xx, yy};
}

struct Eigen2 {
    cplx mu1{0.0}, mu2{0.0};       // ordered |mu1| >= |mu2|
    ComplexPoint v1, v2;           // unit eigenvectors (Hermitian norm)
    bool defective = false;
};

inline ComplexPoint unit_vector(const ComplexPoint& v) {
    double n = euclid_norm(v);
    if (n == 0.0) throw std::domain_error("zero eigenvector");
    ComplexPoint u{v.x / n, v.y / n};
    // Deterministic phase: make the largest component real positive.
    cplx lead = (std::abs(u.x) >= std::abs(u.y)) ? u.x : u.y;
    cplx phase = std::abs(lead) > 0.0 ? std::conj(lead) / std::abs(lead) : cplx(1.0);
    return {u.x * phase, u.y * phase};
}

// Closed-form eigendecomposition of a 2x2 complex matrix.
inline Eigen2 eigen2x2(const ComplexMatrix2& A, double defect_tol = 1e-10) {
    Eigen2 out;
    cplx tr = A.trace();
    cplx disc = std::sqrt(tr * tr - 4.0 * A.det());
    cplx m1 = 0.5 * (tr + disc);
    cplx m2 = 0.5 * (tr - disc);
    if (std::abs(m1) < std::abs(m2)) std::swap(m1, m2);
    out.mu1 = m1;
    out.mu2 = m2;
    auto eigvec = [&](cplx mu) -> ComplexPoint {
        // Rows of (A - mu I); the eigenvector annihilates both.
        ComplexPoint r1{A.a - mu, A.b};
        ComplexPoint r2{A.c, A.d - mu};
        ComplexPoint cand1{r1.y, -r1.x};  // orthogonal (bilinear) to row 1
        ComplexPoint cand2{r2.y, -r2.x};
        ComplexPoint cand = (euclid_norm(cand1) >= euclid_norm(cand2)) ? cand1 : cand2;
        if (euclid_norm(cand) == 0.0) cand = {1.0, 0.0};  // A is scalar
        return unit_vector(cand);
    };
    out.v1 = eigvec(m1);
    out.v2 = eigvec(m2);
    double scale = A.frobenius();
    if (std::abs(m1 - m2) <= defect_tol * std::max(1.0, scale)) {
        // Eigenvalues collide; defective unless eigenvectors are independent.
        cplx g = hermitian_dot(out.v1, out.v2);
        if (std::abs(std::abs(g) - 1.0) < 1e-8) out.defective = true;
    }
    return out;
}

// Singular values of a 2x2 complex matrix (exact formulas).
inline std::array<double, 2> singular_values2x2(const ComplexMatrix2& A) {
    double f2 = std::norm(A.a) + std::norm(A.b) + std::norm(A.c) + std::norm(A.d);
    double dt = std::abs(A.det());
    double disc = f2 * f2 - 4.0 * dt * dt;
    if (disc < 0.0) disc = 0.0;
    double root = std::sqrt(disc);
    double s1 = std::sqrt(0.5 * (f2 + root));
    double s2 = (s1 > 0.0) ? dt / s1 : 0.0;
    return {s1, s2};
}

}  // namespace henonlab

#endif
