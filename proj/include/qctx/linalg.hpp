/*
 * Fixed-size complex linear algebra for 3-mode systems.
 *
 * Vec3 / Mat3 are plain value types (row-major storage) with the handful of
 * operations the rest of the library needs.  eigh3() is a cyclic complex
 * Jacobi eigensolver with deterministic ordering: eigenvalues ascending,
 * exact ties broken by lexicographic comparison of the phase-canonicalized
 * eigenvectors.
 */
#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>

namespace qctx {

using cx = std::complex<double>;

struct Vec3 {
    std::array<cx, 3> v{};

    Vec3() = default;
    Vec3(cx a, cx b, cx c) : v{a, b, c} {}

    cx& operator[](int i) { return v[static_cast<std::size_t>(i)]; }
    const cx& operator[](int i) const { return v[static_cast<std::size_t>(i)]; }
};

struct Mat3 {
    std::array<cx, 9> m{};

    cx& operator()(int r, int c) { return m[static_cast<std::size_t>(3 * r + c)]; }
    const cx& operator()(int r, int c) const { return m[static_cast<std::size_t>(3 * r + c)]; }

    static Mat3 identity() {
        Mat3 out;
        out(0, 0) = out(1, 1) = out(2, 2) = 1.0;
        return out;
    }
    static Mat3 zero() { return Mat3{}; }
};

inline Vec3 operator+(const Vec3& a, const Vec3& b) {
    return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
inline Vec3 operator-(const Vec3& a, const Vec3& b) {
    return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
inline Vec3 operator*(cx s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }

// Hermitian inner product <a|b>, conjugate-linear in the first argument.
inline cx inner(const Vec3& a, const Vec3& b) {
    return std::conj(a[0]) * b[0] + std::conj(a[1]) * b[1] + std::conj(a[2]) * b[2];
}

inline double norm_sq(const Vec3& a) { return std::real(inner(a, a)); }
inline double norm(const Vec3& a) { return std::sqrt(norm_sq(a)); }

// |a><b|
inline Mat3 outer(const Vec3& a, const Vec3& b) {
    Mat3 out;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) out(r, c) = a[r] * std::conj(b[c]);
    return out;
}

inline Mat3 operator+(const Mat3& a, const Mat3& b) {
    Mat3 out;
    for (int i = 0; i < 9; ++i) out.m[static_cast<std::size_t>(i)] = a.m[static_cast<std::size_t>(i)] + b.m[static_cast<std::size_t>(i)];
    return out;
}
inline Mat3 operator-(const Mat3& a, const Mat3& b) {
    Mat3 out;
    for (int i = 0; i < 9; ++i) out.m[static_cast<std::size_t>(i)] = a.m[static_cast<std::size_t>(i)] - b.m[static_cast<std::size_t>(i)];
    return out;
}
inline Mat3 operator*(cx s, const Mat3& a) {
    Mat3 out;
    for (int i = 0; i < 9; ++i) out.m[static_cast<std::size_t>(i)] = s * a.m[static_cast<std::size_t>(i)];
    return out;
}
inline Mat3 operator*(const Mat3& a, const Mat3& b) {
    Mat3 out;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            cx s = 0.0;
            for (int k = 0; k < 3; ++k) s += a(r, k) * b(k, c);
            out(r, c) = s;
        }
    return out;
}
inline Vec3 operator*(const Mat3& a, const Vec3& x) {
    Vec3 out;
    for (int r = 0; r < 3; ++r) {
        cx s = 0.0;
        for (int k = 0; k < 3; ++k) s += a(r, k) * x[k];
        out[r] = s;
    }
    return out;
}

inline Mat3 dagger(const Mat3& a) {
    Mat3 out;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) out(r, c) = std::conj(a(c, r));
    return out;
}

inline cx trace(const Mat3& a) { return a(0, 0) + a(1, 1) + a(2, 2); }

inline double frobenius_norm(const Mat3& a) {
    double s = 0.0;
    for (const auto& e : a.m) s += std::norm(e);
    return std::sqrt(s);
}

inline Vec3 column(const Mat3& a, int c) { return {a(0, c), a(1, c), a(2, c)}; }

inline void set_column(Mat3& a, int c, const Vec3& v) {
    for (int r = 0; r < 3; ++r) a(r, c) = v[r];
}

inline double hermiticity_defect(const Mat3& a) { return frobenius_norm(a - dagger(a)); }

inline double unitarity_defect(const Mat3& a) {
    return frobenius_norm(a * dagger(a) - Mat3::identity());
}

struct Eigh3 {
    std::array<double, 3> values{};  // ascending
    Mat3 vectors;                    // column k pairs with values[k], orthonormal
};

namespace detail {

// Rotate an eigenvector to the canonical phase: the largest-magnitude
// component (lowest index on ties) is made real and positive.
inline Vec3 canonical_phase(Vec3 v) {
    int pivot = 0;
    double best = std::abs(v[0]);
    for (int i = 1; i < 3; ++i) {
        double a = std::abs(v[i]);
        if (a > best + 1e-12) {
            best = a;
            pivot = i;
        }
    }
    if (best > 0.0) {
        cx phase = std::conj(v[pivot]) / best;
        v = phase * v;
        v[pivot] = cx(std::abs(v[pivot]), 0.0);
    }
    return v;
}

inline bool lex_less(const Vec3& a, const Vec3& b) {
    for (int i = 0; i < 3; ++i) {
        if (a[i].real() != b[i].real()) return a[i].real() < b[i].real();
        if (a[i].imag() != b[i].imag()) return a[i].imag() < b[i].imag();
    }
    return false;
}

}  // namespace detail

// Eigendecomposition of a 3x3 Hermitian matrix by cyclic complex Jacobi
// sweeps.  Reconstruction residual is at machine precision; ordering is
// deterministic for identical input bits.
inline Eigh3 eigh3(const Mat3& h, double hermitian_tol = 1e-12) {
    double scale = frobenius_norm(h);
    if (hermiticity_defect(h) > hermitian_tol * std::max(1.0, scale))
        throw std::invalid_argument("eigh3: input is not Hermitian");

    Mat3 a = h;
    // Symmetrize to kill round-off asymmetry before iterating.
    a = 0.5 * (a + dagger(a));
    Mat3 vec = Mat3::identity();

    constexpr int kMaxSweeps = 60;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        double off = std::sqrt(std::norm(a(0, 1)) + std::norm(a(0, 2)) + std::norm(a(1, 2)));
        if (off <= 1e-15 * std::max(1.0, scale)) break;
        for (int p = 0; p < 3; ++p) {
            for (int q = p + 1; q < 3; ++q) {
                cx apq = a(p, q);
                double abs_apq = std::abs(apq);
                if (abs_apq < 1e-300) continue;
                double app = a(p, p).real();
                double aqq = a(q, q).real();
                cx phase = apq / abs_apq;
                double tau = (app - aqq) / (2.0 * abs_apq);
                double t = (tau >= 0.0) ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                        : -1.0 / (-tau + std::sqrt(1.0 + tau * tau));
                double c = 1.0 / std::sqrt(1.0 + t * t);
                double s = t * c;

                Mat3 j = Mat3::identity();
                j(p, p) = c;
                j(q, q) = c;
                j(p, q) = -s * phase;
                j(q, p) = s * std::conj(phase);

                a = dagger(j) * a * j;
                vec = vec * j;
            }
        }
    }

    std::array<int, 3> order{0, 1, 2};
    std::array<double, 3> vals{a(0, 0).real(), a(1, 1).real(), a(2, 2).real()};
    std::array<Vec3, 3> cols{detail::canonical_phase(column(vec, 0)),
                             detail::canonical_phase(column(vec, 1)),
                             detail::canonical_phase(column(vec, 2))};
    auto less = [&](int x, int y) {
        if (vals[static_cast<std::size_t>(x)] != vals[static_cast<std::size_t>(y)])
            return vals[static_cast<std::size_t>(x)] < vals[static_cast<std::size_t>(y)];
        return detail::lex_less(cols[static_cast<std::size_t>(x)], cols[static_cast<std::size_t>(y)]);
    };
    // 3-element insertion sort keeps the comparator usage explicit.
    for (int i = 1; i < 3; ++i)
        for (int k = i; k > 0 && less(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k - 1)]); --k)
            std::swap(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k - 1)]);

    Eigh3 out;
    for (int k = 0; k < 3; ++k) {
        out.values[static_cast<std::size_t>(k)] = vals[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
        set_column(out.vectors, k, cols[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])]);
    }
    return out;
}

}  // namespace qctx
