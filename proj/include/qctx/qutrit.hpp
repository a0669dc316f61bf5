/*
 * Qutrit states, observables and the nine-ray catalog.
 *
 * All types validate their defining invariants at construction:
 *   Ket                 unit norm (1e-12)
 *   DensityMatrix       Hermitian, unit trace, PSD (1e-12)
 *   HermitianObservable Hermitian (1e-12)
 *   UnitaryTransform    U U^dag = I (1e-12)
 *
 * Everything is immutable after construction and safe to share across
 * threads.  Random sampling takes an explicit RandomStream.
 */
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "qctx/linalg.hpp"
#include "qctx/rng.hpp"

namespace qctx {

inline constexpr double kConstructTol = 1e-12;  // internal precision
inline constexpr double kFileTol = 1e-9;        // user-supplied data read from files

class Ket {
  public:
    Ket(cx a, cx b, cx c, double tol = kConstructTol) : amps_(a, b, c) {
        if (std::abs(norm_sq(amps_) - 1.0) > tol)
            throw std::invalid_argument("Ket: amplitudes are not normalized");
    }
    explicit Ket(const Vec3& v, double tol = kConstructTol) : Ket(v[0], v[1], v[2], tol) {}

    static Ket normalized(const Vec3& v) {
        double n = norm(v);
        if (n < 1e-150) throw std::invalid_argument("Ket: cannot normalize the zero vector");
        return Ket((1.0 / n) * v);
    }

    const Vec3& amplitudes() const { return amps_; }
    cx operator[](int i) const { return amps_[i]; }

  private:
    Vec3 amps_;
};

inline cx inner(const Ket& a, const Ket& b) { return inner(a.amplitudes(), b.amplitudes()); }

class HermitianObservable {
  public:
    explicit HermitianObservable(const Mat3& m, double tol = kConstructTol) : m_(m) {
        if (hermiticity_defect(m) > tol * std::max(1.0, frobenius_norm(m)))
            throw std::invalid_argument("HermitianObservable: matrix is not Hermitian");
    }

    const Mat3& matrix() const { return m_; }

  private:
    Mat3 m_;
};

class DensityMatrix {
  public:
    explicit DensityMatrix(const Mat3& m, double tol = kConstructTol) : m_(m) {
        if (hermiticity_defect(m) > tol * std::max(1.0, frobenius_norm(m)))
            throw std::invalid_argument("DensityMatrix: matrix is not Hermitian");
        if (std::abs(trace(m) - cx(1.0)) > tol)
            throw std::invalid_argument("DensityMatrix: trace is not 1");
        auto eig = eigh3(m, tol);
        if (eig.values[0] < -tol)
            throw std::invalid_argument("DensityMatrix: negative eigenvalue " +
                                        std::to_string(eig.values[0]));
    }

    static DensityMatrix pure(const Ket& k) { return DensityMatrix(outer(k.amplitudes(), k.amplitudes())); }

    static DensityMatrix maximally_mixed() {
        return DensityMatrix(cx(1.0 / 3.0) * Mat3::identity());
    }

    const Mat3& matrix() const { return m_; }

    double purity() const { return std::real(trace(m_ * m_)); }

  private:
    Mat3 m_;
};

class UnitaryTransform {
  public:
    explicit UnitaryTransform(const Mat3& m, double tol = kConstructTol) : m_(m) {
        if (unitarity_defect(m) > tol * 3.0)
            throw std::invalid_argument("UnitaryTransform: matrix is not unitary");
    }

    static UnitaryTransform identity() { return UnitaryTransform(Mat3::identity()); }

    const Mat3& matrix() const { return m_; }

  private:
    Mat3 m_;
};

// The nine measurement rays of the test, indexed 1..9.  All components are
// real; |1>,|2>,|3> are the computational modes.
inline Ket ray(int index) {
    const double s2 = std::sqrt(2.0);
    const double s3 = std::sqrt(3.0);
    switch (index) {
        case 1: return Ket(1.0, 0.0, 0.0);
        case 2: return Ket(0.0, 1.0, 0.0);
        case 3: return Ket(0.0, 0.0, 1.0);
        case 4: return Ket(0.0, 1.0 / s2, -1.0 / s2);
        case 5: return Ket(1.0 / s3, 0.0, -s2 / s3);
        case 6: return Ket(1.0 / s3, s2 / s3, 0.0);
        case 7: return Ket(s2 / 2.0, 0.5, 0.5);
        case 8: return Ket(s2 / 2.0, -0.5, -0.5);
        case 9: return Ket(s2 / 2.0, -0.5, 0.5);
        default: throw std::out_of_range("ray: index must be in 1..9");
    }
}

inline std::vector<Ket> nine_ray_catalog() {
    std::vector<Ket> rays;
    rays.reserve(9);
    for (int i = 1; i <= 9; ++i) rays.push_back(ray(i));
    return rays;
}

// Pi = |k><k|
inline HermitianObservable projector(const Ket& k) {
    return HermitianObservable(outer(k.amplitudes(), k.amplitudes()));
}

// A = I - 2|k><k|, the dichotomous observable with outcome -1 exactly on k.
inline HermitianObservable dichotomous(const Ket& k) {
    return HermitianObservable(Mat3::identity() - 2.0 * outer(k.amplitudes(), k.amplitudes()));
}

// Tr(rho O).  The trace of a product of Hermitian matrices is real; an
// imaginary residue above 1e-9 indicates corrupted inputs.
inline double expectation(const DensityMatrix& rho, const HermitianObservable& obs) {
    cx t = trace(rho.matrix() * obs.matrix());
    if (std::abs(t.imag()) > 1e-9)
        throw std::runtime_error("expectation: non-real trace, internal inconsistency");
    return t.real();
}

// U O U^dag
inline HermitianObservable conjugate(const HermitianObservable& obs, const UnitaryTransform& u) {
    return HermitianObservable(u.matrix() * obs.matrix() * dagger(u.matrix()));
}

// Hilbert-Schmidt random state: rho = G G^dag / Tr(G G^dag) with G a matrix
// of independent standard complex Gaussian entries (Ginibre construction).
inline DensityMatrix random_hs_state(RandomStream& rng) {
    for (;;) {
        Mat3 g;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) g(r, c) = cx(rng.gaussian(), rng.gaussian());
        Mat3 w = g * dagger(g);
        double t = trace(w).real();
        if (t < 1e-300) continue;  // probability-zero corner
        return DensityMatrix(cx(1.0 / t) * w);
    }
}

inline Eigh3 eigh3(const HermitianObservable& h) { return eigh3(h.matrix()); }

}  // namespace qctx
