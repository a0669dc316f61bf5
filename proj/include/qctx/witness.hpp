/*
 * Quantum side of the contextuality engine: witness operator, quantum value
 * of the inequality, eigenbasis-alignment search, Hilbert-Schmidt census and
 * the detector-efficiency threshold.
 */
#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <thread>
#include <vector>

#include "qctx/exclusivity.hpp"
#include "qctx/qutrit.hpp"

namespace qctx {

// M = sum_e coeff_e A_i A_j + sum_v coeff_v A_v with A = I - 2|ray><ray|.
// Orthogonality on every weighted edge makes each product Hermitian, hence M
// is a genuine observable and Tr(rho M) evaluates the inequality LHS.
inline HermitianObservable witness(const ExclusivityGraph& g, const InequalityFunctional& f) {
    Mat3 m = Mat3::zero();
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        if (f.edge_coeff[e] == 0.0) continue;
        const Ket& ki = g.rays[static_cast<std::size_t>(g.edges[e].first - 1)];
        const Ket& kj = g.rays[static_cast<std::size_t>(g.edges[e].second - 1)];
        if (std::abs(inner(ki, kj)) >= g.tolerance)
            throw std::invalid_argument("witness: edge pair is not orthogonal");
        Mat3 ai = dichotomous(ki).matrix();
        Mat3 aj = dichotomous(kj).matrix();
        m = m + f.edge_coeff[e] * (ai * aj);
    }
    for (std::size_t v = 0; v < g.rays.size(); ++v) {
        if (f.vertex_coeff[v] == 0.0) continue;
        m = m + f.vertex_coeff[v] * dichotomous(g.rays[v]).matrix();
    }
    return HermitianObservable(m);
}

// Quantum value of the inequality left-hand side.
inline double lhs(const DensityMatrix& rho, const HermitianObservable& m) {
    return expectation(rho, m);
}

// eta* = 2 / sqrt(-lambda_min(M)): the detector efficiency at which the
// inefficiency-adjusted bound -4/eta^2 meets the maximal quantum violation.
inline double efficiency_threshold(const HermitianObservable& m) {
    double lambda_min = eigh3(m).values[0];
    if (lambda_min >= -4.0)
        throw std::domain_error("efficiency_threshold: no quantum violation, threshold undefined");
    return 2.0 / std::sqrt(-lambda_min);
}

struct BasisOptimum {
    UnitaryTransform transform = UnitaryTransform::identity();
    double lhs_min = 0.0;
};

namespace detail {

inline Mat3 plane_rotation(int p, int q, double theta) {
    Mat3 r = Mat3::identity();
    double c = std::cos(theta), s = std::sin(theta);
    r(p, p) = c;
    r(q, q) = c;
    r(p, q) = -s;
    r(q, p) = s;
    return r;
}

}  // namespace detail

// Measurement-basis search: map the eigenbasis of rho onto the computational
// axes (all 6 assignments of eigenvectors to axes), keep the minimum of
// Tr(u rho u^dag M), then run a small-rotation coordinate descent over the
// real rotation group with step halving until improvement drops below 1e-12.
// Ties in the spectrum of rho fall back on the deterministic eigh3 ordering.
inline BasisOptimum optimize_basis(const DensityMatrix& rho, const ExclusivityGraph& g,
                                   const InequalityFunctional& f, bool refine = true) {
    const Mat3 m = witness(g, f).matrix();
    const Eigh3 eig = eigh3(rho.matrix());
    const Mat3 vdag = dagger(eig.vectors);  // maps eigenbasis -> computational axes

    static const std::array<std::array<int, 3>, 6> kPerms{{{0, 1, 2},
                                                           {0, 2, 1},
                                                           {1, 0, 2},
                                                           {1, 2, 0},
                                                           {2, 0, 1},
                                                           {2, 1, 0}}};
    auto value_of = [&](const Mat3& u) {
        return trace(u * rho.matrix() * dagger(u) * m).real();
    };

    Mat3 best_u = Mat3::identity();
    double best = 0.0;
    bool first = true;
    for (const auto& p : kPerms) {
        Mat3 perm = Mat3::zero();
        for (int k = 0; k < 3; ++k) perm(p[static_cast<std::size_t>(k)], k) = 1.0;
        Mat3 u = perm * vdag;
        double v = value_of(u);
        if (first || v < best) {
            best = v;
            best_u = u;
            first = false;
        }
    }

    if (refine) {
        double step = 0.1;
        while (step > 1e-9) {
            bool improved = false;
            for (int p = 0; p < 3 && !improved; ++p) {
                for (int q = p + 1; q < 3 && !improved; ++q) {
                    for (double sgn : {+1.0, -1.0}) {
                        Mat3 cand = detail::plane_rotation(p, q, sgn * step) * best_u;
                        double v = value_of(cand);
                        if (v < best - 1e-12) {
                            best = v;
                            best_u = cand;
                            improved = true;
                            break;
                        }
                    }
                }
            }
            if (!improved) step *= 0.5;
        }
    }

    return BasisOptimum{UnitaryTransform(best_u), best};
}

enum class BasisMode { Fixed, Optimized };

struct CensusOptions {
    int workers = 1;
    double min_spectral_gap = 0.0;  // optimized mode: resample until gaps >= this
    bool refine = true;
};

struct CensusResult {
    double fraction = 0.0;
    double standard_error = 0.0;
    std::uint64_t n = 0;
    std::uint64_t violating = 0;
};

namespace detail {

inline bool gaps_at_least(const Eigh3& e, double gap) {
    return (e.values[1] - e.values[0]) >= gap && (e.values[2] - e.values[1]) >= gap;
}

}  // namespace detail

// Fraction of Hilbert-Schmidt random states violating the inequality, in the
// fixed catalog basis or after per-sample basis optimization.  Violation is
// strict: values within 1e-12 of the bound count as non-violating.  Worker w
// consumes the substream with index w, so results are deterministic for a
// fixed (seed, workers) pair.
inline CensusResult census(std::uint64_t n, std::uint64_t seed, BasisMode mode,
                           const ExclusivityGraph& g, const InequalityFunctional& f,
                           const CensusOptions& opts = {}) {
    if (n < 1) throw std::invalid_argument("census: n must be >= 1");
    const int workers = opts.workers < 1 ? 1 : opts.workers;
    const HermitianObservable m = witness(g, f);
    const double bound = f.classical_bound;

    std::vector<std::uint64_t> counts(static_cast<std::size_t>(workers), 0);
    auto work = [&](int w) {
        RandomStream rng(seed, static_cast<std::uint64_t>(w));
        std::uint64_t quota = n / static_cast<std::uint64_t>(workers) +
                              (static_cast<std::uint64_t>(w) < n % static_cast<std::uint64_t>(workers) ? 1 : 0);
        std::uint64_t hits = 0;
        for (std::uint64_t i = 0; i < quota; ++i) {
            DensityMatrix rho = random_hs_state(rng);
            if (mode == BasisMode::Optimized && opts.min_spectral_gap > 0.0) {
                while (!detail::gaps_at_least(eigh3(rho.matrix()), opts.min_spectral_gap))
                    rho = random_hs_state(rng);
            }
            double value = (mode == BasisMode::Fixed)
                               ? lhs(rho, m)
                               : optimize_basis(rho, g, f, opts.refine).lhs_min;
            if (value < bound - 1e-12) ++hits;
        }
        counts[static_cast<std::size_t>(w)] = hits;
    };

    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
        for (auto& t : pool) t.join();
    }

    CensusResult out;
    out.n = n;
    for (std::uint64_t c : counts) out.violating += c;
    out.fraction = static_cast<double>(out.violating) / static_cast<double>(n);
    out.standard_error = std::sqrt(out.fraction * (1.0 - out.fraction) / static_cast<double>(n));
    return out;
}

}  // namespace qctx
