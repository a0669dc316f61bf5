/*
 * Exclusivity graphs and noncontextual hidden-variable bounds.
 *
 * Vertices are rays; an edge joins two rays whose inner product vanishes
 * (orthogonal, hence co-measurable).  A noncontextual assignment gives every
 * vertex a pre-existing outcome in {+1,-1} such that no edge carries two
 * -1 outcomes.  Classical bounds come from exhaustive enumeration: with at
 * most 25 vertices the 2^n scan is itself the oracle.
 */
#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qctx/qutrit.hpp"

namespace qctx {

struct ExclusivityGraph {
    std::vector<Ket> rays;                      // vertex v_i = rays[i-1]
    std::vector<std::pair<int, int>> edges;     // 1-based (i,j), i < j
    double tolerance = 0.0;

    int vertex_count() const { return static_cast<int>(rays.size()); }

    bool has_edge(int i, int j) const {
        if (i > j) std::swap(i, j);
        for (const auto& e : edges)
            if (e.first == i && e.second == j) return true;
        return false;
    }

    int degree(int v) const {
        int d = 0;
        for (const auto& e : edges)
            if (e.first == v || e.second == v) ++d;
        return d;
    }
};

// Edges are exactly the pairs with |<ray_i|ray_j>| < tol.
inline ExclusivityGraph build_graph(const std::vector<Ket>& rays, double tol) {
    if (!(tol > 0.0) || tol > 1e-6)
        throw std::invalid_argument("build_graph: tolerance must lie in (0, 1e-6]");
    ExclusivityGraph g;
    g.rays = rays;
    g.tolerance = tol;
    const int n = static_cast<int>(rays.size());
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (std::abs(inner(rays[static_cast<std::size_t>(i)], rays[static_cast<std::size_t>(j)])) < tol)
                g.edges.emplace_back(i + 1, j + 1);
    return g;
}

struct NCHVAssignment {
    std::vector<int> outcomes;  // +1 / -1 per vertex

    int outcome(int v) const { return outcomes[static_cast<std::size_t>(v - 1)]; }
};

struct NCHVStrategy {
    std::vector<NCHVAssignment> assignments;
    std::vector<double> weights;  // nonnegative, sum 1

    void validate() const {
        if (assignments.size() != weights.size())
            throw std::invalid_argument("NCHVStrategy: size mismatch");
        double total = 0.0;
        for (double w : weights) {
            if (w < 0.0) throw std::invalid_argument("NCHVStrategy: negative weight");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw std::invalid_argument("NCHVStrategy: weights must sum to 1");
    }
};

// Linear functional over correlations: sum of edge terms plus vertex terms.
// classical_bound records the known NCHV bound where one exists.
struct InequalityFunctional {
    std::vector<double> edge_coeff;    // aligned with graph.edges
    std::vector<double> vertex_coeff;  // aligned with graph.rays
    double classical_bound = 0.0;

    double evaluate(const ExclusivityGraph& g, const NCHVAssignment& a) const {
        double s = 0.0;
        for (std::size_t e = 0; e < g.edges.size(); ++e)
            s += edge_coeff[e] * a.outcome(g.edges[e].first) * a.outcome(g.edges[e].second);
        for (std::size_t v = 0; v < g.rays.size(); ++v)
            s += vertex_coeff[v] * a.outcomes[v];
        return s;
    }

    double evaluate(const ExclusivityGraph& g, const NCHVStrategy& strat) const {
        strat.validate();
        double s = 0.0;
        for (std::size_t k = 0; k < strat.assignments.size(); ++k)
            s += strat.weights[k] * evaluate(g, strat.assignments[k]);
        return s;
    }

    // sum_{(i,j) in E} <A_i A_j> + <A_9>  >= -4
    static InequalityFunctional main_nine_ray(const ExclusivityGraph& g) {
        InequalityFunctional f;
        f.edge_coeff.assign(g.edges.size(), 1.0);
        f.vertex_coeff.assign(g.rays.size(), 0.0);
        if (g.vertex_count() != 9)
            throw std::invalid_argument("main_nine_ray: expects the 9-vertex catalog");
        f.vertex_coeff[8] = 1.0;
        f.classical_bound = -4.0;
        return f;
    }

    // Plain sum of edge correlations, e.g. the pentagon inequality (bound -3).
    static InequalityFunctional edge_sum(const ExclusivityGraph& g, double known_bound) {
        InequalityFunctional f;
        f.edge_coeff.assign(g.edges.size(), 1.0);
        f.vertex_coeff.assign(g.rays.size(), 0.0);
        f.classical_bound = known_bound;
        return f;
    }

    // Single vertex term, used as a degenerate CLI fixture (bound -1).
    static InequalityFunctional vertex_only(const ExclusivityGraph& g, int vertex) {
        InequalityFunctional f;
        f.edge_coeff.assign(g.edges.size(), 0.0);
        f.vertex_coeff.assign(g.rays.size(), 0.0);
        f.vertex_coeff[static_cast<std::size_t>(vertex - 1)] = 1.0;
        f.classical_bound = -1.0;
        return f;
    }
};

namespace detail {

inline bool admissible_mask(const ExclusivityGraph& g, std::uint32_t bits) {
    for (const auto& e : g.edges) {
        std::uint32_t mi = 1u << (e.first - 1);
        std::uint32_t mj = 1u << (e.second - 1);
        if ((bits & mi) && (bits & mj)) return false;
    }
    return true;
}

inline NCHVAssignment assignment_from_mask(int n, std::uint32_t bits) {
    NCHVAssignment a;
    a.outcomes.resize(static_cast<std::size_t>(n));
    for (int v = 0; v < n; ++v) a.outcomes[static_cast<std::size_t>(v)] = (bits >> v) & 1u ? -1 : +1;
    return a;
}

}  // namespace detail

// All edgewise-exclusive outcome assignments, in binary counting order with
// outcome +1 on bit 0.
inline std::vector<NCHVAssignment> enumerate_nchv(const ExclusivityGraph& g) {
    const int n = g.vertex_count();
    if (n > 25) throw std::invalid_argument("enumerate_nchv: more than 25 vertices");
    std::vector<NCHVAssignment> out;
    const std::uint32_t limit = 1u << n;
    for (std::uint32_t bits = 0; bits < limit; ++bits)
        if (detail::admissible_mask(g, bits)) out.push_back(detail::assignment_from_mask(n, bits));
    return out;
}

struct ClassicalMin {
    double value = 0.0;
    NCHVAssignment argmin;
};

// Minimum of the functional over all admissible assignments.  Mixtures are
// convex combinations, so this is the NCHV bound.
inline ClassicalMin classical_min(const ExclusivityGraph& g, const InequalityFunctional& f) {
    const int n = g.vertex_count();
    if (n > 25) throw std::invalid_argument("classical_min: more than 25 vertices");
    ClassicalMin best;
    bool first = true;
    const std::uint32_t limit = 1u << n;
    for (std::uint32_t bits = 0; bits < limit; ++bits) {
        if (!detail::admissible_mask(g, bits)) continue;
        NCHVAssignment a = detail::assignment_from_mask(n, bits);
        double v = f.evaluate(g, a);
        if (first || v < best.value) {
            best.value = v;
            best.argmin = std::move(a);
            first = false;
        }
    }
    if (first) throw std::logic_error("classical_min: empty graph");
    return best;
}

// Symmetric pentagon realization of the KCBS 5-cycle: vertex j sits at
// azimuth 4*pi*j/5 around the z axis, with the polar angle fixed so that
// adjacent rays are orthogonal (cos^2 theta = cos(pi/5)/(1+cos(pi/5))).
inline std::vector<Ket> kcbs_rays() {
    const double pi = 3.14159265358979323846;
    const double c = std::cos(pi / 5.0);
    const double cos_theta = std::sqrt(c / (1.0 + c));
    const double sin_theta = std::sqrt(1.0 - c / (1.0 + c));
    std::vector<Ket> rays;
    rays.reserve(5);
    for (int j = 0; j < 5; ++j) {
        double phi = 4.0 * pi * j / 5.0;
        rays.push_back(Ket::normalized(
            Vec3(sin_theta * std::cos(phi), sin_theta * std::sin(phi), cos_theta)));
    }
    return rays;
}

}  // namespace qctx
