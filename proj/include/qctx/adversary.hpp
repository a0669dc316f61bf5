/*
 * Detection-loophole adversary.
 *
 * A strategy is a mixture of admissible noncontextual assignments together
 * with per-(assignment, stage) click-suppression probabilities.  Each trial
 * draws an assignment lambda; in every stage the detector of the unique -1
 * observable clicks (for a partial basis with no -1 the completion-ray
 * detector clicks; for a complete basis with no -1 nothing clicks), and the
 * click is then suppressed with the strategy's probability.  Post-selection
 * and correlation estimation proceed exactly as for real runs, so
 * outcome-correlated loss can fake a violation.
 *
 * Physical consistency bounds the strategy: the experimenter monitors the
 * heralded no-click rate of every configured stage, so a strategy may not
 * lose more than the detectors do, P(no click | stage) <= 1 - eta.  The
 * searched class is additionally capped by the inefficiency-adjusted bound:
 * candidates whose exact expected post-selected LHS falls below -4/eta^2
 * are outside the modeled adversary and are rejected.
 */
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "qctx/exclusivity.hpp"
#include "qctx/harness.hpp"

namespace qctx::adversary {

struct Strategy {
    std::vector<NCHVAssignment> assignments;
    std::vector<double> weights;                    // nonnegative, sum 1
    std::vector<std::vector<double>> suppression;   // [assignment][stage] in [0,1]

    void validate(const harness::ExperimentPlan& plan) const {
        if (assignments.size() != weights.size() || assignments.size() != suppression.size())
            throw std::invalid_argument("Strategy: size mismatch");
        double total = 0.0;
        for (double w : weights) {
            if (w < -1e-12) throw std::invalid_argument("Strategy: negative weight");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-9)
            throw std::invalid_argument("Strategy: weights must sum to 1");
        for (const auto& row : suppression) {
            if (row.size() != plan.stages.size())
                throw std::invalid_argument("Strategy: suppression table shape mismatch");
            for (double s : row)
                if (s < -1e-12 || s > 1.0 + 1e-12)
                    throw std::invalid_argument("Strategy: suppression outside [0,1]");
        }
    }
};

namespace detail {

struct ClickPlan {
    bool clicks = false;
    int detector = 0;
    bool delayed = false;
};

// Deterministic outcome pattern of one assignment in one stage.
inline ClickPlan click_plan(const NCHVAssignment& a, const harness::StageConfig& stage) {
    ClickPlan plan;
    // The delay-tagged observable, when assigned -1, reaches its
    // reconstruction detector one time bin late.
    if (stage.delayed_observable != 0 && a.outcome(stage.delayed_observable) == -1) {
        plan.clicks = true;
        plan.detector = stage.delayed_detector;
        plan.delayed = true;
        return plan;
    }
    int completion = 0;
    for (int det = 1; det <= 3; ++det) {
        int v = stage.observable[static_cast<std::size_t>(det - 1)];
        if (v == 0) {
            completion = det;
            continue;
        }
        if (det == stage.delayed_detector) continue;  // handled above via the delay
        if (a.outcome(v) == -1) {
            plan.clicks = true;
            plan.detector = det;
            return plan;
        }
    }
    if (completion != 0) {
        // All measured observables carry +1: the photon sits in the
        // completion ray and clicks there.
        plan.clicks = true;
        plan.detector = completion;
    }
    return plan;  // complete basis, all +1: nothing clicks
}

}  // namespace detail

// P(no click | stage) for every stage of the plan.
inline std::vector<double> no_click_profile(const Strategy& strat,
                                            const harness::ExperimentPlan& plan) {
    std::vector<double> out(plan.stages.size(), 0.0);
    for (std::size_t s = 0; s < plan.stages.size(); ++s) {
        double p = 0.0;
        for (std::size_t t = 0; t < strat.assignments.size(); ++t) {
            detail::ClickPlan cp = detail::click_plan(strat.assignments[t], plan.stages[s]);
            p += strat.weights[t] * (cp.clicks ? strat.suppression[t][s] : 1.0);
        }
        out[s] = p;
    }
    return out;
}

// A strategy is physically admissible at efficiency eta when no stage loses
// more often than the detectors would.
inline bool feasible(const Strategy& strat, const harness::ExperimentPlan& plan, double eta,
                     double slack = 1e-9) {
    for (double p : no_click_profile(strat, plan))
        if (p > 1.0 - eta + slack) return false;
    return true;
}

// Exact expected post-selected LHS, computed from the strategy's stage-level
// click distributions with the same arithmetic the empirical estimator uses.
// No sampling is involved.
inline double expected_lhs(const Strategy& strat, const harness::ExperimentPlan& plan) {
    strat.validate(plan);

    double lhs_sum = 0.0;
    double a9_value = 0.0;
    for (std::size_t s = 0; s < plan.stages.size(); ++s) {
        const harness::StageConfig& stage = plan.stages[s];
        const bool is_calibration =
            !stage.pairs.empty() && stage.pairs.front().kind == harness::PairKind::Calibration;

        if (!stage.record_data) {
            lhs_sum += -1.0;  // covered triple; clicked trials sum to -1 exactly
            continue;
        }
        if (is_calibration) continue;

        std::array<double, 3> coincident{};
        std::array<double, 3> delayed{};
        double click_total = 0.0;
        for (std::size_t t = 0; t < strat.assignments.size(); ++t) {
            detail::ClickPlan cp = detail::click_plan(strat.assignments[t], stage);
            if (!cp.clicks) continue;
            double p = strat.weights[t] * (1.0 - strat.suppression[t][s]);
            (cp.delayed ? delayed : coincident)[static_cast<std::size_t>(cp.detector - 1)] += p;
            click_total += p;
        }
        if (click_total < 1e-15)
            throw harness::InsufficientDataError("expected_lhs: stage " + stage.label +
                                                 " never clicks");

        for (const auto& pair : stage.pairs) {
            double value = 0.0;
            if (pair.kind == harness::PairKind::Basis) {
                double f = (coincident[static_cast<std::size_t>(stage.detector_of(pair.i) - 1)] +
                            delayed[static_cast<std::size_t>(stage.detector_of(pair.i) - 1)] +
                            coincident[static_cast<std::size_t>(stage.detector_of(pair.j) - 1)] +
                            delayed[static_cast<std::size_t>(stage.detector_of(pair.j) - 1)]) /
                           click_total;
                value = 1.0 - 2.0 * f;
            } else {
                // Delayed pair: violations have probability zero under an
                // exclusivity-respecting assignment.
                const int det_y = stage.detector_of(pair.j);
                double n_y = coincident[static_cast<std::size_t>(det_y - 1)];
                double n_x = 0.0;
                for (int d = 1; d <= 3; ++d)
                    if (d != det_y) n_x += delayed[static_cast<std::size_t>(d - 1)];
                value = 1.0 - 2.0 * (n_x + n_y) / click_total;
            }
            lhs_sum += value;
        }

        if (stage.label == plan.a9_stage) {
            const int det9 = stage.detector_of(9);
            double f9 = (coincident[static_cast<std::size_t>(det9 - 1)] +
                         delayed[static_cast<std::size_t>(det9 - 1)]) /
                        click_total;
            a9_value = 1.0 - 2.0 * f9;
        }
    }
    return lhs_sum + a9_value;
}

// Monte Carlo realization of a strategy: one assignment per trial, the
// deterministic click pattern per stage, suppression applied, then the
// standard post-selected analysis.  eta enters the report's bound columns.
inline harness::RunResult adversarial_run(const Strategy& strat,
                                          const harness::ExperimentPlan& plan, double eta,
                                          std::int64_t trials, std::uint64_t seed) {
    strat.validate(plan);
    std::vector<harness::StageData> data;
    for (const auto& stage : plan.stages) {
        if (!stage.record_data) continue;
        harness::StageData d;
        d.label = stage.label;
        d.records.reserve(static_cast<std::size_t>(trials));
        data.push_back(std::move(d));
    }

    RandomStream rng(seed, 0);
    for (std::int64_t trial = 0; trial < trials; ++trial) {
        int t = rng.discrete(strat.weights, static_cast<int>(strat.weights.size()));
        std::size_t slot = 0;
        for (std::size_t s = 0; s < plan.stages.size(); ++s) {
            const harness::StageConfig& stage = plan.stages[s];
            if (!stage.record_data) continue;
            detail::ClickPlan cp =
                detail::click_plan(strat.assignments[static_cast<std::size_t>(t)], stage);
            optics::ClickRecord rec;
            rec.trial = trial;
            rec.stage = stage.label;
            rec.heralded = true;
            if (cp.clicks &&
                !rng.bernoulli(strat.suppression[static_cast<std::size_t>(t)][s])) {
                rec.detector = cp.detector;
                rec.delayed = cp.delayed;
            }
            data[slot].records.push_back(rec);
            ++slot;
        }
    }

    optics::DetectorBank bank;
    bank.eta = {eta, eta, eta};
    harness::RunOptions opts;
    opts.state_label = "adversarial";
    opts.diagnostics = false;
    harness::RunResult out;
    out.data = std::move(data);
    out.report = analyze(plan, out.data, bank, opts);
    out.report.seed = seed;
    out.report.trials_per_stage = trials;
    return out;
}

struct SearchResult {
    Strategy strategy;
    double expected = 0.0;   // exact expected post-selected LHS
    double cap = 0.0;        // -4/eta^2
    std::uint64_t evaluations = 0;
};

// Random-restart hill climb over (mixture weights, suppression table),
// maximizing the fake violation.  Candidates must stay physically feasible
// and above the inefficiency-adjusted cap.  Deterministic for a fixed seed.
inline SearchResult search_adversarial(double eta, std::uint64_t budget, std::uint64_t seed,
                                       const harness::ExperimentPlan& plan,
                                       const ExclusivityGraph& g) {
    if (!(eta > 0.0) || eta > 1.0)
        throw std::invalid_argument("search_adversarial: eta must lie in (0,1]");
    const double cap = -4.0 / (eta * eta);
    const std::vector<NCHVAssignment> pool = enumerate_nchv(g);
    const std::size_t n_stages = plan.stages.size();

    auto single = [&](std::size_t t) {
        Strategy s;
        s.assignments = pool;
        s.weights.assign(pool.size(), 0.0);
        s.weights[t] = 1.0;
        s.suppression.assign(pool.size(), std::vector<double>(n_stages, 0.0));
        return s;
    };

    auto admissible_value = [&](const Strategy& s, double& value) {
        if (!feasible(s, plan, eta)) return false;
        try {
            value = expected_lhs(s, plan);
        } catch (const harness::InsufficientDataError&) {
            return false;
        }
        return value >= cap - 1e-9;
    };

    SearchResult best;
    best.cap = cap;
    bool have_best = false;
    for (std::size_t t = 0; t < pool.size(); ++t) {
        Strategy s = single(t);
        double v = 0.0;
        ++best.evaluations;
        if (admissible_value(s, v) && (!have_best || v < best.expected)) {
            best.strategy = s;
            best.expected = v;
            have_best = true;
        }
    }
    if (!have_best)
        throw std::runtime_error("search_adversarial: no feasible strategy found");

    RandomStream rng(seed, 0);
    Strategy current = best.strategy;
    double current_value = best.expected;
    std::uint64_t since_improvement = 0;
    while (best.evaluations < budget) {
        Strategy cand = current;
        double move = rng.uniform();
        if (move < 0.5) {
            // shift weight between two assignments
            std::size_t a = static_cast<std::size_t>(rng.uniform() * static_cast<double>(pool.size()));
            std::size_t b = static_cast<std::size_t>(rng.uniform() * static_cast<double>(pool.size()));
            if (a == b) continue;
            double delta = rng.uniform() * cand.weights[a];
            cand.weights[a] -= delta;
            cand.weights[b] += delta;
        } else {
            // adjust one suppression entry
            std::size_t t = static_cast<std::size_t>(rng.uniform() * static_cast<double>(pool.size()));
            std::size_t s = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n_stages));
            double delta = (rng.uniform() - 0.5) * 0.5;
            double v = cand.suppression[t][s] + delta;
            cand.suppression[t][s] = v < 0.0 ? 0.0 : (v > 1.0 - eta ? 1.0 - eta : v);
        }

        double v = 0.0;
        ++best.evaluations;
        if (admissible_value(cand, v) && v < current_value - 1e-12) {
            current = cand;
            current_value = v;
            since_improvement = 0;
            if (v < best.expected) {
                best.strategy = cand;
                best.expected = v;
            }
        } else if (++since_improvement > budget / 10 + 50) {
            // restart from a random feasible single
            std::size_t t = static_cast<std::size_t>(rng.uniform() * static_cast<double>(pool.size()));
            Strategy s = single(t);
            double sv = 0.0;
            ++best.evaluations;
            if (admissible_value(s, sv)) {
                current = s;
                current_value = sv;
            }
            since_improvement = 0;
        }
    }
    return best;
}

}  // namespace qctx::adversary
