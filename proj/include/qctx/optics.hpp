/*
 * Photonic qutrit simulator: three modes (two spatial paths u/d, with the
 * u path split into H/V polarization), wave plates as embedded 2x2 real
 * rotations, polarizing-beam-splitter recombination as exact mode routing,
 * time-delay tagging and inefficient single-mode detectors.
 *
 * Conventions
 *   - circuit_unitary() is the ordered product of element matrices, later
 *     elements applied after earlier ones.
 *   - A compiled stage circuit carries the measurement rays in the COLUMNS
 *     of its unitary: detector k is aligned to column k, and a trial
 *     projects the photon onto the detector rays (probabilities
 *     |<col_k|psi>|^2).
 *   - A DelayTag on mode j routes the photon component along the ray that
 *     the elements before the tag map mode j to into a later time bin.  A
 *     tag at the head of the circuit therefore delays input mode j itself,
 *     which is where the measurement plan places it ("where the mode is
 *     first created").  Both time bins are analyzed by the full circuit;
 *     delayed/coincident is part of the sampled outcome.
 *   - All loss lives at the detectors (bank efficiencies); recombiners are
 *     lossless routings.
 */
#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "qctx/qutrit.hpp"
#include "qctx/rng.hpp"

namespace qctx::optics {

struct ModeLabel {
    int index;          // 1..3
    char path;          // 'u' or 'd'
    char polarization;  // 'H' or 'V'
};

// Fixed catalog: mode 1 = (u,H), mode 2 = (u,V), mode 3 = (d,H).
inline ModeLabel mode_label(int index) {
    switch (index) {
        case 1: return {1, 'u', 'H'};
        case 2: return {2, 'u', 'V'};
        case 3: return {3, 'd', 'H'};
        default: throw std::out_of_range("mode_label: index must be in 1..3");
    }
}

inline double normalized_angle(double theta) {
    const double two_pi = 6.283185307179586476925287;
    double t = std::fmod(theta, two_pi);
    if (t < 0.0) t += two_pi;
    return t;
}

struct WavePlate {
    int mode_a, mode_b;  // ascending
    double angle;        // radians in [0, 2*pi)
};

struct Recombiner {
    int mode_a, mode_b;  // routing swap of same-polarization modes
};

struct DelayTag {
    int mode;
    double delay;  // abstract time units; only delayed-vs-coincident matters
};

using OpticalElement = std::variant<WavePlate, Recombiner, DelayTag>;

inline WavePlate make_wave_plate(int a, int b, double theta) {
    if (a == b || a < 1 || a > 3 || b < 1 || b > 3)
        throw std::invalid_argument("make_wave_plate: bad mode pair");
    if (a > b) std::swap(a, b);
    return WavePlate{a, b, normalized_angle(theta)};
}

// Physical legality under the mode catalog: wave plates act on the
// polarization pair sharing path u, recombiners on the shared-H pair.
inline bool wave_plate_pair_legal(const WavePlate& e) { return e.mode_a == 1 && e.mode_b == 2; }
inline bool recombiner_pair_legal(const Recombiner& e) { return e.mode_a == 1 && e.mode_b == 3; }

struct OpticalCircuit {
    std::vector<OpticalElement> elements;
    std::string stage_label;
};

// 3x3 identity with the 2x2 rotation [[cos,-sin],[sin,cos]] embedded on the
// pair, rows/columns in ascending mode order.
inline UnitaryTransform wave_plate_matrix(const WavePlate& e, bool enforce_legality = false) {
    if (enforce_legality && !wave_plate_pair_legal(e))
        throw std::invalid_argument("wave_plate_matrix: pair does not share a spatial path");
    Mat3 m = Mat3::identity();
    const int a = e.mode_a - 1, b = e.mode_b - 1;
    const double c = std::cos(e.angle), s = std::sin(e.angle);
    m(a, a) = c;
    m(a, b) = -s;
    m(b, a) = s;
    m(b, b) = c;
    return UnitaryTransform(m);
}

inline Mat3 element_matrix(const OpticalElement& e) {
    if (const auto* wp = std::get_if<WavePlate>(&e)) return wave_plate_matrix(*wp).matrix();
    if (const auto* rc = std::get_if<Recombiner>(&e)) {
        Mat3 m = Mat3::identity();
        const int a = rc->mode_a - 1, b = rc->mode_b - 1;
        m(a, a) = m(b, b) = 0.0;
        m(a, b) = m(b, a) = 1.0;
        return m;
    }
    return Mat3::identity();  // DelayTag: timing only
}

// Ordered product of element matrices, later elements applied after earlier.
inline UnitaryTransform circuit_unitary(const OpticalCircuit& c) {
    Mat3 u = Mat3::identity();
    for (const auto& e : c.elements) u = element_matrix(e) * u;
    return UnitaryTransform(u);
}

inline std::vector<std::string> legality_violations(const OpticalCircuit& c) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < c.elements.size(); ++i) {
        if (const auto* wp = std::get_if<WavePlate>(&c.elements[i])) {
            if (!wave_plate_pair_legal(*wp))
                out.push_back("element " + std::to_string(i) + ": wave plate on pair (" +
                              std::to_string(wp->mode_a) + "," + std::to_string(wp->mode_b) +
                              ") does not share a spatial path");
        } else if (const auto* rc = std::get_if<Recombiner>(&c.elements[i])) {
            if (!recombiner_pair_legal(*rc))
                out.push_back("element " + std::to_string(i) + ": recombiner on pair (" +
                              std::to_string(rc->mode_a) + "," + std::to_string(rc->mode_b) +
                              ") does not share polarization");
        }
    }
    return out;
}

namespace detail {

inline double det_real(const Mat3& m) {
    cx d = m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
           m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
           m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
    return d.real();
}

// Givens factorization of a rotation: returns wave plates whose ordered
// product (later after earlier) equals r.  Requires det(r) = +1.
inline std::vector<OpticalElement> compile_rotation(Mat3 r) {
    auto entry = [&](int row, int col) { return r(row, col).real(); };
    // Triangularize by left-multiplying plane rotations; their inverses,
    // reversed, reproduce r.
    double g1 = -std::atan2(entry(1, 0), entry(0, 0));
    Mat3 l1 = wave_plate_matrix(make_wave_plate(1, 2, g1)).matrix();
    r = l1 * r;
    double g2 = -std::atan2(entry(2, 0), entry(0, 0));
    Mat3 l2 = wave_plate_matrix(make_wave_plate(1, 3, g2)).matrix();
    r = l2 * r;
    double g3 = -std::atan2(entry(2, 1), entry(1, 1));
    std::vector<OpticalElement> out;
    auto push_if_rotating = [&out](int a, int b, double theta) {
        double t = normalized_angle(theta);
        if (t > 1e-14 && (6.283185307179586 - t) > 1e-14)
            out.push_back(make_wave_plate(a, b, t));
    };
    push_if_rotating(2, 3, -g3);
    push_if_rotating(1, 3, -g2);
    push_if_rotating(1, 2, -g1);
    return out;
}

// Real orthonormal matrix with columns = targets, sign-flipped on the last
// column if needed to land in SO(3).
inline Mat3 target_matrix(const std::array<Ket, 3>& targets) {
    for (const auto& t : targets)
        for (int i = 0; i < 3; ++i)
            if (std::abs(t[i].imag()) > 1e-9)
                throw std::invalid_argument("compile_basis: targets must have real amplitudes");
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j)
            if (std::abs(inner(targets[static_cast<std::size_t>(i)], targets[static_cast<std::size_t>(j)])) > 1e-9)
                throw std::invalid_argument("compile_basis: targets are not orthogonal");
    Mat3 b;
    for (int col = 0; col < 3; ++col)
        for (int row = 0; row < 3; ++row)
            b(row, col) = targets[static_cast<std::size_t>(col)][row].real();
    if (det_real(b) < 0.0)
        for (int row = 0; row < 3; ++row) b(row, 2) = -b(row, 2);
    return b;
}

}  // namespace detail

// Givens sequence on pairs (1,2), (1,3), (2,3) whose composed unitary maps
// computational modes onto the targets up to per-column sign.  Physical
// legality of the intermediate pairs is best-effort; see
// legality_violations().
inline OpticalCircuit compile_basis(const std::array<Ket, 3>& targets, std::string stage_label = {}) {
    OpticalCircuit c;
    c.stage_label = std::move(stage_label);
    c.elements = detail::compile_rotation(detail::target_matrix(targets));
    return c;
}

// Stage circuit that first compiles an intermediate basis, tags the mode
// carrying intermediate ray `delayed_slot` (1..3) with a time delay, then
// rotates onward so the full unitary carries `final_targets` in its columns.
// This reproduces the protocol's "delay the mode where it is first created"
// for rays that are not computational modes.
inline OpticalCircuit compile_delayed_stage(const std::array<Ket, 3>& intermediate,
                                            int delayed_slot,
                                            const std::array<Ket, 3>& final_targets,
                                            double delay,
                                            std::string stage_label = {}) {
    if (delayed_slot < 1 || delayed_slot > 3)
        throw std::invalid_argument("compile_delayed_stage: slot must be in 1..3");
    Mat3 pre = detail::target_matrix(intermediate);
    Mat3 fin = detail::target_matrix(final_targets);
    OpticalCircuit c;
    c.stage_label = std::move(stage_label);
    c.elements = detail::compile_rotation(pre);
    c.elements.push_back(DelayTag{delayed_slot, delay});
    auto post = detail::compile_rotation(fin * dagger(pre));
    c.elements.insert(c.elements.end(), post.begin(), post.end());
    return c;
}

struct DetectorBank {
    double eta0 = 1.0;              // herald
    std::array<double, 3> eta{1.0, 1.0, 1.0};

    void validate() const {
        auto ok = [](double e) { return e >= 0.0 && e <= 1.0; };
        if (!ok(eta0) || !ok(eta[0]) || !ok(eta[1]) || !ok(eta[2]))
            throw std::invalid_argument("DetectorBank: efficiencies must lie in [0,1]");
    }

    double min_eta() const { return std::min(eta[0], std::min(eta[1], eta[2])); }
};

struct ClickRecord {
    std::int64_t trial = 0;
    std::string stage;
    bool heralded = false;
    int detector = 0;  // 0 = none, else 1..3
    bool delayed = false;
};

// Precomputed per-(state, circuit) sampling data shared by batched trials.
class TrialSampler {
  public:
    TrialSampler(const DensityMatrix& rho, const OpticalCircuit& circuit) {
        Eigh3 eig = eigh3(rho.matrix());
        for (int k = 0; k < 3; ++k) {
            double w = eig.values[static_cast<std::size_t>(k)];
            weights_[static_cast<std::size_t>(k)] = w > 0.0 ? w : 0.0;
            states_[static_cast<std::size_t>(k)] = column(eig.vectors, k);
        }

        Mat3 u = Mat3::identity();
        bool tagged = false;
        for (const auto& e : circuit.elements) {
            if (const auto* tag = std::get_if<DelayTag>(&e)) {
                if (tagged)
                    throw std::invalid_argument("TrialSampler: at most one delay tag per circuit");
                tagged = true;
                delayed_ray_ = column(u, tag->mode - 1);
                has_delay_ = true;
            }
            u = element_matrix(e) * u;
        }
        udag_ = dagger(u);
        stage_ = circuit.stage_label;
    }

    const std::string& stage() const { return stage_; }
    bool has_delay() const { return has_delay_; }

    ClickRecord sample(const DetectorBank& bank, RandomStream& rng, std::int64_t trial_id) const {
        ClickRecord rec;
        rec.trial = trial_id;
        rec.stage = stage_;
        rec.heralded = rng.bernoulli(bank.eta0);
        if (!rec.heralded) return rec;

        Vec3 psi = states_[static_cast<std::size_t>(rng.discrete(weights_, 3))];

        Vec3 delayed_part{};
        Vec3 coincident_part = psi;
        if (has_delay_) {
            cx amp = inner(delayed_ray_, psi);
            delayed_part = amp * delayed_ray_;
            coincident_part = psi - delayed_part;
        }
        Vec3 a_coin = udag_ * coincident_part;
        Vec3 a_del = udag_ * delayed_part;

        std::array<double, 6> probs{};
        for (int k = 0; k < 3; ++k) {
            probs[static_cast<std::size_t>(k)] = std::norm(a_coin[k]);
            probs[static_cast<std::size_t>(k + 3)] = std::norm(a_del[k]);
        }
        int outcome = rng.discrete(probs, 6);
        int mode = outcome % 3;
        bool delayed_bin = outcome >= 3;

        if (rng.bernoulli(bank.eta[static_cast<std::size_t>(mode)])) {
            rec.detector = mode + 1;
            rec.delayed = delayed_bin;
        }
        return rec;
    }

  private:
    std::array<double, 3> weights_{};
    std::array<Vec3, 3> states_{};
    Mat3 udag_;
    Vec3 delayed_ray_{};
    bool has_delay_ = false;
    std::string stage_;
};

// One heralded trial: herald with probability eta0, draw a pure state from
// the eigendecomposition of the input, project onto the detector rays (with
// the delay split when tagged), then thin by the detector efficiency.
inline ClickRecord run_trial(const DensityMatrix& input, const OpticalCircuit& circuit,
                             const DetectorBank& bank, RandomStream& rng,
                             std::int64_t trial_id = 0) {
    bank.validate();
    return TrialSampler(input, circuit).sample(bank, rng, trial_id);
}

// Independent Gaussian perturbation of every wave-plate angle; structure,
// routing and delay tags unchanged.
inline OpticalCircuit jitter(const OpticalCircuit& c, double sigma, RandomStream& rng) {
    if (sigma < 0.0) throw std::invalid_argument("jitter: sigma must be >= 0");
    OpticalCircuit out = c;
    for (auto& e : out.elements)
        if (auto* wp = std::get_if<WavePlate>(&e))
            wp->angle = normalized_angle(wp->angle + sigma * rng.gaussian());
    return out;
}

// Wave-plate settings from the published stage table, keyed by stage label.
// Transcribed verbatim (rotation angles, not optical-axis settings); used
// only as a convention-dependent diagnostic against compile_basis.
inline std::map<std::string, std::map<std::string, double>> paper_stage_angles() {
    const double pi = 3.14159265358979323846;
    const double wp3 = std::acos(1.0 / std::sqrt(3.0));
    const double wp5 = std::acos(1.0 / 3.0);
    std::map<std::string, std::map<std::string, double>> table;
    table["A1A2_A1A3_A2A3"] = {};
    table["A1A4"] = {{"WP1", 3.0 * pi / 4.0}};
    table["A7A8_A8A4_A7A4"] = {{"WP1", 3.0 * pi / 4.0}, {"WP2", pi / 4.0}};
    table["A5A7"] = {{"WP1", 3.0 * pi / 4.0}, {"WP2", pi / 4.0}, {"WP3", wp3}};
    table["A2pA5"] = {{"WP1", 3.0 * pi / 4.0}, {"WP2", pi / 4.0}, {"WP3", wp3}, {"WP4", pi / 3.0}};
    table["A9A5"] = {
        {"WP1", 3.0 * pi / 4.0}, {"WP2", pi / 4.0}, {"WP3", wp3}, {"WP4", 13.0 * pi / 12.0}};
    table["A9A6"] = {{"WP1", 3.0 * pi / 4.0},
                     {"WP2", pi / 4.0},
                     {"WP3", wp3},
                     {"WP4", 13.0 * pi / 12.0},
                     {"WP5", wp5}};
    table["A8pA6"] = {{"WP1", 3.0 * pi / 4.0}, {"WP2", pi / 4.0},        {"WP3", wp3},
                      {"WP4", 13.0 * pi / 12.0}, {"WP5", wp5},           {"WP6", -pi / 3.0}};
    table["A3pA6"] = {{"WP1", 3.0 * pi / 4.0}, {"WP2", pi / 4.0},        {"WP3", wp3},
                      {"WP4", 13.0 * pi / 12.0}, {"WP5", wp5},           {"WP6", pi / 3.0}};
    return table;
}

}  // namespace qctx::optics
