/*
 * JSON / CSV / event-log serialization.
 *
 * All floating-point values are rounded to 12 significant digits before
 * emission so that identical runs produce identical bytes.  Kets and
 * matrices serialize as arrays of [re, im] pairs.  Event logs are
 * line-delimited JSON, one ClickRecord per line, detector null on no-click.
 */
#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qctx/adversary.hpp"
#include "qctx/exclusivity.hpp"
#include "qctx/harness.hpp"
#include "qctx/optics.hpp"
#include "qctx/qutrit.hpp"
#include "qctx/witness.hpp"

namespace qctx::io {

using json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

inline double round12(double x) {
    if (!std::isfinite(x)) return x;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return std::strtod(buf, nullptr);
}

inline json complex_to_json(const cx& z) { return json::array({round12(z.real()), round12(z.imag())}); }

inline cx complex_from_json(const json& j) {
    return cx(j.at(0).get<double>(), j.at(1).get<double>());
}

inline json ket_to_json(const Ket& k) {
    return json::array({complex_to_json(k[0]), complex_to_json(k[1]), complex_to_json(k[2])});
}

inline Ket ket_from_json(const json& j) {
    return Ket(complex_from_json(j.at(0)), complex_from_json(j.at(1)), complex_from_json(j.at(2)),
               kFileTol);
}

inline json mat_to_json(const Mat3& m) {
    json rows = json::array();
    for (int r = 0; r < 3; ++r) {
        json row = json::array();
        for (int c = 0; c < 3; ++c) row.push_back(complex_to_json(m(r, c)));
        rows.push_back(row);
    }
    return rows;
}

inline Mat3 mat_from_json(const json& j) {
    Mat3 m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            m(r, c) = complex_from_json(j.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(c)));
    return m;
}

// ---------------------------------------------------------------- graphs --

inline json graph_to_json(const ExclusivityGraph& g) {
    json j;
    j["rays"] = json::array();
    for (const auto& r : g.rays) j["rays"].push_back(ket_to_json(r));
    j["tolerance"] = g.tolerance;
    return j;
}

// Ray catalogs from disk use the looser file tolerance (1e-9).
inline ExclusivityGraph graph_from_json(const json& j) {
    std::vector<Ket> rays;
    for (const auto& r : j.at("rays")) rays.push_back(ket_from_json(r));
    return build_graph(rays, j.at("tolerance").get<double>());
}

// -------------------------------------------------------------- circuits --

inline json circuit_to_json(const optics::OpticalCircuit& c) {
    json j;
    j["stage"] = c.stage_label;
    j["elements"] = json::array();
    for (const auto& e : c.elements) {
        json el;
        if (const auto* wp = std::get_if<optics::WavePlate>(&e)) {
            el["type"] = "wave_plate";
            el["pair"] = {wp->mode_a, wp->mode_b};
            el["angle"] = round12(wp->angle);
        } else if (const auto* rc = std::get_if<optics::Recombiner>(&e)) {
            el["type"] = "recombiner";
            el["pair"] = {rc->mode_a, rc->mode_b};
        } else {
            const auto& tag = std::get<optics::DelayTag>(e);
            el["type"] = "delay_tag";
            el["mode"] = tag.mode;
            el["delay"] = round12(tag.delay);
        }
        j["elements"].push_back(el);
    }
    return j;
}

inline optics::OpticalCircuit circuit_from_json(const json& j) {
    optics::OpticalCircuit c;
    c.stage_label = j.at("stage").get<std::string>();
    for (const auto& el : j.at("elements")) {
        const std::string type = el.at("type").get<std::string>();
        if (type == "wave_plate") {
            c.elements.push_back(optics::make_wave_plate(el.at("pair").at(0).get<int>(),
                                                         el.at("pair").at(1).get<int>(),
                                                         el.at("angle").get<double>()));
        } else if (type == "recombiner") {
            c.elements.push_back(
                optics::Recombiner{el.at("pair").at(0).get<int>(), el.at("pair").at(1).get<int>()});
        } else if (type == "delay_tag") {
            c.elements.push_back(
                optics::DelayTag{el.at("mode").get<int>(), el.at("delay").get<double>()});
        } else {
            throw std::invalid_argument("circuit_from_json: unknown element type " + type);
        }
    }
    return c;
}

// ------------------------------------------------------------ event logs --

inline std::string record_to_line(const optics::ClickRecord& r) {
    json j;
    j["trial"] = r.trial;
    j["stage"] = r.stage;
    j["heralded"] = r.heralded;
    if (r.detector == 0)
        j["detector"] = nullptr;
    else
        j["detector"] = r.detector;
    j["delayed"] = r.delayed;
    return j.dump();
}

inline optics::ClickRecord record_from_line(const std::string& line) {
    json j = json::parse(line);
    optics::ClickRecord r;
    r.trial = j.at("trial").get<std::int64_t>();
    r.stage = j.at("stage").get<std::string>();
    r.heralded = j.at("heralded").get<bool>();
    r.detector = j.at("detector").is_null() ? 0 : j.at("detector").get<int>();
    r.delayed = j.at("delayed").get<bool>();
    if (r.detector == 0 && r.delayed)
        throw std::invalid_argument("record_from_line: delayed click without detector");
    return r;
}

inline void write_event_log(const std::string& path, const std::vector<optics::ClickRecord>& records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_event_log: cannot open " + path);
    for (const auto& r : records) out << record_to_line(r) << '\n';
}

inline std::vector<optics::ClickRecord> read_event_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_event_log: cannot open " + path);
    std::vector<optics::ClickRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        records.push_back(record_from_line(line));
    }
    return records;
}

// -------------------------------------------------------------- reports --

inline const char* pair_kind_name(harness::PairKind k) {
    switch (k) {
        case harness::PairKind::Basis: return "basis";
        case harness::PairKind::Delayed: return "delayed";
        case harness::PairKind::Calibration: return "calibration";
    }
    return "?";
}

inline json estimate_to_json(const harness::CorrelationEstimate& e) {
    json j;
    j["pair"] = {e.i, e.j};
    j["kind"] = pair_kind_name(e.kind);
    j["stage"] = e.stage;
    if (e.covered)
        j["value"] = nullptr;
    else
        j["value"] = round12(e.value);
    j["stderr"] = round12(e.standard_error);
    j["post_selected"] = e.post_selected;
    j["violations"] = e.violations;
    j["covered"] = e.covered;
    return j;
}

inline json report_to_json(const harness::ExperimentReport& r) {
    json j;
    j["format_version"] = kFormatVersion;
    j["kind"] = "experiment_report";

    json cfg;
    cfg["seed"] = r.seed;
    cfg["trials_per_stage"] = r.trials_per_stage;
    cfg["sigma"] = round12(r.sigma);
    cfg["workers"] = r.workers;
    cfg["eta0"] = round12(r.eta0);
    cfg["eta"] = {round12(r.eta[0]), round12(r.eta[1]), round12(r.eta[2])};
    cfg["state"] = r.state_label;
    cfg["a9_source"] = r.plan_opts.a9_source;
    cfg["force_empirical"] = r.plan_opts.force_empirical;
    cfg["with_calibration"] = r.plan_opts.with_calibration;
    j["config"] = cfg;

    json res;
    res["lhs"] = round12(r.lhs_value);
    res["lhs_stderr"] = round12(r.lhs_standard_error);
    res["bound_classical"] = round12(r.bound_classical);
    res["bound_efficiency"] = round12(r.bound_efficiency);
    res["eta_used"] = round12(r.eta_used);
    res["verdict"] = r.verdict;
    res["exclusivity_violations"] = r.exclusivity_violations;
    res["a9"] = {{"value", round12(r.a9_value)},
                 {"stderr", round12(r.a9_standard_error)},
                 {"stage", r.a9_stage}};
    if (r.a9_alternative)
        res["a9"]["alternative"] = round12(*r.a9_alternative);

    res["correlations"] = json::array();
    for (const auto& e : r.correlations) res["correlations"].push_back(estimate_to_json(e));
    res["calibrations"] = json::array();
    for (const auto& e : r.calibrations) res["calibrations"].push_back(estimate_to_json(e));

    res["completeness"] = json::array();
    for (const auto& c : r.completeness)
        res["completeness"].push_back({{"stage", c.stage},
                                       {"value", round12(c.value)},
                                       {"post_selected", c.post_selected},
                                       {"exact", c.exact}});
    if (r.error_form) {
        json ef;
        ef["lhs"] = round12(r.error_form->lhs);
        ef["lhs_stderr"] = round12(r.error_form->lhs_standard_error);
        ef["rhs"] = round12(r.error_form->rhs);
        for (const auto& e : r.error_form->epsilons)
            ef[e.name] = {{"value", round12(e.value)}, {"stderr", round12(e.standard_error)}};
        res["error_form"] = ef;
    } else {
        res["error_form"] = nullptr;
    }

    res["diagnostics"] = json::array();
    for (const auto& d : r.diagnostics) {
        json dj;
        dj["stage"] = d.stage;
        dj["compile_overlap"] = {round12(d.compile_overlap[0]), round12(d.compile_overlap[1]),
                                 round12(d.compile_overlap[2])};
        dj["paper_angle_overlap"] = round12(d.paper_angle_overlap);
        dj["legality_notes"] = d.legality_notes;
        res["diagnostics"].push_back(dj);
    }
    j["results"] = res;
    return j;
}

inline std::string csv_number(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return buf;
}

// One row per correlation plus the <A_9> vertex row.
inline std::string report_to_csv(const harness::ExperimentReport& r) {
    std::ostringstream out;
    out << "stage,pair,kind,value,stderr,post_selected,violations,covered\n";
    auto row = [&](const harness::CorrelationEstimate& e) {
        out << e.stage << ',' << e.i << '-' << e.j << ',' << pair_kind_name(e.kind) << ','
            << (e.covered ? "" : csv_number(e.value)) << ',' << csv_number(e.standard_error) << ','
            << e.post_selected << ',' << e.violations << ',' << (e.covered ? 1 : 0) << '\n';
    };
    for (const auto& e : r.correlations) row(e);
    for (const auto& e : r.calibrations) row(e);
    out << r.a9_stage << ",9,vertex," << csv_number(r.a9_value) << ','
        << csv_number(r.a9_standard_error) << ",,,0\n";
    return out.str();
}

inline std::string eta_sweep_to_csv(const std::vector<harness::EtaSweepRow>& rows) {
    std::ostringstream out;
    out << "eta,lhs,lhs_stderr,bound,quantum_target,verdict\n";
    for (const auto& r : rows)
        out << csv_number(r.eta) << ',' << csv_number(r.lhs) << ','
            << csv_number(r.lhs_standard_error) << ',' << csv_number(r.bound) << ','
            << csv_number(r.quantum_target) << ',' << r.verdict << '\n';
    return out.str();
}

// ------------------------------------------------------------ strategies --

inline json strategy_to_json(const adversary::Strategy& s, double eta, double expected,
                             double cap, std::uint64_t seed,
                             const harness::ExperimentPlan& plan) {
    json j;
    j["format_version"] = kFormatVersion;
    j["kind"] = "adversarial_strategy";
    j["eta"] = round12(eta);
    j["expected_lhs"] = round12(expected);
    j["cap"] = round12(cap);
    j["seed"] = seed;
    j["stages"] = json::array();
    for (const auto& st : plan.stages) j["stages"].push_back(st.label);
    j["assignments"] = json::array();
    for (const auto& a : s.assignments) j["assignments"].push_back(a.outcomes);
    j["weights"] = json::array();
    for (double w : s.weights) j["weights"].push_back(round12(w));
    j["suppression"] = json::array();
    for (const auto& row : s.suppression) {
        json r = json::array();
        for (double v : row) r.push_back(round12(v));
        j["suppression"].push_back(r);
    }
    return j;
}

inline adversary::Strategy strategy_from_json(const json& j) {
    adversary::Strategy s;
    for (const auto& a : j.at("assignments")) {
        NCHVAssignment asg;
        for (const auto& o : a) asg.outcomes.push_back(o.get<int>());
        s.assignments.push_back(asg);
    }
    for (const auto& w : j.at("weights")) s.weights.push_back(w.get<double>());
    for (const auto& row : j.at("suppression")) {
        std::vector<double> r;
        for (const auto& v : row) r.push_back(v.get<double>());
        s.suppression.push_back(r);
    }
    return s;
}

// ----------------------------------------------------------- bound/census --

inline json census_record(const CensusResult& c, double bound, double lambda_min, double eta_star,
                          const std::string& functional, std::uint64_t seed) {
    json j;
    j["functional"] = functional;
    j["bound"] = round12(bound);
    j["lambda_min"] = round12(lambda_min);
    j["eta_star"] = round12(eta_star);
    j["fraction"] = round12(c.fraction);
    j["stderr"] = round12(c.standard_error);
    j["n"] = c.n;
    j["seed"] = seed;
    return j;
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_text: cannot open " + path);
    out << text;
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_text: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace qctx::io
