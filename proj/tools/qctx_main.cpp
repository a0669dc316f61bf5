/*
 * qctx: command-line front end for the qutrit contextuality toolkit.
 *
 * Subcommands: bound, witness, census, simulate, reanalyze, sweep, adversary.
 * Every stochastic command takes an explicit --seed; identical configuration
 * yields identical output bytes for a fixed worker count.
 *
 * Exit codes: 0 success, 2 internal invariant breach, 64 usage error,
 * 65 data/ingestion error.
 */
#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "qctx/io.hpp"

namespace fs = std::filesystem;
using qctx::io::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 2;
constexpr int kExitUsage = 64;
constexpr int kExitData = 65;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt6(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", x);
    return buf;
}

qctx::ExclusivityGraph load_graph(const std::string& path, double tol) {
    if (path.empty()) return qctx::build_graph(qctx::nine_ray_catalog(), tol);
    try {
        return qctx::io::graph_from_json(json::parse(qctx::io::read_text(path)));
    } catch (const std::exception& e) {
        throw DataError("cannot load graph file " + path + ": " + e.what());
    }
}

qctx::InequalityFunctional pick_functional(const qctx::ExclusivityGraph& g,
                                           const std::string& name, bool stock_graph) {
    if (name == "main") {
        if (g.vertex_count() != 9)
            throw UsageError("--functional main requires the 9-ray catalog");
        return qctx::InequalityFunctional::main_nine_ray(g);
    }
    if (name == "edges") {
        auto f = qctx::InequalityFunctional::edge_sum(g, 0.0);
        f.classical_bound = qctx::classical_min(g, f).value;
        return f;
    }
    if (name == "vertex-only-9") {
        if (g.vertex_count() < 9) throw UsageError("--functional vertex-only-9 needs vertex 9");
        return qctx::InequalityFunctional::vertex_only(g, 9);
    }
    if (name == "auto")
        return stock_graph ? qctx::InequalityFunctional::main_nine_ray(g)
                           : pick_functional(g, "edges", stock_graph);
    throw UsageError("unknown functional " + name);
}

qctx::DensityMatrix resolve_state(const std::string& spec) {
    if (spec == "mixed") return qctx::DensityMatrix::maximally_mixed();
    if (spec == "minimal") {
        auto g = qctx::build_graph(qctx::nine_ray_catalog(), 1e-9);
        auto m = qctx::witness(g, qctx::InequalityFunctional::main_nine_ray(g));
        return qctx::DensityMatrix::pure(qctx::Ket(qctx::column(qctx::eigh3(m).vectors, 0)));
    }
    if (spec.rfind("ray", 0) == 0 && spec.size() == 4) {
        int idx = spec[3] - '0';
        if (idx >= 1 && idx <= 9) return qctx::DensityMatrix::pure(qctx::ray(idx));
    }
    if (fs::exists(spec)) {
        try {
            json j = json::parse(qctx::io::read_text(spec));
            if (j.contains("ket")) return qctx::DensityMatrix::pure(qctx::io::ket_from_json(j["ket"]));
            if (j.contains("rho"))
                return qctx::DensityMatrix(qctx::io::mat_from_json(j["rho"]), qctx::kFileTol);
            throw DataError("state file must contain a \"ket\" or \"rho\" entry");
        } catch (const DataError&) {
            throw;
        } catch (const std::exception& e) {
            throw DataError("cannot load state file " + spec + ": " + e.what());
        }
    }
    throw UsageError("unknown state '" + spec + "' (use minimal|mixed|ray1..ray9|<file.json>)");
}

void emit(const std::string& out_path, const std::string& text) {
    if (out_path.empty())
        std::cout << text << std::endl;
    else
        qctx::io::write_text(out_path, text);
}

std::vector<double> parse_grid(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stod(item));
    return out;
}

// ----------------------------------------------------------------- bound --

int cmd_bound(const std::string& graph_path, const std::string& functional_name, double tol,
              const std::string& out_path) {
    const bool stock = graph_path.empty();
    auto g = load_graph(graph_path, tol);
    auto f = pick_functional(g, functional_name, stock);
    auto assignments = qctx::enumerate_nchv(g);
    auto result = qctx::classical_min(g, f);

    json j;
    j["format_version"] = qctx::io::kFormatVersion;
    j["kind"] = "classical_bound";
    j["functional"] = functional_name;
    j["vertices"] = g.vertex_count();
    j["edges"] = g.edges.size();
    j["admissible_count"] = assignments.size();
    j["bound"] = qctx::io::round12(result.value);
    j["argmin"] = result.argmin.outcomes;
    emit(out_path, j.dump(2));

    if (stock && (functional_name == "main" || functional_name == "auto") &&
        result.value != -4.0) {
        std::cerr << "internal inconsistency: stock bound " << result.value << " != -4\n";
        return kExitInternal;
    }
    return kExitOk;
}

// --------------------------------------------------------------- witness --

int cmd_witness(const std::string& rho_spec, const std::string& out_path) {
    auto g = qctx::build_graph(qctx::nine_ray_catalog(), 1e-9);
    auto f = qctx::InequalityFunctional::main_nine_ray(g);
    auto m = qctx::witness(g, f);
    auto eig = qctx::eigh3(m);
    double eta_star = qctx::efficiency_threshold(m);

    // M = 14 I - 6 sum Pi: the projector form of the same inequality.
    qctx::Mat3 sum_pi = qctx::Mat3::zero();
    for (int i = 1; i <= 9; ++i) sum_pi = sum_pi + qctx::projector(qctx::ray(i)).matrix();
    double residual =
        qctx::frobenius_norm(m.matrix() - (14.0 * qctx::Mat3::identity() - 6.0 * sum_pi));

    json j;
    j["format_version"] = qctx::io::kFormatVersion;
    j["kind"] = "witness";
    j["lambda"] = {qctx::io::round12(eig.values[0]), qctx::io::round12(eig.values[1]),
                   qctx::io::round12(eig.values[2])};
    j["lambda_min"] = qctx::io::round12(eig.values[0]);
    j["eta_star"] = qctx::io::round12(eta_star);
    j["identity_residual"] = qctx::io::round12(residual);
    if (!rho_spec.empty()) {
        auto rho = resolve_state(rho_spec);
        j["rho"] = rho_spec;
        j["lhs"] = qctx::io::round12(qctx::lhs(rho, m));
    }
    emit(out_path, j.dump(2));

    char eta_buf[16];
    std::snprintf(eta_buf, sizeof(eta_buf), "%.2f", eta_star);
    std::cerr << "lambda_min = " << fmt6(eig.values[0]) << ", eta* = " << eta_buf
              << ", identity residual = " << fmt6(residual) << "\n";
    if (residual > 1e-12) {
        std::cerr << "internal inconsistency: witness identity residual " << residual << "\n";
        return kExitInternal;
    }
    return kExitOk;
}

// ---------------------------------------------------------------- census --

int cmd_census(std::uint64_t n, std::uint64_t seed, const std::string& mode, int workers,
               double gap, const std::string& out_path) {
    auto g = qctx::build_graph(qctx::nine_ray_catalog(), 1e-9);
    auto f = qctx::InequalityFunctional::main_nine_ray(g);
    auto m = qctx::witness(g, f);

    qctx::BasisMode bm;
    if (mode == "fixed")
        bm = qctx::BasisMode::Fixed;
    else if (mode == "optimized")
        bm = qctx::BasisMode::Optimized;
    else
        throw UsageError("--mode must be fixed or optimized");

    qctx::CensusOptions opts;
    opts.workers = workers;
    opts.min_spectral_gap = gap;
    auto result = qctx::census(n, seed, bm, g, f, opts);

    json j = qctx::io::census_record(result, f.classical_bound, qctx::eigh3(m).values[0],
                                     qctx::efficiency_threshold(m), "main", seed);
    j["mode"] = mode;
    j["workers"] = workers;
    j["min_spectral_gap"] = gap;
    emit(out_path, j.dump(2));
    std::cerr << "fraction = " << fmt6(result.fraction) << " +- " << fmt6(result.standard_error)
              << " (n = " << n << ")\n";
    return kExitOk;
}

// -------------------------------------------------------------- simulate --

struct SimulateArgs {
    std::uint64_t seed = 0;
    std::int64_t trials = 100000;
    std::string state = "minimal";
    double eta = 1.0;
    double eta0 = 1.0;
    double sigma = 0.0;
    int a9_source = 6;
    bool force_empirical = false;
    bool calibration = false;
    int workers = 1;
    std::string out_dir;
    std::string format = "json";
    std::string reanalyze_dir;
};

qctx::harness::ExperimentPlan plan_from_config(const json& cfg) {
    qctx::harness::PlanOptions po;
    po.a9_source = cfg.at("a9_source").get<int>();
    po.force_empirical = cfg.at("force_empirical").get<bool>();
    po.with_calibration = cfg.at("with_calibration").get<bool>();
    auto plan = qctx::harness::default_plan(po);
    plan.trials_per_stage = cfg.at("trials_per_stage").get<std::int64_t>();
    return plan;
}

void write_simulation_outputs(const std::string& out_dir, const std::string& format,
                              const qctx::harness::ExperimentReport& report,
                              const std::vector<qctx::harness::StageData>& data) {
    if (out_dir.empty()) {
        std::cout << qctx::io::report_to_json(report).dump(2) << std::endl;
        return;
    }
    fs::create_directories(out_dir);
    fs::create_directories(out_dir + "/logs");
    qctx::io::write_text(out_dir + "/report.json", qctx::io::report_to_json(report).dump(2) + "\n");
    if (format == "csv" || format == "both")
        qctx::io::write_text(out_dir + "/report.csv", qctx::io::report_to_csv(report));
    for (const auto& d : data)
        qctx::io::write_event_log(out_dir + "/logs/" + d.label + ".jsonl", d.records);
}

int cmd_simulate(const SimulateArgs& args) {
    if (!args.reanalyze_dir.empty()) {
        // Ingestion path: rebuild the report from persisted logs, bit-for-bit.
        json old_report;
        try {
            old_report = json::parse(qctx::io::read_text(args.reanalyze_dir + "/report.json"));
        } catch (const std::exception& e) {
            throw DataError(std::string("reanalyze: ") + e.what());
        }
        const json& cfg = old_report.at("config");
        auto plan = plan_from_config(cfg);
        std::vector<qctx::harness::StageData> data;
        for (const auto& stage : plan.stages) {
            if (!stage.record_data) continue;
            qctx::harness::StageData d;
            d.label = stage.label;
            try {
                d.records =
                    qctx::io::read_event_log(args.reanalyze_dir + "/logs/" + stage.label + ".jsonl");
            } catch (const std::exception& e) {
                throw DataError(std::string("reanalyze: ") + e.what());
            }
            data.push_back(std::move(d));
        }
        qctx::optics::DetectorBank bank;
        bank.eta0 = cfg.at("eta0").get<double>();
        for (std::size_t k = 0; k < 3; ++k) bank.eta[k] = cfg.at("eta").at(k).get<double>();
        qctx::harness::RunOptions opts;
        opts.sigma = cfg.at("sigma").get<double>();
        opts.workers = cfg.at("workers").get<int>();
        opts.state_label = cfg.at("state").get<std::string>();
        try {
            auto report = qctx::harness::analyze(plan, data, bank, opts);
            report.seed = cfg.at("seed").get<std::uint64_t>();
            write_simulation_outputs(args.out_dir, args.format, report, data);
        } catch (const qctx::harness::InsufficientDataError& e) {
            throw DataError(e.what());
        }
        return kExitOk;
    }

    auto rho = resolve_state(args.state);
    qctx::harness::PlanOptions po;
    po.a9_source = args.a9_source;
    po.force_empirical = args.force_empirical;
    po.with_calibration = args.calibration;
    auto plan = qctx::harness::default_plan(po);
    plan.trials_per_stage = args.trials;

    qctx::optics::DetectorBank bank;
    bank.eta0 = args.eta0;
    bank.eta = {args.eta, args.eta, args.eta};

    qctx::harness::RunOptions opts;
    opts.sigma = args.sigma;
    opts.workers = args.workers;
    opts.state_label = args.state;

    auto run = qctx::harness::run_plan(rho, plan, bank, args.seed, opts);
    write_simulation_outputs(args.out_dir, args.format, run.report, run.data);
    std::cerr << "LHS = " << fmt6(run.report.lhs_value) << " +- "
              << fmt6(run.report.lhs_standard_error) << "  [" << run.report.verdict << "]\n";
    return kExitOk;
}

// ----------------------------------------------------------------- sweep --

int cmd_sweep(const std::string& eta_grid, const std::string& sigma_grid, std::uint64_t seed,
              std::int64_t trials, const std::string& state, int workers,
              const std::string& out_path) {
    auto etas = parse_grid(eta_grid);
    auto sigmas = parse_grid(sigma_grid);
    if (etas.empty() && sigmas.empty()) throw UsageError("sweep: empty grid");

    auto rho = resolve_state(state);
    std::ostringstream out;

    if (!etas.empty()) {
        auto plan = qctx::harness::default_plan();
        plan.trials_per_stage = trials;
        qctx::harness::RunOptions opts;
        opts.workers = workers;
        opts.state_label = state;
        opts.diagnostics = false;
        auto rows = qctx::harness::eta_sweep(rho, etas, plan, seed, opts);
        out << qctx::io::eta_sweep_to_csv(rows);
    }
    if (!sigmas.empty()) {
        qctx::harness::PlanOptions po;
        po.with_calibration = true;
        auto plan = qctx::harness::default_plan(po);
        plan.trials_per_stage = trials;
        out << "sigma,eps_a,eps_a_stderr,eps_b,eps_b_stderr,eps_c,eps_c_stderr,"
               "lhs,lhs_stderr,ineq7_lhs,ineq7_rhs,violations\n";
        for (std::size_t k = 0; k < sigmas.size(); ++k) {
            qctx::harness::RunOptions opts;
            opts.sigma = sigmas[k];
            opts.workers = workers;
            opts.state_label = state;
            opts.diagnostics = false;
            qctx::optics::DetectorBank bank;
            auto run = qctx::harness::run_plan(rho, plan, bank, seed + k, opts);
            const auto& ef = *run.report.error_form;
            out << qctx::io::csv_number(sigmas[k]);
            for (const auto& e : ef.epsilons)
                out << ',' << qctx::io::csv_number(e.value) << ','
                    << qctx::io::csv_number(e.standard_error);
            out << ',' << qctx::io::csv_number(run.report.lhs_value) << ','
                << qctx::io::csv_number(run.report.lhs_standard_error) << ','
                << qctx::io::csv_number(ef.lhs) << ',' << qctx::io::csv_number(ef.rhs) << ','
                << run.report.exclusivity_violations << '\n';
        }
    }
    emit(out_path, out.str());
    return kExitOk;
}

// ------------------------------------------------------------- adversary --

int cmd_adversary(double eta, std::uint64_t budget, std::uint64_t seed, std::int64_t validate,
                  const std::string& out_path) {
    if (!(eta > 0.0) || eta > 1.0) throw UsageError("--eta must lie in (0,1]");
    auto g = qctx::build_graph(qctx::nine_ray_catalog(), 1e-9);
    auto plan = qctx::harness::default_plan();
    auto result = qctx::adversary::search_adversarial(eta, budget, seed, plan, g);

    json j = qctx::io::strategy_to_json(result.strategy, eta, result.expected, result.cap, seed,
                                        plan);
    if (validate > 0) {
        auto run = qctx::adversary::adversarial_run(result.strategy, plan, eta, validate, seed + 1);
        j["validation"] = {{"trials", validate},
                           {"lhs", qctx::io::round12(run.report.lhs_value)},
                           {"lhs_stderr", qctx::io::round12(run.report.lhs_standard_error)}};
    }
    emit(out_path, j.dump(2));
    std::cerr << "best expected post-selected LHS = " << fmt6(result.expected)
              << " (cap -4/eta^2 = " << fmt6(result.cap) << ")\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qutrit contextuality toolkit: exact bounds, state census, linear-optics "
                 "simulation and detection-loophole analysis"};
    app.require_subcommand(1);
    app.set_config("--config");

    // bound
    std::string graph_path, functional = "auto", out_path;
    double tol = 1e-9;
    auto* bound = app.add_subcommand("bound", "classical NCHV bound by exhaustive enumeration");
    bound->add_option("--graph", graph_path, "ray catalog JSON (default: built-in 9-ray catalog)");
    bound->add_option("--functional", functional, "main|edges|vertex-only-9|auto");
    bound->add_option("--tol", tol, "orthogonality tolerance");
    bound->add_option("--out", out_path, "output path (default: stdout)");

    // witness
    std::string witness_rho, witness_out;
    auto* wit =
        app.add_subcommand("witness", "witness operator: lambda_min, eta*, identity residual");
    wit->add_option("--rho", witness_rho, "state preset for an LHS evaluation");
    wit->add_option("--out", witness_out, "output path");

    // census
    std::uint64_t census_n = 1000000, census_seed = 1;
    std::string census_mode = "fixed", census_out;
    int census_workers = 1;
    double census_gap = 0.0;
    auto* cen = app.add_subcommand("census", "Hilbert-Schmidt violation census");
    cen->add_option("--n", census_n, "number of samples")->required();
    cen->add_option("--seed", census_seed, "RNG seed")->required();
    cen->add_option("--mode", census_mode, "fixed|optimized");
    cen->add_option("--workers", census_workers, "worker count");
    cen->add_option("--gap", census_gap, "minimum spectral gap filter (optimized mode)");
    cen->add_option("--out", census_out, "output path");

    // simulate
    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "run the full measurement campaign");
    auto* sim_seed = simulate->add_option("--seed", sim.seed, "RNG seed");
    simulate->add_option("--trials", sim.trials, "trials per stage");
    simulate->add_option("--state", sim.state, "minimal|mixed|ray1..ray9|<file.json>");
    simulate->add_option("--eta", sim.eta, "detector efficiency (all three detectors)");
    simulate->add_option("--eta0", sim.eta0, "herald efficiency");
    simulate->add_option("--sigma", sim.sigma, "wave-plate jitter (radians)");
    simulate->add_option("--a9-source", sim.a9_source, "stage supplying <A9>: 6 or 7");
    simulate->add_flag("--force-empirical", sim.force_empirical,
                       "record data in completeness-covered stages");
    simulate->add_flag("--calibration", sim.calibration, "include <A_x A_x'> calibration stages");
    simulate->add_option("--workers", sim.workers, "worker count");
    simulate->add_option("--out", sim.out_dir, "output directory");
    simulate->add_option("--format", sim.format, "json|csv|both");
    simulate->add_option("--reanalyze", sim.reanalyze_dir,
                         "rebuild the report from a persisted run directory");

    // reanalyze
    std::string re_logs, re_out, re_format = "json";
    auto* rean = app.add_subcommand("reanalyze", "rebuild a report from persisted event logs");
    rean->add_option("--logs", re_logs, "run directory containing report.json and logs/")
        ->required();
    rean->add_option("--out", re_out, "output directory");
    rean->add_option("--format", re_format, "json|csv|both");

    // sweep
    std::string sweep_eta, sweep_sigma, sweep_state = "minimal", sweep_out;
    std::uint64_t sweep_seed = 1;
    std::int64_t sweep_trials = 100000;
    int sweep_workers = 1;
    auto* sweep = app.add_subcommand("sweep", "eta and/or sigma sweep tables");
    sweep->add_option("--eta-grid", sweep_eta, "comma-separated efficiencies");
    sweep->add_option("--sigma-grid", sweep_sigma, "comma-separated jitter values");
    sweep->add_option("--seed", sweep_seed, "RNG seed")->required();
    sweep->add_option("--trials", sweep_trials, "trials per stage");
    sweep->add_option("--state", sweep_state, "input state");
    sweep->add_option("--workers", sweep_workers, "worker count");
    sweep->add_option("--out", sweep_out, "output path");

    // adversary
    double adv_eta = 1.0;
    std::uint64_t adv_budget = 20000, adv_seed = 1;
    std::int64_t adv_validate = 0;
    std::string adv_out;
    auto* adv = app.add_subcommand("adversary", "search for detection-loophole strategies");
    adv->add_option("--eta", adv_eta, "detector efficiency")->required();
    adv->add_option("--budget", adv_budget, "evaluation budget");
    adv->add_option("--seed", adv_seed, "RNG seed")->required();
    adv->add_option("--validate-trials", adv_validate, "Monte Carlo validation trials");
    adv->add_option("--out", adv_out, "output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (bound->parsed()) return cmd_bound(graph_path, functional, tol, out_path);
        if (wit->parsed()) return cmd_witness(witness_rho, witness_out);
        if (cen->parsed())
            return cmd_census(census_n, census_seed, census_mode, census_workers, census_gap,
                              census_out);
        if (simulate->parsed()) {
            if (sim.reanalyze_dir.empty() && sim_seed->count() == 0)
                throw UsageError("simulate: --seed is required");
            return cmd_simulate(sim);
        }
        if (rean->parsed()) {
            SimulateArgs args;
            args.reanalyze_dir = re_logs;
            args.out_dir = re_out;
            args.format = re_format;
            return cmd_simulate(args);
        }
        if (sweep->parsed())
            return cmd_sweep(sweep_eta, sweep_sigma, sweep_seed, sweep_trials, sweep_state,
                             sweep_workers, sweep_out);
        if (adv->parsed()) return cmd_adversary(adv_eta, adv_budget, adv_seed, adv_validate, adv_out);
        throw UsageError("no subcommand given");
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const qctx::harness::InsufficientDataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}
