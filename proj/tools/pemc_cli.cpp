// pemc: closed-loop runs, periodic optimum (DRTO) solves, invariant audits and controller comparisons.
//
// Exit codes: 0 success, 1 invariant or constraint check failed, 2 usage or config error,
// 3 solver or controller error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "pemc/assumptions.hpp"
#include "pemc/experiments.hpp"
#include "pemc/numfmt.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace pemc;
using cli::RunConfig;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitSolver = 3;

struct Problem {
    std::string name;
    MpcSetup setup;
    CostPtr cost;
    Vector x0;
    std::optional<SamplingBox> box;
};

Problem buildProblem(const RunConfig& c, int scenario) {
    if (c.benchmark == "custom")
        return Problem{"custom", c.custom->setup, c.custom->cost, c.custom->x0, std::nullopt};
    CostPtr cost = scenario == 2 ? CostPtr(ballplate::scenario2Cost(c.ballplate))
                                 : CostPtr(ballplate::scenario1Cost(c.ballplate));
    return Problem{"scenario" + std::to_string(scenario), ballplate::buildSetup(c.ballplate), cost,
                   ballplate::initialState(), ballplate::samplingBox(c.ballplate, scenario)};
}

std::string drtoName(const RunConfig& c, int scenario) {
    return c.benchmark == "custom" ? "drto" : "drto_s" + std::to_string(scenario);
}

ControllerConfig controllerConfig(const RunConfig& c, int scenario) {
    ControllerConfig cc;
    cc.solver = c.benchmark == "ballplate" ? ballplate::scenarioSolver(c.ballplate, scenario, c.solver) : c.solver;
    cc.warm_start = c.warm_start;
    cc.per_phase_rho = c.drto.per_phase_rho;
    return cc;
}

SimulationConfig simulationConfig(const RunConfig& c, int scenario) {
    SimulationConfig sim;
    sim.controller = controllerConfig(c, scenario);
    sim.record_solve_time = c.record_solve_time;
    return sim;
}

void writeText(const fs::path& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << text;
}

void writeLog(const fs::path& out, const std::string& name, const SimulationLog& log, const std::string& config_text) {
    std::ostringstream csv, meta;
    writeLogCsv(csv, log);
    writeLogSidecar(meta, log, name, config_text);
    writeText(out / (name + ".csv"), csv.str());
    writeText(out / (name + ".json"), meta.str());
}

DrtoSolution solveReference(const Problem& pb, const RunConfig& c) {
    return solveDrto(pb.setup.system, pb.setup.constraints, *pb.cost, pb.setup.weights, 0, Parameter{}, c.drto);
}

int windowFor(const RunConfig& c, const SimulationLog& log) {
    const int w = c.window > 0 ? c.window : defaultWindow(log);
    return std::min(w, static_cast<int>(log.steps.size()));
}

nlohmann::ordered_json runJson(const SimulationLog& log, const RunConfig& c, const Trajectory& reference) {
    nlohmann::ordered_json j;
    j["completed"] = log.completed;
    if (!log.error.empty()) j["error"] = log.error;
    j["steps"] = log.steps.size();
    j["constraint_violations"] = log.violations.size();
    if (!log.steps.empty()) {
        const int w = windowFor(c, log);
        j["window"] = w;
        j["average_cost"] = averageEconomicCost(log, w);
        j["orbit_distance"] = orbitDistance(log, reference, w);
        if (c.benchmark == "ballplate")
            j["orbit_distance_position"] =
                orbitDistance(log, reference, w, {ballplate::kPosition1, ballplate::kPosition2});
    }
    j["lyapunov_violations"] = checkLyapunovDecrease(log.records(), log.p_changes).violations.size();
    return j;
}

int statusOf(const SimulationLog& log) {
    if (!log.completed) return kExitSolver;
    return log.violations.empty() ? kExitOk : kExitCheckFailed;
}

int cmdRun(const RunConfig& c, const fs::path& out, const std::string& config_text) {
    if (c.benchmark == "ballplate" && c.scenario == 0) {
        ballplate::ExperimentConfig ec;
        ec.bench = c.ballplate;
        ec.steps = c.steps;
        ec.window = c.window;
        ec.drto = c.drto;
        ec.controller = controllerConfig(c, 1);
        ec.seed = c.seed;
        ec.record_solve_time = c.record_solve_time;
        const auto rep = ballplate::runBenchmarkExperiments(ec, out, config_text);
        int rc = kExitOk;
        for (const auto* r : {&rep.scenario1, &rep.scenario2, &rep.comparison_tracking}) {
            spdlog::info("{}: completed={} average_cost={:.6g} orbit_distance={:.3g} violations={}", r->name,
                         r->completed, r->average_cost, r->orbit_distance, r->violations);
            if (!r->completed) rc = kExitSolver;
            else if (rc == kExitOk && (r->violations > 0 || r->lyapunov_violations > 0)) rc = kExitCheckFailed;
        }
        return rc;
    }

    const int scenario = c.scenario == 0 ? 1 : c.scenario;
    const Problem pb = buildProblem(c, scenario);
    const DrtoSolution ref = solveReference(pb, c);
    {
        std::ostringstream os;
        writeTrajectoryCsv(os, ref.za_star);
        writeText(out / (drtoName(c, scenario) + ".csv"), os.str());
    }
    SimulationConfig sim = simulationConfig(c, scenario);
    sim.kind = c.controller;
    if (c.controller == ControllerKind::Tracking) sim.reference = ref.za_star;
    ScenarioSchedule schedule = ScenarioSchedule::constant(c.steps, pb.x0);
    schedule.seed = c.seed;
    spdlog::info("running {} ({} steps, {} controller)", pb.name, c.steps, toString(c.controller));
    const SimulationLog log = runClosedLoop(pb.setup, pb.cost, schedule, sim);
    writeLog(out, pb.name, log, config_text);

    nlohmann::ordered_json summary;
    summary["seed"] = c.seed;
    summary["config_hash"] = configHash(config_text);
    summary["drto_objective"] = ref.objective;
    summary[pb.name] = runJson(log, c, ref.za_star);
    writeText(out / "summary.json", summary.dump(2) + "\n");
    if (!log.completed) spdlog::error("run aborted: {}", log.error);
    if (!log.violations.empty()) spdlog::error("{} constraint violations", log.violations.size());
    return statusOf(log);
}

int cmdDrto(const RunConfig& c, const fs::path& out) {
    const int scenario = c.scenario == 0 ? 1 : c.scenario;
    const Problem pb = buildProblem(c, scenario);
    const DrtoSolution sol = solveReference(pb, c);
    std::ostringstream os;
    writeTrajectoryCsv(os, sol.za_star);
    writeText(out / (drtoName(c, scenario) + ".csv"), os.str());
    nlohmann::ordered_json j;
    j["objective"] = sol.objective;
    j["iterations"] = sol.iterations;
    j["converged"] = sol.converged;
    j["final_step"] = sol.final_step;
    writeText(out / (drtoName(c, scenario) + ".json"), j.dump(2) + "\n");
    std::cout << "objective " << formatDouble(sol.objective) << " iterations " << sol.iterations
              << (sol.converged ? " converged" : " not converged") << '\n';
    return kExitOk;
}

struct Check {
    std::string name;
    bool passed = true;
    nlohmann::ordered_json detail;
};

int cmdAudit(const RunConfig& c, const fs::path& out) {
    const int scenario = c.scenario == 0 ? 1 : c.scenario;
    Problem pb = buildProblem(c, scenario);
    if (c.audit_rho_scale != 1.0)
        pb.cost = std::make_shared<LipschitzOverride>(pb.cost, pb.cost->lipschitz() * c.audit_rho_scale);
    const int n = pb.setup.system.stateDim();
    const int m = pb.setup.system.inputDim();
    const int T = pb.setup.period();
    std::vector<Check> checks;

    {
        ValidationOptions vo;
        vo.seed = c.seed;
        vo.box = pb.box;
        const auto rep = validateAssumptions(pb.setup.system, pb.setup.constraints, *pb.cost, vo);
        Check ch{"assumptions", !rep.anyFail(), nlohmann::ordered_json::object()};
        for (const auto& a : rep.checks) ch.detail[a.name] = std::string(toString(a.status)) + ": " + a.detail;
        checks.push_back(ch);
    }

    {
        const SamplingBox box = pb.box ? *pb.box : defaultSamplingBox(pb.setup.constraints, 10.0);
        std::mt19937_64 rng(c.seed);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        auto sampleTrajectory = [&]() {
            Trajectory t;
            for (int j = 0; j < T; ++j) {
                for (int attempt = 0; attempt < 1000; ++attempt) {
                    Vector z(n + m);
                    for (int i = 0; i < n + m; ++i) z(i) = box.lower(i) + (box.upper(i) - box.lower(i)) * unit(rng);
                    if (pb.setup.constraints.contains(j, z.head(n), z.tail(m), 0.0).inside) {
                        t.states.push_back(z.head(n));
                        t.inputs.push_back(z.tail(m));
                        break;
                    }
                }
                if (static_cast<int>(t.inputs.size()) != j + 1) throw std::runtime_error("audit: sampling failed");
            }
            return t;
        };
        int violations = 0;
        double worst = 0.0;
        for (int s = 0; s < c.audit_samples; ++s) {
            const Trajectory za = sampleTrajectory();
            const Trajectory hat = sampleTrajectory();
            const double o = offsetCost(*pb.cost, za, Parameter{});
            const double gap = majorizationGap(*pb.cost, za, hat, Parameter{});
            const double bound = -1e-9 * (1.0 + std::abs(o));
            if (gap < bound) ++violations;
            worst = std::min(worst, gap);
        }
        checks.push_back({"majorization", violations == 0,
                          {{"samples", c.audit_samples}, {"violations", violations}, {"worst_gap", worst}}});
    }

    // Closed loop with the shift witness checked before every step.
    ControllerConfig cc = controllerConfig(c, scenario);
    std::optional<SingleLayerController> ctrl;
    try {
        ctrl.emplace(SingleLayerController::initialize(pb.setup, pb.cost, cc, 0, pb.x0));
    } catch (const ControllerError& e) {
        spdlog::error("initialization failed: {}", e.what());
        return kExitSolver;
    }
    Vector x = pb.x0;
    std::optional<PlanPair> previous;
    int witness_failures = 0, ledger = 0;
    double worst_witness = 0.0;
    for (int step = 0; step < c.steps; ++step) {
        if (previous) {
            const auto tp = ctrl->nextProblem(x, Parameter{});
            const double v = tp.constraintViolation(tp.assemble(shiftedCandidate(pb.setup, *previous, x)));
            worst_witness = std::max(worst_witness, v);
            if (v > c.audit_tolerance * (1.0 + x.lpNorm<Eigen::Infinity>())) ++witness_failures;
        }
        StepResult res;
        try {
            res = ctrl->step(x, Parameter{});
        } catch (const ControllerError& e) {
            spdlog::error("controller error: {}", e.what());
            return kExitSolver;
        }
        if (!pb.setup.constraints.contains(step, x, res.u_applied, c.audit_tolerance).inside) ++ledger;
        previous = res.plan;
        x = pb.setup.system.step(step, x, res.u_applied);
    }
    const auto lyap = checkLyapunovDecrease(ctrl->history(), {}, c.audit_tolerance);
    checks.push_back({"lyapunov", lyap.passed(),
                      {{"windows", lyap.windows}, {"checked", lyap.checked}, {"violations", lyap.violations.size()}}});
    checks.push_back({"constraints", ledger == 0, {{"violating_steps", ledger}}});
    checks.push_back({"shift_witness", witness_failures == 0,
                      {{"failures", witness_failures}, {"worst_violation", worst_witness}}});

    nlohmann::ordered_json report;
    report["seed"] = c.seed;
    report["steps"] = c.steps;
    bool ok = true;
    for (const auto& ch : checks) {
        report["checks"][ch.name] = {{"passed", ch.passed}, {"detail", ch.detail}};
        std::cout << (ch.passed ? "PASS " : "FAIL ") << ch.name << ' ' << ch.detail.dump() << '\n';
        ok = ok && ch.passed;
    }
    report["passed"] = ok;
    writeText(out / "audit.json", report.dump(2) + "\n");
    return ok ? kExitOk : kExitCheckFailed;
}

int cmdCompare(const RunConfig& c, const fs::path& out, const std::string& config_text) {
    const int scenario = c.benchmark == "ballplate" && c.scenario == 0 ? 2 : c.scenario;
    const Problem pb = buildProblem(c, scenario);
    const DrtoSolution ref = solveReference(pb, c);
    {
        std::ostringstream os;
        writeTrajectoryCsv(os, ref.za_star);
        writeText(out / (drtoName(c, scenario) + ".csv"), os.str());
    }
    ScenarioSchedule schedule = ScenarioSchedule::constant(c.steps, pb.x0);
    schedule.seed = c.seed;
    SimulationConfig sim = simulationConfig(c, scenario);
    const SimulationLog empc = runClosedLoop(pb.setup, pb.cost, schedule, sim);
    sim.kind = ControllerKind::Tracking;
    sim.reference = ref.za_star;
    const SimulationLog tracking = runClosedLoop(pb.setup, pb.cost, schedule, sim);
    writeLog(out, "comparison_empc", empc, config_text);
    writeLog(out, "comparison_tracking", tracking, config_text);

    nlohmann::ordered_json summary;
    summary["seed"] = c.seed;
    summary["config_hash"] = configHash(config_text);
    summary["drto_objective"] = ref.objective;
    summary["empc"] = runJson(empc, c, ref.za_star);
    summary["tracking"] = runJson(tracking, c, ref.za_star);
    if (!empc.steps.empty() && !tracking.steps.empty()) {
        const double a = averageEconomicCost(empc, windowFor(c, empc));
        const double b = averageEconomicCost(tracking, windowFor(c, tracking));
        summary["empc_not_worse"] = a <= b;
        std::cout << "average economic cost: empc " << formatDouble(a) << " tracking " << formatDouble(b) << '\n';
    }
    writeText(out / "summary.json", summary.dump(2) + "\n");
    return std::max(statusOf(empc), statusOf(tracking));
}

void configureLogging() {
    spdlog::set_level(spdlog::level::info);
    if (const char* env = std::getenv("PEMC_LOG_LEVEL")) spdlog::set_level(spdlog::level::from_str(env));
}

}  // namespace

int main(int argc, char** argv) {
    configureLogging();
    CLI::App app{"Periodic single-layer economic MPC"};
    app.require_subcommand(1);

    std::string config_path, benchmark, out;
    std::optional<int> scenario, steps, window;
    std::optional<std::uint64_t> seed;
    auto addFlags = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--benchmark", benchmark, "ballplate or custom");
        sub->add_option("--scenario", scenario, "benchmark scenario (0 runs every benchmark experiment)");
        sub->add_option("--steps", steps, "closed-loop steps");
        sub->add_option("--out", out, "output directory");
        sub->add_option("--seed", seed, "root seed");
        sub->add_option("--window", window, "averaging window in steps");
    };
    CLI::App* run = app.add_subcommand("run", "closed-loop simulation");
    CLI::App* drto = app.add_subcommand("drto", "periodic optimum by majorization-minimization");
    CLI::App* audit = app.add_subcommand("audit", "closed loop with every invariant check");
    CLI::App* compare = app.add_subcommand("compare", "E-MPC against tracking MPC on the same reference");
    for (auto* sub : {run, drto, audit, compare}) addFlags(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    RunConfig config;
    try {
        if (!config_path.empty()) {
            std::ifstream is(config_path);
            if (!is) throw cli::ConfigError(config_path + ": cannot open config file");
            std::stringstream buf;
            buf << is.rdbuf();
            config = cli::parseRunConfig(buf.str(), config_path);
        }
        if (!benchmark.empty()) config.benchmark = benchmark;
        if (scenario) config.scenario = *scenario;
        if (steps) config.steps = *steps;
        if (window) config.window = *window;
        if (seed) config.seed = *seed;
        if (!out.empty()) config.out = out;
        config.validate();
    } catch (const cli::ConfigError& e) {
        spdlog::error("{}", e.what());
        return kExitUsage;
    }

    const fs::path out_dir(config.out);
    const std::string effective = cli::dumpRunConfig(config);
    try {
        fs::create_directories(out_dir);
        writeText(out_dir / "effective_config.json", effective);
        if (run->parsed()) return cmdRun(config, out_dir, effective);
        if (drto->parsed()) return cmdDrto(config, out_dir);
        if (audit->parsed()) return cmdAudit(config, out_dir);
        return cmdCompare(config, out_dir, effective);
    } catch (const DrtoError& e) {
        spdlog::error("periodic optimum failed: {} (solver status {})", e.what(), qp::toString(e.status()));
        if (e.status() == qp::QpStatus::PrimalInfeasible)
            spdlog::error("the solver returned a primal infeasibility certificate");
        return kExitSolver;
    } catch (const ControllerError& e) {
        spdlog::error("controller failed at k={}: {}", e.time(), e.what());
        return kExitSolver;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitSolver;
    }
}
