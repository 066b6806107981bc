#include "pemc/experiments.hpp"

#include <chrono>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace pemc::ballplate {

namespace {

using Clock = std::chrono::steady_clock;

const std::vector<int> kPositions{kPosition1, kPosition2};

std::ofstream openOut(const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    return os;
}

void writeLog(const std::filesystem::path& out, const std::string& name, const SimulationLog& log,
              const std::string& config_text) {
    auto csv = openOut(out / (name + ".csv"));
    writeLogCsv(csv, log);
    auto meta = openOut(out / (name + ".json"));
    writeLogSidecar(meta, log, name, config_text);
}

void writeDrto(const std::filesystem::path& path, const DrtoSolution& sol) {
    auto os = openOut(path);
    writeTrajectoryCsv(os, sol.za_star);
}

RunSummary summarize(const std::string& name, const SimulationLog& log, int window, const Trajectory& reference,
                     double runtime) {
    RunSummary s;
    s.name = name;
    s.ran = true;
    s.completed = log.completed;
    s.error = log.error;
    s.steps = static_cast<int>(log.steps.size());
    s.violations = log.violations.size();
    s.lyapunov_violations = checkLyapunovDecrease(log.records(), log.p_changes).violations.size();
    s.runtime = runtime;
    if (!log.steps.empty()) {
        const int w = std::min(window, s.steps);
        s.average_cost = averageEconomicCost(log, w);
        s.full_run_average = averageEconomicCost(log, s.steps);
        s.orbit_distance = orbitDistance(log, reference, w, kPositions);
    }
    return s;
}

SimulationLog timedRun(const MpcSetup& setup, const CostPtr& cost, const ScenarioSchedule& schedule,
                       const SimulationConfig& sim, double& runtime) {
    const auto t0 = Clock::now();
    SimulationLog log = runClosedLoop(setup, cost, schedule, sim);
    runtime = std::chrono::duration<double>(Clock::now() - t0).count();
    return log;
}

nlohmann::ordered_json toJson(const RunSummary& s) {
    nlohmann::ordered_json j;
    j["ran"] = s.ran;
    if (!s.ran) return j;
    j["completed"] = s.completed;
    if (!s.error.empty()) j["error"] = s.error;
    j["steps"] = s.steps;
    j["average_cost"] = s.average_cost;
    j["full_run_average_cost"] = s.full_run_average;
    j["constraint_violations"] = s.violations;
    j["lyapunov_violations"] = s.lyapunov_violations;
    j["orbit_distance_position"] = s.orbit_distance;
    j["runtime_s"] = s.runtime;
    return j;
}

nlohmann::ordered_json toJson(const DrtoSolution& d) {
    nlohmann::ordered_json j;
    j["objective"] = d.objective;
    j["iterations"] = d.iterations;
    j["converged"] = d.converged;
    j["final_step"] = d.final_step;
    return j;
}

}  // namespace

void ExperimentConfig::validate() const {
    bench.validate();
    drto.validate();
    controller.solver.validate();
    if (steps < 1) throw std::invalid_argument("experiments: steps must be positive");
    if (window < 0) throw std::invalid_argument("experiments: window must be non-negative");
}

ScenarioSchedule benchmarkSchedule(const ExperimentConfig& config) {
    ScenarioSchedule s = ScenarioSchedule::constant(config.steps, initialState());
    s.seed = config.seed;
    return s;
}

SamplingBox samplingBox(const Config& config, int scenario, double position_radius) {
    const double rate_bound = 10.0;
    Vector lo(kStateDim + kInputDim), hi(kStateDim + kInputDim);
    for (int axis = 0; axis < 2; ++axis) {
        const int o = 4 * axis;
        hi.segment(o, 4) << position_radius, rate_bound, config.angle_bound, rate_bound;
    }
    const double ub = scenario == 2 ? std::min(config.operating_box, config.input_bound) : config.input_bound;
    hi.tail(kInputDim).setConstant(ub);
    lo = -hi;
    return SamplingBox{lo, hi};
}

ExperimentReport runBenchmarkExperiments(const ExperimentConfig& config, const std::filesystem::path& out,
                                     const std::string& config_text) {
    config.validate();
    std::filesystem::create_directories(out);
    const MpcSetup setup = buildSetup(config.bench);
    const CostPtr cost1 = scenario1Cost(config.bench);
    const CostPtr cost2 = scenario2Cost(config.bench);
    const ScenarioSchedule schedule = benchmarkSchedule(config);
    const Parameter p;

    ExperimentReport rep;
    rep.window = config.window > 0 ? config.window : 2 * config.bench.period;

    SimulationConfig sim;
    sim.controller = config.controller;
    sim.record_solve_time = config.record_solve_time;

    if (config.scenario1) {
        rep.drto_s1 = solveDrto(setup.system, setup.constraints, *cost1, setup.weights, 0, p, config.drto);
        rep.drto_s1_exact = solveDrtoOneShot(setup.system, setup.constraints, *cost1, 0, p, config.drto.solver);
        writeDrto(out / "drto_s1.csv", *rep.drto_s1);
        double runtime = 0.0;
        rep.log_s1 = timedRun(setup, cost1, schedule, sim, runtime);
        writeLog(out, "scenario1", *rep.log_s1, config_text);
        rep.scenario1 = summarize("scenario1", *rep.log_s1, rep.window, rep.drto_s1_exact->za_star, runtime);
    }

    if (config.scenario2 || config.comparison) {
        rep.drto_s2 = solveDrto(setup.system, setup.constraints, *cost2, setup.weights, 0, p, config.drto);
        writeDrto(out / "drto_s2.csv", *rep.drto_s2);
        double runtime = 0.0;
        SimulationConfig sim2 = sim;
        sim2.controller.solver = scenarioSolver(config.bench, 2, sim.controller.solver);
        rep.log_s2 = timedRun(setup, cost2, schedule, sim2, runtime);
        writeLog(out, "scenario2", *rep.log_s2, config_text);
        rep.scenario2 = summarize("scenario2", *rep.log_s2, rep.window, rep.drto_s2->za_star, runtime);
        if (config.comparison) {
            writeLog(out, "comparison_empc", *rep.log_s2, config_text);
            rep.comparison_empc = rep.scenario2;
            rep.comparison_empc.name = "comparison_empc";

            SimulationConfig tracking = sim2;
            tracking.kind = ControllerKind::Tracking;
            tracking.reference = rep.drto_s2->za_star;
            rep.log_tracking = timedRun(setup, cost2, schedule, tracking, runtime);
            writeLog(out, "comparison_tracking", *rep.log_tracking, config_text);
            rep.comparison_tracking =
                summarize("comparison_tracking", *rep.log_tracking, rep.window, rep.drto_s2->za_star, runtime);
        }
    }

    if (rep.log_s1 && !rep.log_s1->steps.empty())
        rep.scenario2_cost_on_scenario1 =
            averageEconomicCost(*rep.log_s1, *cost2, std::min(rep.window, static_cast<int>(rep.log_s1->steps.size())));

    nlohmann::ordered_json j;
    j["seed"] = config.seed;
    j["steps"] = config.steps;
    j["window"] = rep.window;
    j["config_hash"] = configHash(config_text);
    if (rep.drto_s1) {
        j["drto_s1"] = toJson(*rep.drto_s1);
        j["drto_s1_one_shot"] = toJson(*rep.drto_s1_exact);
    }
    if (rep.drto_s2) j["drto_s2"] = toJson(*rep.drto_s2);
    j["scenario1"] = toJson(rep.scenario1);
    j["scenario2"] = toJson(rep.scenario2);
    j["comparison_empc"] = toJson(rep.comparison_empc);
    j["comparison_tracking"] = toJson(rep.comparison_tracking);
    if (rep.scenario2_cost_on_scenario1) j["scenario2_cost_on_scenario1_orbit"] = *rep.scenario2_cost_on_scenario1;
    auto os = openOut(out / "summary.json");
    os << j.dump(2) << '\n';
    return rep;
}

}  // namespace pemc::ballplate
