#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "pemc/ballplate.hpp"
#include "pemc/controller.hpp"
#include "pemc/drto.hpp"
#include "pemc/sim.hpp"

namespace pemc::ballplate {

struct ExperimentConfig {
    Config bench;
    int steps = 1350;
    int window = 0;  ///< averaging window; 0 selects the last two periods
    DrtoConfig drto;
    ControllerConfig controller;
    std::uint64_t seed = 0;
    bool record_solve_time = false;
    bool scenario1 = true;
    bool scenario2 = true;
    bool comparison = true;

    void validate() const;
};

struct RunSummary {
    std::string name;
    bool ran = false;
    bool completed = false;
    std::string error;
    int steps = 0;
    double average_cost = 0.0;     ///< window average of the run's own economic cost
    double full_run_average = 0.0;
    std::size_t violations = 0;
    std::size_t lyapunov_violations = 0;
    double orbit_distance = 0.0;  ///< position coordinates, against the run's DRTO reference
    double runtime = 0.0;         ///< seconds
};

struct ExperimentReport {
    int window = 0;
    std::optional<DrtoSolution> drto_s1;
    std::optional<DrtoSolution> drto_s1_exact;  ///< one-shot optimum of the quadratic scenario-1 cost
    std::optional<DrtoSolution> drto_s2;
    RunSummary scenario1;
    RunSummary scenario2;
    RunSummary comparison_empc;
    RunSummary comparison_tracking;
    /// Scenario-2 cost evaluated on the scenario-1 closed loop over the same window.
    std::optional<double> scenario2_cost_on_scenario1;
    std::optional<SimulationLog> log_s1;
    std::optional<SimulationLog> log_s2;
    std::optional<SimulationLog> log_tracking;
};

/// Scenario schedule: center-rest start, constant p.
ScenarioSchedule benchmarkSchedule(const ExperimentConfig& config);

/// Box for sampling-based checks; inputs are limited to the operating box when `scenario` is 2.
SamplingBox samplingBox(const Config& config, int scenario, double position_radius = 6.0);

/**
 * Scenario 1 and 2 E-MPC runs, their DRTO optima, and the scenario-2 comparison with a tracking MPC
 * following the scenario-2 DRTO trajectory. Writes scenario1.csv, scenario2.csv, comparison_empc.csv,
 * comparison_tracking.csv, drto_s1.csv, drto_s2.csv, summary.json and log sidecars into `out`.
 * Closed-loop failures are reported in the summary; DRTO failures propagate.
 */
ExperimentReport runBenchmarkExperiments(const ExperimentConfig& config, const std::filesystem::path& out,
                                     const std::string& config_text = "");

}  // namespace pemc::ballplate
