#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pemc/controller.hpp"
#include "pemc/cost_model.hpp"
#include "pemc/transcription.hpp"

namespace pemc {

/// Piecewise-constant schedule of the exogenous parameter p.
struct ScenarioSchedule {
    int total_steps = 0;
    std::vector<std::pair<int, Parameter>> p_timeline;  ///< (start step, value); first start must be 0
    Vector x0;
    std::uint64_t seed = 0;

    void validate() const;
    const Parameter& at(int step) const;
    /// Steps (> 0) where a new timeline entry starts.
    std::vector<int> changeSteps() const;

    static ScenarioSchedule constant(int total_steps, const Vector& x0, Parameter p = {});
};

enum class ControllerKind { Empc, Tracking };

const char* toString(ControllerKind kind);
/// Accepts "empc" and "tracking"; throws std::invalid_argument otherwise.
ControllerKind parseControllerKind(const std::string& text);

struct SimulationConfig {
    ControllerKind kind = ControllerKind::Empc;
    ControllerConfig controller;
    /// Required for tracking runs.
    std::optional<Trajectory> reference;
    /// Feasible starting linearization; the initializer QP is solved when absent.
    std::optional<Trajectory> linearization;
    TimeIndex k0 = 0;
    double violation_tolerance = 1e-6;
    /// Wall-clock solve times make logs non-reproducible, so they are off by default.
    bool record_solve_time = false;

    void validate() const;
};

struct StepLog {
    TimeIndex k = 0;
    Vector x;
    Vector u;
    Parameter p;
    double economic_cost = 0.0;  ///< l^e_k(x_k, u_k, p_k)
    double running_average = 0.0;
    double v_hat = 0.0;
    double s_value = 0.0;
    double first_stage = 0.0;
    int iterations = 0;
    double solve_time = 0.0;
    qp::QpStatus status = qp::QpStatus::Optimal;
};

struct ViolationEntry {
    int step = 0;
    int row = 0;
    double magnitude = 0.0;
};

struct SimulationLog {
    int n = 0;
    int m = 0;
    int period = 0;
    ControllerKind kind = ControllerKind::Empc;
    std::vector<StepLog> steps;
    Vector x_final;
    /// Mean economic cost of every complete period, counted from the first step.
    std::vector<double> period_averages;
    std::vector<ViolationEntry> violations;
    std::vector<TimeIndex> p_changes;  ///< absolute times where p switched
    bool completed = false;
    std::string error;
    std::optional<qp::QpStatus> error_status;
    bool record_solve_time = false;

    /// Controller records in the layout used by checkLyapunovDecrease.
    std::vector<StepRecord> records() const;
};

/**
 * Closed loop: at every step read p, solve the controller QP, apply u*_0 to the plant,
 * log, and check the constraints at (x_k, u_k). A ControllerError ends the run with the
 * partial log kept and `completed` false. `cost` supplies l^e for logging and, for E-MPC
 * runs, the controller objective; it may be null for tracking runs.
 */
SimulationLog runClosedLoop(const MpcSetup& setup, const CostPtr& cost, const ScenarioSchedule& scenario,
                            const SimulationConfig& config);

/// (1/W) sum of the logged l^e over the last W steps; throws std::invalid_argument for W = 0 or W > steps.
double averageEconomicCost(const SimulationLog& log, int window);

/// Same window average with l^e re-evaluated under another cost on the logged (x, u, p).
double averageEconomicCost(const SimulationLog& log, const EconomicCost& cost, int window);

/**
 * max over the last `window` steps of ||z_k - z*_{phase}||, minimized over the T cyclic alignments
 * of the reference; z = (x, u) restricted to `coordinates` (all n + m when empty).
 */
double orbitDistance(const SimulationLog& log, const Trajectory& reference, int window,
                     const std::vector<int>& coordinates = {});

/// Window used when none is given: the last two periods, capped by the log length.
int defaultWindow(const SimulationLog& log);

/// One row per step; solve_time appears only when the log recorded it.
void writeLogCsv(std::ostream& os, const SimulationLog& log);

/// JSON metadata: columns, dimensions, completion, violation count and the config hash.
void writeLogSidecar(std::ostream& os, const SimulationLog& log, const std::string& scenario_name,
                     const std::string& config_text);

/// 64-bit FNV-1a of the text, as 16 hex digits.
std::string configHash(const std::string& text);

}  // namespace pemc
