#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pemc/cost_model.hpp"
#include "pemc/qp.hpp"
#include "pemc/transcription.hpp"

namespace pemc {

struct ControllerConfig {
    qp::SolverConfig solver;
    bool warm_start = true;
    bool per_phase_rho = false;
    /// Rollout feasibility tolerance for the initial linearization trajectory.
    double feasibility_tolerance = 1e-6;
};

/// Raised when a controller QP ends without an optimal status.
class ControllerError : public std::runtime_error {
public:
    ControllerError(const std::string& what, qp::QpStatus status, TimeIndex k)
        : std::runtime_error(what), status_(status), k_(k) {}
    qp::QpStatus status() const { return status_; }
    TimeIndex time() const { return k_; }

private:
    qp::QpStatus status_;
    TimeIndex k_;
};

struct StepRecord {
    TimeIndex k = 0;
    Vector x;
    Vector u;
    Parameter p;
    double v_hat = 0.0;        ///< optimal cost including the constant offset
    double s_value = 0.0;      ///< tracking part S at the optimum
    double first_stage = 0.0;  ///< l^S(x_k - xa*_0, u*_0 - ua*_0)
    qp::QpStatus status = qp::QpStatus::Optimal;
    int iterations = 0;
    double solve_time = 0.0;  ///< seconds
};

struct StepResult {
    Vector u_applied;
    PlanPair plan;
    double v_hat_opt = 0.0;
    std::optional<double> delta_v;  ///< change against the previous step when p is unchanged
    StepRecord record;
    qp::QpSolution solution;
};

/**
 * @brief Receding-horizon loop: one single-layer QP per step, linearization
 * trajectory updated by one-step rotation of the optimal artificial trajectory.
 *
 * The same class runs the tracking baseline through trackingStep.
 */
class SingleLayerController {
public:
    /// Solves the initializer QP at (k0, x0); throws ControllerError if it is not solved to optimality.
    static SingleLayerController initialize(MpcSetup setup, CostPtr cost, ControllerConfig config, TimeIndex k0,
                                            const Vector& x0);

    /// Starts from a given feasible linearization trajectory (re-anchored to k0).
    SingleLayerController(MpcSetup setup, CostPtr cost, ControllerConfig config, TimeIndex k0,
                          Trajectory linearization);

    StepResult step(const Vector& x, const Parameter& p);
    StepResult trackingStep(const Vector& x, const Trajectory& reference);

    TimeIndex time() const { return k_; }
    const Trajectory& linearization() const { return za_hat_; }
    const std::vector<StepRecord>& history() const { return history_; }
    const MpcSetup& setup() const { return setup_; }
    const CostPtr& cost() const { return cost_; }
    const ControllerConfig& config() const { return config_; }

    /// QP the next call to step() would solve, without changing state.
    TranscribedProblem nextProblem(const Vector& x, const Parameter& p) const;

private:
    StepResult finishStep(const TranscribedProblem& tp, const Vector& x, const Parameter& p);

    MpcSetup setup_;
    CostPtr cost_;
    ControllerConfig config_;
    TimeIndex k_ = 0;
    Trajectory za_hat_;
    std::optional<qp::WarmStart> warm_;
    std::vector<StepRecord> history_;
};

/**
 * Candidate for step k+1 built from the optimum at step k: plan inputs shifted by one with
 * ua*_N appended, plan states re-rolled from x_next, artificial trajectory rotated by one.
 */
PlanPair shiftedCandidate(const MpcSetup& setup, const PlanPair& optimum, const Vector& x_next);

/// Shifted warm start (primal and dual) for the next single-layer QP.
qp::WarmStart shiftedWarmStart(const TranscribedProblem& problem, const qp::QpSolution& solution,
                               const MpcSetup& setup, const Vector& x_next);

struct LyapunovViolation {
    TimeIndex k = 0;
    double delta = 0.0;  ///< V*_{k+1} - V*_k
    double bound = 0.0;  ///< -l^S(...) + tolerance
};

struct LyapunovReport {
    int windows = 0;
    int checked = 0;
    std::vector<LyapunovViolation> violations;
    bool passed() const { return violations.empty(); }
};

/**
 * Checks V*_{k+1} - V*_k <= -l^S_k + rel_tol (1 + |V*_k|) over every pair of consecutive records
 * inside a window of constant p. Windows break at consecutive times where p differs and at the
 * listed change times.
 */
LyapunovReport checkLyapunovDecrease(const std::vector<StepRecord>& history,
                                     const std::vector<TimeIndex>& p_changed_at = {}, double rel_tol = 1e-6);

}  // namespace pemc
