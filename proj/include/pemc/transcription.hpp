#pragma once

#include <iosfwd>
#include <vector>

#include "pemc/cost_model.hpp"
#include "pemc/ltv_model.hpp"
#include "pemc/qp.hpp"

namespace pemc {

/**
 * @brief Offsets of the decision blocks
 *
 *   [x_0..x_N | u_0..u_{N-1} | xa_0..xa_{T-1} | ua_0..ua_{T-1}]
 *
 * Periodic-only problems (DRTO) omit the plan blocks and hold just [xa | ua].
 */
struct VariableLayout {
    int n = 0;
    int m = 0;
    int N = 0;
    int T = 0;
    bool has_plan = true;

    int planStates() const { return has_plan ? n * (N + 1) : 0; }
    int planInputs() const { return has_plan ? m * N : 0; }
    int dim() const { return planStates() + planInputs() + n * T + m * T; }

    int x(int i) const { return n * i; }
    int u(int i) const { return planStates() + m * i; }
    int xa(int j) const { return planStates() + planInputs() + n * j; }
    int ua(int j) const { return planStates() + planInputs() + n * T + m * j; }

    std::vector<qp::VariableBlock> blocks() const;
};

/// System, constraints, tracking weights and horizon shared by every MPC transcription.
struct MpcSetup {
    PeriodicLtvSystem system;
    PeriodicConstraintSet constraints;
    TrackingWeights weights;
    int horizon = 0;

    int period() const { return system.period(); }

    /// Throws std::invalid_argument on period or dimension mismatch or N outside [1, T].
    void validate() const;
};

struct TranscribedProblem {
    qp::QpProblem qp;
    VariableLayout layout;
    TimeIndex anchor = 0;
    /// Constant part of the cost kept outside the QP; objective + offset reproduces the full cost.
    double constant_offset = 0.0;

    double fullObjective(const Vector& w) const { return qp.objective(w) + constant_offset; }

    PlanPair extract(const Vector& w) const;
    Trajectory extractArtificial(const Vector& w) const;

    /// Packs a plan/artificial pair into a decision vector (inverse of extract).
    Vector assemble(const PlanPair& pair) const;
    Vector assembleArtificial(const Trajectory& artificial) const;

    /// max(|Aeq w - beq|, (Ain w - bin)+)
    double constraintViolation(const Vector& w) const;
};

/// Per-phase quadratic model 0.5 z'Hz + g'z + c of the artificial stage cost, z = (xa_j, ua_j).
using StageModels = std::vector<QuadraticForm>;

/// Majorizer of l_{k+j} about expansion point j: H = rho I, tangent at the expansion point.
StageModels majorizerModels(const EconomicCost& cost, const Trajectory& expansion, const Parameter& p,
                            bool per_phase_rho = false);

/// Exact quadratic forms of a quadratic cost; throws std::invalid_argument if the cost is not quadratic.
StageModels exactModels(const EconomicCost& cost, TimeIndex k, int period, const Parameter& p);

/// ||z - r_j||^2 with weights blkdiag(Q, R); r_j taken from `reference` (or zero when null).
StageModels trackingModels(const TrackingWeights& weights, const Trajectory* reference, int n, int m, int period);

/// Full single-layer transcription with an arbitrary artificial stage model.
TranscribedProblem buildWithStageModels(const MpcSetup& setup, TimeIndex k, const Vector& x,
                                        const StageModels& models);

/// Approximated single-layer problem: S + O-hat about za_hat (anchored at k).
TranscribedProblem buildSingleLayerQp(const MpcSetup& setup, const EconomicCost& cost, TimeIndex k, const Vector& x,
                                      const Trajectory& za_hat, const Parameter& p, bool per_phase_rho = false);

/// Same constraints; artificial cost sum ||xa_j||^2_Q + ||ua_j||^2_R.
TranscribedProblem buildInitializerQp(const MpcSetup& setup, TimeIndex k, const Vector& x);

/// Tracking baseline: S + sum l^S(za_j - ref_j); the reference is re-anchored to k.
TranscribedProblem buildTrackingQp(const MpcSetup& setup, TimeIndex k, const Vector& x, const Trajectory& reference);

/// Periodic problem over (xa, ua) only: artificial dynamics, wrap and Z_{k+j} membership.
TranscribedProblem buildPeriodicQp(const PeriodicLtvSystem& system, const PeriodicConstraintSet& constraints,
                                   TimeIndex k, const StageModels& models);

/// qp text dump followed by a transcription trailer (n m N T anchor offset).
void writeTranscribed(std::ostream& os, const TranscribedProblem& problem);
TranscribedProblem readTranscribed(std::istream& is);

}  // namespace pemc
