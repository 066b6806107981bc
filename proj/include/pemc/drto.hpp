#pragma once

#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "pemc/cost_model.hpp"
#include "pemc/qp.hpp"
#include "pemc/transcription.hpp"

namespace pemc {

struct DrtoConfig {
    qp::SolverConfig solver;
    double tol_obj = 1e-8;   ///< relative: stop once the decrease is below tol_obj * (1 + |objective|)
    double tol_step = 1e-7;  ///< infinity norm of the trajectory change
    int max_iterations = 500;
    /// Relative slack before an objective increase counts as a descent failure.
    double descent_tolerance = 1e-9;
    bool per_phase_rho = false;

    void validate() const;
};

/// Raised when a periodic subproblem cannot be solved or the MM iteration stops descending.
class DrtoError : public std::runtime_error {
public:
    DrtoError(const std::string& what, qp::QpStatus status) : std::runtime_error(what), status_(status) {}
    qp::QpStatus status() const { return status_; }

private:
    qp::QpStatus status_;
};

struct DrtoSolution {
    Trajectory za_star;
    double objective = 0.0;  ///< sum of l over one period
    int iterations = 0;
    bool converged = false;
    double final_step = 0.0;
    std::vector<double> history;  ///< objective of the initial point and of every iterate
};

/**
 * Majorization-minimization for the periodic optimum: starts from the quadratic
 * initializer (sum ||xa||^2_Q + ||ua||^2_R) and iterates the tangent-plus-rho
 * upper bound of the cost about the incumbent.
 */
DrtoSolution solveDrto(const PeriodicLtvSystem& system, const PeriodicConstraintSet& constraints,
                       const EconomicCost& cost, const TrackingWeights& weights, TimeIndex k, const Parameter& p,
                       const DrtoConfig& config = {});

/// Single QP with the exact Hessian; only for costs that expose a quadratic form.
DrtoSolution solveDrtoOneShot(const PeriodicLtvSystem& system, const PeriodicConstraintSet& constraints,
                              const EconomicCost& cost, TimeIndex k, const Parameter& p,
                              const qp::SolverConfig& solver = {});

struct ExactSingleLayerSolution {
    PlanPair pair;
    PlanPair first_iterate;
    double objective = 0.0;  ///< S + O at `pair`
    int iterations = 0;
    bool converged = false;
    std::vector<double> history;
};

/// S + O minimized by the same MM loop, starting from the expansion point za_hat.
ExactSingleLayerSolution solveExactSingleLayer(const MpcSetup& setup, const EconomicCost& cost, TimeIndex k,
                                               const Vector& x, const Trajectory& za_hat, const Parameter& p,
                                               const DrtoConfig& config = {});

/// One QP of S + O with exact Hessians; quadratic costs only.
ExactSingleLayerSolution solveExactSingleLayerOneShot(const MpcSetup& setup, const EconomicCost& cost, TimeIndex k,
                                                      const Vector& x, const Parameter& p,
                                                      const qp::SolverConfig& solver = {});

/// S(z, za) computed directly from the stored plan and artificial vectors.
double trackingCostDirect(const TrackingWeights& weights, const PlanPair& pair);

/// One row per phase: j, xa_j..., ua_j...
void writeTrajectoryCsv(std::ostream& os, const Trajectory& trajectory);

/// Inverse of writeTrajectoryCsv; anchor is set to 0.
Trajectory readTrajectoryCsv(std::istream& is, int state_dim, int input_dim);

}  // namespace pemc
