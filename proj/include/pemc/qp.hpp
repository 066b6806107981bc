#pragma once

#include <chrono>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace pemc::qp {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

/// Named contiguous slice of the decision vector, used for diagnostics and dumps.
struct VariableBlock {
    std::string name;
    int offset = 0;
    int length = 0;
};

/**
 * @brief Convex quadratic program
 *
 *   minimize    0.5 w'Pw + q'w
 *   subject to  Aeq w  = beq
 *               Ain w <= bin
 *
 * P is stored in full (both triangles).
 */
struct QpProblem {
    SparseMatrix P;
    Vector q;
    SparseMatrix Aeq;
    Vector beq;
    SparseMatrix Ain;
    Vector bin;
    std::vector<VariableBlock> layout;

    int dim() const { return static_cast<int>(q.size()); }
    int numEq() const { return static_cast<int>(beq.size()); }
    int numIneq() const { return static_cast<int>(bin.size()); }

    double objective(const Vector& w) const;

    /// Throws std::invalid_argument on inconsistent sizes, asymmetric P or a P that is not PSD.
    void validate() const;
};

enum class QpStatus { Optimal, PrimalInfeasible, MaxIterations, NumericalFailure };

const char* toString(QpStatus status);

struct QpSolution {
    Vector w;
    QpStatus status = QpStatus::NumericalFailure;
    double objective = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    Vector y_eq;
    Vector y_in;
    int iterations = 0;
    std::chrono::duration<double> solve_time{0.0};
    bool polished = false;
    /// Farkas direction over [eq; ineq] rows when status is PrimalInfeasible.
    Vector infeasibility_certificate;

    bool optimal() const { return status == QpStatus::Optimal; }
};

struct WarmStart {
    Vector w;
    Vector y_eq;
    Vector y_in;
};

enum class QpMethod { Admm, InteriorPoint };

const char* toString(QpMethod method);

struct SolverConfig {
    QpMethod method = QpMethod::Admm;
    /// Re-solve with the interior-point method when ADMM ends without an optimal status.
    bool interior_point_fallback = true;

    double eps_feas = 1e-6;
    double eps_opt = 1e-6;
    int max_iterations = 20000;
    std::optional<WarmStart> warm_start;

    // ADMM step parameters
    double rho = 0.1;
    double sigma = 1e-6;
    double alpha = 1.6;
    bool adaptive_rho = true;
    int adaptive_rho_interval = 25;
    double eq_rho_scale = 1e3;
    int scaling_iterations = 10;
    int check_interval = 5;

    double kkt_regularization = 1e-9;
    double eps_infeasible = 1e-4;

    // Interior-point parameters
    int ipm_max_iterations = 200;
    double ipm_tolerance = 1e-10;  ///< relative residual and gap target
    double ipm_step_fraction = 0.99;

    bool polish = true;
    int polish_refinement_steps = 4;
    int polish_active_set_passes = 8;

    void validate() const;
};

/// Residuals of a candidate primal/dual pair, in the unscaled problem.
struct KktResiduals {
    double primal = 0.0;         ///< max(|Aeq w - beq|, (Ain w - bin)+)
    double dual = 0.0;           ///< |P w + q + Aeq'y + Ain'lambda|
    double complementarity = 0.0;///< max |lambda_i (Ain w - bin)_i|
    double dual_sign = 0.0;      ///< max(-lambda)+
    double primal_scale = 0.0;
    double dual_scale = 0.0;
};

KktResiduals kktResiduals(const QpProblem& problem, const Vector& w, const Vector& y_eq, const Vector& y_in);

/**
 * @brief Operator-splitting (ADMM) QP solver with Ruiz equilibration,
 * adaptive penalty and active-set polishing.
 *
 * An instance owns its factorization workspace; do not share one
 * instance between threads.
 */
class AdmmSolver {
public:
    explicit AdmmSolver(SolverConfig config = {});

    QpSolution solve(const QpProblem& problem);

    const SolverConfig& config() const { return config_; }
    SolverConfig& config() { return config_; }

private:
    SolverConfig config_;
};

/**
 * @brief Primal-dual interior-point QP solver (Mehrotra predictor-corrector)
 *
 * Factorizes the regularized quasi-definite KKT system with a sparse LDL'
 * every iteration. Ignores warm starts.
 */
class InteriorPointSolver {
public:
    explicit InteriorPointSolver(SolverConfig config = {});

    QpSolution solve(const QpProblem& problem);

    const SolverConfig& config() const { return config_; }

private:
    SolverConfig config_;
};

/// Dispatches on config.method and applies the interior-point fallback.
class QpSolver {
public:
    explicit QpSolver(SolverConfig config = {});

    QpSolution solve(const QpProblem& problem);

    const SolverConfig& config() const { return config_; }
    SolverConfig& config() { return config_; }

private:
    SolverConfig config_;
};

QpSolution solve(const QpProblem& problem, const SolverConfig& config = {});

/**
 * Exhaustive active-set enumeration for tiny problems (d <= 12, r <= 16).
 * Throws std::invalid_argument for larger instances.
 */
QpSolution solveOracle(const QpProblem& problem);

struct ConditionReport {
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    double ratio = 0.0;
    double eq_norm = 0.0;  ///< Frobenius norm of Aeq
    double in_norm = 0.0;  ///< Frobenius norm of Ain
};

/// Extreme eigenvalues of P by (shifted) power iteration.
ConditionReport conditionReport(const QpProblem& problem, int iterations = 1000);

// Text dump: header with dimensions, then coordinate-list blocks. Numbers are written
// in shortest round-trip form so that read(write(p)) reproduces p bit for bit.
void writeQp(std::ostream& os, const QpProblem& problem);
QpProblem readQp(std::istream& is);

}  // namespace pemc::qp
