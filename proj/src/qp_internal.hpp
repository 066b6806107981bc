#pragma once

#include <limits>
#include <optional>
#include <vector>

#include <Eigen/SparseCholesky>

#include "pemc/qp.hpp"

namespace pemc::qp::detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

using Ldlt = Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;

double infNorm(const Vector& v);
SparseMatrix stackRows(const SparseMatrix& top, const SparseMatrix& bottom, int cols);
Vector colInfNorms(const SparseMatrix& m);
Vector rowInfNorms(const SparseMatrix& m);

/// Assembles [P + sigma I, A'; A, -diag(d)] (full symmetric storage).
SparseMatrix assembleKkt(const SparseMatrix& P, const SparseMatrix& A, double sigma, const Vector& lower_diag);

struct Scaling {
    Vector D;  // variables
    Vector E;  // constraints
    double c = 1.0;
};

/// Ruiz equilibration of P, q and A in place, followed by cost scaling.
Scaling equilibrate(SparseMatrix& P, Vector& q, SparseMatrix& A, int iterations);

struct ActiveSetSolve {
    Vector w;
    Vector y_eq;
    Vector y_in;
    bool ok = false;
};

/// Solves the equality-constrained QP obtained by treating `active` inequality rows as equalities.
ActiveSetSolve solveReducedKkt(const QpProblem& prob, const std::vector<int>& active, double delta, int refinement);

bool withinTolerance(const KktResiduals& r, const SolverConfig& cfg);
double meritOf(const KktResiduals& r);

/// Iterated active-set polishing starting from a primal/dual guess.
std::optional<ActiveSetSolve> polish(const QpProblem& prob, const Vector& w, const Vector& y_in,
                                     const SolverConfig& cfg);

/// Polishes if that improves the merit, fills residuals, objective and status.
void finalize(const QpProblem& prob, const SolverConfig& cfg, bool converged, QpSolution& sol);

}  // namespace pemc::qp::detail
