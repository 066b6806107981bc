#include "pemc/qp.hpp"
#include "qp_internal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pemc::qp {

namespace detail {

double infNorm(const Vector& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

SparseMatrix stackRows(const SparseMatrix& top, const SparseMatrix& bottom, int cols) {
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(top.nonZeros() + bottom.nonZeros()));
    for (int c = 0; c < top.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(top, c); it; ++it)
            triplets.emplace_back(it.row(), it.col(), it.value());
    for (int c = 0; c < bottom.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(bottom, c); it; ++it)
            triplets.emplace_back(it.row() + top.rows(), it.col(), it.value());
    SparseMatrix out(top.rows() + bottom.rows(), cols);
    out.setFromTriplets(triplets.begin(), triplets.end());
    return out;
}

Vector colInfNorms(const SparseMatrix& m) {
    Vector out = Vector::Zero(m.cols());
    for (int c = 0; c < m.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(m, c); it; ++it)
            out(c) = std::max(out(c), std::abs(it.value()));
    return out;
}

Vector rowInfNorms(const SparseMatrix& m) {
    Vector out = Vector::Zero(m.rows());
    for (int c = 0; c < m.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(m, c); it; ++it)
            out(it.row()) = std::max(out(it.row()), std::abs(it.value()));
    return out;
}

double limitScaling(double v) {
    if (v < 1e-4) return 1.0;
    return std::min(v, 1e4);
}

SparseMatrix assembleKkt(const SparseMatrix& P, const SparseMatrix& A, double sigma, const Vector& lower_diag) {
    const int n = static_cast<int>(P.rows());
    const int m = static_cast<int>(A.rows());
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(P.nonZeros() + 2 * A.nonZeros() + n + m));
    for (int c = 0; c < P.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(P, c); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
    for (int i = 0; i < n; ++i) t.emplace_back(i, i, sigma);
    for (int c = 0; c < A.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(A, c); it; ++it) {
            t.emplace_back(n + it.row(), it.col(), it.value());
            t.emplace_back(it.col(), n + it.row(), it.value());
        }
    for (int i = 0; i < m; ++i) t.emplace_back(n + i, n + i, -lower_diag(i));
    SparseMatrix K(n + m, n + m);
    K.setFromTriplets(t.begin(), t.end());
    return K;
}

Scaling equilibrate(SparseMatrix& P, Vector& q, SparseMatrix& A, int iterations) {
    const int n = static_cast<int>(P.rows());
    const int m = static_cast<int>(A.rows());
    Scaling s{Vector::Ones(n), Vector::Ones(m), 1.0};
    for (int iter = 0; iter < iterations; ++iter) {
        const Vector p_cols = colInfNorms(P);
        const Vector a_cols = colInfNorms(A);
        const Vector a_rows = rowInfNorms(A);
        Vector dd(n), de(m);
        for (int j = 0; j < n; ++j) dd(j) = 1.0 / std::sqrt(limitScaling(std::max(p_cols(j), a_cols(j))));
        for (int i = 0; i < m; ++i) de(i) = 1.0 / std::sqrt(limitScaling(a_rows(i)));
        P = dd.asDiagonal() * P * dd.asDiagonal();
        A = de.asDiagonal() * A * dd.asDiagonal();
        q = dd.asDiagonal() * q;
        s.D = s.D.cwiseProduct(dd);
        s.E = s.E.cwiseProduct(de);
    }
    const Vector p_cols = colInfNorms(P);
    const double mean_p = n > 0 ? p_cols.mean() : 0.0;
    const double cost_norm = limitScaling(std::max(mean_p, infNorm(q)));
    s.c = 1.0 / cost_norm;
    P *= s.c;
    q *= s.c;
    return s;
}

ActiveSetSolve solveReducedKkt(const QpProblem& prob, const std::vector<int>& active, double delta, int refinement) {
    const int n = prob.dim();
    const int e = prob.numEq();
    const int a = static_cast<int>(active.size());
    std::vector<Eigen::Triplet<double>> t;
    for (int c = 0; c < prob.P.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(prob.P, c); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
    for (int c = 0; c < prob.Aeq.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(prob.Aeq, c); it; ++it) {
            t.emplace_back(n + it.row(), it.col(), it.value());
            t.emplace_back(it.col(), n + it.row(), it.value());
        }
    std::vector<int> row_map(static_cast<std::size_t>(prob.numIneq()), -1);
    for (int k = 0; k < a; ++k) row_map[static_cast<std::size_t>(active[static_cast<std::size_t>(k)])] = k;
    for (int c = 0; c < prob.Ain.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(prob.Ain, c); it; ++it) {
            const int k = row_map[static_cast<std::size_t>(it.row())];
            if (k < 0) continue;
            t.emplace_back(n + e + k, it.col(), it.value());
            t.emplace_back(it.col(), n + e + k, it.value());
        }
    SparseMatrix K0(n + e + a, n + e + a);
    K0.setFromTriplets(t.begin(), t.end());
    SparseMatrix Kreg = K0;
    for (int i = 0; i < n; ++i) Kreg.coeffRef(i, i) += delta;
    for (int i = n; i < n + e + a; ++i) Kreg.coeffRef(i, i) -= delta;

    Ldlt ldlt;
    ldlt.compute(Kreg);
    ActiveSetSolve out;
    if (ldlt.info() != Eigen::Success) return out;

    Vector rhs(n + e + a);
    rhs.head(n) = -prob.q;
    rhs.segment(n, e) = prob.beq;
    for (int k = 0; k < a; ++k) rhs(n + e + k) = prob.bin(active[static_cast<std::size_t>(k)]);
    Vector sol = ldlt.solve(rhs);
    for (int r = 0; r < refinement; ++r) {
        const Vector residual = rhs - K0 * sol;
        sol += ldlt.solve(residual);
    }
    if (!sol.allFinite()) return out;
    out.w = sol.head(n);
    out.y_eq = sol.segment(n, e);
    out.y_in = Vector::Zero(prob.numIneq());
    for (int k = 0; k < a; ++k) out.y_in(active[static_cast<std::size_t>(k)]) = sol(n + e + k);
    out.ok = true;
    return out;
}

bool withinTolerance(const KktResiduals& r, const SolverConfig& cfg) {
    return r.primal <= cfg.eps_feas * (1.0 + r.primal_scale) && r.dual <= cfg.eps_opt * (1.0 + r.dual_scale);
}

double meritOf(const KktResiduals& r) {
    return std::max(r.primal / (1.0 + r.primal_scale), r.dual / (1.0 + r.dual_scale));
}

std::optional<ActiveSetSolve> polish(const QpProblem& prob, const Vector& w, const Vector& y_in,
                                     const SolverConfig& cfg) {
    const int r = prob.numIneq();
    std::vector<char> active(static_cast<std::size_t>(r), 0);
    const Vector slack = prob.bin - prob.Ain * w;
    for (int i = 0; i < r; ++i) active[static_cast<std::size_t>(i)] = (slack(i) < y_in(i)) ? 1 : 0;

    std::optional<ActiveSetSolve> best;
    double best_merit = kInf;
    for (int pass = 0; pass < cfg.polish_active_set_passes; ++pass) {
        std::vector<int> idx;
        for (int i = 0; i < r; ++i)
            if (active[static_cast<std::size_t>(i)]) idx.push_back(i);
        ActiveSetSolve cand = solveReducedKkt(prob, idx, cfg.kkt_regularization, cfg.polish_refinement_steps);
        if (!cand.ok) break;
        const KktResiduals res = kktResiduals(prob, cand.w, cand.y_eq, cand.y_in);
        const double merit = std::max({meritOf(res), res.dual_sign / (1.0 + res.dual_scale)});
        if (merit < best_merit) {
            best_merit = merit;
            best = cand;
        }
        // Adjust the working set: add violated rows, drop rows with negative multipliers.
        const Vector viol = prob.Ain * cand.w - prob.bin;
        bool changed = false;
        const double feas_tol = cfg.eps_feas * 1e-3 * (1.0 + res.primal_scale);
        const double sign_tol = cfg.eps_opt * 1e-3 * (1.0 + res.dual_scale);
        for (int i = 0; i < r; ++i) {
            auto& flag = active[static_cast<std::size_t>(i)];
            if (!flag && viol(i) > feas_tol) {
                flag = 1;
                changed = true;
            } else if (flag && cand.y_in(i) < -sign_tol) {
                flag = 0;
                changed = true;
            }
        }
        if (!changed) break;
    }
    return best;
}

void finalize(const QpProblem& prob, const SolverConfig& cfg, bool converged, QpSolution& sol) {
    KktResiduals res = kktResiduals(prob, sol.w, sol.y_eq, sol.y_in);
    if (cfg.polish && prob.numIneq() > 0) {
        if (auto pol = polish(prob, sol.w, sol.y_in, cfg)) {
            const KktResiduals pres = kktResiduals(prob, pol->w, pol->y_eq, pol->y_in);
            const bool sign_ok = pres.dual_sign <= cfg.eps_opt * (1.0 + pres.dual_scale);
            if (sign_ok && meritOf(pres) <= meritOf(res)) {
                sol.w = pol->w;
                sol.y_eq = pol->y_eq;
                sol.y_in = pol->y_in;
                res = pres;
                sol.polished = true;
            }
        }
    }
    sol.primal_residual = res.primal;
    sol.dual_residual = res.dual;
    sol.objective = prob.objective(sol.w);
    if (withinTolerance(res, cfg))
        sol.status = QpStatus::Optimal;
    else
        sol.status = converged ? QpStatus::NumericalFailure : QpStatus::MaxIterations;
}

}  // namespace detail

using namespace detail;

void SolverConfig::validate() const {
    if (!(eps_feas > 0.0) || !(eps_opt > 0.0)) throw std::invalid_argument("solver tolerances must be positive");
    if (max_iterations <= 0) throw std::invalid_argument("max_iterations must be positive");
    if (!(rho > 0.0) || !(sigma > 0.0)) throw std::invalid_argument("rho and sigma must be positive");
    if (!(alpha > 0.0 && alpha < 2.0)) throw std::invalid_argument("relaxation alpha must lie in (0, 2)");
}

KktResiduals kktResiduals(const QpProblem& prob, const Vector& w, const Vector& y_eq, const Vector& y_in) {
    KktResiduals r;
    const Vector Pw = prob.P * w;
    const Vector eq = prob.Aeq * w;
    const Vector in = prob.Ain * w;
    Vector grad = Pw + prob.q;
    Vector aty = Vector::Zero(prob.dim());
    if (prob.numEq() > 0) aty += prob.Aeq.transpose() * y_eq;
    if (prob.numIneq() > 0) aty += prob.Ain.transpose() * y_in;
    grad += aty;
    r.dual = infNorm(grad);
    double primal = prob.numEq() > 0 ? infNorm(eq - prob.beq) : 0.0;
    for (int i = 0; i < prob.numIneq(); ++i) {
        const double v = in(i) - prob.bin(i);
        primal = std::max(primal, v);
        r.complementarity = std::max(r.complementarity, std::abs(y_in(i) * v));
        r.dual_sign = std::max(r.dual_sign, -y_in(i));
    }
    r.primal = std::max(primal, 0.0);
    r.primal_scale = std::max({infNorm(eq), infNorm(in), infNorm(prob.beq), infNorm(prob.bin)});
    r.dual_scale = std::max({infNorm(Pw), infNorm(aty), infNorm(prob.q)});
    return r;
}

const char* toString(QpMethod method) {
    return method == QpMethod::Admm ? "admm" : "interior-point";
}

QpSolver::QpSolver(SolverConfig config) : config_(std::move(config)) { config_.validate(); }

QpSolution QpSolver::solve(const QpProblem& problem) {
    if (config_.method == QpMethod::InteriorPoint) return InteriorPointSolver(config_).solve(problem);
    QpSolution sol = AdmmSolver(config_).solve(problem);
    if (sol.optimal() || sol.status == QpStatus::PrimalInfeasible || !config_.interior_point_fallback) return sol;
    QpSolution ipm = InteriorPointSolver(config_).solve(problem);
    ipm.iterations += sol.iterations;
    ipm.solve_time += sol.solve_time;
    return ipm;
}

QpSolution solve(const QpProblem& problem, const SolverConfig& config) { return QpSolver(config).solve(problem); }

}  // namespace pemc::qp
