#include "pemc/qp.hpp"
#include "qp_internal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pemc::qp {

using namespace detail;

AdmmSolver::AdmmSolver(SolverConfig config) : config_(std::move(config)) { config_.validate(); }

QpSolution AdmmSolver::solve(const QpProblem& prob) {
    const auto t_start = std::chrono::steady_clock::now();
    prob.validate();
    const SolverConfig& cfg = config_;
    const int n = prob.dim();
    const int e = prob.numEq();
    const int r = prob.numIneq();
    const int m = e + r;

    // Scaled working copy: rows [eq; ineq] with bounds l <= Ax <= u.
    SparseMatrix P = prob.P;
    Vector q = prob.q;
    SparseMatrix A = stackRows(prob.Aeq, prob.Ain, n);
    Vector lo(m), up(m);
    lo.head(e) = prob.beq;
    up.head(e) = prob.beq;
    lo.tail(r).setConstant(-kInf);
    up.tail(r) = prob.bin;

    const Scaling sc = equilibrate(P, q, A, cfg.scaling_iterations);
    for (int i = 0; i < m; ++i) {
        if (std::isfinite(lo(i))) lo(i) *= sc.E(i);
        if (std::isfinite(up(i))) up(i) *= sc.E(i);
    }

    double rho = cfg.rho;
    auto rhoVector = [&](double base) {
        Vector v(m);
        v.head(e).setConstant(base * cfg.eq_rho_scale);
        v.tail(r).setConstant(base);
        return v;
    };
    Vector rho_vec = rhoVector(rho);

    SparseMatrix K = assembleKkt(P, A, cfg.sigma, rho_vec.cwiseInverse());
    Ldlt ldlt;
    ldlt.analyzePattern(K);
    ldlt.factorize(K);

    QpSolution sol;
    auto finish = [&](QpSolution& s) {
        s.solve_time = std::chrono::steady_clock::now() - t_start;
        return s;
    };
    if (ldlt.info() != Eigen::Success) {
        sol.status = QpStatus::NumericalFailure;
        sol.w = Vector::Zero(n);
        return finish(sol);
    }

    // Diagonal positions of the constraint block for cheap refactorization.
    auto updateRho = [&](double new_rho) {
        rho = new_rho;
        rho_vec = rhoVector(rho);
        for (int i = 0; i < m; ++i) K.coeffRef(n + i, n + i) = -1.0 / rho_vec(i);
        ldlt.factorize(K);
    };

    Vector x = Vector::Zero(n), z = Vector::Zero(m), y = Vector::Zero(m);
    if (cfg.warm_start) {
        const WarmStart& ws = *cfg.warm_start;
        if (ws.w.size() == n) {
            x = ws.w.cwiseQuotient(sc.D);
            z = A * x;
            for (int i = 0; i < m; ++i) z(i) = std::clamp(z(i), lo(i), up(i));
        }
        if (ws.y_eq.size() == e && ws.y_in.size() == r) {
            y.head(e) = ws.y_eq;
            y.tail(r) = ws.y_in;
            y = sc.c * y.cwiseQuotient(sc.E);
        }
    }

    auto unscaledPrimal = [&](const Vector& xs) { return Vector(xs.cwiseProduct(sc.D)); };
    auto unscaledDual = [&](const Vector& ys) { return Vector(ys.cwiseProduct(sc.E) / sc.c); };

    Vector rhs(n + m), x_tilde(n), z_tilde(m), y_prev(m);
    bool converged = false;
    bool infeasible = false;
    int iter = 0;
    Vector certificate;
    for (iter = 1; iter <= cfg.max_iterations; ++iter) {
        y_prev = y;
        rhs.head(n) = cfg.sigma * x - q;
        rhs.tail(m) = z - y.cwiseQuotient(rho_vec);
        const Vector kkt = ldlt.solve(rhs);
        x_tilde = kkt.head(n);
        z_tilde = z + (kkt.tail(m) - y).cwiseQuotient(rho_vec);

        x = cfg.alpha * x_tilde + (1.0 - cfg.alpha) * x;
        const Vector z_relax = cfg.alpha * z_tilde + (1.0 - cfg.alpha) * z;
        Vector z_new = z_relax + y.cwiseQuotient(rho_vec);
        for (int i = 0; i < m; ++i) z_new(i) = std::clamp(z_new(i), lo(i), up(i));
        y += rho_vec.cwiseProduct(z_relax - z_new);
        z = std::move(z_new);

        const bool check = (iter % cfg.check_interval == 0) || iter == cfg.max_iterations;
        const bool adapt = cfg.adaptive_rho && (iter % cfg.adaptive_rho_interval == 0);
        if (!check && !adapt) continue;

        // Residuals in scaled space.
        const Vector Ax = A * x;
        const Vector Px = P * x;
        const Vector Aty = A.transpose() * y;
        const Vector prim_s = Ax - z;
        const Vector dual_s = Px + q + Aty;

        if (check) {
            const double prim = infNorm(prim_s.cwiseQuotient(sc.E));
            const double dual = infNorm(dual_s.cwiseQuotient(sc.D)) / sc.c;
            const double prim_scale = std::max(infNorm(Ax.cwiseQuotient(sc.E)), infNorm(z.cwiseQuotient(sc.E)));
            const double dual_scale = std::max({infNorm(Px.cwiseQuotient(sc.D)), infNorm(Aty.cwiseQuotient(sc.D)),
                                                infNorm(q.cwiseQuotient(sc.D))}) / sc.c;
            if (prim <= cfg.eps_feas * (1.0 + prim_scale) && dual <= cfg.eps_opt * (1.0 + dual_scale)) {
                converged = true;
                break;
            }
            // Primal infeasibility: dy projected on the polar of the recession cone of [l, u].
            Vector dy = y - y_prev;
            for (int i = 0; i < m; ++i) {
                if (!std::isfinite(up(i))) dy(i) = std::min(dy(i), 0.0);
                if (!std::isfinite(lo(i))) dy(i) = std::max(dy(i), 0.0);
            }
            const Vector v = dy.cwiseProduct(sc.E);
            const double v_norm = infNorm(v);
            if (v_norm > 1e-30) {
                const Vector Atv = (A.transpose() * dy).cwiseQuotient(sc.D);
                double support = 0.0;
                for (int i = 0; i < m; ++i) {
                    if (dy(i) > 0.0 && std::isfinite(up(i))) support += up(i) * dy(i);
                    if (dy(i) < 0.0 && std::isfinite(lo(i))) support += lo(i) * dy(i);
                }
                // support computed in scaled bounds: u_s * dy = (E u) * dy = u * v
                if (infNorm(Atv) <= cfg.eps_infeasible * v_norm && support <= -cfg.eps_infeasible * v_norm) {
                    infeasible = true;
                    certificate = v / v_norm;
                    break;
                }
            }
        }
        if (adapt) {
            const double prim_n = infNorm(prim_s) / std::max({infNorm(Ax), infNorm(z), 1e-30});
            const double dual_n = infNorm(dual_s) / std::max({infNorm(Px), infNorm(Aty), infNorm(q), 1e-30});
            double new_rho = rho * std::sqrt(prim_n / std::max(dual_n, 1e-30));
            new_rho = std::clamp(new_rho, 1e-6, 1e6);
            if (new_rho > 5.0 * rho || new_rho < 0.2 * rho) {
                updateRho(new_rho);
                if (ldlt.info() != Eigen::Success) {
                    sol.status = QpStatus::NumericalFailure;
                    sol.w = unscaledPrimal(x);
                    return finish(sol);
                }
            }
        }
    }
    sol.iterations = std::min(iter, cfg.max_iterations);

    if (infeasible) {
        sol.status = QpStatus::PrimalInfeasible;
        sol.w = unscaledPrimal(x);
        sol.infeasibility_certificate = certificate;
        sol.objective = prob.objective(sol.w);
        const Vector yu = unscaledDual(y);
        sol.y_eq = yu.head(e);
        sol.y_in = yu.tail(r);
        const KktResiduals res = kktResiduals(prob, sol.w, sol.y_eq, sol.y_in);
        sol.primal_residual = res.primal;
        sol.dual_residual = res.dual;
        return finish(sol);
    }
    if (!x.allFinite() || !y.allFinite()) {
        sol.status = QpStatus::NumericalFailure;
        sol.w = Vector::Zero(n);
        return finish(sol);
    }

    sol.w = unscaledPrimal(x);
    const Vector yu = unscaledDual(y);
    sol.y_eq = yu.head(e);
    sol.y_in = yu.tail(r).cwiseMax(0.0);
    finalize(prob, cfg, converged, sol);
    return finish(sol);
}

}  // namespace pemc::qp
