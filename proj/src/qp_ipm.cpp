#include "pemc/qp.hpp"
#include "qp_internal.hpp"

#include <algorithm>
#include <cmath>

namespace pemc::qp {

using namespace detail;

namespace {

/// Largest alpha keeping v + alpha dv >= 0 (infinite when dv >= 0).
double stepToBoundary(const Vector& v, const Vector& dv) {
    double alpha = kInf;
    for (int i = 0; i < v.size(); ++i)
        if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
    return alpha;
}

void shiftPositive(Vector& v) {
    if (v.size() == 0) return;
    const double t = -v.minCoeff();
    if (t >= -1e-8 * std::max(1.0, infNorm(v))) v.array() += 1.0 + t;
}

}  // namespace

InteriorPointSolver::InteriorPointSolver(SolverConfig config) : config_(std::move(config)) { config_.validate(); }

QpSolution InteriorPointSolver::solve(const QpProblem& prob) {
    const auto t_start = std::chrono::steady_clock::now();
    prob.validate();
    const SolverConfig& cfg = config_;
    const int n = prob.dim();
    const int e = prob.numEq();
    const int r = prob.numIneq();
    const int m = e + r;

    SparseMatrix P = prob.P;
    Vector q = prob.q;
    SparseMatrix A = stackRows(prob.Aeq, prob.Ain, n);
    const Scaling sc = equilibrate(P, q, A, cfg.scaling_iterations);
    const Vector beq = prob.beq.cwiseProduct(sc.E.head(e));
    const Vector bin = prob.bin.cwiseProduct(sc.E.tail(r));
    const SparseMatrix Aeq = A.topRows(e);
    const SparseMatrix Ain = A.bottomRows(r);

    QpSolution sol;
    auto finish = [&]() {
        sol.solve_time = std::chrono::steady_clock::now() - t_start;
        return sol;
    };

    // K0 = [P, A'; A, 0] with explicit diagonal entries so the pattern never changes.
    SparseMatrix K0 = assembleKkt(P, A, 0.0, Vector::Zero(m));
    K0.makeCompressed();
    SparseMatrix K = K0;
    const double delta = cfg.kkt_regularization;
    Ldlt ldlt;
    ldlt.analyzePattern(K);

    Vector W = Vector::Ones(r);
    auto factor = [&]() {
        for (int i = 0; i < n; ++i) K.coeffRef(i, i) = K0.coeff(i, i) + delta;
        for (int i = 0; i < e; ++i) K.coeffRef(n + i, n + i) = -delta;
        for (int i = 0; i < r; ++i) K.coeffRef(n + e + i, n + e + i) = -W(i) - delta;
        ldlt.factorize(K);
        return ldlt.info() == Eigen::Success;
    };
    auto kktSolve = [&](const Vector& rhs) {
        Vector v = ldlt.solve(rhs);
        for (int it = 0; it < cfg.polish_refinement_steps; ++it) {
            Vector Kv = K0 * v;
            Kv.tail(r) -= W.cwiseProduct(v.tail(r));
            v += ldlt.solve(rhs - Kv);
        }
        return v;
    };

    Vector x(n), y(e), lam(r), s(r);
    {
        if (!factor()) {
            sol.status = QpStatus::NumericalFailure;
            sol.w = Vector::Zero(n);
            return finish();
        }
        Vector rhs(n + m);
        rhs << -q, beq, bin;
        const Vector v = kktSolve(rhs);
        x = v.head(n);
        y = v.segment(n, e);
        lam = v.tail(r);
        s = bin - Ain * x;
        shiftPositive(s);
        shiftPositive(lam);
    }

    bool converged = false;
    bool infeasible = false;
    Vector certificate;
    int iter = 0;
    for (iter = 1; iter <= cfg.ipm_max_iterations; ++iter) {
        const Vector Px = P * x;
        Vector aty = Aeq.transpose() * y + Ain.transpose() * lam;
        const Vector rd = Px + q + aty;
        const Vector re = Aeq * x - beq;
        const Vector ri = Ain * x + s - bin;
        const double mu = r > 0 ? s.dot(lam) / r : 0.0;

        // Relative residuals in unscaled units.
        const double prim = std::max(infNorm(re.cwiseQuotient(sc.E.head(e))), infNorm(ri.cwiseQuotient(sc.E.tail(r))));
        const double prim_scale = std::max({infNorm((Aeq * x).cwiseQuotient(sc.E.head(e))),
                                            infNorm((Ain * x).cwiseQuotient(sc.E.tail(r))),
                                            infNorm(prob.beq), infNorm(prob.bin)});
        const double dual = infNorm(rd.cwiseQuotient(sc.D)) / sc.c;
        const double dual_scale = std::max({infNorm(Px.cwiseQuotient(sc.D)), infNorm(aty.cwiseQuotient(sc.D)),
                                            infNorm(q.cwiseQuotient(sc.D))}) / sc.c;
        const double obj = (0.5 * x.dot(Px) + q.dot(x)) / sc.c;
        const double gap = (r > 0 ? s.dot(lam) : 0.0) / sc.c;
        if (prim <= cfg.ipm_tolerance * (1.0 + prim_scale) && dual <= cfg.ipm_tolerance * (1.0 + dual_scale) &&
            gap <= cfg.ipm_tolerance * (1.0 + std::abs(obj))) {
            converged = true;
            break;
        }
        // Farkas test on the normalized multipliers once they blow up.
        const double ynorm = std::max(infNorm(y), infNorm(lam));
        if (ynorm > 1e10 * (1.0 + infNorm(q))) {
            const Vector yy = y / ynorm, ll = lam / ynorm;
            const Vector at = Aeq.transpose() * yy + Ain.transpose() * ll;
            const double support = beq.dot(yy) + bin.dot(ll);
            if (infNorm(at.cwiseQuotient(sc.D)) <= cfg.eps_infeasible && support < -cfg.eps_infeasible) {
                infeasible = true;
                Vector v(m);
                v << yy.cwiseProduct(sc.E.head(e)), ll.cwiseProduct(sc.E.tail(r));
                certificate = v / infNorm(v);
                break;
            }
        }

        W = s.cwiseQuotient(lam);
        if (!factor()) break;

        auto direction = [&](const Vector& rc, Vector& dx, Vector& dy, Vector& dl, Vector& ds) {
            Vector rhs(n + m);
            rhs.head(n) = -rd;
            rhs.segment(n, e) = -re;
            rhs.tail(r) = -ri + rc.cwiseQuotient(lam);
            const Vector v = kktSolve(rhs);
            dx = v.head(n);
            dy = v.segment(n, e);
            dl = v.tail(r);
            ds = -(rc + s.cwiseProduct(dl)).cwiseQuotient(lam);
        };

        Vector dx, dy, dl, ds;
        const Vector rc_aff = s.cwiseProduct(lam);
        direction(rc_aff, dx, dy, dl, ds);
        const double a_aff = std::min({1.0, stepToBoundary(s, ds), stepToBoundary(lam, dl)});
        double sigma = 0.0;
        if (r > 0 && mu > 0.0) {
            const double mu_aff = (s + a_aff * ds).dot(lam + a_aff * dl) / r;
            sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);
        }
        const Vector rc = rc_aff + ds.cwiseProduct(dl) - Vector::Constant(r, sigma * mu);
        direction(rc, dx, dy, dl, ds);
        const double alpha =
            std::min(1.0, cfg.ipm_step_fraction * std::min(stepToBoundary(s, ds), stepToBoundary(lam, dl)));
        x += alpha * dx;
        y += alpha * dy;
        lam += alpha * dl;
        s += alpha * ds;
        if (!x.allFinite() || !lam.allFinite()) break;
    }
    sol.iterations = std::min(iter, cfg.ipm_max_iterations);

    if (infeasible) {
        sol.status = QpStatus::PrimalInfeasible;
        sol.w = x.cwiseProduct(sc.D);
        sol.infeasibility_certificate = certificate;
        sol.objective = prob.objective(sol.w);
        return finish();
    }
    if (!x.allFinite() || !y.allFinite() || !lam.allFinite()) {
        sol.status = QpStatus::NumericalFailure;
        sol.w = Vector::Zero(n);
        return finish();
    }
    sol.w = x.cwiseProduct(sc.D);
    sol.y_eq = y.cwiseProduct(sc.E.head(e)) / sc.c;
    sol.y_in = lam.cwiseProduct(sc.E.tail(r)) / sc.c;
    finalize(prob, cfg, converged, sol);
    return finish();
}

}  // namespace pemc::qp
