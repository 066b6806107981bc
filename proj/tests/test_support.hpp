#pragma once

#include <memory>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

#include "pemc/cost_model.hpp"
#include "pemc/ltv_model.hpp"
#include "pemc/qp.hpp"
#include "pemc/transcription.hpp"

namespace pemc::testing {

inline Matrix randomMatrix(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
    std::uniform_real_distribution<double> d(-scale, scale);
    Matrix M(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) M(i, j) = d(rng);
    return M;
}

inline Vector randomVector(std::mt19937_64& rng, int n, double scale = 1.0) {
    return randomMatrix(rng, n, 1, scale);
}

inline Vector uniformIn(std::mt19937_64& rng, const Vector& lo, const Vector& hi) {
    std::uniform_real_distribution<double> d(0.0, 1.0);
    Vector v(lo.size());
    for (int i = 0; i < v.size(); ++i) v(i) = lo(i) + (hi(i) - lo(i)) * d(rng);
    return v;
}

/// Symmetric positive semidefinite with eigenvalues in [lo, hi].
inline Matrix randomSpd(std::mt19937_64& rng, int n, double lo, double hi) {
    Eigen::HouseholderQR<Matrix> qr(randomMatrix(rng, n, n));
    const Matrix Q = qr.householderQ();
    std::uniform_real_distribution<double> d(lo, hi);
    Vector ev(n);
    for (int i = 0; i < n; ++i) ev(i) = d(rng);
    Matrix S = Q * ev.asDiagonal() * Q.transpose();
    return 0.5 * (S + S.transpose());
}

/// Box |x_i| <= xb, |u_i| <= ub as a polytope over (x, u).
inline Polytope boxPolytope(int n, int m, double xb, double ub) {
    const int d = n + m;
    Polytope p{Matrix::Zero(2 * d, d), Vector(2 * d)};
    for (int i = 0; i < d; ++i) {
        p.G(2 * i, i) = 1.0;
        p.G(2 * i + 1, i) = -1.0;
        p.h(2 * i) = p.h(2 * i + 1) = i < n ? xb : ub;
    }
    return p;
}

struct RandomPeriodicProblem {
    MpcSetup setup;
    std::shared_ptr<TimeVaryingQuadraticCost> cost;
    double state_bound = 0.0;
    double input_bound = 0.0;
};

/// Controllable periodic system with box constraints and a strictly convex time-varying quadratic cost.
inline RandomPeriodicProblem randomPeriodicProblem(std::mt19937_64& rng, int n, int m, int T, int N) {
    if (n > m * T) throw std::invalid_argument("randomPeriodicProblem: n > m*T cannot be controllable");
    for (;;) {
        std::vector<Matrix> A, B;
        for (int k = 0; k < T; ++k) {
            Matrix a = randomMatrix(rng, n, n);
            const double r = a.eigenvalues().cwiseAbs().maxCoeff();
            if (r > 1.1) a *= 1.1 / r;
            A.push_back(a);
            B.push_back(randomMatrix(rng, n, m));
        }
        PeriodicLtvSystem sys(A, B);
        if (!checkControllability(sys).c_star) continue;
        const double xb = 2.0, ub = 1.0;
        auto cons = PeriodicConstraintSet::replicated(boxPolytope(n, m, xb, ub), T, n, m);
        std::vector<QuadraticForm> table;
        for (int k = 0; k < T; ++k)
            table.push_back(QuadraticForm{randomSpd(rng, n + m, 0.2, 2.0), randomVector(rng, n + m, 2.0), 0.0});
        auto cost = std::make_shared<TimeVaryingQuadraticCost>(table, n, m);
        TrackingWeights w(randomSpd(rng, n, 0.5, 2.0), randomSpd(rng, m, 0.5, 2.0));
        return RandomPeriodicProblem{MpcSetup{std::move(sys), std::move(cons), std::move(w), N}, cost, xb, ub};
    }
}

/// Dense random strictly convex QP with a feasible point at w0.
inline qp::QpProblem randomQp(std::mt19937_64& rng, int d, int neq, int nin) {
    qp::QpProblem p;
    const Matrix P = randomSpd(rng, d, 0.1, 5.0);
    p.P = P.sparseView();
    p.q = randomVector(rng, d, 3.0);
    const Vector w0 = randomVector(rng, d);
    const Matrix Aeq = randomMatrix(rng, neq, d);
    p.Aeq = Aeq.sparseView();
    p.beq = Aeq * w0;
    const Matrix Ain = randomMatrix(rng, nin, d);
    p.Ain = Ain.sparseView();
    std::uniform_real_distribution<double> slack(0.0, 0.5);
    p.bin = Ain * w0;
    for (int i = 0; i < nin; ++i) p.bin(i) += slack(rng);
    return p;
}

/// Five-point central-difference gradient of l_k at (x, u).
inline Vector stencilGradient(const EconomicCost& c, TimeIndex k, const Vector& x, const Vector& u, double h) {
    const int n = static_cast<int>(x.size());
    Vector z(x.size() + u.size());
    z << x, u;
    auto f = [&](const Vector& v) { return c.value(k, v.head(n), v.tail(v.size() - n), {}); };
    Vector g(z.size());
    for (int i = 0; i < z.size(); ++i) {
        Vector a = z, b = z, cc = z, d = z;
        a(i) += 2.0 * h;
        b(i) += h;
        cc(i) -= h;
        d(i) -= 2.0 * h;
        g(i) = (-f(a) + 8.0 * f(b) - 8.0 * f(cc) + f(d)) / (12.0 * h);
    }
    return g;
}

/// Max infinity-norm difference of two trajectories with identical shapes.
inline double trajectoryDistance(const Trajectory& a, const Trajectory& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.states.size(); ++i) d = std::max(d, (a.states[i] - b.states[i]).lpNorm<Eigen::Infinity>());
    for (std::size_t i = 0; i < a.inputs.size(); ++i) d = std::max(d, (a.inputs[i] - b.inputs[i]).lpNorm<Eigen::Infinity>());
    return d;
}

}  // namespace pemc::testing
