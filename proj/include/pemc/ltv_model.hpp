#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pemc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using TimeIndex = std::int64_t;

/// Maps an absolute time index onto [0, period).
inline int phaseOf(TimeIndex k, int period) {
    const TimeIndex r = k % period;
    return static_cast<int>(r < 0 ? r + period : r);
}

/**
 * @brief Periodic discrete-time linear time-varying system
 *
 *   x_{k+1} = A_{k mod T} x_k + B_{k mod T} u_k
 *
 * Schedules are stored densely (T entries) also for time-invariant systems.
 */
class PeriodicLtvSystem {
public:
    PeriodicLtvSystem(std::vector<Matrix> a_schedule, std::vector<Matrix> b_schedule);

    /// Time-invariant pair embedded with the given period.
    static PeriodicLtvSystem timeInvariant(const Matrix& A, const Matrix& B, int period);

    int stateDim() const { return n_; }
    int inputDim() const { return m_; }
    int period() const { return static_cast<int>(a_.size()); }

    const Matrix& A(TimeIndex k) const { return a_[static_cast<std::size_t>(phaseOf(k, period()))]; }
    const Matrix& B(TimeIndex k) const { return b_[static_cast<std::size_t>(phaseOf(k, period()))]; }

    Vector step(TimeIndex k, const Vector& x, const Vector& u) const;

    /// States x_0..x_L produced by applying `inputs` from x0 starting at time k.
    std::vector<Vector> rollout(TimeIndex k, const Vector& x0, const std::vector<Vector>& inputs) const;

private:
    int n_ = 0;
    int m_ = 0;
    std::vector<Matrix> a_;
    std::vector<Matrix> b_;
};

/// Z = { (x,u) : G [x;u] <= h }.
struct Polytope {
    Matrix G;
    Vector h;
};

struct Membership {
    bool inside = false;
    double worst_violation = 0.0;  ///< max(G [x;u] - h)
    int worst_row = -1;
};

class PeriodicConstraintSet {
public:
    /// Throws std::invalid_argument if any polytope does not contain the origin strictly in its interior.
    PeriodicConstraintSet(std::vector<Polytope> polytopes, int state_dim, int input_dim);

    static PeriodicConstraintSet replicated(const Polytope& polytope, int period, int state_dim, int input_dim);

    int period() const { return static_cast<int>(polytopes_.size()); }
    int stateDim() const { return n_; }
    int inputDim() const { return m_; }
    const Polytope& at(TimeIndex k) const { return polytopes_[static_cast<std::size_t>(phaseOf(k, period()))]; }

    Membership contains(TimeIndex k, const Vector& x, const Vector& u, double tolerance = 1e-8) const;

private:
    int n_ = 0;
    int m_ = 0;
    std::vector<Polytope> polytopes_;
};

struct ControllabilityReport {
    std::optional<int> c_star;
    std::vector<int> ranks;  ///< rank(Gamma_k(c_star)) for k = 0..T-1, empty when c_star is absent
};

/// Gamma_k(c) = [Psi(k+c,k), ..., Psi(k+c,k+c-1), B_{k+c}], shape n x m(c+1).
Matrix controllabilityMatrix(const PeriodicLtvSystem& system, TimeIndex k, int c);

/// Numerical rank with threshold sigma_max * max(rows, cols) * eps * tolerance_scale.
int numericalRank(const Matrix& M, double tolerance_scale = 1.0);

ControllabilityReport checkControllability(const PeriodicLtvSystem& system, double tolerance_scale = 1.0);

}  // namespace pemc
