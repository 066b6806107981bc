#include "pemc/ltv_model.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

namespace pemc {

PeriodicLtvSystem::PeriodicLtvSystem(std::vector<Matrix> a_schedule, std::vector<Matrix> b_schedule)
    : a_(std::move(a_schedule)), b_(std::move(b_schedule)) {
    if (a_.empty()) throw std::invalid_argument("PeriodicLtvSystem: period must be at least 1");
    if (a_.size() != b_.size()) throw std::invalid_argument("PeriodicLtvSystem: A and B schedules differ in length");
    n_ = static_cast<int>(a_.front().rows());
    m_ = static_cast<int>(b_.front().cols());
    if (n_ == 0 || m_ == 0) throw std::invalid_argument("PeriodicLtvSystem: empty dimensions");
    for (std::size_t k = 0; k < a_.size(); ++k) {
        if (a_[k].rows() != n_ || a_[k].cols() != n_)
            throw std::invalid_argument("PeriodicLtvSystem: A[" + std::to_string(k) + "] is not n x n");
        if (b_[k].rows() != n_ || b_[k].cols() != m_)
            throw std::invalid_argument("PeriodicLtvSystem: B[" + std::to_string(k) + "] is not n x m");
    }
}

PeriodicLtvSystem PeriodicLtvSystem::timeInvariant(const Matrix& A, const Matrix& B, int period) {
    if (period < 1) throw std::invalid_argument("PeriodicLtvSystem: period must be at least 1");
    return PeriodicLtvSystem(std::vector<Matrix>(static_cast<std::size_t>(period), A),
                             std::vector<Matrix>(static_cast<std::size_t>(period), B));
}

Vector PeriodicLtvSystem::step(TimeIndex k, const Vector& x, const Vector& u) const {
    if (x.size() != n_ || u.size() != m_) throw std::invalid_argument("PeriodicLtvSystem::step: dimension mismatch");
    return A(k) * x + B(k) * u;
}

std::vector<Vector> PeriodicLtvSystem::rollout(TimeIndex k, const Vector& x0, const std::vector<Vector>& inputs) const {
    std::vector<Vector> states;
    states.reserve(inputs.size() + 1);
    states.push_back(x0);
    for (std::size_t i = 0; i < inputs.size(); ++i)
        states.push_back(step(k + static_cast<TimeIndex>(i), states.back(), inputs[i]));
    return states;
}

PeriodicConstraintSet::PeriodicConstraintSet(std::vector<Polytope> polytopes, int state_dim, int input_dim)
    : n_(state_dim), m_(input_dim), polytopes_(std::move(polytopes)) {
    if (polytopes_.empty()) throw std::invalid_argument("PeriodicConstraintSet: period must be at least 1");
    for (std::size_t k = 0; k < polytopes_.size(); ++k) {
        const auto& p = polytopes_[k];
        if (p.G.cols() != n_ + m_ || p.G.rows() != p.h.size())
            throw std::invalid_argument("PeriodicConstraintSet: polytope " + std::to_string(k) + " has wrong shape");
        if (p.h.size() > 0 && p.h.minCoeff() <= 0.0)
            throw std::invalid_argument("PeriodicConstraintSet: polytope " + std::to_string(k) +
                                        " does not contain the origin in its interior");
    }
}

PeriodicConstraintSet PeriodicConstraintSet::replicated(const Polytope& polytope, int period, int state_dim,
                                                        int input_dim) {
    if (period < 1) throw std::invalid_argument("PeriodicConstraintSet: period must be at least 1");
    return PeriodicConstraintSet(std::vector<Polytope>(static_cast<std::size_t>(period), polytope), state_dim,
                                 input_dim);
}

Membership PeriodicConstraintSet::contains(TimeIndex k, const Vector& x, const Vector& u, double tolerance) const {
    if (x.size() != n_ || u.size() != m_)
        throw std::invalid_argument("PeriodicConstraintSet::contains: dimension mismatch");
    const Polytope& p = at(k);
    Membership out;
    if (p.h.size() == 0) {
        out.inside = true;
        out.worst_violation = -std::numeric_limits<double>::infinity();
        return out;
    }
    Vector z(n_ + m_);
    z << x, u;
    const Vector slack = p.G * z - p.h;
    Eigen::Index row = 0;
    out.worst_violation = slack.maxCoeff(&row);
    out.worst_row = static_cast<int>(row);
    out.inside = out.worst_violation <= tolerance;
    return out;
}

Matrix controllabilityMatrix(const PeriodicLtvSystem& sys, TimeIndex k, int c) {
    const int n = sys.stateDim();
    const int m = sys.inputDim();
    Matrix gamma(n, m * (c + 1));
    // Block i is Psi(k+c, k+i) = A_{k+c} ... A_{k+i+1} B_{k+i}; the last block is B_{k+c}.
    Matrix transition = Matrix::Identity(n, n);
    for (int i = c; i >= 0; --i) {
        gamma.middleCols(m * i, m) = transition * sys.B(k + i);
        transition = transition * sys.A(k + i);
    }
    return gamma;
}

int numericalRank(const Matrix& M, double tolerance_scale) {
    if (M.size() == 0) return 0;
    Eigen::JacobiSVD<Matrix> svd(M);
    const Vector& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) return 0;
    const double tol = s(0) * static_cast<double>(std::max(M.rows(), M.cols())) *
                       std::numeric_limits<double>::epsilon() * tolerance_scale;
    return static_cast<int>((s.array() > tol).count());
}

ControllabilityReport checkControllability(const PeriodicLtvSystem& sys, double tolerance_scale) {
    ControllabilityReport rep;
    const int n = sys.stateDim();
    for (int c = 0; c < sys.period(); ++c) {
        std::vector<int> ranks;
        bool full = true;
        for (int k = 0; k < sys.period(); ++k) {
            const int r = numericalRank(controllabilityMatrix(sys, k, c), tolerance_scale);
            ranks.push_back(r);
            if (r != n) {
                full = false;
                break;
            }
        }
        if (full) {
            rep.c_star = c;
            rep.ranks = std::move(ranks);
            return rep;
        }
    }
    return rep;
}

}  // namespace pemc
