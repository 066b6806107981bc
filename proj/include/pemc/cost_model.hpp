#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "pemc/ltv_model.hpp"

namespace pemc {

/// Exogenous parameter p. Each cost family documents how it reads the entries; empty means nominal.
using Parameter = Eigen::VectorXd;

/// Value and gradient with respect to the stacked (x, u), evaluated together.
struct CostEval {
    double value = 0.0;
    Vector gradient;
};

/// Exact quadratic form 0.5 z'Hz + g'z + c over z = (x, u).
struct QuadraticForm {
    Matrix H;
    Vector g;
    double c = 0.0;
};

/**
 * @brief Economic stage cost l_k(x, u, p), periodic in k.
 *
 * Implementations are stateless evaluators and may be shared across threads.
 */
class EconomicCost {
public:
    virtual ~EconomicCost() = default;

    virtual int period() const = 0;
    virtual int stateDim() const = 0;
    virtual int inputDim() const = 0;

    virtual CostEval evaluate(TimeIndex k, const Vector& x, const Vector& u, const Parameter& p) const = 0;

    /// Global Lipschitz constant of the gradient on the constraint set.
    virtual double lipschitz() const = 0;

    /// Optional per-phase refinement; defaults to the global constant.
    virtual double lipschitzAt(TimeIndex /*k*/) const { return lipschitz(); }

    /// Exact quadratic representation when the cost is quadratic in (x, u).
    virtual std::optional<QuadraticForm> quadraticForm(TimeIndex /*k*/, const Parameter& /*p*/) const {
        return std::nullopt;
    }

    double value(TimeIndex k, const Vector& x, const Vector& u, const Parameter& p) const {
        return evaluate(k, x, u, p).value;
    }
};

using CostPtr = std::shared_ptr<const EconomicCost>;

/**
 * ||x - s * r_{k mod T}||^2_E with reference scale s = p(0) when p is non-empty.
 */
class QuadraticReferenceCost : public EconomicCost {
public:
    QuadraticReferenceCost(Matrix state_weight, std::vector<Vector> reference, int input_dim);

    int period() const override { return static_cast<int>(reference_.size()); }
    int stateDim() const override { return static_cast<int>(weight_.rows()); }
    int inputDim() const override { return m_; }
    CostEval evaluate(TimeIndex k, const Vector& x, const Vector& u, const Parameter& p) const override;
    double lipschitz() const override { return rho_; }
    std::optional<QuadraticForm> quadraticForm(TimeIndex k, const Parameter& p) const override;

    const Matrix& weight() const { return weight_; }
    const std::vector<Vector>& reference() const { return reference_; }

private:
    Vector referenceAt(TimeIndex k, const Parameter& p) const;

    Matrix weight_;
    std::vector<Vector> reference_;
    int m_ = 0;
    double rho_ = 0.0;
};

/// Per-axis input polynomial a u^2 - b u^4 + c u^6.
struct InputPolynomial {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;

    double value(double u) const { const double u2 = u * u; return u2 * (a + u2 * (-b + c * u2)); }
    double derivative(double u) const { const double u2 = u * u; return u * (2.0 * a + u2 * (-4.0 * b + 6.0 * c * u2)); }
    double second(double u) const { const double u2 = u * u; return 2.0 * a + u2 * (-12.0 * b + 30.0 * c * u2); }

    /// max |second(u)| over |u| <= box, from the endpoints and the stationary points of the quartic.
    double maxAbsSecond(double box) const;
};

/**
 * Reference term plus sum_i w * poly(u_i), where w = p(1) when p has two or more entries.
 * The Lipschitz constant is computed analytically over the operating box |u_i| <= box.
 */
class ReferencePlusInputPolynomialCost : public EconomicCost {
public:
    ReferencePlusInputPolynomialCost(Matrix state_weight, std::vector<Vector> reference, int input_dim,
                                     InputPolynomial poly, double operating_box);

    int period() const override { return reference_.period(); }
    int stateDim() const override { return reference_.stateDim(); }
    int inputDim() const override { return reference_.inputDim(); }
    CostEval evaluate(TimeIndex k, const Vector& x, const Vector& u, const Parameter& p) const override;
    double lipschitz() const override { return rho_; }

    const InputPolynomial& polynomial() const { return poly_; }
    double operatingBox() const { return box_; }
    double inputTerm(const Vector& u, const Parameter& p) const;

private:
    QuadraticReferenceCost reference_;
    InputPolynomial poly_;
    double box_ = 0.0;
    double rho_ = 0.0;
};

/// Table-driven time-varying quadratic: entry k mod T gives (H_k, g_k, c_k). p is ignored.
class TimeVaryingQuadraticCost : public EconomicCost {
public:
    TimeVaryingQuadraticCost(std::vector<QuadraticForm> table, int state_dim, int input_dim);

    int period() const override { return static_cast<int>(table_.size()); }
    int stateDim() const override { return n_; }
    int inputDim() const override { return m_; }
    CostEval evaluate(TimeIndex k, const Vector& x, const Vector& u, const Parameter& p) const override;
    double lipschitz() const override { return rho_; }
    double lipschitzAt(TimeIndex k) const override;
    std::optional<QuadraticForm> quadraticForm(TimeIndex k, const Parameter& p) const override;

private:
    std::vector<QuadraticForm> table_;
    std::vector<double> rho_per_phase_;
    int n_ = 0;
    int m_ = 0;
    double rho_ = 0.0;
};

/// Wraps a cost and overrides its Lipschitz constant (auditing an undersized rho, analytic overrides).
class LipschitzOverride : public EconomicCost {
public:
    LipschitzOverride(CostPtr inner, double rho) : inner_(std::move(inner)), rho_(rho) {}

    int period() const override { return inner_->period(); }
    int stateDim() const override { return inner_->stateDim(); }
    int inputDim() const override { return inner_->inputDim(); }
    CostEval evaluate(TimeIndex k, const Vector& x, const Vector& u, const Parameter& p) const override {
        return inner_->evaluate(k, x, u, p);
    }
    double lipschitz() const override { return rho_; }
    std::optional<QuadraticForm> quadraticForm(TimeIndex k, const Parameter& p) const override {
        return inner_->quadraticForm(k, p);
    }

private:
    CostPtr inner_;
    double rho_;
};

/// Q, R of the tracking stage cost; both must be symmetric positive definite.
struct TrackingWeights {
    Matrix Q;
    Matrix R;

    TrackingWeights(Matrix state_weight, Matrix input_weight);
};

/**
 * @brief A state/input trajectory anchored at absolute time `anchor`.
 *
 * Predicted plans hold N+1 states and N inputs; artificial periodic
 * trajectories hold T states and T inputs (xa_T = xa_0 is implicit).
 */
struct Trajectory {
    TimeIndex anchor = 0;
    std::vector<Vector> states;
    std::vector<Vector> inputs;

    const Vector& initialState() const { return states.front(); }
    std::size_t length() const { return inputs.size(); }
};

/// Builds a periodic artificial trajectory by rolling out `inputs` from x0.
Trajectory makeArtificial(const PeriodicLtvSystem& system, TimeIndex anchor, const Vector& x0,
                          const std::vector<Vector>& inputs);

/// Builds a predicted plan (N+1 states) by rolling out `inputs` from x0.
Trajectory makePlan(const PeriodicLtvSystem& system, TimeIndex anchor, const Vector& x0,
                    const std::vector<Vector>& inputs);

/// max |x_{j+1} - f(x_j, u_j)| over the stored states, including the wrap x_T = x_0.
double periodicDefect(const PeriodicLtvSystem& system, const Trajectory& artificial);

/// Rotates an artificial trajectory by `shift` steps: element j of the result is element j+shift.
Trajectory rotate(const Trajectory& artificial, int shift);

/// Expresses a periodic trajectory with anchor `anchor` (same orbit, rotated phase).
Trajectory reanchor(const Trajectory& artificial, TimeIndex anchor);

struct PlanPair {
    Trajectory plan;        ///< z: x_0..x_N, u_0..u_{N-1}
    Trajectory artificial;  ///< za: xa_0..xa_{T-1}, ua_0..ua_{T-1}
};

double trackingStageCost(const TrackingWeights& weights, const Vector& v, const Vector& w);

/// S(z, za) with both trajectories re-rolled from their initial states and inputs.
double trackingCost(const TrackingWeights& weights, const PlanPair& pair, const PeriodicLtvSystem& system);

/// O_k(za) = sum_j l_{k+j}(xa_j, ua_j, p), with k the trajectory anchor.
double offsetCost(const EconomicCost& cost, const Trajectory& artificial, const Parameter& p);

/// O-hat_k(za; za_hat): first-order expansion about za_hat plus (rho/2)||za - za_hat||^2.
double approxOffsetCost(const EconomicCost& cost, const Trajectory& artificial, const Trajectory& expansion,
                        const Parameter& p, bool per_phase_rho = false);

/// O-hat - O; non-negative whenever rho is a valid Lipschitz constant.
double majorizationGap(const EconomicCost& cost, const Trajectory& artificial, const Trajectory& expansion,
                       const Parameter& p, bool per_phase_rho = false);

/// Box in (x, u) used for sampling-based checks.
struct SamplingBox {
    Vector lower;
    Vector upper;
};

struct RhoEstimate {
    double sampled_max = 0.0;  ///< max ratio seen
    double estimate = 0.0;     ///< sampled_max * safety_factor
};

/**
 * Samples pairs of points in the constraint set (rejection sampling inside `box`) and
 * returns the largest observed gradient-difference ratio. Throws std::invalid_argument
 * when no sample lands inside the constraint set.
 */
RhoEstimate estimateRho(const EconomicCost& cost, const PeriodicConstraintSet& constraints, const SamplingBox& box,
                        int samples, std::uint64_t seed, const Parameter& p = {}, double safety_factor = 1.1);

/// Max componentwise difference between the analytic gradient and central differences with step h.
double gradientCheck(const EconomicCost& cost, TimeIndex k, const Vector& x, const Vector& u, const Parameter& p,
                     double h = 1e-4);

}  // namespace pemc
