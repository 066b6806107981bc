#include "pemc/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace pemc {

namespace {

void requireSymmetric(const Matrix& M, const char* what) {
    if (M.rows() != M.cols()) throw std::invalid_argument(std::string(what) + " must be square");
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + M.cwiseAbs().maxCoeff()))
        throw std::invalid_argument(std::string(what) + " must be symmetric");
}

double spectralRadius(const Matrix& symmetric) {
    if (symmetric.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetric, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

Vector stacked(const Vector& x, const Vector& u) {
    Vector z(x.size() + u.size());
    z << x, u;
    return z;
}

}  // namespace

// ---------------------------------------------------------------------------

QuadraticReferenceCost::QuadraticReferenceCost(Matrix state_weight, std::vector<Vector> reference, int input_dim)
    : weight_(std::move(state_weight)), reference_(std::move(reference)), m_(input_dim) {
    requireSymmetric(weight_, "state weight");
    if (reference_.empty()) throw std::invalid_argument("QuadraticReferenceCost: empty reference");
    for (const auto& r : reference_)
        if (r.size() != weight_.rows()) throw std::invalid_argument("QuadraticReferenceCost: reference size mismatch");
    rho_ = 2.0 * spectralRadius(weight_);
}

Vector QuadraticReferenceCost::referenceAt(TimeIndex k, const Parameter& p) const {
    const Vector& r = reference_[static_cast<std::size_t>(phaseOf(k, period()))];
    return p.size() > 0 ? Vector(p(0) * r) : r;
}

CostEval QuadraticReferenceCost::evaluate(TimeIndex k, const Vector& x, const Vector& u, const Parameter& p) const {
    if (x.size() != stateDim() || u.size() != m_) throw std::invalid_argument("QuadraticReferenceCost: dimension mismatch");
    const Vector e = x - referenceAt(k, p);
    const Vector We = weight_ * e;
    CostEval out;
    out.value = e.dot(We);
    out.gradient = Vector::Zero(stateDim() + m_);
    out.gradient.head(stateDim()) = 2.0 * We;
    return out;
}

std::optional<QuadraticForm> QuadraticReferenceCost::quadraticForm(TimeIndex k, const Parameter& p) const {
    const int n = stateDim();
    const Vector r = referenceAt(k, p);
    QuadraticForm f;
    f.H = Matrix::Zero(n + m_, n + m_);
    f.H.topLeftCorner(n, n) = 2.0 * weight_;
    f.g = Vector::Zero(n + m_);
    f.g.head(n) = -2.0 * weight_ * r;
    f.c = r.dot(weight_ * r);
    return f;
}

// ---------------------------------------------------------------------------

double InputPolynomial::maxAbsSecond(double box) const {
    const double s_max = box * box;
    auto g = [&](double s) { return std::abs(2.0 * a - 12.0 * b * s + 30.0 * c * s * s); };
    double best = std::max(g(0.0), g(s_max));
    if (c != 0.0) {
        const double s_star = b / (5.0 * c);
        if (s_star > 0.0 && s_star < s_max) best = std::max(best, g(s_star));
    }
    return best;
}

ReferencePlusInputPolynomialCost::ReferencePlusInputPolynomialCost(Matrix state_weight, std::vector<Vector> reference,
                                                                   int input_dim, InputPolynomial poly,
                                                                   double operating_box)
    : reference_(std::move(state_weight), std::move(reference), input_dim), poly_(poly), box_(operating_box) {
    if (!(box_ > 0.0)) throw std::invalid_argument("operating box must be positive");
    // The Hessian is block diagonal: 2E on x, diag(poly'') on u.
    rho_ = std::max(reference_.lipschitz(), poly_.maxAbsSecond(box_));
}

double ReferencePlusInputPolynomialCost::inputTerm(const Vector& u, const Parameter& p) const {
    const double w = p.size() >= 2 ? p(1) : 1.0;
    double s = 0.0;
    for (int i = 0; i < u.size(); ++i) s += poly_.value(u(i));
    return w * s;
}

CostEval ReferencePlusInputPolynomialCost::evaluate(TimeIndex k, const Vector& x, const Vector& u,
                                                    const Parameter& p) const {
    CostEval out = reference_.evaluate(k, x, u, p);
    const double w = p.size() >= 2 ? p(1) : 1.0;
    const int n = stateDim();
    for (int i = 0; i < u.size(); ++i) {
        out.value += w * poly_.value(u(i));
        out.gradient(n + i) += w * poly_.derivative(u(i));
    }
    return out;
}

// ---------------------------------------------------------------------------

TimeVaryingQuadraticCost::TimeVaryingQuadraticCost(std::vector<QuadraticForm> table, int state_dim, int input_dim)
    : table_(std::move(table)), n_(state_dim), m_(input_dim) {
    if (table_.empty()) throw std::invalid_argument("TimeVaryingQuadraticCost: empty table");
    for (const auto& f : table_) {
        if (f.H.rows() != n_ + m_ || f.g.size() != n_ + m_)
            throw std::invalid_argument("TimeVaryingQuadraticCost: entry has wrong shape");
        requireSymmetric(f.H, "quadratic cost Hessian");
        rho_per_phase_.push_back(spectralRadius(f.H));
    }
    rho_ = *std::max_element(rho_per_phase_.begin(), rho_per_phase_.end());
}

CostEval TimeVaryingQuadraticCost::evaluate(TimeIndex k, const Vector& x, const Vector& u, const Parameter&) const {
    if (x.size() != n_ || u.size() != m_) throw std::invalid_argument("TimeVaryingQuadraticCost: dimension mismatch");
    const QuadraticForm& f = table_[static_cast<std::size_t>(phaseOf(k, period()))];
    const Vector z = stacked(x, u);
    const Vector Hz = f.H * z;
    return CostEval{0.5 * z.dot(Hz) + f.g.dot(z) + f.c, Hz + f.g};
}

double TimeVaryingQuadraticCost::lipschitzAt(TimeIndex k) const {
    return rho_per_phase_[static_cast<std::size_t>(phaseOf(k, period()))];
}

std::optional<QuadraticForm> TimeVaryingQuadraticCost::quadraticForm(TimeIndex k, const Parameter&) const {
    return table_[static_cast<std::size_t>(phaseOf(k, period()))];
}

// ---------------------------------------------------------------------------

TrackingWeights::TrackingWeights(Matrix state_weight, Matrix input_weight)
    : Q(std::move(state_weight)), R(std::move(input_weight)) {
    requireSymmetric(Q, "Q");
    requireSymmetric(R, "R");
    Eigen::SelfAdjointEigenSolver<Matrix> eq(Q, Eigen::EigenvaluesOnly), er(R, Eigen::EigenvaluesOnly);
    if (eq.eigenvalues().minCoeff() <= 0.0 || er.eigenvalues().minCoeff() <= 0.0)
        throw std::invalid_argument("tracking weights must be positive definite");
}

Trajectory makeArtificial(const PeriodicLtvSystem& system, TimeIndex anchor, const Vector& x0,
                          const std::vector<Vector>& inputs) {
    Trajectory t;
    t.anchor = anchor;
    t.inputs = inputs;
    t.states = system.rollout(anchor, x0, inputs);
    t.states.pop_back();
    return t;
}

Trajectory makePlan(const PeriodicLtvSystem& system, TimeIndex anchor, const Vector& x0,
                    const std::vector<Vector>& inputs) {
    Trajectory t;
    t.anchor = anchor;
    t.inputs = inputs;
    t.states = system.rollout(anchor, x0, inputs);
    return t;
}

double periodicDefect(const PeriodicLtvSystem& system, const Trajectory& za) {
    const std::size_t T = za.inputs.size();
    double defect = 0.0;
    for (std::size_t j = 0; j < T; ++j) {
        const Vector next = system.step(za.anchor + static_cast<TimeIndex>(j), za.states[j], za.inputs[j]);
        defect = std::max(defect, (next - za.states[(j + 1) % T]).cwiseAbs().maxCoeff());
    }
    return defect;
}

Trajectory rotate(const Trajectory& za, int shift) {
    const int T = static_cast<int>(za.inputs.size());
    Trajectory out;
    out.anchor = za.anchor + shift;
    out.states.reserve(static_cast<std::size_t>(T));
    out.inputs.reserve(static_cast<std::size_t>(T));
    for (int j = 0; j < T; ++j) {
        const auto src = static_cast<std::size_t>(phaseOf(j + shift, T));
        out.states.push_back(za.states[src]);
        out.inputs.push_back(za.inputs[src]);
    }
    return out;
}

Trajectory reanchor(const Trajectory& za, TimeIndex anchor) {
    const int T = static_cast<int>(za.inputs.size());
    Trajectory out = rotate(za, phaseOf(anchor - za.anchor, T));
    out.anchor = anchor;
    return out;
}

double trackingStageCost(const TrackingWeights& weights, const Vector& v, const Vector& w) {
    if (v.size() != weights.Q.rows() || w.size() != weights.R.rows())
        throw std::invalid_argument("trackingStageCost: dimension mismatch");
    return v.dot(weights.Q * v) + w.dot(weights.R * w);
}

double trackingCost(const TrackingWeights& weights, const PlanPair& pair, const PeriodicLtvSystem& system) {
    const std::size_t N = pair.plan.inputs.size();
    if (N > pair.artificial.inputs.size()) throw std::invalid_argument("trackingCost: horizon exceeds period");
    const auto x = system.rollout(pair.plan.anchor, pair.plan.initialState(), pair.plan.inputs);
    const auto xa = system.rollout(pair.artificial.anchor, pair.artificial.initialState(), pair.artificial.inputs);
    double s = 0.0;
    for (std::size_t i = 0; i < N; ++i)
        s += trackingStageCost(weights, x[i] - xa[i], pair.plan.inputs[i] - pair.artificial.inputs[i]);
    return s;
}

double offsetCost(const EconomicCost& cost, const Trajectory& za, const Parameter& p) {
    double s = 0.0;
    for (std::size_t j = 0; j < za.inputs.size(); ++j)
        s += cost.value(za.anchor + static_cast<TimeIndex>(j), za.states[j], za.inputs[j], p);
    return s;
}

double approxOffsetCost(const EconomicCost& cost, const Trajectory& za, const Trajectory& expansion,
                        const Parameter& p, bool per_phase_rho) {
    if (za.inputs.size() != expansion.inputs.size() || za.anchor != expansion.anchor)
        throw std::invalid_argument("approxOffsetCost: trajectories must share anchor and period");
    double s = 0.0;
    for (std::size_t j = 0; j < za.inputs.size(); ++j) {
        const TimeIndex k = za.anchor + static_cast<TimeIndex>(j);
        const CostEval ev = cost.evaluate(k, expansion.states[j], expansion.inputs[j], p);
        const Vector delta = stacked(za.states[j], za.inputs[j]) - stacked(expansion.states[j], expansion.inputs[j]);
        const double rho = per_phase_rho ? cost.lipschitzAt(k) : cost.lipschitz();
        s += ev.value + ev.gradient.dot(delta) + 0.5 * rho * delta.squaredNorm();
    }
    return s;
}

double majorizationGap(const EconomicCost& cost, const Trajectory& za, const Trajectory& expansion, const Parameter& p,
                       bool per_phase_rho) {
    return approxOffsetCost(cost, za, expansion, p, per_phase_rho) - offsetCost(cost, za, p);
}

RhoEstimate estimateRho(const EconomicCost& cost, const PeriodicConstraintSet& constraints, const SamplingBox& box,
                        int samples, std::uint64_t seed, const Parameter& p, double safety_factor) {
    const int n = cost.stateDim();
    const int m = cost.inputDim();
    if (box.lower.size() != n + m || box.upper.size() != n + m)
        throw std::invalid_argument("estimateRho: sampling box has wrong dimension");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> phase(0, constraints.period() - 1);

    auto draw = [&](TimeIndex k) -> std::optional<Vector> {
        for (int attempt = 0; attempt < 1000; ++attempt) {
            Vector z(n + m);
            for (int i = 0; i < n + m; ++i) z(i) = box.lower(i) + (box.upper(i) - box.lower(i)) * unit(rng);
            if (constraints.contains(k, z.head(n), z.tail(m), 0.0).inside) return z;
        }
        return std::nullopt;
    };

    RhoEstimate est;
    int accepted = 0;
    for (int s = 0; s < samples; ++s) {
        const TimeIndex k = phase(rng);
        const auto a = draw(k);
        const auto b = draw(k);
        if (!a || !b) continue;
        ++accepted;
        const Vector ga = cost.evaluate(k, a->head(n), a->tail(m), p).gradient;
        const Vector gb = cost.evaluate(k, b->head(n), b->tail(m), p).gradient;
        const double dist = (*a - *b).norm();
        if (dist > 0.0) est.sampled_max = std::max(est.sampled_max, (ga - gb).norm() / dist);
    }
    if (accepted == 0) throw std::invalid_argument("estimateRho: constraint set is empty within the sampling box");
    est.estimate = est.sampled_max * safety_factor;
    return est;
}

double gradientCheck(const EconomicCost& cost, TimeIndex k, const Vector& x, const Vector& u, const Parameter& p,
                     double h) {
    const int n = static_cast<int>(x.size());
    const Vector grad = cost.evaluate(k, x, u, p).gradient;
    Vector z = stacked(x, u);
    double err = 0.0;
    for (int i = 0; i < z.size(); ++i) {
        Vector zp = z, zm = z;
        zp(i) += h;
        zm(i) -= h;
        const double fp = cost.value(k, zp.head(n), zp.tail(z.size() - n), p);
        const double fm = cost.value(k, zm.head(n), zm.tail(z.size() - n), p);
        err = std::max(err, std::abs((fp - fm) / (2.0 * h) - grad(i)));
    }
    return err;
}

}  // namespace pemc
