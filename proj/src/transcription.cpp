#include "pemc/transcription.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "pemc/numfmt.hpp"

namespace pemc {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

void addDense(Triplets& t, int row0, int col0, const Matrix& M, double scale = 1.0) {
    for (int j = 0; j < M.cols(); ++j)
        for (int i = 0; i < M.rows(); ++i)
            if (M(i, j) != 0.0) t.emplace_back(row0 + i, col0 + j, scale * M(i, j));
}

void addIdentity(Triplets& t, int row0, int col0, int size, double scale) {
    for (int i = 0; i < size; ++i) t.emplace_back(row0 + i, col0 + i, scale);
}

qp::SparseMatrix fromTriplets(int rows, int cols, const Triplets& t) {
    qp::SparseMatrix M(rows, cols);
    M.setFromTriplets(t.begin(), t.end());
    M.makeCompressed();
    return M;
}

// Rows x_{i+1} - A x_i - B u_i = 0 written as (next) - A (state) - B (input).
void addDynamicsRow(Triplets& t, int row, const PeriodicLtvSystem& sys, TimeIndex k, int next, int state,
                    int input) {
    addIdentity(t, row, next, sys.stateDim(), 1.0);
    addDense(t, row, state, sys.A(k), -1.0);
    addDense(t, row, input, sys.B(k), -1.0);
}

struct Builder {
    VariableLayout layout;
    Triplets P, Aeq, Ain;
    Vector q;
    std::vector<double> beq, bin;
    double offset = 0.0;

    explicit Builder(const VariableLayout& l) : layout(l), q(Vector::Zero(l.dim())) {}

    int eqRows() const { return static_cast<int>(beq.size()); }
    int inRows() const { return static_cast<int>(bin.size()); }

    void addStageModel(int j, const QuadraticForm& f) {
        const int n = layout.n;
        const int m = layout.m;
        const int xa = layout.xa(j);
        const int ua = layout.ua(j);
        addDense(P, xa, xa, f.H.topLeftCorner(n, n));
        addDense(P, xa, ua, f.H.topRightCorner(n, m));
        addDense(P, ua, xa, f.H.bottomLeftCorner(m, n));
        addDense(P, ua, ua, f.H.bottomRightCorner(m, m));
        q.segment(xa, n) += f.g.head(n);
        q.segment(ua, m) += f.g.tail(m);
        offset += f.c;
    }

    void addTracking(const TrackingWeights& w) {
        for (int i = 0; i < layout.N; ++i) {
            addDense(P, layout.x(i), layout.x(i), w.Q, 2.0);
            addDense(P, layout.xa(i), layout.xa(i), w.Q, 2.0);
            addDense(P, layout.x(i), layout.xa(i), w.Q, -2.0);
            addDense(P, layout.xa(i), layout.x(i), w.Q, -2.0);
            addDense(P, layout.u(i), layout.u(i), w.R, 2.0);
            addDense(P, layout.ua(i), layout.ua(i), w.R, 2.0);
            addDense(P, layout.u(i), layout.ua(i), w.R, -2.0);
            addDense(P, layout.ua(i), layout.u(i), w.R, -2.0);
        }
    }

    void addArtificialDynamics(const PeriodicLtvSystem& sys, TimeIndex k) {
        const int n = layout.n;
        for (int j = 0; j + 1 < layout.T; ++j) {
            addDynamicsRow(Aeq, eqRows(), sys, k + j, layout.xa(j + 1), layout.xa(j), layout.ua(j));
            beq.insert(beq.end(), static_cast<std::size_t>(n), 0.0);
        }
    }

    void addWrap(const PeriodicLtvSystem& sys, TimeIndex k) {
        const int T = layout.T;
        addDynamicsRow(Aeq, eqRows(), sys, k + T - 1, layout.xa(0), layout.xa(T - 1), layout.ua(T - 1));
        beq.insert(beq.end(), static_cast<std::size_t>(layout.n), 0.0);
    }

    void addMembership(const PeriodicConstraintSet& cons, TimeIndex k, int state, int input) {
        const Polytope& poly = cons.at(k);
        const int n = layout.n;
        const int m = layout.m;
        const int row = inRows();
        addDense(Ain, row, state, poly.G.leftCols(n));
        addDense(Ain, row, input, poly.G.rightCols(m));
        for (int r = 0; r < poly.h.size(); ++r) bin.push_back(poly.h(r));
    }

    TranscribedProblem finish(TimeIndex anchor) {
        TranscribedProblem out;
        out.layout = layout;
        out.anchor = anchor;
        out.constant_offset = offset;
        const int d = layout.dim();
        out.qp.P = fromTriplets(d, d, P);
        out.qp.q = q;
        out.qp.Aeq = fromTriplets(eqRows(), d, Aeq);
        out.qp.beq = Eigen::Map<const Vector>(beq.data(), eqRows());
        out.qp.Ain = fromTriplets(inRows(), d, Ain);
        out.qp.bin = Eigen::Map<const Vector>(bin.data(), inRows());
        out.qp.layout = layout.blocks();
        return out;
    }
};

void checkStageModels(const StageModels& models, int n, int m, int T) {
    if (static_cast<int>(models.size()) != T) throw std::invalid_argument("stage models must cover one period");
    for (const auto& f : models)
        if (f.H.rows() != n + m || f.H.cols() != n + m || f.g.size() != n + m)
            throw std::invalid_argument("stage model has wrong dimension");
}

}  // namespace

std::vector<qp::VariableBlock> VariableLayout::blocks() const {
    std::vector<qp::VariableBlock> out;
    if (has_plan) {
        out.push_back({"x", x(0), planStates()});
        out.push_back({"u", u(0), planInputs()});
    }
    out.push_back({"xa", xa(0), n * T});
    out.push_back({"ua", ua(0), m * T});
    return out;
}

void MpcSetup::validate() const {
    if (system.period() != constraints.period())
        throw std::invalid_argument("system and constraint periods differ");
    if (system.stateDim() != constraints.stateDim() || system.inputDim() != constraints.inputDim())
        throw std::invalid_argument("system and constraint dimensions differ");
    if (weights.Q.rows() != system.stateDim() || weights.R.rows() != system.inputDim())
        throw std::invalid_argument("tracking weights do not match system dimensions");
    if (horizon < 1 || horizon > system.period()) throw std::invalid_argument("horizon must satisfy 1 <= N <= T");
}

PlanPair TranscribedProblem::extract(const Vector& w) const {
    if (w.size() != layout.dim()) throw std::invalid_argument("extract: wrong decision vector size");
    PlanPair out;
    if (layout.has_plan) {
        out.plan.anchor = anchor;
        for (int i = 0; i <= layout.N; ++i) out.plan.states.push_back(w.segment(layout.x(i), layout.n));
        for (int i = 0; i < layout.N; ++i) out.plan.inputs.push_back(w.segment(layout.u(i), layout.m));
    }
    out.artificial = extractArtificial(w);
    return out;
}

Trajectory TranscribedProblem::extractArtificial(const Vector& w) const {
    Trajectory a;
    a.anchor = anchor;
    for (int j = 0; j < layout.T; ++j) {
        a.states.push_back(w.segment(layout.xa(j), layout.n));
        a.inputs.push_back(w.segment(layout.ua(j), layout.m));
    }
    return a;
}

Vector TranscribedProblem::assemble(const PlanPair& pair) const {
    Vector w = assembleArtificial(pair.artificial);
    if (layout.has_plan) {
        if (static_cast<int>(pair.plan.states.size()) != layout.N + 1 ||
            static_cast<int>(pair.plan.inputs.size()) != layout.N)
            throw std::invalid_argument("assemble: plan has wrong length");
        for (int i = 0; i <= layout.N; ++i) w.segment(layout.x(i), layout.n) = pair.plan.states[i];
        for (int i = 0; i < layout.N; ++i) w.segment(layout.u(i), layout.m) = pair.plan.inputs[i];
    }
    return w;
}

Vector TranscribedProblem::assembleArtificial(const Trajectory& artificial) const {
    if (static_cast<int>(artificial.states.size()) != layout.T || static_cast<int>(artificial.inputs.size()) != layout.T)
        throw std::invalid_argument("assemble: artificial trajectory has wrong length");
    Vector w = Vector::Zero(layout.dim());
    for (int j = 0; j < layout.T; ++j) {
        w.segment(layout.xa(j), layout.n) = artificial.states[j];
        w.segment(layout.ua(j), layout.m) = artificial.inputs[j];
    }
    return w;
}

double TranscribedProblem::constraintViolation(const Vector& w) const {
    double v = 0.0;
    if (qp.numEq() > 0) v = std::max(v, (qp.Aeq * w - qp.beq).cwiseAbs().maxCoeff());
    if (qp.numIneq() > 0) v = std::max(v, (qp.Ain * w - qp.bin).maxCoeff());
    return v;
}

StageModels majorizerModels(const EconomicCost& cost, const Trajectory& expansion, const Parameter& p,
                            bool per_phase_rho) {
    const int n = cost.stateDim();
    const int m = cost.inputDim();
    StageModels out;
    out.reserve(expansion.inputs.size());
    for (std::size_t j = 0; j < expansion.inputs.size(); ++j) {
        const TimeIndex k = expansion.anchor + static_cast<TimeIndex>(j);
        Vector z(n + m);
        z << expansion.states[j], expansion.inputs[j];
        const CostEval ev = cost.evaluate(k, expansion.states[j], expansion.inputs[j], p);
        const double rho = per_phase_rho ? cost.lipschitzAt(k) : cost.lipschitz();
        QuadraticForm f;
        f.H = rho * Matrix::Identity(n + m, n + m);
        f.g = ev.gradient - rho * z;
        f.c = ev.value - ev.gradient.dot(z) + 0.5 * rho * z.squaredNorm();
        out.push_back(std::move(f));
    }
    return out;
}

StageModels exactModels(const EconomicCost& cost, TimeIndex k, int period, const Parameter& p) {
    StageModels out;
    for (int j = 0; j < period; ++j) {
        auto f = cost.quadraticForm(k + j, p);
        if (!f) throw std::invalid_argument("exactModels: cost has no quadratic representation");
        out.push_back(std::move(*f));
    }
    return out;
}

StageModels trackingModels(const TrackingWeights& weights, const Trajectory* reference, int n, int m, int period) {
    Matrix W = Matrix::Zero(n + m, n + m);
    W.topLeftCorner(n, n) = weights.Q;
    W.bottomRightCorner(m, m) = weights.R;
    StageModels out;
    for (int j = 0; j < period; ++j) {
        QuadraticForm f;
        f.H = 2.0 * W;
        f.g = Vector::Zero(n + m);
        if (reference) {
            Vector r(n + m);
            r << reference->states[j], reference->inputs[j];
            f.g = -2.0 * W * r;
            f.c = r.dot(W * r);
        }
        out.push_back(std::move(f));
    }
    return out;
}

TranscribedProblem buildWithStageModels(const MpcSetup& setup, TimeIndex k, const Vector& x,
                                        const StageModels& models) {
    setup.validate();
    const PeriodicLtvSystem& sys = setup.system;
    const int n = sys.stateDim();
    const int m = sys.inputDim();
    const int N = setup.horizon;
    const int T = sys.period();
    if (x.size() != n) throw std::invalid_argument("measured state has wrong dimension");
    checkStageModels(models, n, m, T);

    Builder b(VariableLayout{n, m, N, T, true});
    const VariableLayout& L = b.layout;
    b.addTracking(setup.weights);
    for (int j = 0; j < T; ++j) b.addStageModel(j, models[static_cast<std::size_t>(j)]);

    for (int i = 0; i < N; ++i) {
        addDynamicsRow(b.Aeq, b.eqRows(), sys, k + i, L.x(i + 1), L.x(i), L.u(i));
        b.beq.insert(b.beq.end(), static_cast<std::size_t>(n), 0.0);
    }
    b.addArtificialDynamics(sys, k);
    addIdentity(b.Aeq, b.eqRows(), L.x(0), n, 1.0);
    for (int i = 0; i < n; ++i) b.beq.push_back(x(i));
    b.addWrap(sys, k);
    // x_N = xa_N, with xa_T = xa_0 when N = T
    addIdentity(b.Aeq, b.eqRows(), L.x(N), n, 1.0);
    addIdentity(b.Aeq, b.eqRows(), L.xa(N % T), n, -1.0);
    b.beq.insert(b.beq.end(), static_cast<std::size_t>(n), 0.0);

    for (int i = 0; i < N; ++i) b.addMembership(setup.constraints, k + i, L.x(i), L.u(i));
    for (int j = 0; j < T; ++j) b.addMembership(setup.constraints, k + j, L.xa(j), L.ua(j));
    return b.finish(k);
}

TranscribedProblem buildSingleLayerQp(const MpcSetup& setup, const EconomicCost& cost, TimeIndex k, const Vector& x,
                                      const Trajectory& za_hat, const Parameter& p, bool per_phase_rho) {
    if (static_cast<int>(za_hat.inputs.size()) != setup.period() ||
        static_cast<int>(za_hat.states.size()) != setup.period())
        throw std::invalid_argument("linearization trajectory must have period T");
    if (cost.stateDim() != setup.system.stateDim() || cost.inputDim() != setup.system.inputDim())
        throw std::invalid_argument("cost dimensions do not match the system");
    return buildWithStageModels(setup, k, x, majorizerModels(cost, reanchor(za_hat, k), p, per_phase_rho));
}

TranscribedProblem buildInitializerQp(const MpcSetup& setup, TimeIndex k, const Vector& x) {
    return buildWithStageModels(
        setup, k, x,
        trackingModels(setup.weights, nullptr, setup.system.stateDim(), setup.system.inputDim(), setup.period()));
}

TranscribedProblem buildTrackingQp(const MpcSetup& setup, TimeIndex k, const Vector& x, const Trajectory& reference) {
    if (static_cast<int>(reference.inputs.size()) != setup.period())
        throw std::invalid_argument("reference must have period T");
    const Trajectory r = reanchor(reference, k);
    return buildWithStageModels(
        setup, k, x, trackingModels(setup.weights, &r, setup.system.stateDim(), setup.system.inputDim(), setup.period()));
}

TranscribedProblem buildPeriodicQp(const PeriodicLtvSystem& system, const PeriodicConstraintSet& constraints,
                                   TimeIndex k, const StageModels& models) {
    if (system.period() != constraints.period()) throw std::invalid_argument("system and constraint periods differ");
    const int n = system.stateDim();
    const int m = system.inputDim();
    const int T = system.period();
    checkStageModels(models, n, m, T);
    Builder b(VariableLayout{n, m, 0, T, false});
    for (int j = 0; j < T; ++j) b.addStageModel(j, models[static_cast<std::size_t>(j)]);
    b.addArtificialDynamics(system, k);
    b.addWrap(system, k);
    for (int j = 0; j < T; ++j) b.addMembership(constraints, k + j, b.layout.xa(j), b.layout.ua(j));
    return b.finish(k);
}

void writeTranscribed(std::ostream& os, const TranscribedProblem& problem) {
    qp::writeQp(os, problem.qp);
    const VariableLayout& L = problem.layout;
    os << "transcription " << L.n << ' ' << L.m << ' ' << L.N << ' ' << L.T << ' ' << (L.has_plan ? 1 : 0) << ' '
       << problem.anchor << ' ' << formatDouble(problem.constant_offset) << '\n';
}

TranscribedProblem readTranscribed(std::istream& is) {
    TranscribedProblem out;
    out.qp = qp::readQp(is);
    std::string tag, offset;
    int has_plan = 0;
    VariableLayout& L = out.layout;
    if (!(is >> tag) || tag != "transcription" || !(is >> L.n >> L.m >> L.N >> L.T >> has_plan >> out.anchor >> offset))
        throw std::runtime_error("readTranscribed: missing transcription trailer");
    L.has_plan = has_plan != 0;
    out.constant_offset = parseDouble(offset);
    if (L.dim() != out.qp.dim()) throw std::runtime_error("readTranscribed: layout does not match the QP");
    return out;
}

}  // namespace pemc
