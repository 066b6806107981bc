#include "pemc/controller.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pemc/drto.hpp"

namespace pemc {

namespace {

bool sameParameter(const Parameter& a, const Parameter& b) {
    return a.size() == b.size() && (a.size() == 0 || a == b);
}

void requireFeasible(const MpcSetup& setup, const Trajectory& za, double tol) {
    const double defect = periodicDefect(setup.system, za);
    if (defect > tol) {
        std::ostringstream msg;
        msg << "linearization trajectory is not periodic (defect " << defect << ")";
        throw std::invalid_argument(msg.str());
    }
    for (std::size_t j = 0; j < za.inputs.size(); ++j) {
        const auto mem = setup.constraints.contains(za.anchor + static_cast<TimeIndex>(j), za.states[j], za.inputs[j],
                                                    tol);
        if (!mem.inside) {
            std::ostringstream msg;
            msg << "linearization trajectory violates the constraints at phase " << j << " by "
                << mem.worst_violation;
            throw std::invalid_argument(msg.str());
        }
    }
}

// Row offsets of each stage block inside the inequality rows for a transcription anchored at k.
std::vector<int> stageRowOffsets(const PeriodicConstraintSet& cons, TimeIndex k, int stages, int start) {
    std::vector<int> offsets;
    int row = start;
    for (int i = 0; i <= stages; ++i) {
        offsets.push_back(row);
        if (i < stages) row += static_cast<int>(cons.at(k + i).h.size());
    }
    return offsets;
}

}  // namespace

SingleLayerController SingleLayerController::initialize(MpcSetup setup, CostPtr cost, ControllerConfig config,
                                                        TimeIndex k0, const Vector& x0) {
    setup.validate();
    const auto tp = buildInitializerQp(setup, k0, x0);
    qp::QpSolver solver(config.solver);
    const auto sol = solver.solve(tp.qp);
    if (!sol.optimal()) {
        std::ostringstream msg;
        msg << "initializer QP returned status " << qp::toString(sol.status);
        if (sol.status == qp::QpStatus::PrimalInfeasible) msg << " (infeasibility certificate available)";
        throw ControllerError(msg.str(), sol.status, k0);
    }
    Trajectory za = tp.extractArtificial(sol.w);
    return SingleLayerController(std::move(setup), std::move(cost), std::move(config), k0, std::move(za));
}

SingleLayerController::SingleLayerController(MpcSetup setup, CostPtr cost, ControllerConfig config, TimeIndex k0,
                                             Trajectory linearization)
    : setup_(std::move(setup)), cost_(std::move(cost)), config_(std::move(config)), k_(k0) {
    setup_.validate();
    config_.solver.validate();
    if (cost_ && (cost_->stateDim() != setup_.system.stateDim() || cost_->inputDim() != setup_.system.inputDim()))
        throw std::invalid_argument("controller: cost dimensions do not match the system");
    if (static_cast<int>(linearization.inputs.size()) != setup_.period())
        throw std::invalid_argument("controller: linearization trajectory must have period T");
    za_hat_ = reanchor(linearization, k0);
    requireFeasible(setup_, za_hat_, config_.feasibility_tolerance);
}

TranscribedProblem SingleLayerController::nextProblem(const Vector& x, const Parameter& p) const {
    if (!cost_) throw std::invalid_argument("controller: no economic cost configured");
    return buildSingleLayerQp(setup_, *cost_, k_, x, za_hat_, p, config_.per_phase_rho);
}

StepResult SingleLayerController::step(const Vector& x, const Parameter& p) {
    return finishStep(nextProblem(x, p), x, p);
}

StepResult SingleLayerController::trackingStep(const Vector& x, const Trajectory& reference) {
    return finishStep(buildTrackingQp(setup_, k_, x, reference), x, Parameter{});
}

StepResult SingleLayerController::finishStep(const TranscribedProblem& tp, const Vector& x, const Parameter& p) {
    qp::SolverConfig cfg = config_.solver;
    if (config_.warm_start && warm_) cfg.warm_start = warm_;
    qp::QpSolver solver(cfg);
    qp::QpSolution sol = solver.solve(tp.qp);
    if (!sol.optimal()) {
        std::ostringstream msg;
        msg << "QP at k=" << k_ << " returned status " << qp::toString(sol.status) << " (primal residual "
            << sol.primal_residual << ", dual residual " << sol.dual_residual << ")";
        throw ControllerError(msg.str(), sol.status, k_);
    }

    StepResult res;
    res.plan = tp.extract(sol.w);
    res.u_applied = res.plan.plan.inputs.front();
    res.v_hat_opt = tp.fullObjective(sol.w);

    StepRecord& rec = res.record;
    rec.k = k_;
    rec.x = x;
    rec.u = res.u_applied;
    rec.p = p;
    rec.v_hat = res.v_hat_opt;
    rec.s_value = trackingCostDirect(setup_.weights, res.plan);
    rec.first_stage = trackingStageCost(setup_.weights, x - res.plan.artificial.states.front(),
                                        res.u_applied - res.plan.artificial.inputs.front());
    rec.status = sol.status;
    rec.iterations = sol.iterations;
    rec.solve_time = sol.solve_time.count();
    if (!history_.empty() && history_.back().k + 1 == k_ && sameParameter(history_.back().p, p))
        res.delta_v = res.v_hat_opt - history_.back().v_hat;
    history_.push_back(rec);

    const Vector x_pred = res.plan.plan.states[1];
    warm_ = shiftedWarmStart(tp, sol, setup_, x_pred);
    za_hat_ = rotate(res.plan.artificial, 1);
    ++k_;
    res.solution = std::move(sol);
    return res;
}

PlanPair shiftedCandidate(const MpcSetup& setup, const PlanPair& optimum, const Vector& x_next) {
    const int N = setup.horizon;
    const int T = setup.period();
    const TimeIndex k1 = optimum.plan.anchor + 1;
    PlanPair out;
    std::vector<Vector> inputs(optimum.plan.inputs.begin() + 1, optimum.plan.inputs.end());
    inputs.push_back(optimum.artificial.inputs[static_cast<std::size_t>(N % T)]);
    out.plan = makePlan(setup.system, k1, x_next, inputs);
    out.artificial = rotate(optimum.artificial, 1);
    return out;
}

qp::WarmStart shiftedWarmStart(const TranscribedProblem& problem, const qp::QpSolution& solution,
                               const MpcSetup& setup, const Vector& x_next) {
    const VariableLayout& L = problem.layout;
    const int n = L.n;
    const int N = L.N;
    const int T = L.T;
    qp::WarmStart ws;
    ws.w = problem.assemble(shiftedCandidate(setup, problem.extract(solution.w), x_next));

    // Equality rows: [real dynamics (N) | artificial dynamics (T-1) | initial | wrap | terminal], n rows each.
    const Vector& y = solution.y_eq;
    Vector yn = Vector::Zero(y.size());
    for (int i = 0; i + 1 < N; ++i) yn.segment(n * i, n) = y.segment(n * (i + 1), n);
    auto artRow = [&](int j) { return j + 1 < T ? n * (N + j) : n * (N + T); };
    for (int j = 0; j < T; ++j) yn.segment(artRow(j), n) = y.segment(artRow((j + 1) % T), n);
    yn.segment(n * (N + T - 1), n) = y.segment(n * (N + T - 1), n);
    yn.segment(n * (N + T + 1), n) = y.segment(n * (N + T + 1), n);
    ws.y_eq = yn;

    // Inequality rows: real stages then artificial stages; shift blocks whose row counts agree.
    const TimeIndex k = problem.anchor;
    const auto& cons = setup.constraints;
    const auto old_real = stageRowOffsets(cons, k, N, 0);
    const auto new_real = stageRowOffsets(cons, k + 1, N, 0);
    const auto old_art = stageRowOffsets(cons, k, T, old_real.back());
    const auto new_art = stageRowOffsets(cons, k + 1, T, new_real.back());
    Vector ln = Vector::Zero(solution.y_in.size());
    auto copyBlock = [&](int dst, int dst_len, int src, int src_len) {
        if (dst_len == src_len) ln.segment(dst, dst_len) = solution.y_in.segment(src, src_len);
    };
    for (int i = 0; i + 1 < N; ++i)
        copyBlock(new_real[i], new_real[i + 1] - new_real[i], old_real[i + 1], old_real[i + 2] - old_real[i + 1]);
    for (int j = 0; j < T; ++j) {
        const int s = (j + 1) % T;
        copyBlock(new_art[j], new_art[j + 1] - new_art[j], old_art[s], old_art[s + 1] - old_art[s]);
    }
    ws.y_in = ln;
    return ws;
}

LyapunovReport checkLyapunovDecrease(const std::vector<StepRecord>& history, const std::vector<TimeIndex>& p_changed_at,
                                     double rel_tol) {
    LyapunovReport rep;
    bool in_window = false;
    for (std::size_t i = 0; i + 1 < history.size(); ++i) {
        const StepRecord& a = history[i];
        const StepRecord& b = history[i + 1];
        const bool contiguous = b.k == a.k + 1;
        const bool changed = !sameParameter(a.p, b.p) ||
                             std::find(p_changed_at.begin(), p_changed_at.end(), b.k) != p_changed_at.end();
        if (!contiguous || changed) {
            in_window = false;
            continue;
        }
        if (!in_window) {
            ++rep.windows;
            in_window = true;
        }
        ++rep.checked;
        const double delta = b.v_hat - a.v_hat;
        const double bound = -a.first_stage + rel_tol * (1.0 + std::abs(a.v_hat));
        if (delta > bound) rep.violations.push_back({a.k, delta, bound});
    }
    return rep;
}

}  // namespace pemc
