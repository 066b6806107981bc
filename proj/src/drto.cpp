#include "pemc/drto.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "pemc/numfmt.hpp"

namespace pemc {

namespace {

double trajectoryStep(const Trajectory& a, const Trajectory& b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.inputs.size(); ++j) {
        s = std::max(s, (a.states[j] - b.states[j]).cwiseAbs().maxCoeff());
        s = std::max(s, (a.inputs[j] - b.inputs[j]).cwiseAbs().maxCoeff());
    }
    return s;
}

double pairStep(const PlanPair& a, const PlanPair& b) {
    double s = trajectoryStep(a.artificial, b.artificial);
    for (std::size_t i = 0; i < a.plan.states.size(); ++i)
        s = std::max(s, (a.plan.states[i] - b.plan.states[i]).cwiseAbs().maxCoeff());
    for (std::size_t i = 0; i < a.plan.inputs.size(); ++i)
        s = std::max(s, (a.plan.inputs[i] - b.plan.inputs[i]).cwiseAbs().maxCoeff());
    return s;
}

qp::QpSolution solveChecked(qp::QpSolver& solver, const TranscribedProblem& tp, const char* what) {
    qp::QpSolution sol = solver.solve(tp.qp);
    if (!sol.optimal())
        throw DrtoError(std::string(what) + ": QP returned status " + qp::toString(sol.status), sol.status);
    return sol;
}

void setWarmStart(qp::QpSolver& solver, const qp::QpSolution& sol) {
    solver.config().warm_start = qp::WarmStart{sol.w, sol.y_eq, sol.y_in};
}

bool stalled(double previous, double current, double step, const DrtoConfig& c) {
    return previous - current < c.tol_obj * (1.0 + std::abs(current)) && step < c.tol_step;
}

void checkDescent(double previous, double current, const DrtoConfig& c, int iteration) {
    if (current > previous + c.descent_tolerance * (1.0 + std::abs(previous))) {
        std::ostringstream msg;
        msg << "MM objective increased at iteration " << iteration << " (" << previous << " -> " << current << ")";
        throw DrtoError(msg.str(), qp::QpStatus::NumericalFailure);
    }
}

}  // namespace

void DrtoConfig::validate() const {
    solver.validate();
    if (!(tol_obj > 0.0) || !(tol_step > 0.0) || !(descent_tolerance >= 0.0))
        throw std::invalid_argument("DrtoConfig: tolerances must be positive");
    if (max_iterations < 1) throw std::invalid_argument("DrtoConfig: max_iterations must be at least 1");
}

DrtoSolution solveDrto(const PeriodicLtvSystem& system, const PeriodicConstraintSet& constraints,
                       const EconomicCost& cost, const TrackingWeights& weights, TimeIndex k, const Parameter& p,
                       const DrtoConfig& config) {
    config.validate();
    if (cost.stateDim() != system.stateDim() || cost.inputDim() != system.inputDim())
        throw std::invalid_argument("solveDrto: cost dimensions do not match the system");
    const int n = system.stateDim();
    const int m = system.inputDim();
    const int T = system.period();

    qp::QpSolver solver(config.solver);
    const auto init = buildPeriodicQp(system, constraints, k, trackingModels(weights, nullptr, n, m, T));
    qp::QpSolution sol = solveChecked(solver, init, "periodic initializer");

    DrtoSolution out;
    out.za_star = init.extractArtificial(sol.w);
    out.objective = offsetCost(cost, out.za_star, p);
    out.history.push_back(out.objective);

    for (int it = 1; it <= config.max_iterations; ++it) {
        const auto tp = buildPeriodicQp(system, constraints, k,
                                        majorizerModels(cost, out.za_star, p, config.per_phase_rho));
        if (it > 1) setWarmStart(solver, sol);
        sol = solveChecked(solver, tp, "periodic majorized subproblem");
        Trajectory next = tp.extractArtificial(sol.w);
        const double obj = offsetCost(cost, next, p);
        checkDescent(out.objective, obj, config, it);
        out.final_step = trajectoryStep(next, out.za_star);
        const double previous = out.objective;
        out.za_star = std::move(next);
        out.objective = obj;
        out.history.push_back(obj);
        out.iterations = it;
        if (stalled(previous, obj, out.final_step, config)) {
            out.converged = true;
            break;
        }
    }
    return out;
}

DrtoSolution solveDrtoOneShot(const PeriodicLtvSystem& system, const PeriodicConstraintSet& constraints,
                              const EconomicCost& cost, TimeIndex k, const Parameter& p,
                              const qp::SolverConfig& solver) {
    qp::QpSolver s(solver);
    const auto tp = buildPeriodicQp(system, constraints, k, exactModels(cost, k, system.period(), p));
    const auto sol = solveChecked(s, tp, "periodic one-shot problem");
    DrtoSolution out;
    out.za_star = tp.extractArtificial(sol.w);
    out.objective = offsetCost(cost, out.za_star, p);
    out.history.push_back(out.objective);
    out.iterations = 1;
    out.converged = true;
    return out;
}

double trackingCostDirect(const TrackingWeights& weights, const PlanPair& pair) {
    double s = 0.0;
    for (std::size_t i = 0; i < pair.plan.inputs.size(); ++i)
        s += trackingStageCost(weights, pair.plan.states[i] - pair.artificial.states[i],
                               pair.plan.inputs[i] - pair.artificial.inputs[i]);
    return s;
}

ExactSingleLayerSolution solveExactSingleLayer(const MpcSetup& setup, const EconomicCost& cost, TimeIndex k,
                                               const Vector& x, const Trajectory& za_hat, const Parameter& p,
                                               const DrtoConfig& config) {
    config.validate();
    qp::QpSolver solver(config.solver);
    ExactSingleLayerSolution out;
    Trajectory expansion = reanchor(za_hat, k);
    double previous = 0.0;
    qp::QpSolution sol;
    for (int it = 1; it <= config.max_iterations; ++it) {
        const auto tp = buildSingleLayerQp(setup, cost, k, x, expansion, p, config.per_phase_rho);
        if (it > 1) setWarmStart(solver, sol);
        sol = solveChecked(solver, tp, "single-layer majorized subproblem");
        PlanPair next = tp.extract(sol.w);
        const double obj = trackingCostDirect(setup.weights, next) + offsetCost(cost, next.artificial, p);
        out.iterations = it;
        if (it == 1) {
            out.first_iterate = next;
        } else {
            checkDescent(previous, obj, config, it);
        }
        const double step = it == 1 ? std::numeric_limits<double>::infinity() : pairStep(next, out.pair);
        out.history.push_back(obj);
        out.pair = std::move(next);
        out.objective = obj;
        expansion = out.pair.artificial;
        if (it > 1 && stalled(previous, obj, step, config)) {
            out.converged = true;
            break;
        }
        previous = obj;
    }
    return out;
}

ExactSingleLayerSolution solveExactSingleLayerOneShot(const MpcSetup& setup, const EconomicCost& cost, TimeIndex k,
                                                      const Vector& x, const Parameter& p,
                                                      const qp::SolverConfig& solver) {
    qp::QpSolver s(solver);
    const auto tp = buildWithStageModels(setup, k, x, exactModels(cost, k, setup.period(), p));
    const auto sol = solveChecked(s, tp, "single-layer one-shot problem");
    ExactSingleLayerSolution out;
    out.pair = tp.extract(sol.w);
    out.first_iterate = out.pair;
    out.objective = trackingCostDirect(setup.weights, out.pair) + offsetCost(cost, out.pair.artificial, p);
    out.history.push_back(out.objective);
    out.iterations = 1;
    out.converged = true;
    return out;
}

void writeTrajectoryCsv(std::ostream& os, const Trajectory& t) {
    const int n = t.states.empty() ? 0 : static_cast<int>(t.states.front().size());
    const int m = t.inputs.empty() ? 0 : static_cast<int>(t.inputs.front().size());
    os << "j";
    for (int i = 0; i < n; ++i) os << ",xa" << i;
    for (int i = 0; i < m; ++i) os << ",ua" << i;
    os << '\n';
    for (std::size_t j = 0; j < t.inputs.size(); ++j) {
        os << j;
        for (int i = 0; i < n; ++i) os << ',' << formatDouble(t.states[j](i));
        for (int i = 0; i < m; ++i) os << ',' << formatDouble(t.inputs[j](i));
        os << '\n';
    }
}

Trajectory readTrajectoryCsv(std::istream& is, int state_dim, int input_dim) {
    Trajectory t;
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("trajectory CSV is empty");
    int row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (static_cast<int>(cells.size()) != 1 + state_dim + input_dim)
            throw std::runtime_error("trajectory CSV row " + std::to_string(row) + " has " +
                                     std::to_string(cells.size()) + " columns");
        Vector x(state_dim), u(input_dim);
        for (int i = 0; i < state_dim; ++i) x(i) = parseDouble(cells[static_cast<std::size_t>(1 + i)]);
        for (int i = 0; i < input_dim; ++i) u(i) = parseDouble(cells[static_cast<std::size_t>(1 + state_dim + i)]);
        t.states.push_back(x);
        t.inputs.push_back(u);
    }
    if (t.inputs.empty()) throw std::runtime_error("trajectory CSV has no rows");
    return t;
}

}  // namespace pemc
