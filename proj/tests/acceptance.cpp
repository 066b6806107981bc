// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any criterion fails.
// Set PEMC_ACCEPTANCE_OUT to keep the benchmark logs (default: a directory under the system temp dir).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pemc/ballplate.hpp"
#include "pemc/controller.hpp"
#include "pemc/drto.hpp"
#include "pemc/experiments.hpp"
#include "pemc/qp.hpp"
#include "pemc/sim.hpp"
#include "test_support.hpp"

using namespace pemc;
namespace bp = pemc::ballplate;
namespace fs = std::filesystem;
using pemc::testing::randomPeriodicProblem;
using pemc::testing::trajectoryDistance;

namespace {

// Tolerances, pinned.
constexpr int kMajorizationSamples = 10000;
constexpr double kMajorizationTol = 1e-9;
constexpr int kEquivalenceSystems = 20;
constexpr double kEquivalenceTol = 1e-6;
constexpr int kOracleQps = 200;
constexpr double kOracleRelTol = 1e-5;
constexpr double kKktTol = 1e-6;
constexpr int kFeasibilityRuns = 50;
constexpr int kFeasibilitySteps = 500;
constexpr double kViolationTol = 1e-6;
constexpr double kLyapunovRelTol = 1e-6;
constexpr double kOrbitTolCm = 1e-2;
constexpr int kBenchmarkSteps = 1350;
constexpr double kDrtoTol = 1e-6;
constexpr int kGradientPoints = 100;
constexpr double kGradientTol = 1e-5;
constexpr double kStencilStep = 1e-3;
constexpr int kDeterminismSteps = 60;

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Outcome& o, double seconds) {
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(),
                seconds);
    std::fflush(stdout);
    if (!o.pass) ++failures;
}

void run(int id, const std::string& name, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    report(id, name, o, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), f, a);
    return buf;
}

// Uniform sample of one stage inside Z_k, by rejection from `box`.
void sampleStage(std::mt19937_64& rng, const PeriodicConstraintSet& set, TimeIndex k, const SamplingBox& box, int n,
                 Trajectory& t) {
    for (int attempt = 0; attempt < 10000; ++attempt) {
        const Vector z = pemc::testing::uniformIn(rng, box.lower, box.upper);
        if (set.contains(k, z.head(n), z.tail(z.size() - n), 0.0).inside) {
            t.states.push_back(z.head(n));
            t.inputs.push_back(z.tail(z.size() - n));
            return;
        }
    }
    throw std::runtime_error("rejection sampling failed");
}

// Random small problem plus a feasible initial state.
struct SmallRun {
    pemc::testing::RandomPeriodicProblem pb;
    Vector x0;
};

SmallRun smallProblem(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> dn(1, 3), dm(1, 2), dT(2, 6);
    for (;;) {
        const int n = dn(rng), m = dm(rng), T = dT(rng);
        if (n > m * T) continue;
        const int N = std::uniform_int_distribution<int>(1, T)(rng);
        auto pb = randomPeriodicProblem(rng, n, m, T, N);
        const Vector x0 = pemc::testing::randomVector(rng, n, pb.state_bound);
        try {
            SingleLayerController::initialize(pb.setup, pb.cost, {}, 0, x0);
        } catch (const ControllerError&) {
            continue;
        }
        return {std::move(pb), x0};
    }
}

std::vector<SimulationLog> feasibility_logs;
std::optional<bp::ExperimentReport> bench;

Outcome majorization() {
    const bp::Config cfg;
    const auto cost = bp::scenario1Cost(cfg);
    const auto set = bp::buildConstraints(cfg);
    const SamplingBox box = bp::samplingBox(cfg, 1);
    std::mt19937_64 rng(101);
    double worst = 0.0;
    int bad = 0;
    for (int s = 0; s < kMajorizationSamples; ++s) {
        Trajectory za, hat;
        for (int j = 0; j < cfg.period; ++j) {
            sampleStage(rng, set, j, box, bp::kStateDim, za);
            sampleStage(rng, set, j, box, bp::kStateDim, hat);
        }
        const double o = offsetCost(*cost, za, {});
        const double gap = majorizationGap(*cost, za, hat, {});
        const double rel = gap / (1.0 + std::abs(o));
        worst = std::min(worst, rel);
        if (gap < -kMajorizationTol * (1.0 + std::abs(o))) ++bad;
    }
    return {bad == 0, std::to_string(kMajorizationSamples) + " pairs, " + std::to_string(bad) +
                          " below bound, worst relative gap " + fmt("%.3e", worst)};
}

Outcome equivalence() {
    std::mt19937_64 rng(202);
    ControllerConfig cc;
    cc.solver.eps_feas = cc.solver.eps_opt = 1e-9;
    DrtoConfig dc;
    dc.solver = cc.solver;
    double worst = 0.0;
    for (int s = 0; s < kEquivalenceSystems; ++s) {
        SmallRun r = smallProblem(rng);
        auto ctl = SingleLayerController::initialize(r.pb.setup, r.pb.cost, cc, 0, r.x0);
        const Trajectory hat = ctl.linearization();
        const auto res = ctl.step(r.x0, {});
        const auto ex = solveExactSingleLayer(r.pb.setup, *r.pb.cost, 0, r.x0, hat, {}, dc);
        worst = std::max({worst, trajectoryDistance(res.plan.plan, ex.first_iterate.plan),
                          trajectoryDistance(res.plan.artificial, ex.first_iterate.artificial)});
    }
    return {worst <= kEquivalenceTol,
            std::to_string(kEquivalenceSystems) + " systems, max trajectory difference " + fmt("%.3e", worst)};
}

Outcome oracle() {
    std::mt19937_64 rng(303);
    std::uniform_int_distribution<int> dd(2, 8), de(0, 2), di(1, 10);
    double obj = 0.0, sol = 0.0, kkt = 0.0;
    int nonoptimal = 0;
    for (int t = 0; t < kOracleQps; ++t) {
        const int d = dd(rng);
        const auto p = pemc::testing::randomQp(rng, d, std::min(de(rng), d - 1), di(rng));
        const auto ref = qp::solveOracle(p);
        const auto s = qp::solve(p);
        if (!s.optimal() || !ref.optimal()) {
            ++nonoptimal;
            continue;
        }
        obj = std::max(obj, std::abs(s.objective - ref.objective) / std::max(1.0, std::abs(ref.objective)));
        sol = std::max(sol, (s.w - ref.w).norm() / std::max(1.0, ref.w.norm()));
        const auto r = qp::kktResiduals(p, s.w, s.y_eq, s.y_in);
        kkt = std::max({kkt, r.primal, r.dual, r.dual_sign});
    }
    const bool pass = nonoptimal == 0 && obj <= kOracleRelTol && sol <= kOracleRelTol && kkt <= kKktTol;
    return {pass, std::to_string(kOracleQps) + " QPs, non-optimal " + std::to_string(nonoptimal) +
                      ", objective rel " + fmt("%.2e", obj) + ", solution rel " + fmt("%.2e", sol) + ", KKT " +
                      fmt("%.2e", kkt)};
}

Outcome feasibility() {
    std::mt19937_64 rng(404);
    int nonoptimal = 0, violations = 0, incomplete = 0;
    for (int r = 0; r < kFeasibilityRuns; ++r) {
        SmallRun s = smallProblem(rng);
        auto sched = ScenarioSchedule::constant(kFeasibilitySteps, s.x0);
        sched.seed = static_cast<std::uint64_t>(r);
        SimulationConfig sc;
        sc.violation_tolerance = kViolationTol;
        SimulationLog log = runClosedLoop(s.pb.setup, s.pb.cost, sched, sc);
        if (!log.completed) ++incomplete;
        for (const auto& st : log.steps)
            if (st.status != qp::QpStatus::Optimal) ++nonoptimal;
        violations += static_cast<int>(log.violations.size());
        feasibility_logs.push_back(std::move(log));
    }
    return {incomplete == 0 && nonoptimal == 0 && violations == 0,
            std::to_string(kFeasibilityRuns) + " runs x " + std::to_string(kFeasibilitySteps) + " steps, incomplete " +
                std::to_string(incomplete) + ", non-optimal " + std::to_string(nonoptimal) + ", ledger entries " +
                std::to_string(violations)};
}

void runBenchmark() {
    if (bench) return;
    bp::ExperimentConfig ec;
    ec.steps = kBenchmarkSteps;
    const char* env = std::getenv("PEMC_ACCEPTANCE_OUT");
    const fs::path out = env ? fs::path(env) : fs::temp_directory_path() / "pemc_acceptance";
    bench = bp::runBenchmarkExperiments(ec, out);
}

Outcome lyapunov() {
    runBenchmark();
    std::size_t small = 0, checked = 0;
    for (const auto& log : feasibility_logs) {
        const auto rep = checkLyapunovDecrease(log.records(), log.p_changes, kLyapunovRelTol);
        small += rep.violations.size();
        checked += static_cast<std::size_t>(rep.checked);
    }
    std::size_t big = 0;
    for (const auto* log : {&bench->log_s1, &bench->log_s2}) {
        if (!*log) continue;
        const auto rep = checkLyapunovDecrease((*log)->records(), (*log)->p_changes, kLyapunovRelTol);
        big += rep.violations.size();
        checked += static_cast<std::size_t>(rep.checked);
    }
    const bool all_runs = feasibility_logs.size() == static_cast<std::size_t>(kFeasibilityRuns) && bench->log_s1 &&
                          bench->log_s2 && bench->log_s1->completed && bench->log_s2->completed;
    return {all_runs && small == 0 && big == 0,
            std::to_string(checked) + " decrease pairs, violations: small systems " + std::to_string(small) +
                ", benchmark " + std::to_string(big)};
}

Outcome convergence() {
    runBenchmark();
    const auto& log = *bench->log_s1;
    const int window = 2 * log.period;
    const double d = orbitDistance(log, bench->drto_s1_exact->za_star, window, {bp::kPosition1, bp::kPosition2});
    const double d_mm = orbitDistance(log, bench->drto_s1->za_star, window, {bp::kPosition1, bp::kPosition2});
    return {log.completed && d < kOrbitTolCm,
            "scenario 1, " + std::to_string(log.steps.size()) + " steps, position orbit distance " +
                fmt("%.4g", d) + " cm to the exact DRTO optimum (" + fmt("%.4g", d_mm) + " cm to the MM result)"};
}

Outcome drtoExactness() {
    runBenchmark();
    const auto& mm = *bench->drto_s1;
    const auto& exact = *bench->drto_s1_exact;
    const double d = trajectoryDistance(mm.za_star, exact.za_star);
    return {d <= kDrtoTol, "trajectory difference " + fmt("%.4g", d) + ", objectives MM " + fmt("%.10g", mm.objective) +
                               " (" + std::to_string(mm.iterations) + " iterations) vs one-shot " +
                               fmt("%.10g", exact.objective)};
}

Outcome economics() {
    runBenchmark();
    const auto& e = bench->comparison_empc;
    const auto& t = bench->comparison_tracking;
    const bool cmp = e.completed && t.completed && e.average_cost <= t.average_cost;
    const double s2 = bench->scenario2.average_cost;
    const double cross = bench->scenario2_cost_on_scenario1.value_or(NAN);
    const bool eco = bench->scenario2.completed && s2 < cross;
    return {cmp && eco, "E-MPC " + fmt("%.6g", e.average_cost) + " vs tracking " + fmt("%.6g", t.average_cost) +
                            "; scenario-2 cost on the scenario-2 orbit " + fmt("%.6g", s2) +
                            " vs on the scenario-1 orbit " + fmt("%.6g", cross)};
}

Outcome gradients() {
    const bp::Config cfg;
    const auto c1 = bp::scenario1Cost(cfg);
    const auto c2 = bp::scenario2Cost(cfg);
    const auto set = bp::buildConstraints(cfg);
    std::mt19937_64 rng(909);
    double worst1 = 0.0, worst2 = 0.0;
    const SamplingBox full = bp::samplingBox(cfg, 1);
    const SamplingBox operating = bp::samplingBox(cfg, 2);
    for (int i = 0; i < kGradientPoints; ++i) {
        Trajectory a, b;
        sampleStage(rng, set, i, full, bp::kStateDim, a);
        sampleStage(rng, set, i, operating, bp::kStateDim, b);
        auto err = [&](const EconomicCost& c, const Trajectory& t) {
            const Vector g = c.evaluate(i, t.states[0], t.inputs[0], {}).gradient;
            const Vector fd = pemc::testing::stencilGradient(c, i, t.states[0], t.inputs[0], kStencilStep);
            return (g - fd).lpNorm<Eigen::Infinity>();
        };
        worst1 = std::max(worst1, err(*c1, a));
        worst2 = std::max(worst2, err(*c2, b));
    }
    return {worst1 <= kGradientTol && worst2 <= kGradientTol,
            std::to_string(kGradientPoints) + " points, max-abs error scenario 1 " + fmt("%.2e", worst1) +
                ", scenario 2 " + fmt("%.2e", worst2)};
}

Outcome literals() {
    const bp::Config c;
    Matrix F(4, 4);
    F << 1, 5e-2, 8.8e-3, 1e-4, 0, 1, 3.5e-1, 8.8e-3, 0, 0, 1, 5e-2, 0, 0, 0, 1;
    Vector G(4);
    G << 0, 1e-4, 1.3e-3, 5e-2;
    Matrix A = Matrix::Zero(8, 8), B = Matrix::Zero(8, 2);
    A.topLeftCorner(4, 4) = F;
    A.bottomRightCorner(4, 4) = F;
    B.block(0, 0, 4, 1) = G;
    B.block(4, 1, 4, 1) = G;
    Vector e = Vector::Zero(8);
    e(0) = e(4) = 700.0;
    std::vector<std::string> bad;
    auto check = [&](bool ok, const char* what) {
        if (!ok) bad.emplace_back(what);
    };
    check(bp::subsystemF() == F, "F");
    check(bp::subsystemG() == G, "G");
    check(bp::stateMatrix() == A, "A");
    check(bp::inputMatrix() == B, "B");
    check(c.diamond_bound == 6.0, "|y1|+|y2| bound");
    check(c.angle_bound == M_PI / 2.0, "angle bound");
    check(c.input_bound == 110.0, "input bound");
    check(Matrix(bp::positionWeight(c)) == Matrix(e.asDiagonal()), "E_x");
    check(c.motor_a == 4000.0 && c.motor_b == 6800.0 && c.motor_c == 4000.0, "a, b, c");
    check(c.period == 90 && c.horizon == 90, "T = N = 90");
    check(c.sampling_time == 0.05, "Ts");
    const Polytope p = bp::constraintPolytope(c);
    Vector corner = Vector::Zero(10);
    corner(bp::kPosition1) = 6.0;
    check(((p.G * corner - p.h).array() <= 0.0).all() && (p.G * corner - p.h).maxCoeff() == 0.0, "diamond face");
    std::string detail = "F, G, A, B, bounds, E_x, a, b, c, T, N, Ts";
    if (!bad.empty()) {
        detail = "mismatch:";
        for (const auto& s : bad) detail += " " + s;
    }
    return {bad.empty(), detail};
}

Outcome determinism() {
    auto csv = [](const SimulationLog& log) {
        std::ostringstream os;
        writeLogCsv(os, log);
        return os.str();
    };
    std::vector<std::string> mismatched;
    {
        std::mt19937_64 rng(1111);
        SmallRun s = smallProblem(rng);
        auto sched = ScenarioSchedule::constant(kFeasibilitySteps, s.x0);
        const std::string a = csv(runClosedLoop(s.pb.setup, s.pb.cost, sched, {}));
        const std::string b = csv(runClosedLoop(s.pb.setup, s.pb.cost, sched, {}));
        if (a != b) mismatched.emplace_back("small system");
    }
    const bp::Config cfg;
    const MpcSetup setup = bp::buildSetup(cfg);
    auto sched = ScenarioSchedule::constant(kDeterminismSteps, bp::initialState());
    for (int scenario : {1, 2}) {
        const CostPtr cost = scenario == 1 ? CostPtr(bp::scenario1Cost(cfg)) : CostPtr(bp::scenario2Cost(cfg));
        const std::string a = csv(runClosedLoop(setup, cost, sched, {}));
        const std::string b = csv(runClosedLoop(setup, cost, sched, {}));
        if (a != b) mismatched.push_back("ballplate scenario " + std::to_string(scenario));
    }
    std::string detail = "repeated runs: small system 500 steps, ballplate scenarios 1 and 2 " +
                         std::to_string(kDeterminismSteps) + " steps";
    for (const auto& m : mismatched) detail += "; differs: " + m;
    return {mismatched.empty(), detail};
}

}  // namespace

int main() {
    run(1, "majorization bound", majorization);
    run(2, "one-step equivalence", equivalence);
    run(3, "QP solver against oracle", oracle);
    run(4, "recursive feasibility", feasibility);
    run(5, "Lyapunov decrease", lyapunov);
    run(6, "convergence to the periodic optimum", convergence);
    run(7, "MM periodic optimum on a quadratic cost", drtoExactness);
    run(8, "comparative economics", economics);
    run(9, "gradient fidelity", gradients);
    run(10, "benchmark data fidelity", literals);
    run(11, "determinism", determinism);
    std::printf("%d of 11 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
