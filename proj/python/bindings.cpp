/**
 * @file bindings.cpp
 * @brief Python module `pemc._pemc`: models, QP solver, periodic optimum, controller and simulation.
 */

#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "pemc/assumptions.hpp"
#include "pemc/experiments.hpp"

namespace py = pybind11;
using namespace pemc;

namespace {

qp::QpProblem makeProblem(const Matrix& P, const Vector& q, const Matrix& Aeq, const Vector& beq, const Matrix& Ain,
                          const Vector& bin) {
    qp::QpProblem p;
    p.P = P.sparseView();
    p.q = q;
    p.Aeq = Aeq.size() ? qp::SparseMatrix(Aeq.sparseView()) : qp::SparseMatrix(0, q.size());
    p.beq = beq;
    p.Ain = Ain.size() ? qp::SparseMatrix(Ain.sparseView()) : qp::SparseMatrix(0, q.size());
    p.bin = bin;
    p.validate();
    return p;
}

py::dict trajectoryDict(const Trajectory& t) {
    py::dict d;
    d["anchor"] = t.anchor;
    d["states"] = t.states;
    d["inputs"] = t.inputs;
    return d;
}

}  // namespace

PYBIND11_MODULE(_pemc, m) {
    m.doc() = "Periodic single-layer economic MPC";

    py::class_<Trajectory>(m, "Trajectory")
        .def(py::init<>())
        .def(py::init([](TimeIndex anchor, std::vector<Vector> states, std::vector<Vector> inputs) {
                 return Trajectory{anchor, std::move(states), std::move(inputs)};
             }),
             py::arg("anchor"), py::arg("states"), py::arg("inputs"))
        .def_readwrite("anchor", &Trajectory::anchor)
        .def_readwrite("states", &Trajectory::states)
        .def_readwrite("inputs", &Trajectory::inputs)
        .def("as_dict", &trajectoryDict);

    py::class_<PeriodicLtvSystem>(m, "PeriodicLtvSystem")
        .def(py::init<std::vector<Matrix>, std::vector<Matrix>>(), py::arg("a_schedule"), py::arg("b_schedule"))
        .def_static("time_invariant", &PeriodicLtvSystem::timeInvariant, py::arg("A"), py::arg("B"),
                    py::arg("period"))
        .def_property_readonly("state_dim", &PeriodicLtvSystem::stateDim)
        .def_property_readonly("input_dim", &PeriodicLtvSystem::inputDim)
        .def_property_readonly("period", &PeriodicLtvSystem::period)
        .def("A", &PeriodicLtvSystem::A)
        .def("B", &PeriodicLtvSystem::B)
        .def("step", &PeriodicLtvSystem::step, py::arg("k"), py::arg("x"), py::arg("u"));

    py::class_<Polytope>(m, "Polytope")
        .def(py::init([](Matrix G, Vector h) { return Polytope{std::move(G), std::move(h)}; }), py::arg("G"),
             py::arg("h"))
        .def_readwrite("G", &Polytope::G)
        .def_readwrite("h", &Polytope::h);

    py::class_<PeriodicConstraintSet>(m, "PeriodicConstraintSet")
        .def_static("replicated", &PeriodicConstraintSet::replicated, py::arg("polytope"), py::arg("period"),
                    py::arg("state_dim"), py::arg("input_dim"))
        .def_property_readonly("period", &PeriodicConstraintSet::period)
        .def("contains",
             [](const PeriodicConstraintSet& s, TimeIndex k, const Vector& x, const Vector& u, double tol) {
                 return s.contains(k, x, u, tol).inside;
             },
             py::arg("k"), py::arg("x"), py::arg("u"), py::arg("tol") = 1e-8);

    m.def("check_controllability",
          [](const PeriodicLtvSystem& s) { return checkControllability(s).c_star; }, py::arg("system"),
          "Smallest c with full-rank controllability matrix at every phase, or None.");

    py::class_<TrackingWeights>(m, "TrackingWeights")
        .def(py::init<Matrix, Matrix>(), py::arg("Q"), py::arg("R"))
        .def_readwrite("Q", &TrackingWeights::Q)
        .def_readwrite("R", &TrackingWeights::R);

    py::class_<MpcSetup>(m, "MpcSetup")
        .def(py::init([](PeriodicLtvSystem sys, PeriodicConstraintSet cons, TrackingWeights w, int horizon) {
                 MpcSetup s{std::move(sys), std::move(cons), std::move(w), horizon};
                 s.validate();
                 return s;
             }),
             py::arg("system"), py::arg("constraints"), py::arg("weights"), py::arg("horizon"))
        .def_readonly("system", &MpcSetup::system)
        .def_readonly("constraints", &MpcSetup::constraints)
        .def_readonly("horizon", &MpcSetup::horizon);

    py::class_<EconomicCost, std::shared_ptr<EconomicCost>>(m, "EconomicCost")
        .def_property_readonly("period", &EconomicCost::period)
        .def("lipschitz", &EconomicCost::lipschitz)
        .def("value", &EconomicCost::value, py::arg("k"), py::arg("x"), py::arg("u"), py::arg("p") = Parameter{})
        .def("gradient",
             [](const EconomicCost& c, TimeIndex k, const Vector& x, const Vector& u, const Parameter& p) {
                 return c.evaluate(k, x, u, p).gradient;
             },
             py::arg("k"), py::arg("x"), py::arg("u"), py::arg("p") = Parameter{});

    py::class_<QuadraticReferenceCost, EconomicCost, std::shared_ptr<QuadraticReferenceCost>>(
        m, "QuadraticReferenceCost")
        .def(py::init<Matrix, std::vector<Vector>, int>(), py::arg("E"), py::arg("reference"), py::arg("input_dim"));

    py::class_<ReferencePlusInputPolynomialCost, EconomicCost, std::shared_ptr<ReferencePlusInputPolynomialCost>>(
        m, "ReferencePlusInputPolynomialCost");

    py::enum_<qp::QpStatus>(m, "QpStatus")
        .value("Optimal", qp::QpStatus::Optimal)
        .value("PrimalInfeasible", qp::QpStatus::PrimalInfeasible)
        .value("MaxIterations", qp::QpStatus::MaxIterations)
        .value("NumericalFailure", qp::QpStatus::NumericalFailure);

    py::enum_<qp::QpMethod>(m, "QpMethod")
        .value("Admm", qp::QpMethod::Admm)
        .value("InteriorPoint", qp::QpMethod::InteriorPoint);

    py::class_<qp::SolverConfig>(m, "SolverConfig")
        .def(py::init<>())
        .def_readwrite("method", &qp::SolverConfig::method)
        .def_readwrite("interior_point_fallback", &qp::SolverConfig::interior_point_fallback)
        .def_readwrite("eps_feas", &qp::SolverConfig::eps_feas)
        .def_readwrite("eps_opt", &qp::SolverConfig::eps_opt)
        .def_readwrite("max_iterations", &qp::SolverConfig::max_iterations)
        .def_readwrite("polish", &qp::SolverConfig::polish);

    py::class_<qp::QpSolution>(m, "QpSolution")
        .def_readonly("w", &qp::QpSolution::w)
        .def_readonly("status", &qp::QpSolution::status)
        .def_readonly("objective", &qp::QpSolution::objective)
        .def_readonly("y_eq", &qp::QpSolution::y_eq)
        .def_readonly("y_in", &qp::QpSolution::y_in)
        .def_readonly("iterations", &qp::QpSolution::iterations)
        .def_readonly("primal_residual", &qp::QpSolution::primal_residual)
        .def_readonly("dual_residual", &qp::QpSolution::dual_residual);

    m.def(
        "solve_qp",
        [](const Matrix& P, const Vector& q, const Matrix& Aeq, const Vector& beq, const Matrix& Ain,
           const Vector& bin, const qp::SolverConfig& config) {
            return qp::solve(makeProblem(P, q, Aeq, beq, Ain, bin), config);
        },
        py::arg("P"), py::arg("q"), py::arg("Aeq"), py::arg("beq"), py::arg("Ain"), py::arg("bin"),
        py::arg("config") = qp::SolverConfig{},
        "minimize 0.5 w'Pw + q'w subject to Aeq w = beq, Ain w <= bin (dense inputs).");

    py::class_<DrtoConfig>(m, "DrtoConfig")
        .def(py::init<>())
        .def_readwrite("solver", &DrtoConfig::solver)
        .def_readwrite("tol_obj", &DrtoConfig::tol_obj)
        .def_readwrite("tol_step", &DrtoConfig::tol_step)
        .def_readwrite("max_iterations", &DrtoConfig::max_iterations);

    py::class_<DrtoSolution>(m, "DrtoSolution")
        .def_readonly("za_star", &DrtoSolution::za_star)
        .def_readonly("objective", &DrtoSolution::objective)
        .def_readonly("iterations", &DrtoSolution::iterations)
        .def_readonly("converged", &DrtoSolution::converged)
        .def_readonly("history", &DrtoSolution::history);

    m.def(
        "solve_drto",
        [](const MpcSetup& s, const std::shared_ptr<EconomicCost>& cost, const DrtoConfig& config) {
            return solveDrto(s.system, s.constraints, *cost, s.weights, 0, Parameter{}, config);
        },
        py::arg("setup"), py::arg("cost"), py::arg("config") = DrtoConfig{});
    m.def(
        "solve_drto_one_shot",
        [](const MpcSetup& s, const std::shared_ptr<EconomicCost>& cost) {
            return solveDrtoOneShot(s.system, s.constraints, *cost, 0, Parameter{});
        },
        py::arg("setup"), py::arg("cost"));

    py::class_<ControllerConfig>(m, "ControllerConfig")
        .def(py::init<>())
        .def_readwrite("solver", &ControllerConfig::solver)
        .def_readwrite("warm_start", &ControllerConfig::warm_start);

    py::class_<SingleLayerController>(m, "SingleLayerController")
        .def_static(
            "initialize",
            [](const MpcSetup& s, const std::shared_ptr<EconomicCost>& cost, const ControllerConfig& config,
               TimeIndex k0, const Vector& x0) { return SingleLayerController::initialize(s, cost, config, k0, x0); },
            py::arg("setup"), py::arg("cost"), py::arg("config") = ControllerConfig{}, py::arg("k0") = 0,
            py::arg("x0"))
        .def(
            "step",
            [](SingleLayerController& c, const Vector& x, const Parameter& p) {
                const StepResult r = c.step(x, p);
                py::dict d;
                d["u"] = r.u_applied;
                d["v_hat"] = r.v_hat_opt;
                d["delta_v"] = r.delta_v;
                d["plan"] = trajectoryDict(r.plan.plan);
                d["artificial"] = trajectoryDict(r.plan.artificial);
                return d;
            },
            py::arg("x"), py::arg("p") = Parameter{})
        .def_property_readonly("time", &SingleLayerController::time)
        .def_property_readonly("linearization", &SingleLayerController::linearization);

    py::class_<SimulationLog>(m, "SimulationLog")
        .def_readonly("completed", &SimulationLog::completed)
        .def_readonly("error", &SimulationLog::error)
        .def_readonly("period_averages", &SimulationLog::period_averages)
        .def_property_readonly("steps", [](const SimulationLog& l) { return l.steps.size(); })
        .def_property_readonly("violations", [](const SimulationLog& l) { return l.violations.size(); })
        .def_property_readonly("states",
                               [](const SimulationLog& l) {
                                   std::vector<Vector> out;
                                   for (const auto& s : l.steps) out.push_back(s.x);
                                   return out;
                               })
        .def_property_readonly("inputs",
                               [](const SimulationLog& l) {
                                   std::vector<Vector> out;
                                   for (const auto& s : l.steps) out.push_back(s.u);
                                   return out;
                               })
        .def_property_readonly("economic_costs",
                               [](const SimulationLog& l) {
                                   std::vector<double> out;
                                   for (const auto& s : l.steps) out.push_back(s.economic_cost);
                                   return out;
                               })
        .def("lyapunov_violations",
             [](const SimulationLog& l) { return checkLyapunovDecrease(l.records(), l.p_changes).violations.size(); })
        .def("to_csv", [](const SimulationLog& l) {
            std::ostringstream os;
            writeLogCsv(os, l);
            return os.str();
        });

    m.def(
        "run_closed_loop",
        [](const MpcSetup& s, const std::shared_ptr<EconomicCost>& cost, const Vector& x0, int steps,
           const std::string& kind, std::optional<Trajectory> reference, const ControllerConfig& config) {
            SimulationConfig sim;
            sim.kind = parseControllerKind(kind);
            sim.controller = config;
            sim.reference = std::move(reference);
            py::gil_scoped_release release;
            return runClosedLoop(s, cost, ScenarioSchedule::constant(steps, x0), sim);
        },
        py::arg("setup"), py::arg("cost"), py::arg("x0"), py::arg("steps"), py::arg("kind") = "empc",
        py::arg("reference") = std::nullopt, py::arg("config") = ControllerConfig{});
    m.def("average_economic_cost", py::overload_cast<const SimulationLog&, int>(&averageEconomicCost), py::arg("log"),
          py::arg("window"));
    m.def("orbit_distance", &orbitDistance, py::arg("log"), py::arg("reference"), py::arg("window"),
          py::arg("coordinates") = std::vector<int>{});

    py::module_ bp = m.def_submodule("ballplate", "Linearized ball-and-plate benchmark");
    py::class_<ballplate::Config>(bp, "Config")
        .def(py::init<>())
        .def_readwrite("sampling_time", &ballplate::Config::sampling_time)
        .def_readwrite("period", &ballplate::Config::period)
        .def_readwrite("horizon", &ballplate::Config::horizon)
        .def_readwrite("diamond_bound", &ballplate::Config::diamond_bound)
        .def_readwrite("input_bound", &ballplate::Config::input_bound)
        .def_readwrite("star_radius", &ballplate::Config::star_radius)
        .def_readwrite("position_weight", &ballplate::Config::position_weight)
        .def_readwrite("operating_box", &ballplate::Config::operating_box)
        .def_readwrite("scenario2_qp_eps", &ballplate::Config::scenario2_qp_eps);
    bp.def("state_matrix", &ballplate::stateMatrix);
    bp.def("input_matrix", &ballplate::inputMatrix);
    bp.def("build_setup", &ballplate::buildSetup, py::arg("config") = ballplate::Config{});
    bp.def("star_reference", &ballplate::starReference, py::arg("config") = ballplate::Config{});
    bp.def(
        "scenario1_cost",
        [](const ballplate::Config& c) { return std::const_pointer_cast<QuadraticReferenceCost>(ballplate::scenario1Cost(c)); },
        py::arg("config") = ballplate::Config{});
    bp.def(
        "scenario2_cost",
        [](const ballplate::Config& c) {
            return std::const_pointer_cast<ReferencePlusInputPolynomialCost>(ballplate::scenario2Cost(c));
        },
        py::arg("config") = ballplate::Config{});
    bp.def("initial_state", &ballplate::initialState);
    bp.def(
        "run_benchmark_experiments",
        [](const std::filesystem::path& out, int steps) {
            ballplate::ExperimentConfig ec;
            ec.steps = steps;
            ballplate::ExperimentReport rep;
            {
                py::gil_scoped_release release;
                rep = ballplate::runBenchmarkExperiments(ec, out);
            }
            py::dict d;
            d["scenario1_average_cost"] = rep.scenario1.average_cost;
            d["scenario2_average_cost"] = rep.scenario2.average_cost;
            d["tracking_average_cost"] = rep.comparison_tracking.average_cost;
            d["scenario1_orbit_distance"] = rep.scenario1.orbit_distance;
            return d;
        },
        py::arg("out"), py::arg("steps") = 1350);
}
