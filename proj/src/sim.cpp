#include "pemc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "json.hpp"
#include "pemc/numfmt.hpp"

namespace pemc {

void ScenarioSchedule::validate() const {
    if (total_steps < 1) throw std::invalid_argument("scenario: total_steps must be positive");
    if (x0.size() == 0) throw std::invalid_argument("scenario: x0 is empty");
    if (p_timeline.empty()) return;
    if (p_timeline.front().first != 0) throw std::invalid_argument("scenario: p timeline must start at step 0");
    for (std::size_t i = 1; i < p_timeline.size(); ++i)
        if (p_timeline[i].first <= p_timeline[i - 1].first)
            throw std::invalid_argument("scenario: p timeline start steps must be strictly increasing");
}

const Parameter& ScenarioSchedule::at(int step) const {
    static const Parameter empty;
    if (p_timeline.empty()) return empty;
    auto it = std::upper_bound(p_timeline.begin(), p_timeline.end(), step,
                               [](int s, const auto& entry) { return s < entry.first; });
    if (it == p_timeline.begin()) return empty;
    return std::prev(it)->second;
}

std::vector<int> ScenarioSchedule::changeSteps() const {
    std::vector<int> out;
    for (const auto& [start, p] : p_timeline)
        if (start > 0) out.push_back(start);
    return out;
}

ScenarioSchedule ScenarioSchedule::constant(int total_steps, const Vector& x0, Parameter p) {
    ScenarioSchedule s;
    s.total_steps = total_steps;
    s.x0 = x0;
    s.p_timeline.emplace_back(0, std::move(p));
    return s;
}

const char* toString(ControllerKind kind) {
    return kind == ControllerKind::Empc ? "empc" : "tracking";
}

ControllerKind parseControllerKind(const std::string& text) {
    if (text == "empc") return ControllerKind::Empc;
    if (text == "tracking") return ControllerKind::Tracking;
    throw std::invalid_argument("unknown controller kind '" + text + "' (expected empc or tracking)");
}

void SimulationConfig::validate() const {
    controller.solver.validate();
    if (kind == ControllerKind::Tracking && !reference)
        throw std::invalid_argument("simulation: tracking runs need a reference trajectory");
    if (!(violation_tolerance > 0.0)) throw std::invalid_argument("simulation: violation_tolerance must be > 0");
}

std::vector<StepRecord> SimulationLog::records() const {
    std::vector<StepRecord> out;
    out.reserve(steps.size());
    for (const auto& s : steps) {
        StepRecord r;
        r.k = s.k;
        r.x = s.x;
        r.u = s.u;
        r.p = s.p;
        r.v_hat = s.v_hat;
        r.s_value = s.s_value;
        r.first_stage = s.first_stage;
        r.status = s.status;
        r.iterations = s.iterations;
        r.solve_time = s.solve_time;
        out.push_back(std::move(r));
    }
    return out;
}

SimulationLog runClosedLoop(const MpcSetup& setup, const CostPtr& cost, const ScenarioSchedule& scenario,
                            const SimulationConfig& config) {
    setup.validate();
    scenario.validate();
    config.validate();
    const int n = setup.system.stateDim();
    const int m = setup.system.inputDim();
    const int T = setup.period();
    if (scenario.x0.size() != n) throw std::invalid_argument("scenario: x0 has the wrong dimension");
    if (config.kind == ControllerKind::Empc && !cost)
        throw std::invalid_argument("simulation: E-MPC runs need an economic cost");

    SimulationLog log;
    log.n = n;
    log.m = m;
    log.period = T;
    log.kind = config.kind;
    log.record_solve_time = config.record_solve_time;
    for (int s : scenario.changeSteps()) log.p_changes.push_back(config.k0 + s);
    log.x_final = scenario.x0;

    std::optional<SingleLayerController> ctrl;
    try {
        if (config.linearization)
            ctrl.emplace(setup, cost, config.controller, config.k0, *config.linearization);
        else
            ctrl.emplace(SingleLayerController::initialize(setup, cost, config.controller, config.k0, scenario.x0));
    } catch (const ControllerError& e) {
        log.error = e.what();
        log.error_status = e.status();
        return log;
    }

    Vector x = scenario.x0;
    double total = 0.0;
    double period_sum = 0.0;
    log.steps.reserve(static_cast<std::size_t>(scenario.total_steps));
    for (int step = 0; step < scenario.total_steps; ++step) {
        const TimeIndex k = config.k0 + step;
        const Parameter& p = scenario.at(step);
        StepResult res;
        try {
            res = config.kind == ControllerKind::Empc ? ctrl->step(x, p) : ctrl->trackingStep(x, *config.reference);
        } catch (const ControllerError& e) {
            log.error = e.what();
            log.error_status = e.status();
            log.x_final = x;
            return log;
        }

        StepLog row;
        row.k = k;
        row.x = x;
        row.u = res.u_applied;
        row.p = p;
        row.economic_cost = cost ? cost->value(k, x, res.u_applied, p) : 0.0;
        total += row.economic_cost;
        row.running_average = total / (step + 1);
        row.v_hat = res.record.v_hat;
        row.s_value = res.record.s_value;
        row.first_stage = res.record.first_stage;
        row.iterations = res.record.iterations;
        row.solve_time = config.record_solve_time ? res.record.solve_time : 0.0;
        row.status = res.record.status;

        const Polytope& poly = setup.constraints.at(k);
        Vector z(n + m);
        z << x, res.u_applied;
        const Vector slack = poly.G * z - poly.h;
        for (int r = 0; r < slack.size(); ++r)
            if (slack(r) > config.violation_tolerance) log.violations.push_back({step, r, slack(r)});

        period_sum += row.economic_cost;
        if ((step + 1) % T == 0) {
            log.period_averages.push_back(period_sum / T);
            period_sum = 0.0;
        }
        x = setup.system.step(k, x, res.u_applied);
        log.steps.push_back(std::move(row));
    }
    log.x_final = x;
    log.completed = true;
    return log;
}

namespace {

void checkWindow(const SimulationLog& log, int window) {
    if (window <= 0) throw std::invalid_argument("window must be positive");
    if (window > static_cast<int>(log.steps.size()))
        throw std::invalid_argument("window exceeds the number of logged steps");
}

}  // namespace

double averageEconomicCost(const SimulationLog& log, int window) {
    checkWindow(log, window);
    double sum = 0.0;
    for (auto it = log.steps.end() - window; it != log.steps.end(); ++it) sum += it->economic_cost;
    return sum / window;
}

double averageEconomicCost(const SimulationLog& log, const EconomicCost& cost, int window) {
    checkWindow(log, window);
    if (cost.stateDim() != log.n || cost.inputDim() != log.m)
        throw std::invalid_argument("averageEconomicCost: cost dimensions do not match the log");
    double sum = 0.0;
    for (auto it = log.steps.end() - window; it != log.steps.end(); ++it) sum += cost.value(it->k, it->x, it->u, it->p);
    return sum / window;
}

double orbitDistance(const SimulationLog& log, const Trajectory& reference, int window,
                     const std::vector<int>& coordinates) {
    checkWindow(log, window);
    const int T = static_cast<int>(reference.inputs.size());
    if (T == 0 || static_cast<int>(reference.states.size()) < T)
        throw std::invalid_argument("orbitDistance: reference must hold T states and inputs");
    const int d = log.n + log.m;
    std::vector<int> coords = coordinates;
    if (coords.empty())
        for (int i = 0; i < d; ++i) coords.push_back(i);
    for (int c : coords)
        if (c < 0 || c >= d) throw std::invalid_argument("orbitDistance: coordinate out of range");

    auto mod = [T](TimeIndex a) { return static_cast<int>(((a % T) + T) % T); };
    double best = std::numeric_limits<double>::infinity();
    for (int shift = 0; shift < T; ++shift) {
        double worst = 0.0;
        for (auto it = log.steps.end() - window; it != log.steps.end() && worst < best; ++it) {
            const auto j = static_cast<std::size_t>(mod(it->k - reference.anchor + shift));
            double sq = 0.0;
            for (int c : coords) {
                const double a = c < log.n ? it->x(c) : it->u(c - log.n);
                const double b = c < log.n ? reference.states[j](c) : reference.inputs[j](c - log.n);
                sq += (a - b) * (a - b);
            }
            worst = std::max(worst, std::sqrt(sq));
        }
        best = std::min(best, worst);
    }
    return best;
}

int defaultWindow(const SimulationLog& log) {
    return std::min(2 * log.period, static_cast<int>(log.steps.size()));
}

namespace {

std::vector<std::string> columns(const SimulationLog& log) {
    std::vector<std::string> cols{"k"};
    for (int i = 0; i < log.n; ++i) cols.push_back("x" + std::to_string(i));
    for (int i = 0; i < log.m; ++i) cols.push_back("u" + std::to_string(i));
    const int np = log.steps.empty() ? 0 : static_cast<int>(log.steps.front().p.size());
    for (int i = 0; i < np; ++i) cols.push_back("p" + std::to_string(i));
    for (const char* c : {"economic_cost", "running_average", "v_hat", "s_value", "first_stage", "iterations"})
        cols.emplace_back(c);
    if (log.record_solve_time) cols.emplace_back("solve_time");
    return cols;
}

}  // namespace

void writeLogCsv(std::ostream& os, const SimulationLog& log) {
    const auto cols = columns(log);
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << '\n';
    const std::size_t np = log.steps.empty() ? 0 : static_cast<std::size_t>(log.steps.front().p.size());
    for (const auto& s : log.steps) {
        os << s.k;
        for (int i = 0; i < s.x.size(); ++i) os << ',' << formatDouble(s.x(i));
        for (int i = 0; i < s.u.size(); ++i) os << ',' << formatDouble(s.u(i));
        for (std::size_t i = 0; i < np; ++i)
            os << ',' << (i < static_cast<std::size_t>(s.p.size()) ? formatDouble(s.p(static_cast<int>(i))) : "nan");
        os << ',' << formatDouble(s.economic_cost) << ',' << formatDouble(s.running_average) << ','
           << formatDouble(s.v_hat) << ',' << formatDouble(s.s_value) << ',' << formatDouble(s.first_stage) << ','
           << s.iterations;
        if (log.record_solve_time) os << ',' << formatDouble(s.solve_time);
        os << '\n';
    }
}

void writeLogSidecar(std::ostream& os, const SimulationLog& log, const std::string& scenario_name,
                     const std::string& config_text) {
    nlohmann::ordered_json j;
    j["scenario"] = scenario_name;
    j["controller"] = toString(log.kind);
    j["columns"] = columns(log);
    j["state_dim"] = log.n;
    j["input_dim"] = log.m;
    j["period"] = log.period;
    j["steps"] = log.steps.size();
    j["completed"] = log.completed;
    if (!log.error.empty()) j["error"] = log.error;
    j["violations"] = log.violations.size();
    j["period_averages"] = log.period_averages;
    j["config_hash"] = configHash(config_text);
    os << j.dump(2) << '\n';
}

std::string configHash(const std::string& text) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace pemc
