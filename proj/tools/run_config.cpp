#include "run_config.hpp"

#include <sstream>

#include "json.hpp"

namespace pemc::cli {

using nlohmann::json;

namespace {

[[noreturn]] void fieldError(const std::string& source, const std::string& field, const std::string& message) {
    throw ConfigError(source + ": field '" + field + "': " + message);
}

std::pair<std::size_t, std::size_t> lineColumn(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

class Reader {
public:
    Reader(const json& j, std::string source, std::string prefix = "")
        : j_(j), source_(std::move(source)), prefix_(std::move(prefix)) {}

    bool has(const std::string& key) const { return j_.contains(key); }

    Reader child(const std::string& key) const {
        const json& c = j_.at(key);
        if (!c.is_object()) fieldError(source_, path(key), "expected an object");
        return Reader(c, source_, path(key) + ".");
    }

    template <typename T>
    void read(const std::string& key, T& target) const {
        if (!j_.contains(key)) return;
        try {
            target = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            fieldError(source_, path(key), e.what());
        }
    }

    Vector vector(const std::string& key) const {
        const json& v = j_.at(key);
        if (!v.is_array()) fieldError(source_, path(key), "expected an array of numbers");
        Vector out(static_cast<int>(v.size()));
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) fieldError(source_, path(key), "expected an array of numbers");
            out(static_cast<int>(i)) = v[i].get<double>();
        }
        return out;
    }

    Matrix matrix(const std::string& key) const { return toMatrix(j_.at(key), path(key)); }

    /// A single matrix or a list of matrices (one per phase).
    std::vector<Matrix> schedule(const std::string& key) const {
        const json& v = j_.at(key);
        if (v.is_array() && !v.empty() && v[0].is_array() && !v[0].empty() && v[0][0].is_array()) {
            std::vector<Matrix> out;
            for (std::size_t i = 0; i < v.size(); ++i)
                out.push_back(toMatrix(v[i], path(key) + "[" + std::to_string(i) + "]"));
            return out;
        }
        return {toMatrix(v, path(key))};
    }

    std::vector<Vector> rows(const std::string& key) const {
        const Matrix M = matrix(key);
        std::vector<Vector> out;
        for (int r = 0; r < M.rows(); ++r) out.push_back(M.row(r).transpose());
        return out;
    }

    std::string path(const std::string& key) const { return prefix_ + key; }
    const std::string& source() const { return source_; }
    const json& raw() const { return j_; }

private:
    Matrix toMatrix(const json& v, const std::string& field) const {
        if (!v.is_array() || v.empty()) fieldError(source_, field, "expected a non-empty array of rows");
        const std::size_t cols = v[0].is_array() ? v[0].size() : 0;
        if (cols == 0) fieldError(source_, field, "expected a non-empty array of rows");
        Matrix M(static_cast<int>(v.size()), static_cast<int>(cols));
        for (std::size_t r = 0; r < v.size(); ++r) {
            if (!v[r].is_array() || v[r].size() != cols) fieldError(source_, field, "rows must have equal length");
            for (std::size_t c = 0; c < cols; ++c) {
                if (!v[r][c].is_number()) fieldError(source_, field, "entries must be numbers");
                M(static_cast<int>(r), static_cast<int>(c)) = v[r][c].get<double>();
            }
        }
        return M;
    }

    const json& j_;
    std::string source_;
    std::string prefix_;
};

CustomProblem parseCustom(const Reader& r) {
    try {
        std::vector<Matrix> A = r.schedule("A");
        std::vector<Matrix> B = r.schedule("B");
        int period = static_cast<int>(std::max(A.size(), B.size()));
        r.read("period", period);
        if (period < 1) fieldError(r.source(), r.path("period"), "must be positive");
        auto expand = [&](std::vector<Matrix>& s, const std::string& key) {
            if (s.size() == 1) s.assign(static_cast<std::size_t>(period), s.front());
            if (static_cast<int>(s.size()) != period)
                fieldError(r.source(), r.path(key), "schedule length must equal the period");
        };
        expand(A, "A");
        expand(B, "B");
        PeriodicLtvSystem system(A, B);
        const int n = system.stateDim();
        const int m = system.inputDim();

        Polytope poly{r.matrix("G"), r.vector("h")};
        PeriodicConstraintSet constraints = PeriodicConstraintSet::replicated(poly, period, n, m);

        Matrix Q = Matrix::Identity(n, n), R = Matrix::Identity(m, m);
        if (r.has("Q")) Q = r.matrix("Q");
        if (r.has("R")) R = r.matrix("R");
        int horizon = period;
        r.read("horizon", horizon);

        const Matrix E = r.matrix("E");
        std::vector<Vector> ref = r.has("reference") ? r.rows("reference")
                                                     : std::vector<Vector>(static_cast<std::size_t>(period),
                                                                           Vector::Zero(n));
        CostPtr cost = std::make_shared<QuadraticReferenceCost>(E, ref, m);

        Vector x0 = r.has("x0") ? r.vector("x0") : Vector::Zero(n);
        CustomProblem out{MpcSetup{std::move(system), std::move(constraints), TrackingWeights(Q, R), horizon},
                          std::move(cost), std::move(x0)};
        out.setup.validate();
        if (out.x0.size() != n) fieldError(r.source(), r.path("x0"), "dimension must equal the state dimension");
        return out;
    } catch (const json::exception& e) {
        throw ConfigError(r.source() + ": custom problem: " + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(r.source() + ": custom problem: " + e.what());
    }
}

}  // namespace

void RunConfig::validate() const {
    if (schema_version != kSchemaVersion)
        throw ConfigError("unsupported schema_version " + std::to_string(schema_version));
    if (benchmark != "ballplate" && benchmark != "custom")
        throw ConfigError("unknown benchmark '" + benchmark + "' (expected ballplate or custom)");
    if (benchmark == "custom" && !custom) throw ConfigError("benchmark 'custom' needs a 'custom' section");
    if (benchmark == "ballplate" && (scenario < 0 || scenario > 2))
        throw ConfigError("scenario must be 0 (all), 1 or 2");
    if (steps < 1) throw ConfigError("steps must be positive");
    if (window < 0) throw ConfigError("window must be non-negative");
    if (out.empty()) throw ConfigError("out must name a directory");
    if (!(audit_rho_scale > 0.0)) throw ConfigError("audit.rho_scale must be > 0");
    if (!(audit_tolerance > 0.0)) throw ConfigError("audit.tolerance must be > 0");
    if (audit_samples < 1) throw ConfigError("audit.samples must be positive");
    try {
        ballplate.validate();
        solver.validate();
        drto.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

RunConfig parseRunConfig(const std::string& text, const std::string& source) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = lineColumn(text, e.byte == 0 ? 0 : e.byte - 1);
        std::ostringstream msg;
        msg << source << ":" << line << ":" << col << ": parse error: " << e.what();
        throw ConfigError(msg.str());
    }
    if (!j.is_object()) throw ConfigError(source + ": top level must be an object");

    RunConfig c;
    Reader r(j, source);
    if (!r.has("schema_version")) fieldError(source, "schema_version", "missing");
    r.read("schema_version", c.schema_version);
    r.read("benchmark", c.benchmark);
    r.read("scenario", c.scenario);
    if (r.has("controller")) {
        std::string kind;
        r.read("controller", kind);
        try {
            c.controller = parseControllerKind(kind);
        } catch (const std::invalid_argument& e) {
            fieldError(source, "controller", e.what());
        }
    }
    r.read("steps", c.steps);
    r.read("window", c.window);
    r.read("seed", c.seed);
    r.read("out", c.out);
    r.read("record_solve_time", c.record_solve_time);
    r.read("warm_start", c.warm_start);

    if (r.has("ballplate")) {
        const Reader b = r.child("ballplate");
        auto& bp = c.ballplate;
        b.read("sampling_time", bp.sampling_time);
        b.read("period", bp.period);
        b.read("horizon", bp.horizon);
        b.read("diamond_bound", bp.diamond_bound);
        b.read("angle_bound", bp.angle_bound);
        b.read("input_bound", bp.input_bound);
        b.read("star_vertices", bp.star_vertices);
        b.read("star_radius", bp.star_radius);
        b.read("star_phase_deg", bp.star_phase_deg);
        b.read("position_weight", bp.position_weight);
        b.read("state_weight", bp.state_weight);
        b.read("input_weight", bp.input_weight);
        b.read("motor_a", bp.motor_a);
        b.read("motor_b", bp.motor_b);
        b.read("motor_c", bp.motor_c);
        b.read("operating_box", bp.operating_box);
        b.read("scenario2_qp_eps", bp.scenario2_qp_eps);
    }
    if (r.has("solver")) {
        const Reader s = r.child("solver");
        if (s.has("method")) {
            std::string method;
            s.read("method", method);
            if (method == "admm")
                c.solver.method = qp::QpMethod::Admm;
            else if (method == "ipm")
                c.solver.method = qp::QpMethod::InteriorPoint;
            else
                fieldError(source, s.path("method"), "expected admm or ipm");
        }
        s.read("interior_point_fallback", c.solver.interior_point_fallback);
        s.read("eps_feas", c.solver.eps_feas);
        s.read("eps_opt", c.solver.eps_opt);
        s.read("max_iterations", c.solver.max_iterations);
        s.read("rho", c.solver.rho);
        s.read("polish", c.solver.polish);
        s.read("ipm_tolerance", c.solver.ipm_tolerance);
        s.read("ipm_max_iterations", c.solver.ipm_max_iterations);
    }
    if (r.has("drto")) {
        const Reader d = r.child("drto");
        d.read("tol_obj", c.drto.tol_obj);
        d.read("tol_step", c.drto.tol_step);
        d.read("max_iterations", c.drto.max_iterations);
        d.read("per_phase_rho", c.drto.per_phase_rho);
    }
    c.drto.solver = c.solver;
    if (r.has("audit")) {
        const Reader a = r.child("audit");
        a.read("samples", c.audit_samples);
        a.read("rho_scale", c.audit_rho_scale);
        a.read("tolerance", c.audit_tolerance);
    }
    if (r.has("custom")) {
        c.custom = parseCustom(r.child("custom"));
        c.custom_json = j.at("custom").dump();
    }
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(source + ": " + e.what());
    }
    return c;
}

std::string dumpRunConfig(const RunConfig& c) {
    nlohmann::ordered_json j;
    j["schema_version"] = c.schema_version;
    j["benchmark"] = c.benchmark;
    j["scenario"] = c.scenario;
    j["controller"] = toString(c.controller);
    j["steps"] = c.steps;
    j["window"] = c.window;
    j["seed"] = c.seed;
    j["out"] = c.out;
    j["record_solve_time"] = c.record_solve_time;
    j["warm_start"] = c.warm_start;
    const auto& bp = c.ballplate;
    j["ballplate"] = {{"sampling_time", bp.sampling_time}, {"period", bp.period},
                      {"horizon", bp.horizon},             {"diamond_bound", bp.diamond_bound},
                      {"angle_bound", bp.angle_bound},     {"input_bound", bp.input_bound},
                      {"star_vertices", bp.star_vertices}, {"star_radius", bp.star_radius},
                      {"star_phase_deg", bp.star_phase_deg}, {"position_weight", bp.position_weight},
                      {"state_weight", bp.state_weight},   {"input_weight", bp.input_weight},
                      {"motor_a", bp.motor_a},             {"motor_b", bp.motor_b},
                      {"motor_c", bp.motor_c},             {"operating_box", bp.operating_box},
                      {"scenario2_qp_eps", bp.scenario2_qp_eps}};
    j["solver"] = {{"method", c.solver.method == qp::QpMethod::Admm ? "admm" : "ipm"},
                   {"interior_point_fallback", c.solver.interior_point_fallback},
                   {"eps_feas", c.solver.eps_feas},
                   {"eps_opt", c.solver.eps_opt},
                   {"max_iterations", c.solver.max_iterations},
                   {"rho", c.solver.rho},
                   {"polish", c.solver.polish},
                   {"ipm_tolerance", c.solver.ipm_tolerance},
                   {"ipm_max_iterations", c.solver.ipm_max_iterations}};
    j["drto"] = {{"tol_obj", c.drto.tol_obj},
                 {"tol_step", c.drto.tol_step},
                 {"max_iterations", c.drto.max_iterations},
                 {"per_phase_rho", c.drto.per_phase_rho}};
    j["audit"] = {{"samples", c.audit_samples}, {"rho_scale", c.audit_rho_scale}, {"tolerance", c.audit_tolerance}};
    if (!c.custom_json.empty()) j["custom"] = nlohmann::ordered_json::parse(c.custom_json);
    return j.dump(2) + "\n";
}

}  // namespace pemc::cli
