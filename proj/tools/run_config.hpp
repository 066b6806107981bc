#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "pemc/ballplate.hpp"
#include "pemc/drto.hpp"
#include "pemc/sim.hpp"

namespace pemc::cli {

inline constexpr int kSchemaVersion = 1;

/// Parse or validation failure; the message carries the source and line or field.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Problem given inline in the config instead of a builtin benchmark.
struct CustomProblem {
    MpcSetup setup;
    CostPtr cost;
    Vector x0;
};

struct RunConfig {
    int schema_version = kSchemaVersion;
    std::string benchmark = "ballplate";  ///< "ballplate" or "custom"
    int scenario = 1;                     ///< ballplate scenario; 0 runs every benchmark experiment
    ControllerKind controller = ControllerKind::Empc;
    int steps = 1350;
    int window = 0;  ///< 0 selects the last two periods
    std::uint64_t seed = 0;
    std::string out = "pemc_out";
    bool record_solve_time = false;

    ballplate::Config ballplate;
    std::optional<CustomProblem> custom;
    qp::SolverConfig solver;
    DrtoConfig drto;
    bool warm_start = true;

    int audit_samples = 10000;
    /// Multiplies the cost's Lipschitz constant inside the audit; values below 1 undersize rho.
    double audit_rho_scale = 1.0;
    double audit_tolerance = 1e-6;

    /// The original JSON text of the custom section, echoed back verbatim.
    std::string custom_json;

    void validate() const;
};

/// Parses the JSON config text; `source` names it in error messages.
RunConfig parseRunConfig(const std::string& text, const std::string& source);

/// Effective config as JSON, suitable for parseRunConfig.
std::string dumpRunConfig(const RunConfig& config);

}  // namespace pemc::cli
