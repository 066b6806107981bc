#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pemc/cost_model.hpp"
#include "pemc/ltv_model.hpp"

namespace pemc {

enum class CheckStatus { Pass, Warn, Fail };

const char* toString(CheckStatus status);

struct AssumptionCheck {
    std::string name;  ///< "periodicity", "convexity", "lipschitz", "controllability"
    CheckStatus status = CheckStatus::Pass;
    std::string detail;
};

struct AssumptionReport {
    std::vector<AssumptionCheck> checks;

    const AssumptionCheck& at(const std::string& name) const;
    bool anyFail() const;
    bool anyWarn() const;
};

struct ValidationOptions {
    int samples = 1000;
    std::uint64_t seed = 0;
    /// Sampling region; derived from single-coordinate constraint rows when absent.
    std::optional<SamplingBox> box;
    double fallback_radius = 10.0;
    Parameter p;
    double convexity_tolerance = 1e-9;
    double rank_tolerance_scale = 1.0;
};

/// Box from rows with a single nonzero coefficient; coordinates without such rows get +-radius.
SamplingBox defaultSamplingBox(const PeriodicConstraintSet& constraints, double radius);

/**
 * Period agreement, sampled midpoint convexity along random segments in Z_k, sampled
 * gradient-Lipschitz ratios against cost.lipschitz(), and controllability. Sampling-based
 * checks can only warn.
 */
AssumptionReport validateAssumptions(const PeriodicLtvSystem& system, const PeriodicConstraintSet& constraints,
                                     const EconomicCost& cost, const ValidationOptions& options = {});

}  // namespace pemc
