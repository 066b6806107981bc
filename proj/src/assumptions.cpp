#include "pemc/assumptions.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace pemc {

const char* toString(CheckStatus status) {
    switch (status) {
        case CheckStatus::Pass: return "pass";
        case CheckStatus::Warn: return "warn";
        case CheckStatus::Fail: return "fail";
    }
    return "unknown";
}

const AssumptionCheck& AssumptionReport::at(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return c;
    throw std::out_of_range("no assumption check named " + name);
}

bool AssumptionReport::anyFail() const {
    return std::any_of(checks.begin(), checks.end(), [](const auto& c) { return c.status == CheckStatus::Fail; });
}

bool AssumptionReport::anyWarn() const {
    return std::any_of(checks.begin(), checks.end(), [](const auto& c) { return c.status == CheckStatus::Warn; });
}

SamplingBox defaultSamplingBox(const PeriodicConstraintSet& constraints, double radius) {
    const int d = constraints.stateDim() + constraints.inputDim();
    SamplingBox box{Vector::Constant(d, -radius), Vector::Constant(d, radius)};
    std::vector<char> has_lo(static_cast<std::size_t>(d), 0), has_hi(static_cast<std::size_t>(d), 0);
    Vector lo = Vector::Constant(d, 0.0), hi = Vector::Constant(d, 0.0);
    for (int k = 0; k < constraints.period(); ++k) {
        const Polytope& poly = constraints.at(k);
        for (int r = 0; r < poly.G.rows(); ++r) {
            int idx = -1, count = 0;
            for (int c = 0; c < d; ++c)
                if (poly.G(r, c) != 0.0) {
                    idx = c;
                    ++count;
                }
            if (count != 1) continue;
            const double bound = poly.h(r) / poly.G(r, idx);
            const auto i = static_cast<std::size_t>(idx);
            if (bound > 0.0) {
                hi(idx) = has_hi[i] ? std::max(hi(idx), bound) : bound;
                has_hi[i] = 1;
            } else {
                lo(idx) = has_lo[i] ? std::min(lo(idx), bound) : bound;
                has_lo[i] = 1;
            }
        }
    }
    for (int c = 0; c < d; ++c) {
        if (has_lo[static_cast<std::size_t>(c)]) box.lower(c) = lo(c);
        if (has_hi[static_cast<std::size_t>(c)]) box.upper(c) = hi(c);
    }
    return box;
}

AssumptionReport validateAssumptions(const PeriodicLtvSystem& system, const PeriodicConstraintSet& constraints,
                                     const EconomicCost& cost, const ValidationOptions& options) {
    AssumptionReport rep;
    const int n = system.stateDim();
    const int m = system.inputDim();
    const int T = system.period();

    {
        AssumptionCheck c{"periodicity", CheckStatus::Pass, ""};
        std::ostringstream msg;
        msg << "system T=" << T << ", constraints T=" << constraints.period() << ", cost T=" << cost.period();
        if (constraints.period() != T || cost.period() < 1 || T % cost.period() != 0) c.status = CheckStatus::Fail;
        if (constraints.stateDim() != n || constraints.inputDim() != m || cost.stateDim() != n ||
            cost.inputDim() != m) {
            c.status = CheckStatus::Fail;
            msg << "; dimension mismatch";
        }
        c.detail = msg.str();
        rep.checks.push_back(c);
        if (c.status == CheckStatus::Fail) {
            rep.checks.push_back({"convexity", CheckStatus::Warn, "skipped: periodicity check failed"});
            rep.checks.push_back({"lipschitz", CheckStatus::Warn, "skipped: periodicity check failed"});
            rep.checks.push_back({"controllability", CheckStatus::Warn, "skipped: periodicity check failed"});
            return rep;
        }
    }

    const SamplingBox box = options.box ? *options.box : defaultSamplingBox(constraints, options.fallback_radius);
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> phase(0, T - 1);
    auto draw = [&](TimeIndex k) -> std::optional<Vector> {
        for (int attempt = 0; attempt < 1000; ++attempt) {
            Vector z(n + m);
            for (int i = 0; i < n + m; ++i) z(i) = box.lower(i) + (box.upper(i) - box.lower(i)) * unit(rng);
            if (constraints.contains(k, z.head(n), z.tail(m), 0.0).inside) return z;
        }
        return std::nullopt;
    };

    int convex_violations = 0, pairs = 0;
    double worst_convex = 0.0, worst_ratio = 0.0;
    for (int s = 0; s < options.samples; ++s) {
        const TimeIndex k = phase(rng);
        const auto a = draw(k);
        const auto b = draw(k);
        if (!a || !b) continue;
        ++pairs;
        const CostEval ea = cost.evaluate(k, a->head(n), a->tail(m), options.p);
        const CostEval eb = cost.evaluate(k, b->head(n), b->tail(m), options.p);
        const Vector mid = 0.5 * (*a + *b);
        const double fm = cost.value(k, mid.head(n), mid.tail(m), options.p);
        const double excess = fm - 0.5 * (ea.value + eb.value);
        if (excess > options.convexity_tolerance * (1.0 + std::abs(fm))) {
            ++convex_violations;
            worst_convex = std::max(worst_convex, excess);
        }
        const double dist = (*a - *b).norm();
        if (dist > 0.0) worst_ratio = std::max(worst_ratio, (ea.gradient - eb.gradient).norm() / dist);
    }

    {
        AssumptionCheck c{"convexity", CheckStatus::Pass, ""};
        std::ostringstream msg;
        if (pairs == 0) {
            c.status = CheckStatus::Warn;
            msg << "no samples landed inside the constraint set";
        } else {
            msg << convex_violations << " of " << pairs << " sampled midpoints above the chord";
            if (convex_violations > 0) {
                c.status = CheckStatus::Warn;
                msg << " (worst excess " << worst_convex << ")";
            }
        }
        c.detail = msg.str();
        rep.checks.push_back(c);
    }
    {
        AssumptionCheck c{"lipschitz", CheckStatus::Pass, ""};
        std::ostringstream msg;
        msg << "sampled ratio " << worst_ratio << " vs rho " << cost.lipschitz();
        if (pairs == 0 || worst_ratio > cost.lipschitz() * (1.0 + 1e-9)) c.status = CheckStatus::Warn;
        if (!(cost.lipschitz() > 0.0)) {
            c.status = CheckStatus::Warn;
            msg << "; rho must be positive";
        }
        c.detail = msg.str();
        rep.checks.push_back(c);
    }
    {
        AssumptionCheck c{"controllability", CheckStatus::Pass, ""};
        const auto cr = checkControllability(system, options.rank_tolerance_scale);
        std::ostringstream msg;
        if (cr.c_star) {
            msg << "full rank " << n << " at c*=" << *cr.c_star;
        } else {
            c.status = CheckStatus::Fail;
            msg << "no c in [0, T-1] gives rank " << n << " for every k";
        }
        c.detail = msg.str();
        rep.checks.push_back(c);
    }
    return rep;
}

}  // namespace pemc
