#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pemc/cost_model.hpp"
#include "pemc/ltv_model.hpp"
#include "pemc/transcription.hpp"

namespace pemc::ballplate {

/**
 * @brief Linearized ball-and-plate benchmark
 *
 * State x = [y1, dy1, th1, dth1, y2, dy2, th2, dth2], input u = [ddth1, ddth2].
 * Units are centimeters and radians.
 */
struct Config {
    double sampling_time = 0.05;
    int period = 90;
    int horizon = 90;

    double diamond_bound = 6.0;
    double angle_bound = 1.5707963267948966;
    double input_bound = 110.0;

    int star_vertices = 5;
    double star_radius = 8.0;
    double star_phase_deg = 90.0;

    double position_weight = 700.0;
    double state_weight = 10.0;
    double input_weight = 1.0;

    double motor_a = 4000.0;
    double motor_b = 6800.0;
    double motor_c = 4000.0;
    /// |u_i| bound over which the motor-term Lipschitz constant is computed.
    double operating_box = 2.0;
    /// Upper bound on eps_feas and eps_opt of the scenario-2 controller QPs.
    double scenario2_qp_eps = 1e-8;

    void validate() const;
};

inline constexpr int kStateDim = 8;
inline constexpr int kInputDim = 2;
inline constexpr int kPosition1 = 0;
inline constexpr int kPosition2 = 4;
inline constexpr int kAngle1 = 2;
inline constexpr int kAngle2 = 6;

Matrix subsystemF();
Vector subsystemG();
Matrix stateMatrix();
Matrix inputMatrix();

PeriodicLtvSystem buildSystem(const Config& config);
/// 12 rows: four diamond faces, two angle pairs, two input pairs.
Polytope constraintPolytope(const Config& config);
PeriodicConstraintSet buildConstraints(const Config& config);

/// Pentagram polyline through the circumradius vertices, one sample per step, positions only.
std::vector<Vector> starReference(const Config& config);

Matrix positionWeight(const Config& config);
TrackingWeights trackingWeights(const Config& config);
MpcSetup buildSetup(const Config& config);

std::shared_ptr<const QuadraticReferenceCost> scenario1Cost(const Config& config);
std::shared_ptr<const ReferencePlusInputPolynomialCost> scenario2Cost(const Config& config);
InputPolynomial motorPolynomial(const Config& config);

/// `base` with the tolerances capped by scenario2_qp_eps when `scenario` is 2.
qp::SolverConfig scenarioSolver(const Config& config, int scenario, qp::SolverConfig base);

/// Ball at the plate center, at rest.
Vector initialState();

}  // namespace pemc::ballplate
