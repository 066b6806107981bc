#include "pemc/ballplate.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pemc::ballplate {

void Config::validate() const {
    if (!(sampling_time > 0.0)) throw std::invalid_argument("ballplate: sampling time must be positive");
    if (period < 1 || horizon < 1 || horizon > period)
        throw std::invalid_argument("ballplate: horizon must satisfy 1 <= N <= T");
    if (!(diamond_bound > 0.0) || !(angle_bound > 0.0) || !(input_bound > 0.0))
        throw std::invalid_argument("ballplate: constraint bounds must be positive");
    if (star_vertices < 3 || star_vertices % 2 == 0)
        throw std::invalid_argument("ballplate: star needs an odd vertex count of at least 3");
    if (period % star_vertices != 0)
        throw std::invalid_argument("ballplate: period must be divisible by the number of star edges");
    if (!(star_radius > 0.0)) throw std::invalid_argument("ballplate: star radius must be positive");
    if (!(operating_box > 0.0)) throw std::invalid_argument("ballplate: operating box must be positive");
    if (!(scenario2_qp_eps > 0.0)) throw std::invalid_argument("ballplate: scenario2_qp_eps must be positive");
}

Matrix subsystemF() {
    Matrix F(4, 4);
    F << 1.0, 5e-2, 8.8e-3, 1e-4,
         0.0, 1.0, 3.5e-1, 8.8e-3,
         0.0, 0.0, 1.0, 5e-2,
         0.0, 0.0, 0.0, 1.0;
    return F;
}

Vector subsystemG() {
    Vector G(4);
    G << 0.0, 1e-4, 1.3e-3, 5e-2;
    return G;
}

Matrix stateMatrix() {
    Matrix A = Matrix::Zero(kStateDim, kStateDim);
    A.topLeftCorner(4, 4) = subsystemF();
    A.bottomRightCorner(4, 4) = subsystemF();
    return A;
}

Matrix inputMatrix() {
    Matrix B = Matrix::Zero(kStateDim, kInputDim);
    B.block(0, 0, 4, 1) = subsystemG();
    B.block(4, 1, 4, 1) = subsystemG();
    return B;
}

PeriodicLtvSystem buildSystem(const Config& config) {
    config.validate();
    return PeriodicLtvSystem::timeInvariant(stateMatrix(), inputMatrix(), config.period);
}

Polytope constraintPolytope(const Config& config) {
    const int d = kStateDim + kInputDim;
    Polytope poly{Matrix::Zero(12, d), Vector::Zero(12)};
    int row = 0;
    for (double s1 : {1.0, -1.0})
        for (double s2 : {1.0, -1.0}) {
            poly.G(row, kPosition1) = s1;
            poly.G(row, kPosition2) = s2;
            poly.h(row++) = config.diamond_bound;
        }
    for (int idx : {kAngle1, kAngle2})
        for (double s : {1.0, -1.0}) {
            poly.G(row, idx) = s;
            poly.h(row++) = config.angle_bound;
        }
    for (int i = 0; i < kInputDim; ++i)
        for (double s : {1.0, -1.0}) {
            poly.G(row, kStateDim + i) = s;
            poly.h(row++) = config.input_bound;
        }
    return poly;
}

PeriodicConstraintSet buildConstraints(const Config& config) {
    config.validate();
    return PeriodicConstraintSet::replicated(constraintPolytope(config), config.period, kStateDim, kInputDim);
}

std::vector<Vector> starReference(const Config& config) {
    config.validate();
    const int V = config.star_vertices;
    const int per_edge = config.period / V;
    std::vector<Eigen::Vector2d> vertices;
    for (int i = 0; i < V; ++i) {
        const double angle = (config.star_phase_deg + 360.0 * i / V) * std::numbers::pi / 180.0;
        vertices.emplace_back(config.star_radius * std::cos(angle), config.star_radius * std::sin(angle));
    }
    // Pentagram order: each vertex connects to the one two positions ahead.
    std::vector<int> order;
    for (int e = 0; e < V; ++e) order.push_back((2 * e) % V);

    std::vector<Vector> ref;
    ref.reserve(static_cast<std::size_t>(config.period));
    for (int j = 0; j < config.period; ++j) {
        const int edge = j / per_edge;
        const double t = static_cast<double>(j % per_edge) / per_edge;
        const Eigen::Vector2d& a = vertices[static_cast<std::size_t>(order[static_cast<std::size_t>(edge)])];
        const Eigen::Vector2d& b = vertices[static_cast<std::size_t>(order[static_cast<std::size_t>((edge + 1) % V)])];
        const Eigen::Vector2d pos = a + t * (b - a);
        Vector x = Vector::Zero(kStateDim);
        x(kPosition1) = pos.x();
        x(kPosition2) = pos.y();
        ref.push_back(x);
    }
    return ref;
}

Matrix positionWeight(const Config& config) {
    Matrix E = Matrix::Zero(kStateDim, kStateDim);
    E(kPosition1, kPosition1) = config.position_weight;
    E(kPosition2, kPosition2) = config.position_weight;
    return E;
}

TrackingWeights trackingWeights(const Config& config) {
    return TrackingWeights(config.state_weight * Matrix::Identity(kStateDim, kStateDim),
                           config.input_weight * Matrix::Identity(kInputDim, kInputDim));
}

MpcSetup buildSetup(const Config& config) {
    MpcSetup setup{buildSystem(config), buildConstraints(config), trackingWeights(config), config.horizon};
    setup.validate();
    return setup;
}

InputPolynomial motorPolynomial(const Config& config) {
    return InputPolynomial{config.motor_a, config.motor_b, config.motor_c};
}

std::shared_ptr<const QuadraticReferenceCost> scenario1Cost(const Config& config) {
    return std::make_shared<QuadraticReferenceCost>(positionWeight(config), starReference(config), kInputDim);
}

std::shared_ptr<const ReferencePlusInputPolynomialCost> scenario2Cost(const Config& config) {
    return std::make_shared<ReferencePlusInputPolynomialCost>(positionWeight(config), starReference(config),
                                                              kInputDim, motorPolynomial(config),
                                                              config.operating_box);
}

qp::SolverConfig scenarioSolver(const Config& config, int scenario, qp::SolverConfig base) {
    if (scenario == 2) {
        base.eps_feas = std::min(base.eps_feas, config.scenario2_qp_eps);
        base.eps_opt = std::min(base.eps_opt, config.scenario2_qp_eps);
    }
    return base;
}

Vector initialState() { return Vector::Zero(kStateDim); }

}  // namespace pemc::ballplate
