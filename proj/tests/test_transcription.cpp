#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "pemc/ballplate.hpp"
#include "pemc/drto.hpp"
#include "pemc/transcription.hpp"
#include "test_support.hpp"

using namespace pemc;
using pemc::testing::randomPeriodicProblem;
using pemc::testing::randomVector;

namespace {

PlanPair randomPair(std::mt19937_64& rng, int n, int m, int N, int T) {
    PlanPair pp;
    for (int i = 0; i <= N; ++i) pp.plan.states.push_back(randomVector(rng, n));
    for (int i = 0; i < N; ++i) pp.plan.inputs.push_back(randomVector(rng, m));
    for (int j = 0; j < T; ++j) {
        pp.artificial.states.push_back(randomVector(rng, n));
        pp.artificial.inputs.push_back(randomVector(rng, m));
    }
    return pp;
}

// S + O-hat written out term by term from the stage costs and their gradients.
double directObjective(const MpcSetup& setup, const EconomicCost& cost, const PlanPair& pp, const Trajectory& hat,
                       TimeIndex k) {
    const double rho = cost.lipschitz();
    double v = 0.0;
    for (int i = 0; i < setup.horizon; ++i) {
        const Vector dx = pp.plan.states[i] - pp.artificial.states[i];
        const Vector du = pp.plan.inputs[i] - pp.artificial.inputs[i];
        v += dx.dot(setup.weights.Q * dx) + du.dot(setup.weights.R * du);
    }
    for (int j = 0; j < setup.period(); ++j) {
        const auto e = cost.evaluate(k + j, hat.states[j], hat.inputs[j], {});
        Vector dz(hat.states[j].size() + hat.inputs[j].size());
        dz << pp.artificial.states[j] - hat.states[j], pp.artificial.inputs[j] - hat.inputs[j];
        v += e.value + e.gradient.dot(dz) + 0.5 * rho * dz.squaredNorm();
    }
    return v;
}

double maxInfeasibility(const MpcSetup& setup, TimeIndex k, const Vector& x, const PlanPair& pp) {
    const auto& sys = setup.system;
    const int N = setup.horizon, T = setup.period();
    double r = (pp.plan.states[0] - x).lpNorm<Eigen::Infinity>();
    for (int i = 0; i < N; ++i) {
        const Vector next = sys.A(k + i) * pp.plan.states[i] + sys.B(k + i) * pp.plan.inputs[i];
        r = std::max(r, (pp.plan.states[i + 1] - next).lpNorm<Eigen::Infinity>());
        r = std::max(r, setup.constraints.contains(k + i, pp.plan.states[i], pp.plan.inputs[i]).worst_violation);
    }
    for (int j = 0; j < T; ++j) {
        const Vector next = sys.A(k + j) * pp.artificial.states[j] + sys.B(k + j) * pp.artificial.inputs[j];
        r = std::max(r, (pp.artificial.states[(j + 1) % T] - next).lpNorm<Eigen::Infinity>());
        r = std::max(r,
                     setup.constraints.contains(k + j, pp.artificial.states[j], pp.artificial.inputs[j]).worst_violation);
    }
    r = std::max(r, (pp.plan.states[N] - pp.artificial.states[N % T]).lpNorm<Eigen::Infinity>());
    return r;
}

}  // namespace

TEST(VariableLayout, OffsetsFollowTheBlockOrder) {
    VariableLayout L{2, 1, 3, 4, true};
    EXPECT_EQ(L.dim(), 2 * 4 + 1 * 3 + 2 * 4 + 1 * 4);
    EXPECT_EQ(L.x(3), 6);
    EXPECT_EQ(L.u(0), 8);
    EXPECT_EQ(L.xa(0), 11);
    EXPECT_EQ(L.ua(0), 19);
    EXPECT_EQ(L.blocks().size(), 4u);
    VariableLayout P{2, 1, 0, 4, false};
    EXPECT_EQ(P.dim(), 12);
    EXPECT_EQ(P.xa(0), 0);
}

TEST(SingleLayerQp, AssembleExtractRoundTrip) {
    std::mt19937_64 rng(1);
    auto pb = randomPeriodicProblem(rng, 3, 2, 5, 4);
    const Trajectory hat = makeArtificial(pb.setup.system, 0, Vector::Zero(3), std::vector<Vector>(5, Vector::Zero(2)));
    const auto tp = buildSingleLayerQp(pb.setup, *pb.cost, 0, Vector::Zero(3), hat, {});
    const PlanPair pp = randomPair(rng, 3, 2, 4, 5);
    const Vector w = tp.assemble(pp);
    ASSERT_EQ(w.size(), tp.layout.dim());
    const PlanPair back = tp.extract(w);
    EXPECT_EQ(pemc::testing::trajectoryDistance(back.plan, pp.plan), 0.0);
    EXPECT_EQ(pemc::testing::trajectoryDistance(back.artificial, pp.artificial), 0.0);
    EXPECT_EQ(Vector(tp.assembleArtificial(pp.artificial).tail(5 * 5)), Vector(w.tail(5 * 5)));
}

TEST(SingleLayerQp, FullObjectiveEqualsDirectSum) {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 10; ++t) {
        auto pb = randomPeriodicProblem(rng, 2, 1, 4, 1 + t % 4);
        std::vector<Vector> u;
        for (int j = 0; j < 4; ++j) u.push_back(randomVector(rng, 1, 0.5));
        const TimeIndex k = 3 + t;
        const Trajectory hat = makeArtificial(pb.setup.system, k, randomVector(rng, 2), u);
        const auto tp = buildSingleLayerQp(pb.setup, *pb.cost, k, randomVector(rng, 2), hat, {});
        const PlanPair pp = randomPair(rng, 2, 1, pb.setup.horizon, 4);
        const double ref = directObjective(pb.setup, *pb.cost, pp, hat, k);
        EXPECT_NEAR(tp.fullObjective(tp.assemble(pp)), ref, 1e-9 * (1.0 + std::abs(ref)));
    }
}

TEST(SingleLayerQp, OptimumSatisfiesEveryConstraintFamily) {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 10; ++t) {
        auto pb = randomPeriodicProblem(rng, 2, 1, 5, 2 + t % 4);
        const TimeIndex k = t;
        const Vector x = randomVector(rng, 2, 0.3);
        const auto init = buildInitializerQp(pb.setup, k, x);
        const auto s0 = qp::solve(init.qp);
        ASSERT_TRUE(s0.optimal());
        const Trajectory hat = init.extractArtificial(s0.w);
        const auto tp = buildSingleLayerQp(pb.setup, *pb.cost, k, x, hat, {});
        const auto sol = qp::solve(tp.qp);
        ASSERT_TRUE(sol.optimal());
        const PlanPair pp = tp.extract(sol.w);
        EXPECT_LT(maxInfeasibility(pb.setup, k, x, pp), 1e-6);
        EXPECT_LT(tp.constraintViolation(sol.w), 1e-6);
        EXPECT_EQ(pp.artificial.anchor, k);
    }
}

TEST(InitializerQp, ZeroStateGivesZeroSolution) {
    std::mt19937_64 rng(4);
    auto pb = randomPeriodicProblem(rng, 3, 1, 4, 4);
    const auto tp = buildInitializerQp(pb.setup, 0, Vector::Zero(3));
    const auto sol = qp::solve(tp.qp);
    ASSERT_TRUE(sol.optimal());
    EXPECT_LT(sol.w.lpNorm<Eigen::Infinity>(), 1e-6);
    EXPECT_NEAR(tp.fullObjective(sol.w), 0.0, 1e-9);
}

TEST(TrackingQp, ZeroCostWhenTheReferenceIsReachable) {
    std::mt19937_64 rng(5);
    auto pb = randomPeriodicProblem(rng, 2, 1, 4, 4);
    const auto init = buildInitializerQp(pb.setup, 0, Vector::Constant(2, 0.1));
    const auto s0 = qp::solve(init.qp);
    ASSERT_TRUE(s0.optimal());
    const PlanPair pp = init.extract(s0.w);
    // Start on the reference orbit itself.
    const auto tp = buildTrackingQp(pb.setup, 0, pp.artificial.states[0], pp.artificial);
    const auto sol = qp::solve(tp.qp);
    ASSERT_TRUE(sol.optimal());
    EXPECT_NEAR(tp.fullObjective(sol.w), 0.0, 1e-8);
}

TEST(Transcription, ConstraintViolationSeesPerturbations) {
    std::mt19937_64 rng(6);
    auto pb = randomPeriodicProblem(rng, 2, 1, 3, 3);
    const auto tp = buildInitializerQp(pb.setup, 0, Vector::Constant(2, 0.2));
    auto sol = qp::solve(tp.qp);
    ASSERT_TRUE(sol.optimal());
    Vector w = sol.w;
    w(tp.layout.x(1)) += 0.25;
    EXPECT_NEAR(tp.constraintViolation(w), 0.25, 1e-6);
}

TEST(Transcription, TextRoundTrip) {
    std::mt19937_64 rng(7);
    auto pb = randomPeriodicProblem(rng, 2, 1, 3, 2);
    const Trajectory hat = makeArtificial(pb.setup.system, 5, Vector::Zero(2), std::vector<Vector>(3, Vector::Zero(1)));
    const auto tp = buildSingleLayerQp(pb.setup, *pb.cost, 5, Vector::Constant(2, 0.1), hat, {});
    std::stringstream ss;
    writeTranscribed(ss, tp);
    const auto back = readTranscribed(ss);
    EXPECT_EQ(back.anchor, 5);
    EXPECT_EQ(back.constant_offset, tp.constant_offset);
    EXPECT_EQ(back.layout.dim(), tp.layout.dim());
    const Vector w = randomVector(rng, tp.layout.dim());
    EXPECT_EQ(back.fullObjective(w), tp.fullObjective(w));
}

TEST(Transcription, ExactModelsRequireQuadraticCost) {
    ballplate::Config c;
    EXPECT_THROW(exactModels(*ballplate::scenario2Cost(c), 0, c.period, {}), std::invalid_argument);
    EXPECT_EQ(exactModels(*ballplate::scenario1Cost(c), 0, c.period, {}).size(), static_cast<std::size_t>(c.period));
}

TEST(MpcSetup, ValidateRejectsBadHorizon) {
    std::mt19937_64 rng(8);
    auto pb = randomPeriodicProblem(rng, 2, 1, 3, 3);
    MpcSetup s = pb.setup;
    s.horizon = 4;
    EXPECT_THROW(s.validate(), std::invalid_argument);
    s.horizon = 0;
    EXPECT_THROW(s.validate(), std::invalid_argument);
}
