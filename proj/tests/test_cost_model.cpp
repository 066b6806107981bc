#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "pemc/cost_model.hpp"
#include "test_support.hpp"

using namespace pemc;
using pemc::testing::randomVector;

namespace {

std::vector<Vector> circleReference(int T, int n) {
    std::vector<Vector> ref;
    for (int j = 0; j < T; ++j) {
        Vector r = Vector::Zero(n);
        r(0) = std::cos(2.0 * M_PI * j / T);
        if (n > 1) r(1) = std::sin(2.0 * M_PI * j / T);
        ref.push_back(r);
    }
    return ref;
}

// Central differences of an arbitrary scalar function of z = (x, u).
Vector numericGradient(const EconomicCost& c, TimeIndex k, const Vector& z, int n, const Parameter& p, double h) {
    Vector g(z.size());
    for (int i = 0; i < z.size(); ++i) {
        Vector zp = z, zm = z;
        zp(i) += h;
        zm(i) -= h;
        g(i) = (c.value(k, zp.head(n), zp.tail(z.size() - n), p) - c.value(k, zm.head(n), zm.tail(z.size() - n), p)) /
               (2.0 * h);
    }
    return g;
}

}  // namespace

TEST(QuadraticReferenceCost, ValuesAndScaledReference) {
    Matrix E = Matrix::Zero(3, 3);
    E(0, 0) = 700.0;
    E(2, 2) = 2.0;
    QuadraticReferenceCost c(E, circleReference(4, 3), 1);
    Vector x = Vector::Zero(3), u = Vector::Zero(1);
    x(0) = 1.0;
    EXPECT_DOUBLE_EQ(c.value(0, x, u, {}), 0.0);
    x(0) = 2.0;
    EXPECT_DOUBLE_EQ(c.value(4, x, u, {}), 700.0);
    Parameter p(1);
    p << 2.0;
    EXPECT_DOUBLE_EQ(c.value(0, x, u, p), 0.0);
    EXPECT_DOUBLE_EQ(c.lipschitz(), 1400.0);
    const auto qf = c.quadraticForm(1, {});
    ASSERT_TRUE(qf.has_value());
    std::mt19937_64 rng(1);
    const Vector z = randomVector(rng, 4);
    EXPECT_NEAR(0.5 * z.dot(qf->H * z) + qf->g.dot(z) + qf->c, c.value(1, z.head(3), z.tail(1), {}), 1e-9);
}

TEST(QuadraticReferenceCost, GradientMatchesCentralDifferences) {
    std::mt19937_64 rng(2);
    Matrix E = pemc::testing::randomSpd(rng, 3, 0.1, 10.0);
    QuadraticReferenceCost c(E, circleReference(5, 3), 2);
    for (int t = 0; t < 20; ++t) {
        const Vector z = randomVector(rng, 5, 3.0);
        const Vector g = c.evaluate(t, z.head(3), z.tail(2), {}).gradient;
        EXPECT_LT((g - numericGradient(c, t, z, 3, {}, 1e-5)).lpNorm<Eigen::Infinity>(), 1e-5);
        EXPECT_LT(gradientCheck(c, t, z.head(3), z.tail(2), {}), 1e-5);
    }
}

TEST(InputPolynomial, PrintedCoefficientValues) {
    const InputPolynomial poly{4000.0, 6800.0, 4000.0};
    EXPECT_DOUBLE_EQ(poly.value(0.0), 0.0);
    EXPECT_DOUBLE_EQ(poly.value(1.0), 1200.0);
    EXPECT_DOUBLE_EQ(poly.derivative(0.5), 1350.0);
    EXPECT_DOUBLE_EQ(poly.second(0.0), 8000.0);
}

TEST(InputPolynomial, MaxAbsSecondMatchesDenseGrid) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> coef(0.0, 10.0), box(0.1, 3.0);
    for (int t = 0; t < 50; ++t) {
        const InputPolynomial poly{coef(rng), coef(rng), coef(rng)};
        const double b = box(rng);
        double grid = 0.0;
        for (int i = 0; i <= 200000; ++i) grid = std::max(grid, std::abs(poly.second(-b + 2.0 * b * i / 200000.0)));
        const double analytic = poly.maxAbsSecond(b);
        EXPECT_GE(analytic, grid * (1.0 - 1e-12));
        EXPECT_LE(analytic, grid * (1.0 + 1e-6) + 1e-12);
    }
}

TEST(ReferencePlusInputPolynomialCost, MotorTermGradientAndRho) {
    Matrix E = Matrix::Zero(2, 2);
    E(0, 0) = 700.0;
    const InputPolynomial poly{4000.0, 6800.0, 4000.0};
    ReferencePlusInputPolynomialCost c(E, circleReference(6, 2), 2, poly, 2.0);
    Vector u(2);
    u << 1.0, 0.0;
    EXPECT_DOUBLE_EQ(c.inputTerm(u, {}), 1200.0);
    u << 0.5, 0.5;
    const Vector g = c.evaluate(0, Vector::Zero(2), u, {}).gradient;
    EXPECT_NEAR(g(2), 1350.0, 1e-9);
    EXPECT_NEAR(g(3), 1350.0, 1e-9);
    EXPECT_DOUBLE_EQ(c.lipschitz(), std::max(1400.0, poly.maxAbsSecond(2.0)));
    Parameter p(2);
    p << 1.0, 0.5;
    EXPECT_DOUBLE_EQ(c.inputTerm(u, p), 0.5 * c.inputTerm(u, {}));

    std::mt19937_64 rng(8);
    for (int t = 0; t < 20; ++t) {
        const Vector z = randomVector(rng, 4, 1.0);
        EXPECT_LT(gradientCheck(c, t, z.head(2), z.tail(2), {}, 1e-5), 1e-4);
    }
}

TEST(Majorization, UpperBoundOnRandomPairs) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        auto pb = pemc::testing::randomPeriodicProblem(rng, 2, 1, 4, 4);
        Trajectory za, hat;
        for (int j = 0; j < 4; ++j) {
            za.states.push_back(randomVector(rng, 2, 2.0));
            za.inputs.push_back(randomVector(rng, 1, 1.0));
            hat.states.push_back(randomVector(rng, 2, 2.0));
            hat.inputs.push_back(randomVector(rng, 1, 1.0));
        }
        const double o = offsetCost(*pb.cost, za, {});
        EXPECT_GE(majorizationGap(*pb.cost, za, hat, {}), -1e-9 * (1.0 + std::abs(o)));
        EXPECT_GE(majorizationGap(*pb.cost, za, hat, {}, true), -1e-9 * (1.0 + std::abs(o)));
        EXPECT_NEAR(majorizationGap(*pb.cost, hat, hat, {}), 0.0, 1e-9);
    }
}

TEST(Majorization, UndersizedRhoBreaksTheBound) {
    std::mt19937_64 rng(10);
    auto pb = pemc::testing::randomPeriodicProblem(rng, 2, 1, 3, 3);
    LipschitzOverride small(pb.cost, 1e-3);
    Trajectory za, hat;
    for (int j = 0; j < 3; ++j) {
        za.states.push_back(Vector::Constant(2, 1.0));
        za.inputs.push_back(Vector::Constant(1, 1.0));
        hat.states.push_back(Vector::Zero(2));
        hat.inputs.push_back(Vector::Zero(1));
    }
    EXPECT_LT(majorizationGap(small, za, hat, {}), 0.0);
}

TEST(Trajectories, ArtificialRolloutRotationAndReanchor) {
    std::mt19937_64 rng(12);
    auto pb = pemc::testing::randomPeriodicProblem(rng, 2, 1, 5, 5);
    const auto& sys = pb.setup.system;
    std::vector<Vector> inputs;
    for (int j = 0; j < 5; ++j) inputs.push_back(randomVector(rng, 1));
    Trajectory t = makeArtificial(sys, 3, randomVector(rng, 2), inputs);
    ASSERT_EQ(t.states.size(), 5u);
    EXPECT_LT((t.states[1] - sys.step(3, t.states[0], t.inputs[0])).norm(), 1e-12);

    const Trajectory r = rotate(t, 2);
    EXPECT_EQ(r.anchor, 5);
    EXPECT_EQ(r.states[0], t.states[2]);
    EXPECT_EQ(r.inputs[4], t.inputs[1]);
    const Trajectory back = reanchor(r, 3);
    EXPECT_EQ(back.states[0], t.states[0]);
    EXPECT_EQ(reanchor(t, 13).states[0], t.states[0]);

    const Trajectory plan = makePlan(sys, 0, Vector::Zero(2), inputs);
    EXPECT_EQ(plan.states.size(), 6u);
}

TEST(Trajectories, PeriodicDefectOfAFixedPoint) {
    auto sys = PeriodicLtvSystem::timeInvariant(Matrix::Identity(1, 1) * 0.5, Matrix::Identity(1, 1), 3);
    Trajectory t;
    for (int j = 0; j < 3; ++j) {
        t.states.push_back(Vector::Constant(1, 2.0));
        t.inputs.push_back(Vector::Constant(1, 1.0));
    }
    EXPECT_NEAR(periodicDefect(sys, t), 0.0, 1e-15);
    t.inputs[2](0) = 0.0;
    EXPECT_NEAR(periodicDefect(sys, t), 1.0, 1e-15);
}

TEST(TrackingCost, DirectSumOfStageCosts) {
    TrackingWeights w(2.0 * Matrix::Identity(1, 1), 3.0 * Matrix::Identity(1, 1));
    EXPECT_DOUBLE_EQ(trackingStageCost(w, Vector::Constant(1, 1.0), Vector::Constant(1, 2.0)), 2.0 + 12.0);
    EXPECT_THROW(TrackingWeights(Matrix::Zero(1, 1), Matrix::Identity(1, 1)), std::invalid_argument);
}

TEST(EstimateRho, NeverExceedsAnalyticConstantForQuadratics) {
    std::mt19937_64 rng(13);
    auto pb = pemc::testing::randomPeriodicProblem(rng, 2, 1, 3, 3);
    SamplingBox box{Vector::Constant(3, -2.0), Vector::Constant(3, 2.0)};
    const auto est = estimateRho(*pb.cost, pb.setup.constraints, box, 500, 1);
    EXPECT_LE(est.sampled_max, pb.cost->lipschitz() * (1.0 + 1e-9));
    EXPECT_GT(est.sampled_max, 0.0);
    EXPECT_DOUBLE_EQ(est.estimate, 1.1 * est.sampled_max);
    SamplingBox outside{Vector::Constant(3, 5.0), Vector::Constant(3, 6.0)};
    EXPECT_THROW(estimateRho(*pb.cost, pb.setup.constraints, outside, 10, 1), std::invalid_argument);
}
