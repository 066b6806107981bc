#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "pemc/qp.hpp"
#include "test_support.hpp"

using namespace pemc;
using namespace pemc::qp;
using pemc::testing::randomQp;

namespace {

double relErr(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

// Equality-constrained QP solved through its dense KKT system, independent of the library.
Vector kktSolve(const QpProblem& p) {
    const int d = p.dim(), e = p.numEq();
    Matrix K = Matrix::Zero(d + e, d + e);
    K.topLeftCorner(d, d) = Matrix(p.P);
    K.topRightCorner(d, e) = Matrix(p.Aeq).transpose();
    K.bottomLeftCorner(e, d) = Matrix(p.Aeq);
    Vector rhs(d + e);
    rhs << -p.q, p.beq;
    return K.fullPivLu().solve(rhs).head(d);
}

}  // namespace

TEST(Oracle, MatchesDenseKktWithoutInequalities) {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 20; ++t) {
        QpProblem p = randomQp(rng, 5, 2, 0);
        const auto sol = solveOracle(p);
        ASSERT_TRUE(sol.optimal());
        EXPECT_LT((sol.w - kktSolve(p)).norm(), 1e-9);
    }
}

TEST(Oracle, RejectsLargeProblems) {
    std::mt19937_64 rng(2);
    EXPECT_THROW(solveOracle(randomQp(rng, 20, 2, 4)), std::invalid_argument);
}

class SolverAgainstOracle : public ::testing::TestWithParam<QpMethod> {};

TEST_P(SolverAgainstOracle, RandomTinyStrictlyConvexQps) {
    std::mt19937_64 rng(3);
    SolverConfig cfg;
    cfg.method = GetParam();
    cfg.interior_point_fallback = false;
    for (int t = 0; t < 100; ++t) {
        std::uniform_int_distribution<int> dd(2, 8), de(0, 2), di(1, 10);
        const int d = dd(rng);
        QpProblem p = randomQp(rng, d, std::min(de(rng), d - 1), di(rng));
        const auto ref = solveOracle(p);
        ASSERT_TRUE(ref.optimal());
        const auto sol = solve(p, cfg);
        ASSERT_TRUE(sol.optimal()) << toString(sol.status) << " trial " << t;
        EXPECT_LT(relErr(sol.objective, ref.objective), 1e-5);
        EXPECT_LT((sol.w - ref.w).norm() / std::max(1.0, ref.w.norm()), 1e-5);
        const auto r = kktResiduals(p, sol.w, sol.y_eq, sol.y_in);
        EXPECT_LT(r.primal, 1e-6);
        EXPECT_LT(r.dual, 1e-6);
        EXPECT_LT(r.dual_sign, 1e-6);
    }
}

INSTANTIATE_TEST_SUITE_P(Methods, SolverAgainstOracle, ::testing::Values(QpMethod::Admm, QpMethod::InteriorPoint));

TEST(Solver, DetectsPrimalInfeasibility) {
    QpProblem p;
    p.P = Matrix::Identity(2, 2).sparseView();
    p.q = Vector::Zero(2);
    p.Aeq = SparseMatrix(0, 2);
    p.beq = Vector(0);
    Matrix Ain(2, 2);
    Ain << 1, 0, -1, 0;
    p.Ain = Ain.sparseView();
    p.bin = Vector(2);
    p.bin << -1.0, -1.0;  // w0 <= -1 and w0 >= 1
    for (QpMethod m : {QpMethod::Admm, QpMethod::InteriorPoint}) {
        SolverConfig cfg;
        cfg.method = m;
        const auto sol = solve(p, cfg);
        EXPECT_EQ(sol.status, QpStatus::PrimalInfeasible) << toString(m);
        ASSERT_EQ(sol.infeasibility_certificate.size(), 2);
        // Farkas: y >= 0, Ain' y = 0, bin' y < 0.
        const Vector y = sol.infeasibility_certificate;
        EXPECT_GE(y.minCoeff(), -1e-9);
        EXPECT_LT((Ain.transpose() * y).norm(), 1e-6 * y.norm());
        EXPECT_LT(p.bin.dot(y), 0.0);
    }
}

TEST(Solver, WarmStartAtTheOptimumConvergesQuickly) {
    std::mt19937_64 rng(4);
    QpProblem p = randomQp(rng, 30, 5, 40);
    SolverConfig cfg;
    cfg.polish = false;
    const auto cold = solve(p, cfg);
    ASSERT_TRUE(cold.optimal());
    cfg.warm_start = WarmStart{cold.w, cold.y_eq, cold.y_in};
    const auto warm = solve(p, cfg);
    ASSERT_TRUE(warm.optimal());
    EXPECT_LE(warm.iterations, cold.iterations);
    EXPECT_LT(relErr(warm.objective, cold.objective), 1e-5);
}

TEST(Solver, MissingFallbackLeavesMaxIterations) {
    std::mt19937_64 rng(5);
    QpProblem p = randomQp(rng, 10, 2, 10);
    SolverConfig cfg;
    cfg.max_iterations = 1;
    cfg.check_interval = 1;
    cfg.polish = false;
    cfg.interior_point_fallback = false;
    EXPECT_EQ(solve(p, cfg).status, QpStatus::MaxIterations);
    cfg.interior_point_fallback = true;
    EXPECT_TRUE(solve(p, cfg).optimal());
}

TEST(Problem, ValidateRejectsInconsistentData) {
    std::mt19937_64 rng(6);
    QpProblem p = randomQp(rng, 4, 1, 2);
    EXPECT_NO_THROW(p.validate());
    QpProblem bad = p;
    bad.q = Vector::Zero(3);
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = p;
    Matrix P = Matrix(p.P);
    P(0, 1) += 1.0;
    bad.P = P.sparseView();
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = p;
    bad.P = (-Matrix::Identity(4, 4)).sparseView();
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Problem, TextDumpRoundTripsBitForBit) {
    std::mt19937_64 rng(7);
    QpProblem p = randomQp(rng, 6, 2, 5);
    p.layout = {{"a", 0, 3}, {"b", 3, 3}};
    std::stringstream ss;
    writeQp(ss, p);
    const QpProblem q = readQp(ss);
    EXPECT_EQ(Matrix(q.P), Matrix(p.P));
    EXPECT_EQ(q.q, p.q);
    EXPECT_EQ(Matrix(q.Aeq), Matrix(p.Aeq));
    EXPECT_EQ(q.beq, p.beq);
    EXPECT_EQ(Matrix(q.Ain), Matrix(p.Ain));
    EXPECT_EQ(q.bin, p.bin);
    ASSERT_EQ(q.layout.size(), 2u);
    EXPECT_EQ(q.layout[1].name, "b");
    std::stringstream garbage("not a qp");
    EXPECT_THROW(readQp(garbage), std::runtime_error);
}

TEST(Problem, ConditionReportOfDiagonalHessian) {
    QpProblem p;
    Vector d(3);
    d << 1.0, 4.0, 100.0;
    p.P = Matrix(d.asDiagonal()).sparseView();
    p.q = Vector::Zero(3);
    p.Aeq = SparseMatrix(0, 3);
    p.beq = Vector(0);
    p.Ain = SparseMatrix(0, 3);
    p.bin = Vector(0);
    const auto r = conditionReport(p);
    EXPECT_NEAR(r.lambda_max, 100.0, 1e-6);
    EXPECT_NEAR(r.lambda_min, 1.0, 1e-6);
}

TEST(SolverConfig, ValidateRejectsNonPositiveTolerances) {
    SolverConfig c;
    c.eps_feas = 0.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = SolverConfig{};
    c.max_iterations = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}
