#include "pemc/qp.hpp"
#include "pemc/numfmt.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

namespace pemc::qp {

const char* toString(QpStatus status) {
    switch (status) {
        case QpStatus::Optimal: return "optimal";
        case QpStatus::PrimalInfeasible: return "primal-infeasible";
        case QpStatus::MaxIterations: return "max-iterations";
        case QpStatus::NumericalFailure: return "numerical-failure";
    }
    return "unknown";
}

double QpProblem::objective(const Vector& w) const { return 0.5 * w.dot(P * w) + q.dot(w); }

void QpProblem::validate() const {
    const int d = dim();
    if (P.rows() != d || P.cols() != d) throw std::invalid_argument("QpProblem: P must be d x d");
    if (Aeq.rows() != numEq() || (numEq() > 0 && Aeq.cols() != d))
        throw std::invalid_argument("QpProblem: Aeq/beq size mismatch");
    if (Ain.rows() != numIneq() || (numIneq() > 0 && Ain.cols() != d))
        throw std::invalid_argument("QpProblem: Ain/bin size mismatch");
    if (!q.allFinite() || !beq.allFinite() || !bin.allFinite())
        throw std::invalid_argument("QpProblem: non-finite vector data");

    double pmax = 0.0;
    for (int c = 0; c < P.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(P, c); it; ++it) pmax = std::max(pmax, std::abs(it.value()));
    const SparseMatrix asym = SparseMatrix(P.transpose()) - P;
    double amax = 0.0;
    for (int c = 0; c < asym.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(asym, c); it; ++it) amax = std::max(amax, std::abs(it.value()));
    if (amax > 1e-12 * (1.0 + pmax)) throw std::invalid_argument("QpProblem: P is not symmetric");

    if (d == 0) return;
    // PSD probe: LDL' of P + eps I must have a nonnegative diagonal.
    const double eps = 1e-9 * (1.0 + pmax);
    SparseMatrix shifted = P;
    for (int i = 0; i < d; ++i) shifted.coeffRef(i, i) += eps;
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(shifted);
    if (ldlt.info() != Eigen::Success) throw std::invalid_argument("QpProblem: P is not positive semidefinite");
    const Vector diag = ldlt.vectorD();
    if (diag.minCoeff() < -eps) throw std::invalid_argument("QpProblem: P is not positive semidefinite");
}

// ---------------------------------------------------------------------------
// Active-set enumeration oracle

QpSolution solveOracle(const QpProblem& prob) {
    constexpr int kMaxDim = 12;
    constexpr int kMaxIneq = 16;
    const auto t_start = std::chrono::steady_clock::now();
    prob.validate();
    const int d = prob.dim();
    const int e = prob.numEq();
    const int r = prob.numIneq();
    if (d > kMaxDim || r > kMaxIneq) throw std::invalid_argument("solveOracle: instance too large for enumeration");

    const Eigen::MatrixXd P = Eigen::MatrixXd(prob.P);
    const Eigen::MatrixXd Aeq = Eigen::MatrixXd(prob.Aeq);
    const Eigen::MatrixXd Ain = Eigen::MatrixXd(prob.Ain);
    const double scale = 1.0 + std::max({P.cwiseAbs().maxCoeff(), prob.q.size() ? prob.q.cwiseAbs().maxCoeff() : 0.0,
                                         Ain.size() ? Ain.cwiseAbs().maxCoeff() : 0.0,
                                         prob.bin.size() ? prob.bin.cwiseAbs().maxCoeff() : 0.0});
    const double feas_tol = 1e-9 * scale;

    QpSolution best;
    best.status = QpStatus::PrimalInfeasible;
    std::vector<int> best_set;
    bool have_best = false;
    bool any_feasible = false;

    // Visit subsets ordered by size then lexicographically so the first of equal-objective
    // candidates is the lexicographically smallest active set.
    std::vector<std::vector<int>> subsets;
    subsets.reserve(std::size_t{1} << r);
    for (unsigned mask = 0; mask < (1u << r); ++mask) {
        std::vector<int> s;
        for (int i = 0; i < r; ++i)
            if (mask & (1u << i)) s.push_back(i);
        if (static_cast<int>(s.size()) + e <= d) subsets.push_back(std::move(s));
    }
    std::sort(subsets.begin(), subsets.end());

    for (const auto& act : subsets) {
        const int a = static_cast<int>(act.size());
        const int k = d + e + a;
        Eigen::MatrixXd K = Eigen::MatrixXd::Zero(k, k);
        Eigen::VectorXd rhs(k);
        K.topLeftCorner(d, d) = P;
        rhs.head(d) = -prob.q;
        if (e > 0) {
            K.block(d, 0, e, d) = Aeq;
            K.block(0, d, d, e) = Aeq.transpose();
            rhs.segment(d, e) = prob.beq;
        }
        for (int j = 0; j < a; ++j) {
            K.block(d + e + j, 0, 1, d) = Ain.row(act[static_cast<std::size_t>(j)]);
            K.block(0, d + e + j, d, 1) = Ain.row(act[static_cast<std::size_t>(j)]).transpose();
            rhs(d + e + j) = prob.bin(act[static_cast<std::size_t>(j)]);
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
        if (!lu.isInvertible()) continue;
        const Eigen::VectorXd sol = lu.solve(rhs);
        if (!sol.allFinite() || (K * sol - rhs).lpNorm<Eigen::Infinity>() > 1e-9 * scale) continue;
        const Eigen::VectorXd w = sol.head(d);
        if (r > 0 && (Ain * w - prob.bin).maxCoeff() > feas_tol) continue;
        if (e > 0 && (Aeq * w - prob.beq).lpNorm<Eigen::Infinity>() > feas_tol) continue;
        any_feasible = true;
        Eigen::VectorXd y_in = Eigen::VectorXd::Zero(r);
        for (int j = 0; j < a; ++j) y_in(act[static_cast<std::size_t>(j)]) = sol(d + e + j);
        if (r > 0 && y_in.minCoeff() < -1e-9 * scale) continue;
        const double obj = prob.objective(w);
        if (!have_best || obj < best.objective - 1e-12 * (1.0 + std::abs(obj))) {
            have_best = true;
            best.w = w;
            best.objective = obj;
            best.y_eq = e > 0 ? Eigen::VectorXd(sol.segment(d, e)) : Eigen::VectorXd();
            best.y_in = y_in;
            best_set = act;
        }
    }

    if (have_best) {
        best.status = QpStatus::Optimal;
        const KktResiduals res = kktResiduals(prob, best.w, best.y_eq, best.y_in);
        best.primal_residual = res.primal;
        best.dual_residual = res.dual;
    } else {
        best.status = any_feasible ? QpStatus::NumericalFailure : QpStatus::PrimalInfeasible;
        best.w = Eigen::VectorXd::Zero(d);
    }
    best.iterations = static_cast<int>(subsets.size());
    best.solve_time = std::chrono::steady_clock::now() - t_start;
    return best;
}

// ---------------------------------------------------------------------------

namespace {

double powerIteration(const SparseMatrix& P, double shift, int iterations) {
    const int d = static_cast<int>(P.rows());
    Vector v(d);
    for (int i = 0; i < d; ++i) v(i) = 1.0 + 0.01 * static_cast<double>(i % 7);
    v.normalize();
    double lambda = 0.0;
    for (int it = 0; it < iterations; ++it) {
        Vector w = shift * v - P * v;
        if (shift == 0.0) w = -w;
        const double nw = w.norm();
        if (nw == 0.0) return 0.0;
        const double next = v.dot(w);
        v = w / nw;
        if (it > 10 && std::abs(next - lambda) <= 1e-14 * std::max(1.0, std::abs(next))) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    return lambda;
}

}  // namespace

ConditionReport conditionReport(const QpProblem& prob, int iterations) {
    ConditionReport rep;
    rep.eq_norm = prob.Aeq.norm();
    rep.in_norm = prob.Ain.norm();
    if (prob.dim() == 0) return rep;
    rep.lambda_max = powerIteration(prob.P, 0.0, iterations);
    // Largest eigenvalue of (lambda_max I - P) gives lambda_max - lambda_min.
    rep.lambda_min = rep.lambda_max - powerIteration(prob.P, rep.lambda_max, iterations);
    rep.ratio = rep.lambda_min > 0.0 ? rep.lambda_max / rep.lambda_min : std::numeric_limits<double>::infinity();
    return rep;
}

// ---------------------------------------------------------------------------
// Text format

namespace {

using pemc::formatDouble;
using pemc::parseDouble;

void writeMatrix(std::ostream& os, const char* name, const SparseMatrix& m) {
    os << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
    for (int c = 0; c < m.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(m, c); it; ++it)
            os << it.row() << ' ' << it.col() << ' ' << formatDouble(it.value()) << '\n';
}

void writeVector(std::ostream& os, const char* name, const Vector& v) {
    os << "vector " << name << ' ' << v.size() << '\n';
    for (int i = 0; i < v.size(); ++i) os << formatDouble(v(i)) << '\n';
}

void expect(std::istream& is, const std::string& word) {
    std::string tok;
    if (!(is >> tok) || tok != word) throw std::runtime_error("readQp: expected '" + word + "', got '" + tok + "'");
}

SparseMatrix readMatrix(std::istream& is, const std::string& name) {
    expect(is, "matrix");
    expect(is, name);
    long rows = 0, cols = 0, nnz = 0;
    if (!(is >> rows >> cols >> nnz)) throw std::runtime_error("readQp: bad matrix header for " + name);
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(nnz));
    for (long k = 0; k < nnz; ++k) {
        int i = 0, j = 0;
        std::string v;
        if (!(is >> i >> j >> v)) throw std::runtime_error("readQp: truncated matrix " + name);
        t.emplace_back(i, j, parseDouble(v));
    }
    SparseMatrix m(rows, cols);
    m.setFromTriplets(t.begin(), t.end());
    m.makeCompressed();
    return m;
}

Vector readVector(std::istream& is, const std::string& name) {
    expect(is, "vector");
    expect(is, name);
    long size = 0;
    if (!(is >> size)) throw std::runtime_error("readQp: bad vector header for " + name);
    Vector v(size);
    for (long i = 0; i < size; ++i) {
        std::string tok;
        if (!(is >> tok)) throw std::runtime_error("readQp: truncated vector " + name);
        v(i) = parseDouble(tok);
    }
    return v;
}

}  // namespace

void writeQp(std::ostream& os, const QpProblem& p) {
    os << "pemc-qp 1\n";
    os << "dims " << p.dim() << ' ' << p.numEq() << ' ' << p.numIneq() << '\n';
    writeMatrix(os, "P", p.P);
    writeVector(os, "q", p.q);
    writeMatrix(os, "Aeq", p.Aeq);
    writeVector(os, "beq", p.beq);
    writeMatrix(os, "Ain", p.Ain);
    writeVector(os, "bin", p.bin);
    os << "layout " << p.layout.size() << '\n';
    for (const auto& b : p.layout) os << b.name << ' ' << b.offset << ' ' << b.length << '\n';
    os << "end\n";
}

QpProblem readQp(std::istream& is) {
    expect(is, "pemc-qp");
    int version = 0;
    if (!(is >> version) || version != 1) throw std::runtime_error("readQp: unsupported version");
    expect(is, "dims");
    int d = 0, e = 0, r = 0;
    if (!(is >> d >> e >> r)) throw std::runtime_error("readQp: bad dims");
    QpProblem p;
    p.P = readMatrix(is, "P");
    p.q = readVector(is, "q");
    p.Aeq = readMatrix(is, "Aeq");
    p.beq = readVector(is, "beq");
    p.Ain = readMatrix(is, "Ain");
    p.bin = readVector(is, "bin");
    expect(is, "layout");
    std::size_t blocks = 0;
    is >> blocks;
    for (std::size_t b = 0; b < blocks; ++b) {
        VariableBlock vb;
        if (!(is >> vb.name >> vb.offset >> vb.length)) throw std::runtime_error("readQp: bad layout entry");
        p.layout.push_back(vb);
    }
    expect(is, "end");
    if (p.dim() != d || p.numEq() != e || p.numIneq() != r) throw std::runtime_error("readQp: dims do not match data");
    return p;
}

}  // namespace pemc::qp
