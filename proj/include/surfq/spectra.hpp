#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "surfq/chart.hpp"
#include "surfq/discrete_operator.hpp"
#include "surfq/errors.hpp"

namespace surfq {

struct Cluster {
    double value = 0.0;
    int multiplicity = 0;
};

/// Greedy grouping of an ascending list: a value joins the current cluster when it lies within
/// rel_tol * max(|value|, floor) of the cluster mean.
inline std::vector<Cluster> cluster_degeneracies(const std::vector<double>& evals, double rel_tol = 0.02,
                                                 double floor = 1e-8)
{
    std::vector<Cluster> out;
    double sum = 0.0;
    for (double v : evals) {
        if (!out.empty() && std::abs(v - out.back().value) <= rel_tol * std::max(std::abs(v), floor)) {
            sum += v;
            ++out.back().multiplicity;
            out.back().value = sum / out.back().multiplicity;
        } else {
            out.push_back({v, 1});
            sum = v;
        }
    }
    return out;
}

enum class SolverKind { Auto, Dense, ShiftInvert };

struct SolveOptions {
    bool vectors = true;
    SolverKind solver = SolverKind::Auto;
    double cluster_tolerance = 0.02;
    /// Auto switches to the sparse shift-invert path above this dimension.
    int dense_limit = 1200;
    double convergence = 1e-11;
    int max_iterations = 2000;
};

struct SpectrumReport {
    std::string label;
    std::map<std::string, std::string> metadata;
    std::string solver;
    int dimension = 0;
    std::vector<double> eigenvalues;
    /// Columns are eigenvectors in the original basis, normalized in the weighted inner product.
    Eigen::MatrixXcd eigenvectors;
    std::vector<Cluster> clusters;
    /// ||K v - lambda W v|| / ||W v|| per pair, K = W H.
    std::vector<double> residuals;
    double max_residual = 0.0;
    int iterations = 0;
    std::vector<std::string> warnings;
};

namespace detail {

template <typename Scalar>
using DenseMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
Eigen::SparseMatrix<Scalar> symmetric_reduction(const DiscreteOperator<Scalar>& op)
{
    const Eigen::VectorXd root = op.weights.cwiseSqrt();
    Eigen::SparseMatrix<Scalar> S = root.asDiagonal() * op.matrix * root.cwiseInverse().asDiagonal();
    Eigen::SparseMatrix<Scalar> St = S.adjoint();
    Eigen::SparseMatrix<Scalar> sym = (S + St) * Scalar(0.5);
    sym.makeCompressed();
    return sym;
}

// Number of eigenvalues of S below sigma: negative pivots of the LDL^T factorization of S - sigma
// (Sylvester's law of inertia).
template <typename Scalar>
int inertia_below(Eigen::SimplicialLDLT<Eigen::SparseMatrix<Scalar>>& ldlt, const Eigen::SparseMatrix<Scalar>& S,
                  double sigma)
{
    Eigen::SparseMatrix<Scalar> I(S.rows(), S.cols());
    I.setIdentity();
    ldlt.factorize(S - I * Scalar(sigma));
    if (ldlt.info() != Eigen::Success) return -1;
    int neg = 0;
    for (int i = 0; i < ldlt.vectorD().size(); ++i) neg += std::real(ldlt.vectorD()(i)) < 0.0;
    return neg;
}

// Smallest sigma found by bisection with at least `target` eigenvalues below it, starting from a
// bracket [lo, hi] with inertia(lo) < target <= inertia(hi).
template <typename Scalar>
double bisect_inertia(Eigen::SimplicialLDLT<Eigen::SparseMatrix<Scalar>>& ldlt, const Eigen::SparseMatrix<Scalar>& S,
                      int target, double lo, double hi, double resolution)
{
    while (hi - lo > resolution) {
        const double mid = 0.5 * (lo + hi);
        const int k = inertia_below(ldlt, S, mid);
        if (k >= target || k < 0) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return hi;
}

// Lowest eigenpairs of a sparse Hermitian matrix by subspace iteration on (S - sigma)^-1. The shift
// sits just below the lowest eigenvalue; it is placed by inertia counts so that the wanted part of
// the spectrum is well separated from the rest relative to its distance to sigma.
template <typename Scalar>
std::pair<Eigen::VectorXd, DenseMat<Scalar>> shift_invert(const Eigen::SparseMatrix<Scalar>& S, int count,
                                                          const SolveOptions& opt, int& iterations)
{
    const int n = static_cast<int>(S.rows());
    double lower = std::numeric_limits<double>::infinity(), upper = -lower;
    for (int c = 0; c < S.outerSize(); ++c) {
        double diag = 0.0, off = 0.0;
        for (typename Eigen::SparseMatrix<Scalar>::InnerIterator it(S, c); it; ++it) {
            if (it.row() == it.col()) {
                diag = std::real(it.value());
            } else {
                off += std::abs(it.value());
            }
        }
        lower = std::min(lower, diag - off);
        upper = std::max(upper, diag + off);
    }
    const double pad = 1e-9 * std::max(1.0, upper - lower);
    lower -= pad;
    upper += pad;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<Scalar>> ldlt;
    ldlt.analyzePattern(S);
    // bracket the lowest eigenvalue and the first unwanted one
    const double span = upper - lower;
    const double first = bisect_inertia(ldlt, S, 1, lower, upper, 1e-6 * span);
    double beyond = upper;
    if (count < n) beyond = bisect_inertia(ldlt, S, count + 1, first - 1e-6 * span, upper, 1e-6 * span);
    const double gap = std::max(beyond - first, 1e-6 * span);
    const double sigma = first - 1e-6 * span - 0.05 * gap;
    Eigen::SparseMatrix<Scalar> I(n, n);
    I.setIdentity();
    ldlt.factorize(S - I * Scalar(sigma));
    if (ldlt.info() != Eigen::Success) throw DomainError("shift-invert factorization failed");

    const int p = std::min(n, std::max(2 * count, count + 8));
    std::mt19937_64 rng(0x5eed);
    std::normal_distribution<double> normal;
    DenseMat<Scalar> X(n, p);
    for (int j = 0; j < p; ++j)
        for (int i = 0; i < n; ++i) X(i, j) = Scalar(normal(rng));
    Eigen::VectorXd theta;
    for (iterations = 1; iterations <= opt.max_iterations; ++iterations) {
        DenseMat<Scalar> Y = ldlt.solve(X);
        Eigen::HouseholderQR<DenseMat<Scalar>> qr(Y);
        const DenseMat<Scalar> Q = qr.householderQ() * DenseMat<Scalar>::Identity(n, p);
        const DenseMat<Scalar> SQ = S * Q;
        DenseMat<Scalar> T = Q.adjoint() * SQ;
        T = (T + T.adjoint()).eval() * Scalar(0.5);
        Eigen::SelfAdjointEigenSolver<DenseMat<Scalar>> es(T);
        theta = es.eigenvalues();
        X = Q * es.eigenvectors();
        const DenseMat<Scalar> R = SQ * es.eigenvectors() - X * theta.cast<Scalar>().asDiagonal();
        bool done = true;
        for (int j = 0; j < count && done; ++j)
            done = R.col(j).norm() <= opt.convergence * std::max(1.0, std::abs(theta(j)));
        if (done) break;
    }
    if (iterations > opt.max_iterations) throw DomainError("shift-invert iteration did not converge");
    return {theta.head(count), X.leftCols(count)};
}

}  // namespace detail

/// Lowest `count` eigenpairs of W H v = lambda W v through S = W^1/2 H W^-1/2.
template <typename Scalar>
SpectrumReport solve_spectrum(const DiscreteOperator<Scalar>& op, int count, const SolveOptions& opt = {})
{
    if (!op.hermitian) throw HermiticityError("operator '" + op.label + "' is not weighted-Hermitian");
    const double herm = hermiticity_residual(op);
    if (!(herm <= op.tolerance)) {
        throw HermiticityError("operator '" + op.label + "' fails weighted Hermiticity (" + std::to_string(herm) + ")");
    }
    const int n = op.size();
    SpectrumReport rep;
    rep.label = op.label;
    rep.metadata = op.metadata;
    rep.dimension = n;
    if (count < 1) throw ParameterError("count must be positive");
    if (count > n) {
        rep.warnings.push_back("count " + std::to_string(count) + " exceeds dimension " + std::to_string(n) +
                               "; clamped");
        count = n;
    }
    const Eigen::SparseMatrix<Scalar> S = detail::symmetric_reduction(op);
    Eigen::VectorXd evals;
    detail::DenseMat<Scalar> Y;
    const bool dense = opt.solver == SolverKind::Dense ||
                       (opt.solver == SolverKind::Auto && (n <= opt.dense_limit || 4 * count > n));
    if (dense) {
        rep.solver = "dense";
        const detail::DenseMat<Scalar> D(S);
        Eigen::SelfAdjointEigenSolver<detail::DenseMat<Scalar>> es(D);
        if (es.info() != Eigen::Success) throw DomainError("dense eigensolver failed");
        evals = es.eigenvalues().head(count);
        Y = es.eigenvectors().leftCols(count);
    } else {
        rep.solver = "shift-invert";
        auto [e, v] = detail::shift_invert(S, count, opt, rep.iterations);
        evals = e;
        Y = v;
    }
    const Eigen::VectorXd inv_root = op.weights.cwiseSqrt().cwiseInverse();
    rep.eigenvalues.assign(evals.data(), evals.data() + evals.size());
    rep.eigenvectors.resize(n, count);
    const Eigen::SparseMatrix<Scalar> K = op.weighted();
    for (int j = 0; j < count; ++j) {
        Eigen::VectorXcd v = (inv_root.asDiagonal() * Y.col(j)).template cast<cplx>();
        // phase convention: first significant component real and positive
        const double big = v.cwiseAbs().maxCoeff();
        for (int i = 0; i < n; ++i) {
            if (std::abs(v(i)) > 1e-8 * big) {
                v *= std::conj(v(i)) / std::abs(v(i));
                break;
            }
        }
        const Eigen::VectorXcd Wv = op.weights.template cast<cplx>().asDiagonal() * v;
        const Eigen::VectorXcd Kv = K.template cast<cplx>() * v;
        const double r = (Kv - evals(j) * Wv).norm() / Wv.norm();
        rep.residuals.push_back(r);
        rep.max_residual = std::max(rep.max_residual, r);
        if (opt.vectors) rep.eigenvectors.col(j) = v;
    }
    if (!opt.vectors) rep.eigenvectors.resize(0, 0);
    rep.clusters = cluster_degeneracies(rep.eigenvalues, opt.cluster_tolerance);
    return rep;
}

/// Closed-form spectra.
enum class AnalyticSurface { Sphere, Cylinder, Ring, FlatTorus };

inline AnalyticSurface analytic_surface_from_name(std::string_view name)
{
    if (name == "sphere") return AnalyticSurface::Sphere;
    if (name == "cylinder") return AnalyticSurface::Cylinder;
    if (name == "ring") return AnalyticSurface::Ring;
    if (name == "flat-torus" || name == "plane") return AnalyticSurface::FlatTorus;
    throw ParameterError("no analytic reference for '" + std::string(name) + "'");
}

/// Lowest `count` levels, each repeated by its multiplicity.
///
///   sphere      hbar^2 l(l+1) / (2 m R^2), multiplicity 2l + 1                         (R)
///   cylinder    hbar^2 ((n - f)^2 / R^2 + (2 pi k / L)^2) / 2m - hbar^2 / (8 m R^2)    (R, L, Phi)
///   ring        the k = 0 family of the cylinder                                      (R, Phi)
///   flat torus  hbar^2 ((2 pi k1 / L1)^2 + (2 pi k2 / L2)^2) / 2m                      (L1, L2)
///
/// with f = q Phi / (2 pi hbar) for a flux Phi threading the axis; the cylinder is periodic in z.
inline std::vector<double> analytic_reference(AnalyticSurface kind, const ParamMap& params, double hbar, double mass,
                                              int count, double charge = 1.0)
{
    using detail::require_param;
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const double unit = hbar * hbar / (2.0 * mass);
    std::vector<double> e;
    const int span = count + 3;
    switch (kind) {
    case AnalyticSurface::Sphere: {
        const double R = require_param(params, "R");
        for (int l = 0; static_cast<int>(e.size()) < count; ++l)
            for (int k = 0; k < 2 * l + 1; ++k) e.push_back(unit * l * (l + 1) / (R * R));
        break;
    }
    case AnalyticSurface::Cylinder:
    case AnalyticSurface::Ring: {
        const double R = require_param(params, "R");
        const double L = require_param(params, "L", two_pi);
        const double f = charge * require_param(params, "Phi", 0.0) / (two_pi * hbar);
        const int kmax = kind == AnalyticSurface::Ring ? 0 : span;
        for (int n = -span; n <= span; ++n)
            for (int k = -kmax; k <= kmax; ++k) {
                const double a = (n - f) / R, b = two_pi * k / L;
                e.push_back(unit * (a * a + b * b) - unit / (4.0 * R * R));
            }
        break;
    }
    case AnalyticSurface::FlatTorus: {
        const double L1 = require_param(params, "L1", two_pi), L2 = require_param(params, "L2", two_pi);
        for (int a = -span; a <= span; ++a)
            for (int b = -span; b <= span; ++b) {
                const double k1 = two_pi * a / L1, k2 = two_pi * b / L2;
                e.push_back(unit * (k1 * k1 + k2 * k2));
            }
        break;
    }
    }
    std::sort(e.begin(), e.end());
    e.resize(static_cast<std::size_t>(count));
    return e;
}

struct Extrapolation {
    double limit = 0.0;
    double error_estimate = 0.0;
    std::vector<double> pairwise;
};

/// Eliminates the h^order term between successive (h, value) pairs, coarsest first.
inline Extrapolation richardson_extrapolate(std::vector<std::pair<double, double>> pairs, double order = 2.0)
{
    if (pairs.size() < 2) throw ParameterError("richardson_extrapolate needs at least two (h, value) pairs");
    std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    Extrapolation out;
    for (std::size_t k = 0; k + 1 < pairs.size(); ++k) {
        const auto [ha, va] = pairs[k];
        const auto [hb, vb] = pairs[k + 1];
        if (!(ha > hb)) throw ParameterError("richardson_extrapolate needs distinct h values");
        const double ra = std::pow(ha, order), rb = std::pow(hb, order);
        out.pairwise.push_back((vb * ra - va * rb) / (ra - rb));
    }
    out.limit = out.pairwise.back();
    const auto [lo, hi] = std::minmax_element(out.pairwise.begin(), out.pairwise.end());
    out.error_estimate = *hi - *lo;
    return out;
}

/// (v_h - v_h/2) / (v_h/2 - v_h/4): about 2^p for a method of order p.
inline double convergence_ratio(double coarse, double mid, double fine) { return (coarse - mid) / (mid - fine); }

}  // namespace surfq
