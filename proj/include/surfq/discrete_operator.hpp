#pragma once

#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <type_traits>

#include <Eigen/Sparse>

#include "surfq/errors.hpp"

namespace surfq {

using cplx = std::complex<double>;

/// Threshold for assembled Hamiltonians.
inline constexpr double kHermitianTolerance = 1e-12;
/// Threshold for momentum operators.
inline constexpr double kMomentumHermitianTolerance = 1e-10;

/// A discretized operator H together with its integration measure w.
///
/// H is self-adjoint in the weighted inner product <a, b> = sum_i w_i conj(a_i) b_i exactly when
/// W H is Hermitian, W = diag(w).
template <typename Scalar>
struct DiscreteOperator {
    using Matrix = Eigen::SparseMatrix<Scalar>;

    Matrix matrix;
    Eigen::VectorXd weights;
    std::string label;
    bool hermitian = false;
    double tolerance = kHermitianTolerance;
    std::map<std::string, std::string> metadata;

    int size() const { return static_cast<int>(matrix.rows()); }
    Matrix weighted() const { return Matrix(weights.asDiagonal() * matrix); }
};

/// Builds H = W^-1 K from a weighted (stiffness) matrix K.
template <typename Scalar>
DiscreteOperator<Scalar> from_weighted(const Eigen::SparseMatrix<Scalar>& K, const Eigen::VectorXd& weights,
                                       std::string label, bool hermitian, double tolerance = kHermitianTolerance)
{
    DiscreteOperator<Scalar> op;
    op.matrix = Eigen::SparseMatrix<Scalar>(weights.cwiseInverse().asDiagonal() * K);
    op.matrix.makeCompressed();
    op.weights = weights;
    op.label = std::move(label);
    op.hermitian = hermitian;
    op.tolerance = tolerance;
    return op;
}

template <typename Scalar>
double max_abs(const Eigen::SparseMatrix<Scalar>& m)
{
    double best = 0.0;
    for (int k = 0; k < m.outerSize(); ++k)
        for (typename Eigen::SparseMatrix<Scalar>::InnerIterator it(m, k); it; ++it)
            best = std::max(best, std::abs(it.value()));
    return best;
}

/// max|WH - (WH)^dagger| / max|WH|.
template <typename Scalar>
double hermiticity_residual(const Eigen::SparseMatrix<Scalar>& H, const Eigen::VectorXd& weights)
{
    const Eigen::SparseMatrix<Scalar> WH = weights.asDiagonal() * H;
    const Eigen::SparseMatrix<Scalar> WHt = WH.adjoint();
    const double scale = max_abs(WH);
    return max_abs(Eigen::SparseMatrix<Scalar>(WH - WHt)) / std::max(scale, std::numeric_limits<double>::min());
}

template <typename Scalar>
double hermiticity_residual(const DiscreteOperator<Scalar>& op)
{
    return hermiticity_residual(op.matrix, op.weights);
}

/// Throws HermiticityError when an operator flagged Hermitian misses its threshold.
template <typename Scalar>
void require_hermitian(const DiscreteOperator<Scalar>& op)
{
    if (!op.hermitian) throw HermiticityError("operator '" + op.label + "' is not flagged weighted-Hermitian");
    const double r = hermiticity_residual(op);
    if (!(r <= op.tolerance)) {
        throw HermiticityError("operator '" + op.label + "' fails weighted Hermiticity: residual " +
                               std::to_string(r) + " > " + std::to_string(op.tolerance));
    }
}

namespace detail {

inline std::string mm_number(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

/// Matrix Market coordinate format. The weight vector is stored in comment lines so that one file
/// carries the whole operator.
template <typename Scalar>
void write_matrix_market(const DiscreteOperator<Scalar>& op, std::ostream& out)
{
    constexpr bool complex = !std::is_same_v<Scalar, double>;
    out << "%%MatrixMarket matrix coordinate " << (complex ? "complex" : "real") << " general\n";
    out << "% label: " << op.label << "\n";
    out << "% weighted_hermitian: " << (op.hermitian ? "true" : "false") << "\n";
    for (const auto& [k, v] : op.metadata) out << "% " << k << ": " << v << "\n";
    out << "% weights:";
    for (int i = 0; i < op.weights.size(); ++i) out << ' ' << detail::mm_number(op.weights(i));
    out << "\n";
    out << op.matrix.rows() << ' ' << op.matrix.cols() << ' ' << op.matrix.nonZeros() << "\n";
    for (int k = 0; k < op.matrix.outerSize(); ++k) {
        for (typename Eigen::SparseMatrix<Scalar>::InnerIterator it(op.matrix, k); it; ++it) {
            out << it.row() + 1 << ' ' << it.col() + 1 << ' ';
            if constexpr (complex) {
                out << detail::mm_number(it.value().real()) << ' ' << detail::mm_number(it.value().imag());
            } else {
                out << detail::mm_number(it.value());
            }
            out << "\n";
        }
    }
}

}  // namespace surfq
