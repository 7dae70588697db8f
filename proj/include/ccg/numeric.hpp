#pragma once

#include <Eigen/QR>
#include <Eigen/Cholesky>

#include "ccg/core.hpp"

namespace ccg {

// Dense factorization kernels shared by the set calculus and the
// identification layer.  All routines are deterministic (Householder
// reflections, no randomized pivoting) so repeated runs on identical inputs
// reproduce results bit for bit.

template <typename Scalar>
struct QrFactors {
    MatrixX<Scalar> q;  // orthonormal, rows(m) x rows(m)
    MatrixX<Scalar> r;  // upper triangular, rows(m) x cols(m)
};

template <typename Scalar>
QrFactors<Scalar> qr_factor(const MatrixX<Scalar>& m) {
    Eigen::HouseholderQR<MatrixX<Scalar>> qr(m);
    QrFactors<Scalar> out;
    out.q = qr.householderQ() * MatrixX<Scalar>::Identity(m.rows(), m.rows());
    out.r = MatrixX<Scalar>(qr.matrixQR().template triangularView<Eigen::Upper>());
    return out;
}

template <typename Scalar>
Index numerical_rank(const MatrixX<Scalar>& m, Scalar rel_tol = Scalar(default_tolerance)) {
    if (m.size() == 0) return 0;
    Eigen::ColPivHouseholderQR<MatrixX<Scalar>> qr(m);
    qr.setThreshold(rel_tol);
    return qr.rank();
}

template <typename Scalar>
void require_full_row_rank(const MatrixX<Scalar>& m, const char* who) {
    if (numerical_rank(m) < m.rows()) {
        throw RankDeficientError(std::string(who) + ": matrix does not have full row rank");
    }
}

// Moore-Penrose pseudoinverse of a full-row-rank matrix through the Gram
// route M^T (M M^T)^{-1}.
template <typename Scalar>
MatrixX<Scalar> pseudoinverse_full_row_rank(const MatrixX<Scalar>& m) {
    require_full_row_rank(m, "pseudoinverse_full_row_rank");
    const MatrixX<Scalar> gram = m * m.transpose();
    Eigen::LLT<MatrixX<Scalar>> llt(gram);
    if (llt.info() != Eigen::Success) {
        throw RankDeficientError("pseudoinverse_full_row_rank: Gram matrix not positive definite");
    }
    return llt.solve(m).transpose();
}

// Orthonormal basis of ker(m) for a full-row-rank m with at least as many
// columns as rows: the trailing columns of the full Q factor of m^T.
template <typename Scalar>
MatrixX<Scalar> kernel_basis(const MatrixX<Scalar>& m) {
    require_full_row_rank(m, "kernel_basis");
    const Index t = m.cols();
    const Index r = m.rows();
    if (t < r) throw DimensionError("kernel_basis: more rows than columns");
    Eigen::HouseholderQR<MatrixX<Scalar>> qr(m.transpose());
    const MatrixX<Scalar> q_full = qr.householderQ() * MatrixX<Scalar>::Identity(t, t);
    return q_full.rightCols(t - r);
}

// Orthogonal projector onto the row space of m.
template <typename Scalar>
MatrixX<Scalar> row_space_projector(const MatrixX<Scalar>& m) {
    require_full_row_rank(m, "row_space_projector");
    const MatrixX<Scalar> gram = m * m.transpose();
    Eigen::LLT<MatrixX<Scalar>> llt(gram);
    if (llt.info() != Eigen::Success) {
        throw RankDeficientError("row_space_projector: Gram matrix not positive definite");
    }
    return symmetrize<Scalar>(m.transpose() * llt.solve(m));
}

}  // namespace ccg
