#pragma once

#include <utility>
#include <vector>

#include "ccg/generator_set.hpp"
#include "ccg/operations.hpp"

namespace ccg {

// Column-major vectorization and its inverse; the round trip is exact.
template <typename Scalar>
VectorX<Scalar> vec(const MatrixX<Scalar>& m) {
    return Eigen::Map<const VectorX<Scalar>>(m.data(), m.size());
}

template <typename Scalar>
MatrixX<Scalar> unvec(const VectorX<Scalar>& v, Index rows, Index cols) {
    if (v.size() != rows * cols) throw DimensionError("unvec: size mismatch");
    return Eigen::Map<const MatrixX<Scalar>>(v.data(), rows, cols);
}

// Matrix-valued generator set: a shaped view over a Ccg on vec(Theta).
// Matrix equality constraints sum_k beta_k A^{(k)} = B are stored vectorized
// inside the inner set's constraint block.
template <typename Scalar>
struct Cmcg {
    Index rows = 0;
    Index cols = 0;
    Ccg<Scalar> coefficients;  // set over vec(Theta)

    Index num_generators() const { return coefficients.num_generators(); }

    MatrixX<Scalar> center_matrix() const { return unvec(coefficients.center, rows, cols); }

    MatrixX<Scalar> generator_matrix(Index j) const {
        return unvec<Scalar>(coefficients.generators.col(j), rows, cols);
    }

    static Cmcg from_vectorized(Index rows, Index cols, Ccg<Scalar> inner) {
        if (inner.dim() != rows * cols) throw DimensionError("Cmcg: inner dimension must equal rows*cols");
        return Cmcg{rows, cols, std::move(inner)};
    }

    static Cmcg from_matrices(const MatrixX<Scalar>& center, const std::vector<MatrixX<Scalar>>& generators,
                              std::vector<NormGroup> groups, SparseMatrix<Scalar> a = SparseMatrix<Scalar>(),
                              VectorX<Scalar> b = VectorX<Scalar>()) {
        MatrixX<Scalar> g(center.size(), static_cast<Index>(generators.size()));
        for (std::size_t j = 0; j < generators.size(); ++j) {
            if (generators[j].rows() != center.rows() || generators[j].cols() != center.cols())
                throw DimensionError("Cmcg: generator shape mismatch");
            g.col(static_cast<Index>(j)) = vec(generators[j]);
        }
        return Cmcg{center.rows(), center.cols(),
                    Ccg<Scalar>::make(vec(center), std::move(g), std::move(groups), std::move(a), std::move(b))};
    }

    // Membership of a concrete matrix.
    Containment<Scalar> contains(const MatrixX<Scalar>& theta, Scalar tol = Scalar(1e-6)) const {
        return contains_point(coefficients, VectorX<Scalar>(vec(theta)), tol);
    }

    Scalar support(const VectorX<Scalar>& direction) const { return ccg::support(coefficients, direction); }
};

}  // namespace ccg
