#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <stdexcept>
#include <string>

namespace ccg {

// One relative tolerance drives all factorization/rank decisions; absolute
// tolerances are obtained by scaling with the norm of the input.
inline constexpr double default_tolerance = 1e-10;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using SparseMatrix = Eigen::SparseMatrix<Scalar>;

using Index = Eigen::Index;

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct RankDeficientError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptySetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateCloudError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GridTooCoarseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CannotReduceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
    return m.allFinite();
}

template <typename Scalar>
MatrixX<Scalar> symmetrize(const MatrixX<Scalar>& m) {
    return Scalar(0.5) * (m + m.transpose());
}

}  // namespace ccg
