#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "ccg/core.hpp"
#include "ccg/density.hpp"
#include "ccg/generator_set.hpp"

namespace ccg {

// Ellipsoid { x : (x - c)' Q^{-1} (x - c) <= 1 } with symmetric positive
// definite shape matrix Q.
template <typename Scalar>
struct Ellipsoid {
    VectorX<Scalar> center;
    MatrixX<Scalar> shape;

    Index dim() const { return center.size(); }

    Scalar support(const VectorX<Scalar>& dir) const {
        return dir.dot(center) + std::sqrt(std::max<Scalar>(Scalar(0), dir.dot(shape * dir)));
    }

    Scalar quadratic_form(const VectorX<Scalar>& x) const {
        const VectorX<Scalar> r = x - center;
        return r.dot(shape.ldlt().solve(r));
    }

    void validate() const {
        if ((shape - shape.transpose()).norm() > Scalar(1e-10) * (Scalar(1) + shape.norm()))
            throw DimensionError("Ellipsoid: shape must be symmetric");
        Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(shape);
        if (eig.eigenvalues().minCoeff() <= Scalar(0))
            throw DimensionError("Ellipsoid: shape must be positive definite");
    }

    // One-group generator representation { c + L u : ||u||_2 <= 1 }.
    Ccg<Scalar> to_ccg() const {
        Eigen::LLT<MatrixX<Scalar>> llt(shape);
        if (llt.info() != Eigen::Success)
            throw DimensionError("Ellipsoid: shape must be positive definite");
        return Ccg<Scalar>::ellipsoid(center, MatrixX<Scalar>(llt.matrixL()));
    }
};

// Minimum-volume enclosing ellipsoid of a point cloud (columns of `points`)
// by the multiplicative-weights iteration on the lifted moment matrix.
// Terminates once every point satisfies the quadratic form within 1 + eps.
template <typename Scalar>
Ellipsoid<Scalar> mvee(const MatrixX<Scalar>& points, Scalar eps = Scalar(1e-7), int max_iterations = 100000) {
    const Index d = points.rows();
    const Index n = points.cols();
    if (n < d + 1) throw DegenerateCloudError("mvee: need at least dim+1 points");

    if (d == 1) {
        const Scalar lo = points.minCoeff(), hi = points.maxCoeff();
        if (hi - lo <= Scalar(0)) throw DegenerateCloudError("mvee: zero-width point set");
        Ellipsoid<Scalar> e;
        e.center = VectorX<Scalar>::Constant(1, (lo + hi) / 2);
        e.shape = MatrixX<Scalar>::Constant(1, 1, (hi - lo) * (hi - lo) / 4);
        return e;
    }

    MatrixX<Scalar> lifted(d + 1, n);
    lifted.topRows(d) = points;
    lifted.row(d).setOnes();

    VectorX<Scalar> u = VectorX<Scalar>::Constant(n, Scalar(1) / Scalar(n));
    const Scalar dd = Scalar(d);
    // Stop once max_i (x_i - c)' Q^{-1} (x_i - c) <= 1 + eps, i.e.
    // g_max <= d (1 + eps) + 1 on the lifted form.
    const Scalar g_stop = dd * (Scalar(1) + eps) + Scalar(1);

    VectorX<Scalar> g(n);
    for (int iter = 0; iter < max_iterations; ++iter) {
        const MatrixX<Scalar> x = lifted * u.asDiagonal() * lifted.transpose();
        Eigen::LDLT<MatrixX<Scalar>> ldlt(x);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
            throw DegenerateCloudError("mvee: point cloud is affinely dependent");
        }
        const MatrixX<Scalar> solved = ldlt.solve(lifted);
        g = (lifted.array() * solved.array()).colwise().sum();
        Index j_plus;
        const Scalar g_max = g.maxCoeff(&j_plus);
        if (!std::isfinite(g_max)) throw DegenerateCloudError("mvee: point cloud is affinely dependent");
        if (g_max <= g_stop) break;

        // Away step on the weakest supported point when it violates
        // optimality more than the strongest outsider; plain multiplicative
        // update otherwise.
        Index j_minus = -1;
        Scalar g_min = std::numeric_limits<Scalar>::infinity();
        for (Index i = 0; i < n; ++i) {
            if (u[i] > Scalar(0) && g[i] < g_min) {
                g_min = g[i];
                j_minus = i;
            }
        }
        const Scalar gain_plus = g_max / (dd + 1) - Scalar(1);
        const Scalar gain_minus = Scalar(1) - g_min / (dd + 1);
        if (gain_plus >= gain_minus || j_minus < 0) {
            const Scalar kappa = (g_max - dd - 1) / ((dd + 1) * (g_max - 1));
            u *= (Scalar(1) - kappa);
            u[j_plus] += kappa;
        } else {
            const Scalar cap = (u[j_minus] >= Scalar(1)) ? Scalar(-0.5)
                                                         : -u[j_minus] / (Scalar(1) - u[j_minus]);
            Scalar kappa = (g_min > Scalar(1) + Scalar(1e-14))
                               ? (g_min - dd - 1) / ((dd + 1) * (g_min - 1))
                               : cap;
            kappa = std::max(kappa, cap);
            u *= (Scalar(1) - kappa);
            u[j_minus] += kappa;
            u[j_minus] = std::max(u[j_minus], Scalar(0));
        }
    }

    Ellipsoid<Scalar> e;
    e.center = points * u;
    const MatrixX<Scalar> second = points * u.asDiagonal() * points.transpose();
    e.shape = symmetrize<Scalar>(dd * (second - e.center * e.center.transpose()));
    Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(e.shape);
    if (eig.eigenvalues().minCoeff() <= Scalar(0)) {
        throw DegenerateCloudError("mvee: point cloud is affinely dependent");
    }
    return e;
}

// For unions of scalar intervals the minimum-volume enclosing ellipsoid is
// the hull interval; no iteration is needed.
inline Ellipsoid<double> mvee_of_intervals(const HdrRegion& region) {
    if (region.intervals.empty()) throw DegenerateCloudError("mvee_of_intervals: empty region");
    const auto hull = region.hull();
    Ellipsoid<double> e;
    e.center = VectorX<double>::Constant(1, 0.5 * (hull.lo + hull.hi));
    const double half = 0.5 * (hull.hi - hull.lo);
    e.shape = MatrixX<double>::Constant(1, 1, half * half);
    return e;
}

}  // namespace ccg
