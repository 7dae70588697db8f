#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "ccg/core.hpp"
#include "ccg/norms.hpp"
#include "ccg/solver.hpp"

namespace ccg {

template <typename Scalar>
struct IntervalBox {
    VectorX<Scalar> lo;
    VectorX<Scalar> hi;

    VectorX<Scalar> widths() const { return hi - lo; }
    Scalar volume() const { return (hi - lo).prod(); }
    bool contains(const IntervalBox& inner, Scalar tol = Scalar(0)) const {
        return ((inner.lo.array() >= lo.array() - tol) && (inner.hi.array() <= hi.array() + tol)).all();
    }
};

template <typename Scalar>
struct ProbabilisticZonotope {
    VectorX<Scalar> center;
    MatrixX<Scalar> bounded_generators;
    MatrixX<Scalar> gaussian_generators;
};

namespace detail {

inline void validate_groups(Index num_generators, const std::vector<NormGroup>& groups) {
    std::vector<char> seen(static_cast<std::size_t>(num_generators), 0);
    Index covered = 0;
    for (const auto& g : groups) {
        if (g.indices.empty()) throw DimensionError("NormGroup: empty index set");
        Index prev = -1;
        for (Index idx : g.indices) {
            if (idx <= prev) throw DimensionError("NormGroup: indices must be strictly increasing");
            if (idx < 0 || idx >= num_generators) throw DimensionError("NormGroup: index out of range");
            if (seen[static_cast<std::size_t>(idx)]) throw DimensionError("NormGroup: overlapping groups");
            seen[static_cast<std::size_t>(idx)] = 1;
            prev = idx;
            ++covered;
        }
    }
    if (covered != num_generators) throw DimensionError("NormGroup: groups must cover all coefficients");
}

// Margin of the coefficient system { A beta = b, ||beta_{I_k}||_{p_k} <= t }:
// the smallest t for which the system is solvable, computed through the
// normalized dual  1 / min { sum_k ||(A^T l)_{I_k}||_{q_k} : b^T l = 1 }.
template <typename Scalar>
Scalar coefficient_system_margin(const SparseMatrix<Scalar>& a, const VectorX<Scalar>& b,
                                 Index num_coefficients, const std::vector<NormGroup>& groups,
                                 const DescentOptions& opts = DescentOptions()) {
    if (b.size() == 0 || b.norm() == Scalar(0)) return Scalar(0);
    const Index r = a.rows();
    MatrixX<Scalar> d_row(1, r);
    d_row.row(0) = b.transpose();
    const MatrixX<Scalar> v = kernel_basis<Scalar>(d_row);  // r x (r-1)
    const VectorX<Scalar> lambda0 = b / b.squaredNorm();

    VectorX<Scalar> w = VectorX<Scalar>::Zero(num_coefficients);
    w.head(a.cols()) = a.transpose() * lambda0;
    MatrixX<Scalar> m = MatrixX<Scalar>::Zero(num_coefficients, v.cols());
    m.topRows(a.cols()) = a.transpose() * v;

    const VectorX<Scalar> zero_linear;
    auto descent = make_descent<Scalar>(
        zero_linear, w, [&](const VectorX<Scalar>& z) -> VectorX<Scalar> { return m * z; },
        [&](const VectorX<Scalar>& u) -> VectorX<Scalar> { return m.transpose() * u; }, groups,
        spectral_norm_estimate<Scalar>(m));
    const auto result = descent.run(opts, v.cols());
    if (result.value <= Scalar(0)) return std::numeric_limits<Scalar>::infinity();
    return Scalar(1) / result.value;
}

}  // namespace detail

// Constrained convex generator set { c + G beta : ||beta_{I_k}||_{p_k} <= 1,
// A beta = b }.  The constraint matrix may have fewer columns than there are
// generators; trailing coefficients are implicitly unconstrained (the padded
// columns of the equality block are identically zero).
template <typename Scalar>
struct Ccg {
    VectorX<Scalar> center;
    MatrixX<Scalar> generators;
    std::vector<NormGroup> groups;
    SparseMatrix<Scalar> constraint_lhs;  // r x m_c, m_c <= num_generators()
    VectorX<Scalar> constraint_rhs;

    Index dim() const { return center.size(); }
    Index num_generators() const { return generators.cols(); }
    bool constrained() const { return constraint_rhs.size() > 0; }

    const VectorX<Scalar>& feasible_coefficients() const { return feasible_point_; }
    Scalar constraint_norm_bound() const { return constraint_norm_bound_; }

    // Checked construction: validates shapes and group structure and proves
    // the coefficient system non-empty (caching a feasible point).
    static Ccg make(VectorX<Scalar> center, MatrixX<Scalar> generators, std::vector<NormGroup> groups,
                    SparseMatrix<Scalar> a = SparseMatrix<Scalar>(), VectorX<Scalar> b = VectorX<Scalar>()) {
        Ccg set;
        set.center = std::move(center);
        set.generators = std::move(generators);
        set.groups = std::move(groups);
        set.constraint_lhs = std::move(a);
        set.constraint_rhs = std::move(b);
        set.validate();
        set.establish_feasibility();
        return set;
    }

    // Construction from pieces whose feasibility is inherited from already
    // validated inputs; used by the set operations.
    static Ccg make_unchecked(VectorX<Scalar> center, MatrixX<Scalar> generators,
                              std::vector<NormGroup> groups, SparseMatrix<Scalar> a, VectorX<Scalar> b,
                              VectorX<Scalar> feasible_point) {
        Ccg set;
        set.center = std::move(center);
        set.generators = std::move(generators);
        set.groups = std::move(groups);
        set.constraint_lhs = std::move(a);
        set.constraint_rhs = std::move(b);
        set.feasible_point_ = std::move(feasible_point);
        set.validate();
        set.update_constraint_norm();
        return set;
    }

    static Ccg point(VectorX<Scalar> c) {
        const Index n = c.size();
        return make_unchecked(std::move(c), MatrixX<Scalar>(n, 0), {}, SparseMatrix<Scalar>(),
                              VectorX<Scalar>(), VectorX<Scalar>());
    }

    static Ccg box(VectorX<Scalar> c, const VectorX<Scalar>& half_widths) {
        const Index n = c.size();
        MatrixX<Scalar> g = half_widths.asDiagonal();
        return make_unchecked(std::move(c), std::move(g), singleton_inf_groups(n), SparseMatrix<Scalar>(),
                              VectorX<Scalar>(), VectorX<Scalar>::Zero(n));
    }

    static Ccg zonotope(VectorX<Scalar> c, MatrixX<Scalar> g) {
        const Index m = g.cols();
        return make_unchecked(std::move(c), std::move(g), singleton_inf_groups(m), SparseMatrix<Scalar>(),
                              VectorX<Scalar>(), VectorX<Scalar>::Zero(m));
    }

    // Ellipsoidal set { c + G u : ||u||_2 <= 1 }.
    static Ccg ellipsoid(VectorX<Scalar> c, MatrixX<Scalar> g) {
        const Index m = g.cols();
        return make_unchecked(std::move(c), std::move(g), single_group(m, Norm::two), SparseMatrix<Scalar>(),
                              VectorX<Scalar>(), VectorX<Scalar>::Zero(m));
    }

    static Ccg ball(VectorX<Scalar> c, Scalar radius) {
        const Index n = c.size();
        MatrixX<Scalar> g = radius * MatrixX<Scalar>::Identity(n, n);
        return ellipsoid(std::move(c), std::move(g));
    }

    void validate() const {
        if (!center.allFinite() || !generators.allFinite()) {
            throw DimensionError("Ccg: entries must be finite");
        }
        if (generators.rows() != center.size()) throw DimensionError("Ccg: generator row count mismatch");
        detail::validate_groups(num_generators(), groups);
        if (constraint_rhs.size() > 0) {
            if (constraint_lhs.rows() != constraint_rhs.size())
                throw DimensionError("Ccg: constraint row mismatch");
            if (constraint_lhs.cols() > num_generators())
                throw DimensionError("Ccg: constraint has more columns than generators");
        } else if (constraint_lhs.rows() > 0) {
            throw DimensionError("Ccg: constraint matrix without right-hand side");
        }
    }

  private:
    VectorX<Scalar> feasible_point_;
    Scalar constraint_norm_bound_ = 0;

    void update_constraint_norm() {
        constraint_norm_bound_ =
            constrained() ? detail::spectral_norm_estimate<Scalar>(constraint_lhs) : Scalar(0);
    }

    void establish_feasibility() {
        update_constraint_norm();
        const Index m = num_generators();
        if (!constrained()) {
            feasible_point_ = VectorX<Scalar>::Zero(m);
            return;
        }
        const MatrixX<Scalar> a_dense = MatrixX<Scalar>(constraint_lhs);
        Eigen::CompleteOrthogonalDecomposition<MatrixX<Scalar>> cod(a_dense);
        VectorX<Scalar> beta_head = cod.solve(constraint_rhs);
        const Scalar residual = (a_dense * beta_head - constraint_rhs).norm();
        if (residual > Scalar(1e-8) * (Scalar(1) + constraint_rhs.norm())) {
            throw EmptySetError("Ccg: equality constraints are inconsistent");
        }
        VectorX<Scalar> beta = VectorX<Scalar>::Zero(m);
        beta.head(beta_head.size()) = beta_head;

        if (max_group_norm(beta) > Scalar(1) + Scalar(1e-9)) {
            const Scalar margin = detail::coefficient_system_margin<Scalar>(
                constraint_lhs, constraint_rhs, m, groups);
            if (!(margin <= Scalar(1) + Scalar(1e-7))) {
                throw EmptySetError("Ccg: coefficient system infeasible (empty set)");
            }
            // Alternating projections give a concrete anchor point.
            for (int iter = 0; iter < 2000; ++iter) {
                for (const auto& grp : groups) {
                    VectorX<Scalar> sub(grp.indices.size());
                    for (std::size_t i = 0; i < grp.indices.size(); ++i)
                        sub[static_cast<Index>(i)] = beta[grp.indices[i]];
                    sub = project_unit_ball(sub, grp.p);
                    for (std::size_t i = 0; i < grp.indices.size(); ++i)
                        beta[grp.indices[i]] = sub[static_cast<Index>(i)];
                }
                VectorX<Scalar> head = beta.head(a_dense.cols());
                const VectorX<Scalar> gap = a_dense * head - constraint_rhs;
                if (gap.norm() <= Scalar(1e-10) * (Scalar(1) + constraint_rhs.norm()) &&
                    max_group_norm(beta) <= Scalar(1) + Scalar(1e-7)) {
                    break;
                }
                head -= cod.solve(gap);
                beta.head(a_dense.cols()) = head;
            }
        }
        feasible_point_ = beta;
    }

    Scalar max_group_norm(const VectorX<Scalar>& beta) const {
        Scalar worst = 0;
        for (const auto& grp : groups) {
            VectorX<Scalar> sub(grp.indices.size());
            for (std::size_t i = 0; i < grp.indices.size(); ++i)
                sub[static_cast<Index>(i)] = beta[grp.indices[i]];
            worst = std::max(worst, vector_norm(sub, grp.p));
        }
        return worst;
    }
};

}  // namespace ccg
