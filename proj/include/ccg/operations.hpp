#pragma once

#include <algorithm>
#include <atomic>
#include <future>
#include <map>
#include <numeric>
#include <thread>
#include <vector>

#include "ccg/generator_set.hpp"
#include "ccg/stats.hpp"

namespace ccg {

namespace detail {

template <typename Scalar>
VectorX<Scalar> gather(const VectorX<Scalar>& v, const NormGroup& grp) {
    VectorX<Scalar> out(grp.indices.size());
    for (std::size_t i = 0; i < grp.indices.size(); ++i) out[static_cast<Index>(i)] = v[grp.indices[i]];
    return out;
}

inline std::vector<NormGroup> offset_groups(const std::vector<NormGroup>& groups, Index offset) {
    std::vector<NormGroup> out = groups;
    for (auto& g : out)
        for (auto& idx : g.indices) idx += offset;
    return out;
}

template <typename Scalar>
SparseMatrix<Scalar> block_diag_constraints(const SparseMatrix<Scalar>& a1, Index gens1,
                                            const SparseMatrix<Scalar>& a2) {
    const Index rows = a1.rows() + a2.rows();
    const Index cols = a2.rows() > 0 ? gens1 + a2.cols() : a1.cols();
    SparseMatrix<Scalar> out(rows, cols);
    std::vector<Eigen::Triplet<Scalar>> triplets;
    triplets.reserve(static_cast<std::size_t>(a1.nonZeros() + a2.nonZeros()));
    for (Index k = 0; k < a1.outerSize(); ++k)
        for (typename SparseMatrix<Scalar>::InnerIterator it(a1, k); it; ++it)
            triplets.emplace_back(it.row(), it.col(), it.value());
    for (Index k = 0; k < a2.outerSize(); ++k)
        for (typename SparseMatrix<Scalar>::InnerIterator it(a2, k); it; ++it)
            triplets.emplace_back(a1.rows() + it.row(), gens1 + it.col(), it.value());
    out.setFromTriplets(triplets.begin(), triplets.end());
    return out;
}

template <typename Scalar>
VectorX<Scalar> concat(const VectorX<Scalar>& a, const VectorX<Scalar>& b) {
    VectorX<Scalar> out(a.size() + b.size());
    out << a, b;
    return out;
}

}  // namespace detail

template <typename Scalar>
Ccg<Scalar> linear_map(const MatrixX<Scalar>& r, const Ccg<Scalar>& e) {
    if (r.cols() != e.dim()) throw DimensionError("linear_map: dimension mismatch");
    return Ccg<Scalar>::make_unchecked(r * e.center, r * e.generators, e.groups, e.constraint_lhs,
                                       e.constraint_rhs, e.feasible_coefficients());
}

template <typename Scalar>
Ccg<Scalar> minkowski_sum(const Ccg<Scalar>& e1, const Ccg<Scalar>& e2) {
    if (e1.dim() != e2.dim()) throw DimensionError("minkowski_sum: dimension mismatch");
    MatrixX<Scalar> g(e1.dim(), e1.num_generators() + e2.num_generators());
    g << e1.generators, e2.generators;
    std::vector<NormGroup> groups = e1.groups;
    const auto shifted = detail::offset_groups(e2.groups, e1.num_generators());
    groups.insert(groups.end(), shifted.begin(), shifted.end());
    return Ccg<Scalar>::make_unchecked(
        e1.center + e2.center, std::move(g), std::move(groups),
        detail::block_diag_constraints(e1.constraint_lhs, e1.num_generators(), e2.constraint_lhs),
        detail::concat(e1.constraint_rhs, e2.constraint_rhs),
        detail::concat(e1.feasible_coefficients(), e2.feasible_coefficients()));
}

template <typename Scalar>
Ccg<Scalar> cartesian_product(const Ccg<Scalar>& e1, const Ccg<Scalar>& e2) {
    MatrixX<Scalar> g = MatrixX<Scalar>::Zero(e1.dim() + e2.dim(), e1.num_generators() + e2.num_generators());
    g.topLeftCorner(e1.dim(), e1.num_generators()) = e1.generators;
    g.bottomRightCorner(e2.dim(), e2.num_generators()) = e2.generators;
    std::vector<NormGroup> groups = e1.groups;
    const auto shifted = detail::offset_groups(e2.groups, e1.num_generators());
    groups.insert(groups.end(), shifted.begin(), shifted.end());
    return Ccg<Scalar>::make_unchecked(
        detail::concat(e1.center, e2.center), std::move(g), std::move(groups),
        detail::block_diag_constraints(e1.constraint_lhs, e1.num_generators(), e2.constraint_lhs),
        detail::concat(e1.constraint_rhs, e2.constraint_rhs),
        detail::concat(e1.feasible_coefficients(), e2.feasible_coefficients()));
}

// Support function h_E(l).  Without equality constraints the value is the
// closed form l'c + sum_k ||(G'l)_{I_k}||_{q_k}; with constraints it is the
// unconstrained dual  min_l  b'lam + sum_k ||(G'l - A'lam)_{I_k}||_{q_k},
// solved by the smoothed descent (any iterate upper-bounds the support).
template <typename Scalar>
Scalar support(const Ccg<Scalar>& e, const VectorX<Scalar>& l,
               const detail::DescentOptions& opts = detail::DescentOptions(),
               VectorX<Scalar>* warm_start = nullptr) {
    if (l.size() != e.dim()) throw DimensionError("support: direction dimension mismatch");
    const Scalar base = l.dot(e.center);
    const VectorX<Scalar> v = e.generators.transpose() * l;
    if (!e.constrained()) {
        return base + grouped_dual_norm_sum(v, e.groups);
    }
    const auto& a = e.constraint_lhs;
    const Index mc = a.cols();

    // Groups whose coefficients are never touched by the constraints
    // contribute the plain dual norms; the descent only needs to see the
    // coefficients up to the constraint block (plus stragglers of groups
    // straddling the boundary).
    Scalar constant_tail = 0;
    std::vector<NormGroup> active_groups;
    std::vector<Index> active_indices;
    for (const auto& grp : e.groups) {
        const bool touched =
            std::any_of(grp.indices.begin(), grp.indices.end(), [&](Index j) { return j < mc; });
        if (!touched) {
            if (grp.indices.size() == 1) {
                constant_tail += std::abs(v[grp.indices[0]]);
            } else {
                constant_tail += vector_norm(detail::gather(v, grp), dual_norm(grp.p));
            }
            continue;
        }
        NormGroup remapped;
        remapped.p = grp.p;
        for (Index j : grp.indices) {
            remapped.indices.push_back(static_cast<Index>(active_indices.size()));
            active_indices.push_back(j);
        }
        active_groups.push_back(std::move(remapped));
    }

    VectorX<Scalar> w_active(active_indices.size());
    for (std::size_t i = 0; i < active_indices.size(); ++i)
        w_active[static_cast<Index>(i)] = v[active_indices[i]];
    // Position of each active coefficient inside the constraint block; -1
    // for straddling coefficients beyond it (zero constraint columns).
    std::vector<Index> constraint_col(active_indices.size());
    for (std::size_t i = 0; i < active_indices.size(); ++i)
        constraint_col[i] = active_indices[i] < mc ? active_indices[i] : -1;

    const VectorX<Scalar> linear = e.constraint_rhs;
    auto descent = detail::make_descent<Scalar>(
        linear, w_active,
        [&](const VectorX<Scalar>& lam) -> VectorX<Scalar> {
            const VectorX<Scalar> at_lam = a.transpose() * lam;
            VectorX<Scalar> out = VectorX<Scalar>::Zero(w_active.size());
            for (std::size_t i = 0; i < active_indices.size(); ++i) {
                if (constraint_col[i] >= 0) out[static_cast<Index>(i)] = -at_lam[constraint_col[i]];
            }
            return out;
        },
        [&](const VectorX<Scalar>& u) -> VectorX<Scalar> {
            VectorX<Scalar> head = VectorX<Scalar>::Zero(mc);
            for (std::size_t i = 0; i < active_indices.size(); ++i) {
                if (constraint_col[i] >= 0) head[constraint_col[i]] = u[static_cast<Index>(i)];
            }
            return -(a * head);
        },
        active_groups, e.constraint_norm_bound());
    const auto result = descent.run(opts, a.rows(), warm_start);
    if (result.diverged) throw InfeasibleError("support: constraint system is inconsistent");
    if (warm_start) *warm_start = result.z;
    return base + constant_tail + result.value;
}

template <typename Scalar>
struct Containment {
    bool member = false;
    Scalar margin = std::numeric_limits<Scalar>::infinity();
};

// Membership through the epigraph program min t s.t. G beta = x - c,
// A beta = b, ||beta_{I_k}||_{p_k} <= t.  Solved as the normalized dual
// 1 / min { sum_k ||(C'lam)_{I_k}||_{q_k} : d'lam = 1 } with C = [G; A],
// d = [x - c; b], after checking that d lies in the range of C.
template <typename Scalar>
Containment<Scalar> contains_point(const Ccg<Scalar>& e, const VectorX<Scalar>& x,
                                   Scalar tol = Scalar(1e-6),
                                   const detail::DescentOptions& opts = detail::DescentOptions()) {
    if (x.size() != e.dim()) throw DimensionError("contains_point: dimension mismatch");
    const Index n = e.dim();
    const Index r = e.constraint_lhs.rows();
    const Index m = e.num_generators();

    VectorX<Scalar> d(n + r);
    d.head(n) = x - e.center;
    if (r > 0) d.tail(r) = e.constraint_rhs;

    if (m == 0) {
        const bool member = d.norm() <= Scalar(1e-9) * (Scalar(1) + e.center.norm());
        return {member, member ? Scalar(0) : std::numeric_limits<Scalar>::infinity()};
    }
    if (d.norm() == Scalar(0)) return {true, Scalar(0)};

    MatrixX<Scalar> c = MatrixX<Scalar>::Zero(n + r, m);
    c.topRows(n) = e.generators;
    if (r > 0) c.block(n, 0, r, e.constraint_lhs.cols()) = MatrixX<Scalar>(e.constraint_lhs);

    // Range check: if d is not in the span of C's columns the point is
    // outside the affine hull and no solution exists.
    Eigen::CompleteOrthogonalDecomposition<MatrixX<Scalar>> cod(c);
    const VectorX<Scalar> beta_ls = cod.solve(d);
    if ((c * beta_ls - d).norm() > Scalar(1e-8) * std::max<Scalar>(Scalar(1), d.norm())) {
        return {false, std::numeric_limits<Scalar>::infinity()};
    }

    MatrixX<Scalar> d_row(1, n + r);
    d_row.row(0) = d.transpose();
    const MatrixX<Scalar> basis = kernel_basis<Scalar>(d_row);
    const VectorX<Scalar> lam0 = d / d.squaredNorm();

    const VectorX<Scalar> w = c.transpose() * lam0;
    const MatrixX<Scalar> mmat = c.transpose() * basis;
    const VectorX<Scalar> zero_linear;
    auto descent = detail::make_descent<Scalar>(
        zero_linear, w, [&](const VectorX<Scalar>& z) -> VectorX<Scalar> { return mmat * z; },
        [&](const VectorX<Scalar>& u) -> VectorX<Scalar> { return mmat.transpose() * u; }, e.groups,
        detail::spectral_norm_estimate<Scalar>(mmat));
    const auto result = descent.run(opts, basis.cols());
    if (!(result.value > Scalar(0))) return {false, std::numeric_limits<Scalar>::infinity()};
    const Scalar margin = Scalar(1) / result.value;
    return {margin <= Scalar(1) + tol, margin};
}

template <typename Scalar>
IntervalBox<Scalar> interval_hull(const Ccg<Scalar>& e,
                                  const detail::DescentOptions& opts = detail::DescentOptions()) {
    const Index n = e.dim();
    IntervalBox<Scalar> box{VectorX<Scalar>(n), VectorX<Scalar>(n)};
    const unsigned workers = std::min<unsigned>(std::max(1u, std::thread::hardware_concurrency()), 4u);
    std::vector<std::future<void>> jobs;
    std::atomic<Index> next{0};
    auto work = [&]() {
        for (Index i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
            VectorX<Scalar> dir = VectorX<Scalar>::Zero(n);
            dir[i] = 1;
            box.hi[i] = support(e, dir, opts);
            dir[i] = -1;
            box.lo[i] = -support(e, dir, opts);
        }
    };
    if (workers <= 1 || n <= 1) {
        work();
    } else {
        for (unsigned t = 0; t < workers; ++t) jobs.push_back(std::async(std::launch::async, work));
        for (auto& j : jobs) j.get();
    }
    return box;
}

// Confidence truncation of a probabilistic zonotope: the Gaussian block is
// scaled by the chi-squared radius of its coefficient count and constrained
// in one 2-norm group; the bounded block keeps singleton inf groups.
template <typename Scalar>
Ccg<Scalar> probzono_truncate(const ProbabilisticZonotope<Scalar>& z, Scalar alpha) {
    if (!(alpha > Scalar(0) && alpha < Scalar(1)))
        throw std::invalid_argument("probzono_truncate: alpha must be in (0,1)");
    const Index gb = z.bounded_generators.cols();
    const Index gg = z.gaussian_generators.cols();
    if (gg == 0) return Ccg<Scalar>::zonotope(z.center, z.bounded_generators);
    const Scalar rho = Scalar(std::sqrt(chi2_quantile(static_cast<int>(gg), 1.0 - double(alpha))));
    MatrixX<Scalar> g(z.center.size(), gb + gg);
    if (gb > 0) g.leftCols(gb) = z.bounded_generators;
    g.rightCols(gg) = rho * z.gaussian_generators;
    std::vector<NormGroup> groups = singleton_inf_groups(gb);
    const auto tail = single_group(gg, Norm::two, gb);
    groups.insert(groups.end(), tail.begin(), tail.end());
    return Ccg<Scalar>::make_unchecked(z.center, std::move(g), std::move(groups), SparseMatrix<Scalar>(),
                                       VectorX<Scalar>(), VectorX<Scalar>::Zero(gb + gg));
}

// Outer-approximating order reduction.  Unconstrained inf-norm generators and
// 2-norm group axes are ranked by magnitude; everything below the budget is
// folded into an axis-aligned box block.  Coefficients referenced by equality
// constraints, and 1-norm groups, are never touched.
template <typename Scalar>
Ccg<Scalar> reduce_order(const Ccg<Scalar>& e, Index target_generators) {
    const Index n = e.dim();
    const Index m = e.num_generators();
    if (target_generators < n)
        throw std::invalid_argument("reduce_order: target must be at least the dimension");
    if (m <= target_generators) return e;

    const Index mc = e.constrained() ? e.constraint_lhs.cols() : 0;

    struct Item {
        Scalar key;
        VectorX<Scalar> column;   // generator column scaled appropriately
        std::size_t group;        // source group (for 2-norm regrouping)
        bool from_two_group;
    };

    std::vector<std::size_t> kept_groups;  // groups passed through untouched
    std::vector<Item> items;
    std::vector<std::size_t> two_groups_reducible;

    for (std::size_t gi = 0; gi < e.groups.size(); ++gi) {
        const auto& grp = e.groups[gi];
        const bool touches_constraints =
            std::any_of(grp.indices.begin(), grp.indices.end(), [&](Index j) { return j < mc; });
        if (touches_constraints || grp.p == Norm::one) {
            kept_groups.push_back(gi);
            continue;
        }
        if (grp.p == Norm::inf) {
            for (Index j : grp.indices) {
                items.push_back({e.generators.col(j).norm(), e.generators.col(j), gi, false});
            }
        } else {
            MatrixX<Scalar> block(n, grp.indices.size());
            for (std::size_t i = 0; i < grp.indices.size(); ++i)
                block.col(static_cast<Index>(i)) = e.generators.col(grp.indices[i]);
            Eigen::JacobiSVD<MatrixX<Scalar>> svd(block, Eigen::ComputeThinU);
            const auto& sv = svd.singularValues();
            for (Index k = 0; k < sv.size(); ++k) {
                items.push_back({sv[k], VectorX<Scalar>(sv[k] * svd.matrixU().col(k)), gi, true});
            }
            two_groups_reducible.push_back(gi);
        }
    }

    if (items.empty()) throw CannotReduceError("reduce_order: all generators participate in constraints");

    Index kept_cols = 0;
    for (std::size_t gi : kept_groups) kept_cols += static_cast<Index>(e.groups[gi].indices.size());
    const Index budget = std::max<Index>(0, target_generators - kept_cols - n);

    std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.key > b.key; });

    VectorX<Scalar> box_widths = VectorX<Scalar>::Zero(n);
    std::vector<const Item*> kept_items;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (static_cast<Index>(kept_items.size()) < budget) {
            kept_items.push_back(&items[i]);
        } else {
            box_widths += items[i].column.cwiseAbs();
        }
    }

    const Index out_cols = kept_cols + static_cast<Index>(kept_items.size()) + n;
    MatrixX<Scalar> g_out(n, out_cols);
    std::vector<NormGroup> groups_out;
    VectorX<Scalar> feas_out = VectorX<Scalar>::Zero(out_cols);

    // Untouched groups first, in original column order (constraint columns
    // keep their positions because they form a prefix of the kept set).
    std::vector<Index> kept_original;
    for (std::size_t gi : kept_groups)
        kept_original.insert(kept_original.end(), e.groups[gi].indices.begin(), e.groups[gi].indices.end());
    std::sort(kept_original.begin(), kept_original.end());
    std::vector<Index> position_of_original(static_cast<std::size_t>(m), -1);
    for (std::size_t pos = 0; pos < kept_original.size(); ++pos) {
        const Index j = kept_original[pos];
        g_out.col(static_cast<Index>(pos)) = e.generators.col(j);
        position_of_original[static_cast<std::size_t>(j)] = static_cast<Index>(pos);
        feas_out[static_cast<Index>(pos)] = e.feasible_coefficients()[j];
    }
    for (std::size_t gi : kept_groups) {
        NormGroup grp;
        grp.p = e.groups[gi].p;
        for (Index j : e.groups[gi].indices) grp.indices.push_back(position_of_original[static_cast<std::size_t>(j)]);
        groups_out.push_back(std::move(grp));
    }

    // Kept reducible items: inf singletons stay singletons; 2-norm axes are
    // regrouped per source group.
    Index col = static_cast<Index>(kept_original.size());
    std::map<std::size_t, NormGroup> regrouped_two;
    for (const Item* item : kept_items) {
        g_out.col(col) = item->column;
        if (item->from_two_group) {
            regrouped_two[item->group].indices.push_back(col);
            regrouped_two[item->group].p = Norm::two;
        } else {
            groups_out.push_back({{col}, Norm::inf});
        }
        ++col;
    }
    for (auto& [gi, grp] : regrouped_two) {
        std::sort(grp.indices.begin(), grp.indices.end());
        groups_out.push_back(std::move(grp));
    }

    // Interval-hull box block for everything folded away.
    for (Index i = 0; i < n; ++i) {
        VectorX<Scalar> axis = VectorX<Scalar>::Zero(n);
        axis[i] = box_widths[i];
        g_out.col(col) = axis;
        groups_out.push_back({{col}, Norm::inf});
        ++col;
    }

    return Ccg<Scalar>::make_unchecked(e.center, std::move(g_out), std::move(groups_out), e.constraint_lhs,
                                       e.constraint_rhs, std::move(feas_out));
}

}  // namespace ccg
