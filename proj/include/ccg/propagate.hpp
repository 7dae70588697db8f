#pragma once

#include <chrono>
#include <iostream>

#include "ccg/identify.hpp"
#include "ccg/matrix_set.hpp"
#include "ccg/operations.hpp"

namespace ccg {

enum class BudgetPolicy { per_step, shared };

struct ProductConfig {
    double delta = 0.05;          // confidence level consumed by the per-step noise truncation
    bool tighten_bounds = false;  // solve the coefficient polytope supports for beta bounds
    Index reduction_order = 0;    // 0 keeps every generator
    BudgetPolicy budget = BudgetPolicy::per_step;
    bool drop_carried_constraints = false;  // relax state sets to unconstrained outer sets per step
    bool measure_full_sets = true;  // record hulls of the sets before relaxation/reduction

    void validate() const {
        if (!(delta > 0 && delta < 1)) throw std::invalid_argument("ProductConfig: delta must be in (0,1)");
    }
};

namespace detail {

inline bool is_bounded_group(const NormGroup& g) { return g.p != Norm::two; }

}  // namespace detail

// Per-coefficient magnitude bounds.  The inf-norm groups give 1 directly;
// with tightening enabled each constrained coefficient is bounded by two
// support evaluations of the coefficient polytope.
template <typename Scalar>
std::vector<Scalar> coefficient_bounds(const Ccg<Scalar>& e, bool tighten = false) {
    const Index m = e.num_generators();
    std::vector<Scalar> bounds(static_cast<std::size_t>(m), Scalar(1));
    if (!tighten || !e.constrained()) return bounds;
    const Ccg<Scalar> polytope = Ccg<Scalar>::make_unchecked(
        VectorX<Scalar>::Zero(m), MatrixX<Scalar>::Identity(m, m), e.groups, e.constraint_lhs,
        e.constraint_rhs, e.feasible_coefficients());
    for (Index k = 0; k < m; ++k) {
        VectorX<Scalar> dir = VectorX<Scalar>::Zero(m);
        dir[k] = 1;
        const Scalar hi = support(polytope, dir);
        dir[k] = -1;
        const Scalar lo = support(polytope, dir);
        bounds[static_cast<std::size_t>(k)] = std::min(std::max(hi, lo), Scalar(1) + Scalar(1e-8));
    }
    return bounds;
}

template <typename Scalar>
std::vector<Scalar> coefficient_bounds(const Cmcg<Scalar>& n, bool tighten = false) {
    return coefficient_bounds(n.coefficients, tighten);
}

// Over-approximation of { Theta z : Theta in N, z in E }.  The retained
// coefficient blocks reproduce the linear terms exactly and keep both sets'
// equality constraints; each bilinear family is covered by fresh variables:
// bounded x bounded and gaussian x gaussian products become singleton inf
// coefficients, bounded x gaussian products become one fresh 2-norm group
// per bounded coefficient and gaussian group.  Gaussian coefficients are
// already truncated into unit balls by construction, so the gaussian x
// gaussian coefficient products are bounded by one.
template <typename Scalar>
Ccg<Scalar> cmcg_ccg_product(const Cmcg<Scalar>& n, const Ccg<Scalar>& e, const ProductConfig& cfg) {
    cfg.validate();
    if (n.cols != e.dim()) throw DimensionError("cmcg_ccg_product: shape mismatch");
    const Index out_dim = n.rows;
    const Index m_theta = n.num_generators();
    const Index m_z = e.num_generators();

    const auto beta_bar = coefficient_bounds(n, cfg.tighten_bounds);
    const auto alpha_bar = coefficient_bounds(e, cfg.tighten_bounds);

    std::vector<Index> theta_bounded, theta_gauss, z_bounded;
    std::vector<const NormGroup*> theta_gauss_groups, z_gauss_groups;
    for (const auto& g : n.coefficients.groups) {
        if (detail::is_bounded_group(g)) {
            theta_bounded.insert(theta_bounded.end(), g.indices.begin(), g.indices.end());
        } else {
            theta_gauss.insert(theta_gauss.end(), g.indices.begin(), g.indices.end());
            theta_gauss_groups.push_back(&g);
        }
    }
    for (const auto& g : e.groups) {
        if (detail::is_bounded_group(g)) {
            z_bounded.insert(z_bounded.end(), g.indices.begin(), g.indices.end());
        } else {
            z_gauss_groups.push_back(&g);
        }
    }
    Index z_gauss_count = 0;
    for (const auto* g : z_gauss_groups) z_gauss_count += static_cast<Index>(g->indices.size());

    const Index fresh_bb = static_cast<Index>(theta_bounded.size()) * static_cast<Index>(z_bounded.size());
    const Index fresh_gg = static_cast<Index>(theta_gauss.size()) * z_gauss_count;
    const Index fresh_bg = static_cast<Index>(theta_bounded.size()) * z_gauss_count;
    Index theta_gauss_total = static_cast<Index>(theta_gauss.size());
    const Index fresh_gb = static_cast<Index>(z_bounded.size()) * theta_gauss_total;
    const Index total = m_theta + m_z + fresh_bb + fresh_gg + fresh_bg + fresh_gb;

    MatrixX<Scalar> gens(out_dim, total);
    VectorX<Scalar> feasible = VectorX<Scalar>::Zero(total);
    std::vector<NormGroup> groups;

    const VectorX<Scalar>& c_z = e.center;
    const MatrixX<Scalar> c_theta = n.center_matrix();
    const VectorX<Scalar>& theta_anchor = n.coefficients.feasible_coefficients();
    const VectorX<Scalar>& z_anchor = e.feasible_coefficients();

    // Retained Theta coefficients (original order, original groups).
    std::vector<MatrixX<Scalar>> theta_mats(static_cast<std::size_t>(m_theta));
    for (Index t = 0; t < m_theta; ++t) {
        theta_mats[static_cast<std::size_t>(t)] = n.generator_matrix(t);
        gens.col(t) = theta_mats[static_cast<std::size_t>(t)] * c_z;
        feasible[t] = theta_anchor[t];
    }
    for (const auto& g : n.coefficients.groups) groups.push_back(g);

    // Retained z coefficients.
    for (Index s = 0; s < m_z; ++s) {
        gens.col(m_theta + s) = c_theta * e.generators.col(s);
        feasible[m_theta + s] = z_anchor[s];
    }
    {
        const auto shifted = detail::offset_groups(e.groups, m_theta);
        groups.insert(groups.end(), shifted.begin(), shifted.end());
    }

    Index col = m_theta + m_z;

    // bounded x bounded: delta_{kl} with |delta| <= 1.
    for (Index k : theta_bounded) {
        const Scalar bk = beta_bar[static_cast<std::size_t>(k)];
        for (Index l : z_bounded) {
            const Scalar al = alpha_bar[static_cast<std::size_t>(l)];
            gens.col(col) = bk * al * (theta_mats[static_cast<std::size_t>(k)] * e.generators.col(l));
            const Scalar denom = bk * al;
            feasible[col] = denom > Scalar(0) ? theta_anchor[k] * z_anchor[l] / denom : Scalar(0);
            groups.push_back({{col}, Norm::inf});
            ++col;
        }
    }

    // gaussian x gaussian: |xi_j xi_r| <= 1, covered by singleton inf
    // coefficients on the already-scaled generator products.
    for (Index j : theta_gauss) {
        for (const auto* zg : z_gauss_groups) {
            for (Index r : zg->indices) {
                gens.col(col) = theta_mats[static_cast<std::size_t>(j)] * e.generators.col(r);
                feasible[col] = theta_anchor[j] * z_anchor[r];
                groups.push_back({{col}, Norm::inf});
                ++col;
            }
        }
    }

    // bounded(theta) x gaussian(z): one fresh 2-norm group per pair of
    // bounded coefficient and z gaussian group.
    for (Index k : theta_bounded) {
        const Scalar bk = beta_bar[static_cast<std::size_t>(k)];
        for (const auto* zg : z_gauss_groups) {
            NormGroup fresh;
            fresh.p = Norm::two;
            for (Index r : zg->indices) {
                gens.col(col) = bk * (theta_mats[static_cast<std::size_t>(k)] * e.generators.col(r));
                feasible[col] = bk > Scalar(0) ? (theta_anchor[k] / bk) * z_anchor[r] : Scalar(0);
                fresh.indices.push_back(col);
                ++col;
            }
            groups.push_back(std::move(fresh));
        }
    }

    // gaussian(theta) x bounded(z): one fresh 2-norm group per pair of z
    // bounded coefficient and theta gaussian group.
    for (Index l : z_bounded) {
        const Scalar al = alpha_bar[static_cast<std::size_t>(l)];
        for (const auto* tg : theta_gauss_groups) {
            NormGroup fresh;
            fresh.p = Norm::two;
            for (Index j : tg->indices) {
                gens.col(col) = al * (theta_mats[static_cast<std::size_t>(j)] * e.generators.col(l));
                feasible[col] = al > Scalar(0) ? (z_anchor[l] / al) * theta_anchor[j] : Scalar(0);
                fresh.indices.push_back(col);
                ++col;
            }
            groups.push_back(std::move(fresh));
        }
    }

    return Ccg<Scalar>::make_unchecked(
        c_theta * c_z, std::move(gens), std::move(groups),
        detail::block_diag_constraints(n.coefficients.constraint_lhs, m_theta, e.constraint_lhs),
        detail::concat(n.coefficients.constraint_rhs, e.constraint_rhs), std::move(feasible));
}

namespace detail {

// Admissible coefficient sampler: per-group ball sampling, a least-squares
// step onto the equality constraints, then a pull toward the cached anchor
// until every group norm fits.
template <typename Scalar>
class AdmissibleSampler {
  public:
    explicit AdmissibleSampler(const Ccg<Scalar>& e) : set_(e) {
        if (set_.constrained()) {
            cod_.compute(MatrixX<Scalar>(set_.constraint_lhs));
        }
    }

    VectorX<Scalar> sample(Rng& rng) const {
        VectorX<Scalar> beta(set_.num_generators());
        for (const auto& g : set_.groups) {
            const Index s = static_cast<Index>(g.indices.size());
            VectorX<Scalar> sub(s);
            switch (g.p) {
                case Norm::inf:
                    for (Index i = 0; i < s; ++i) sub[i] = rng.uniform(-1.0, 1.0);
                    break;
                case Norm::two:
                    sub = rng.unit_ball(s);
                    break;
                case Norm::one: {
                    sub = rng.unit_ball(s);
                    const Scalar l1 = sub.template lpNorm<1>();
                    if (l1 > Scalar(1)) sub /= l1;
                    break;
                }
            }
            for (Index i = 0; i < s; ++i) beta[g.indices[static_cast<std::size_t>(i)]] = sub[i];
        }
        return repair(beta);
    }

    // Deterministic corner: a sign pattern with 2-norm groups normalized to
    // the ball boundary.
    VectorX<Scalar> corner(std::uint64_t pattern) const {
        VectorX<Scalar> beta(set_.num_generators());
        for (Index i = 0; i < beta.size(); ++i) beta[i] = (pattern >> i) & 1 ? Scalar(1) : Scalar(-1);
        for (const auto& g : set_.groups) {
            if (g.p == Norm::two) {
                const Scalar norm = std::sqrt(static_cast<Scalar>(g.indices.size()));
                for (Index idx : g.indices) beta[idx] /= norm;
            } else if (g.p == Norm::one) {
                const Scalar norm = static_cast<Scalar>(g.indices.size());
                for (Index idx : g.indices) beta[idx] /= norm;
            }
        }
        return repair(beta);
    }

  private:
    VectorX<Scalar> repair(VectorX<Scalar> beta) const {
        if (!set_.constrained()) return beta;
        const Index mc = set_.constraint_lhs.cols();
        VectorX<Scalar> head = beta.head(mc);
        const VectorX<Scalar> gap = set_.constraint_lhs * head - set_.constraint_rhs;
        head -= cod_.solve(gap);
        beta.head(mc) = head;
        const auto& anchor = set_.feasible_coefficients();
        Scalar lo = 0, hi = 1;
        if (group_norms_ok(beta)) return beta;
        for (int i = 0; i < 30; ++i) {
            const Scalar mid = (lo + hi) / 2;
            const VectorX<Scalar> candidate = anchor + mid * (beta - anchor);
            if (group_norms_ok(candidate)) lo = mid; else hi = mid;
        }
        return anchor + lo * (beta - anchor);
    }

    bool group_norms_ok(const VectorX<Scalar>& beta) const {
        for (const auto& g : set_.groups) {
            VectorX<Scalar> sub(g.indices.size());
            for (std::size_t i = 0; i < g.indices.size(); ++i)
                sub[static_cast<Index>(i)] = beta[g.indices[i]];
            if (vector_norm(sub, g.p) > Scalar(1) + Scalar(1e-12)) return false;
        }
        return true;
    }

    const Ccg<Scalar>& set_;
    Eigen::CompleteOrthogonalDecomposition<MatrixX<Scalar>> cod_;
};

}  // namespace detail

struct ContainmentReport {
    Index samples = 0;
    Index violations = 0;
    double max_margin = 0;
};

// Draws admissible (Theta, z) pairs and checks that every exact product lies
// in the over-approximation returned by cmcg_ccg_product.
template <typename Scalar>
ContainmentReport product_containment_check(const Cmcg<Scalar>& n, const Ccg<Scalar>& e,
                                            const ProductConfig& cfg, Index samples, std::uint64_t seed) {
    const Ccg<Scalar> product = cmcg_ccg_product(n, e, cfg);
    detail::AdmissibleSampler<Scalar> sample_theta(n.coefficients);
    detail::AdmissibleSampler<Scalar> sample_z(e);
    Rng rng(seed);

    ContainmentReport report;
    report.samples = samples;
    for (Index i = 0; i < samples; ++i) {
        const VectorX<Scalar> bt = sample_theta.sample(rng);
        const VectorX<Scalar> bz = sample_z.sample(rng);
        const MatrixX<Scalar> theta =
            unvec<Scalar>(n.coefficients.center + n.coefficients.generators * bt, n.rows, n.cols);
        const VectorX<Scalar> z = e.center + e.generators * bz;
        const VectorX<Scalar> y = theta * z;
        const auto res = contains_point(product, y, Scalar(1e-5));
        report.max_margin = std::max(report.max_margin, double(res.margin));
        if (!(res.margin <= Scalar(1) + Scalar(1e-5))) ++report.violations;
    }
    return report;
}

// Exhaustive sign-corner version for instances with few coefficients.
template <typename Scalar>
ContainmentReport product_corner_check(const Cmcg<Scalar>& n, const Ccg<Scalar>& e,
                                       const ProductConfig& cfg, Index max_coefficients = 12) {
    const Index mt = n.num_generators();
    const Index mz = e.num_generators();
    if (mt + mz > max_coefficients)
        throw std::invalid_argument("product_corner_check: too many coefficients to enumerate");
    const Ccg<Scalar> product = cmcg_ccg_product(n, e, cfg);
    detail::AdmissibleSampler<Scalar> sample_theta(n.coefficients);
    detail::AdmissibleSampler<Scalar> sample_z(e);

    ContainmentReport report;
    for (std::uint64_t pt = 0; pt < (1ULL << mt); ++pt) {
        const VectorX<Scalar> bt = sample_theta.corner(pt);
        const MatrixX<Scalar> theta =
            unvec<Scalar>(n.coefficients.center + n.coefficients.generators * bt, n.rows, n.cols);
        for (std::uint64_t pz = 0; pz < (1ULL << mz); ++pz) {
            const VectorX<Scalar> bz = sample_z.corner(pz);
            const VectorX<Scalar> y = theta * (e.center + e.generators * bz);
            const auto res = contains_point(product, y, Scalar(1e-5));
            ++report.samples;
            report.max_margin = std::max(report.max_margin, double(res.margin));
            if (!(res.margin <= Scalar(1) + Scalar(1e-5))) ++report.violations;
        }
    }
    return report;
}

// Conservatism bound for replacing the gaussian x gaussian coefficient
// products by independent bounded coefficients: the support gap never
// exceeds (sqrt(gamma_theta * gamma_z) - 1) * sqrt(sum ||H_jr||_F^2) on the
// already-scaled generators.
template <typename Scalar>
Scalar gg_gap_bound(const Cmcg<Scalar>& n, const Ccg<Scalar>& e) {
    std::vector<Index> theta_gauss, z_gauss;
    for (const auto& g : n.coefficients.groups)
        if (g.p == Norm::two) theta_gauss.insert(theta_gauss.end(), g.indices.begin(), g.indices.end());
    for (const auto& g : e.groups)
        if (g.p == Norm::two) z_gauss.insert(z_gauss.end(), g.indices.begin(), g.indices.end());
    if (theta_gauss.empty() || z_gauss.empty())
        throw std::invalid_argument("gg_gap_bound: both sets need gaussian groups");

    Scalar frob2 = 0;
    for (Index j : theta_gauss) {
        const MatrixX<Scalar> gj = n.generator_matrix(j);
        for (Index r : z_gauss) frob2 += (gj * e.generators.col(r)).squaredNorm();
    }
    const Scalar count = static_cast<Scalar>(theta_gauss.size()) * static_cast<Scalar>(z_gauss.size());
    return (std::sqrt(count) - Scalar(1)) * std::sqrt(frob2);
}

// Hausdorff-error recurrence over K steps with per-step error eps and
// contraction factor kappa.
inline double wrapping_bound(double kappa, double eps_prod, int k_steps) {
    if (kappa < 0) throw std::invalid_argument("wrapping_bound: kappa must be nonnegative");
    if (k_steps < 1) throw std::invalid_argument("wrapping_bound: need at least one step");
    if (std::abs(kappa - 1.0) < 1e-14) return k_steps * eps_prod;
    return (1.0 - std::pow(kappa, k_steps)) / (1.0 - kappa) * eps_prod;
}

template <typename Scalar>
Ccg<Scalar> drop_constraints(const Ccg<Scalar>& e) {
    if (!e.constrained()) return e;
    return Ccg<Scalar>::make_unchecked(e.center, e.generators, e.groups, SparseMatrix<Scalar>(),
                                       VectorX<Scalar>(), e.feasible_coefficients());
}

namespace detail {

// Product plus disturbance sums, before any relaxation.
template <typename Scalar>
Ccg<Scalar> reach_step_exact(const ParamSet& n, const Ccg<Scalar>& x_k, const Ccg<Scalar>& u,
                             const Ccg<Scalar>& w_bounded, const Ccg<Scalar>& w_gauss,
                             const ProductConfig& cfg) {
    const Ccg<Scalar> z = cartesian_product(x_k, u);
    Ccg<Scalar> y = cmcg_ccg_product(n.set, z, cfg);
    if (w_bounded.dim() > 0) y = minkowski_sum(y, w_bounded);
    if (w_gauss.dim() > 0) y = minkowski_sum(y, w_gauss);
    return y;
}

template <typename Scalar>
Ccg<Scalar> relax_state_set(Ccg<Scalar> y, const ProductConfig& cfg) {
    if (cfg.drop_carried_constraints) y = drop_constraints(y);
    if (cfg.reduction_order > 0 && y.num_generators() > cfg.reduction_order) {
        y = reduce_order(y, cfg.reduction_order);
    }
    return y;
}

}  // namespace detail

// One propagation step: augment the state with the input set, multiply by
// the parameter set, then add both disturbance sets.  Optional relaxation
// and order reduction keep long tubes tractable.
template <typename Scalar>
Ccg<Scalar> reach_step(const ParamSet& n, const Ccg<Scalar>& x_k, const Ccg<Scalar>& u,
                       const Ccg<Scalar>& w_bounded, const Ccg<Scalar>& w_gauss, const ProductConfig& cfg) {
    return detail::relax_state_set(detail::reach_step_exact(n, x_k, u, w_bounded, w_gauss, cfg), cfg);
}

struct StepNoiseSets {
    Ccg<double> bounded;
    Ccg<double> gauss;
};

// Per-step disturbance sets at truncation level alpha_step.
inline StepNoiseSets noise_step_sets(const NoiseSpec& noise, Index n, double alpha_step) {
    StepNoiseSets out{Ccg<double>::point(VectorX<double>::Zero(n)),
                      Ccg<double>::point(VectorX<double>::Zero(n))};
    switch (noise.kind) {
        case NoiseSpec::Kind::bounded:
            out.bounded = Ccg<double>::box(VectorX<double>::Zero(n),
                                           VectorX<double>::Constant(n, noise.bound));
            break;
        case NoiseSpec::Kind::gaussian:
            out.gauss = Ccg<double>::ball(
                VectorX<double>::Zero(n),
                noise.sigma * std::sqrt(chi2_quantile(static_cast<int>(n), 1.0 - alpha_step)));
            break;
        case NoiseSpec::Kind::mixed:
            out.bounded = Ccg<double>::box(VectorX<double>::Zero(n),
                                           VectorX<double>::Constant(n, noise.bound));
            out.gauss = Ccg<double>::ball(
                VectorX<double>::Zero(n),
                noise.sigma * std::sqrt(chi2_quantile(static_cast<int>(n), 1.0 - alpha_step)));
            break;
        case NoiseSpec::Kind::gaussian_mixture: {
            if (n != 1)
                throw std::invalid_argument("noise_step_sets: mixture noise is handled per scalar channel");
            const auto region = hdr_1d(noise.marginal(), alpha_step);
            const auto surrogate = mvee_of_intervals(region);
            out.bounded = Ccg<double>::box(surrogate.center,
                                           VectorX<double>::Constant(1, std::sqrt(surrogate.shape(0, 0))));
            break;
        }
    }
    return out;
}

struct ReachTube {
    std::vector<Ccg<double>> steps;
    std::vector<IntervalBox<double>> hulls;
    std::vector<double> volumes;
    std::vector<double> step_seconds;
    double offline_seconds = 0;

    double total_seconds() const {
        double s = offline_seconds;
        for (double t : step_seconds) s += t;
        return s;
    }
};

// K-step tube.  The per-step Gaussian truncation level is cfg.delta for the
// per-step budget policy and cfg.delta / K when the budget is shared across
// the horizon.
inline ReachTube reach_tube(const ParamSet& n, const Ccg<double>& x0, const Ccg<double>& u,
                            const NoiseSpec& noise, Index k_steps, const ProductConfig& cfg) {
    cfg.validate();
    if (k_steps < 1) throw std::invalid_argument("reach_tube: need at least one step");
    const double alpha_step =
        cfg.budget == BudgetPolicy::per_step ? cfg.delta : cfg.delta / static_cast<double>(k_steps);
    const auto noise_sets = noise_step_sets(noise, n.set.rows, alpha_step);

    ReachTube tube;
    Ccg<double> x = x0;
    bool warned = false;
    for (Index k = 0; k < k_steps; ++k) {
        const auto start = std::chrono::steady_clock::now();
        Ccg<double> full = detail::reach_step_exact(n, x, u, noise_sets.bounded, noise_sets.gauss, cfg);
        if (!warned && cfg.reduction_order == 0 && full.num_generators() > 10000) {
            std::cerr << "reach_tube: step " << (k + 1) << " carries " << full.num_generators()
                      << " generators; consider enabling order reduction\n";
            warned = true;
        }
        Ccg<double> relaxed = detail::relax_state_set(full, cfg);
        const Ccg<double>& measured = cfg.measure_full_sets ? full : relaxed;
        const auto hull = interval_hull(measured);
        const auto stop = std::chrono::steady_clock::now();
        tube.steps.push_back(measured);
        tube.hulls.push_back(hull);
        tube.volumes.push_back(hull.volume());
        tube.step_seconds.push_back(std::chrono::duration<double>(stop - start).count());
        x = std::move(relaxed);
    }
    return tube;
}

}  // namespace ccg
