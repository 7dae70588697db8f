#pragma once

#include <string>

#include "ccg/matrix_set.hpp"
#include "ccg/mvee.hpp"
#include "ccg/numeric.hpp"
#include "ccg/simulate.hpp"
#include "ccg/stats.hpp"

namespace ccg {

// Data equation artifacts for X_plus = Theta * M + W with M = [X_minus; U_minus].
struct DataRecord {
    MatrixX<double> x_minus;   // n x T
    MatrixX<double> u_minus;   // m x T
    MatrixX<double> x_plus;    // n x T
    MatrixX<double> m;         // (n+m) x T
    MatrixX<double> m_dagger;  // T x (n+m)
    MatrixX<double> m_perp;    // T x d_kernel
    MatrixX<double> p_m;       // T x T projector onto the row space of m

    Index state_dim() const { return x_minus.rows(); }
    Index input_dim() const { return u_minus.rows(); }
    Index horizon() const { return x_minus.cols(); }
    Index kernel_dim() const { return m_perp.cols(); }
    Index param_dim() const { return state_dim() * (state_dim() + input_dim()); }

    MatrixX<double> ols_estimate() const { return x_plus * m_dagger; }
};

inline DataRecord build_data_equation(const Trajectory& traj) {
    traj.validate();
    const Index t = traj.horizon();
    const Index n = traj.states.rows();
    const Index m_in = traj.inputs.rows();
    if (t < n + m_in) throw RankDeficientError("build_data_equation: horizon shorter than n+m");

    DataRecord rec;
    rec.x_minus = traj.states.leftCols(t);
    rec.x_plus = traj.states.rightCols(t);
    rec.u_minus = traj.inputs;
    rec.m.resize(n + m_in, t);
    rec.m << rec.x_minus, rec.u_minus;

    if (numerical_rank(rec.m) < rec.m.rows()) {
        throw RankDeficientError("build_data_equation: data matrix lost row rank (insufficient excitation)");
    }
    rec.m_dagger = pseudoinverse_full_row_rank(rec.m);
    rec.m_perp = kernel_basis(rec.m);
    rec.p_m = row_space_projector(rec.m);
    return rec;
}

enum class ParamSetKind { pullback_generic, gaussian_ellipsoid, bounded_cmz, mixed_cmcg, box_cmz, singleton };

struct ParamSet {
    Cmcg<double> set;
    ParamSetKind kind = ParamSetKind::pullback_generic;
    double confidence = 1.0;
    std::string noise_summary;
};

// Entrywise box noise over the n x T disturbance matrix: one generator per
// entry, vectorized as a * I.
inline Ccg<double> entrywise_box_noise(double a, Index n, Index t) {
    const Index q = n * t;
    if (a == 0.0) {
        return Ccg<double>::point(VectorX<double>::Zero(q));
    }
    MatrixX<double> g = a * MatrixX<double>::Identity(q, q);
    return Ccg<double>::zonotope(VectorX<double>::Zero(q), std::move(g));
}

// Frobenius-ball noise surrogate over all n x T entries at level 1 - alpha.
inline Ccg<double> frobenius_ball_noise(double sigma, Index n, Index t, double alpha) {
    const Index q = n * t;
    const double radius = gaussian_frobenius_hdr(sigma, static_cast<int>(q), alpha);
    return Ccg<double>::ball(VectorX<double>::Zero(q), radius);
}

// General pullback of a vectorized noise set through the data equation.
// The result keeps the noise coefficients, maps generators through the
// pseudoinverse, and appends the kernel solvability rows to any constraints
// the noise set already carries.
inline ParamSet pullback(const Ccg<double>& noise_set, const DataRecord& data) {
    const Index n = data.state_dim();
    const Index t = data.horizon();
    const Index p = n + data.input_dim();
    if (noise_set.dim() != n * t) throw DimensionError("pullback: noise set must live on vec(W)");

    const Index gamma = noise_set.num_generators();
    const Index d_kernel = data.kernel_dim();
    const MatrixX<double> c_w = unvec(noise_set.center, n, t);
    const MatrixX<double> shifted = data.x_plus - c_w;

    MatrixX<double> gens(n * p, gamma);
    MatrixX<double> kernel_rows = MatrixX<double>::Zero(n * d_kernel, gamma);
    for (Index j = 0; j < gamma; ++j) {
        const MatrixX<double> g_w = unvec<double>(noise_set.generators.col(j), n, t);
        gens.col(j) = vec<double>(-g_w * data.m_dagger);
        if (d_kernel > 0) kernel_rows.col(j) = vec<double>(g_w * data.m_perp);
    }

    const Index r0 = noise_set.constraint_lhs.rows();
    SparseMatrix<double> a_out;
    VectorX<double> b_out(r0 + n * d_kernel);
    {
        MatrixX<double> dense = MatrixX<double>::Zero(r0 + n * d_kernel, gamma);
        if (r0 > 0)
            dense.block(0, 0, r0, noise_set.constraint_lhs.cols()) = MatrixX<double>(noise_set.constraint_lhs);
        if (d_kernel > 0) dense.bottomRows(n * d_kernel) = kernel_rows;
        a_out = dense.sparseView(1.0, 1e-300);
        if (r0 > 0) b_out.head(r0) = noise_set.constraint_rhs;
        if (d_kernel > 0) b_out.tail(n * d_kernel) = vec<double>(shifted * data.m_perp);
    }

    Ccg<double> inner = [&] {
        try {
            if (b_out.size() == 0) {
                return Ccg<double>::make(vec<double>(shifted * data.m_dagger), std::move(gens),
                                         noise_set.groups);
            }
            return Ccg<double>::make(vec<double>(shifted * data.m_dagger), std::move(gens), noise_set.groups,
                                     std::move(a_out), std::move(b_out));
        } catch (const EmptySetError&) {
            throw EmptySetError("pullback: parameter set is empty (noise model inconsistent with data)");
        }
    }();

    ParamSet out;
    out.set = Cmcg<double>::from_vectorized(n, p, std::move(inner));
    out.kind = ParamSetKind::pullback_generic;
    return out;
}

// Ellipsoidal parameter set for i.i.d. Gaussian noise: only the d = n(n+m)
// noise directions that project onto the row space of M matter, so the
// radius uses the chi-squared quantile with d degrees of freedom.  Realized
// as d generator matrices from the inverse Cholesky factor of M M'; no
// equality constraints remain.
inline ParamSet gaussian_param_set(const DataRecord& data, double sigma, double alpha) {
    if (sigma < 0) throw std::invalid_argument("gaussian_param_set: sigma must be >= 0");
    const Index n = data.state_dim();
    const Index p = n + data.input_dim();
    const Index d = n * p;
    const MatrixX<double> theta_hat = data.ols_estimate();

    MatrixX<double> gens(d, sigma > 0 ? d : 0);
    if (sigma > 0) {
        const double radius = sigma * std::sqrt(chi2_quantile(static_cast<int>(d), 1.0 - alpha));
        const MatrixX<double> gram = data.m * data.m.transpose();
        Eigen::LLT<MatrixX<double>> llt(gram);
        if (llt.info() != Eigen::Success)
            throw RankDeficientError("gaussian_param_set: Gram matrix not positive definite");
        const MatrixX<double> l_inv_t =
            llt.matrixL().transpose().solve(MatrixX<double>::Identity(p, p));
        for (Index j = 0; j < p; ++j)
            for (Index i = 0; i < n; ++i)
                gens.col(j * n + i) = radius * vec<double>(VectorX<double>::Unit(n, i) * l_inv_t.col(j).transpose());
    }

    ParamSet out;
    out.set = Cmcg<double>::from_vectorized(
        n, p,
        Ccg<double>::make_unchecked(vec(theta_hat), std::move(gens),
                                    sigma > 0 ? single_group(d, Norm::two) : std::vector<NormGroup>{},
                                    SparseMatrix<double>(), VectorX<double>(),
                                    VectorX<double>::Zero(sigma > 0 ? d : 0)));
    out.kind = ParamSetKind::gaussian_ellipsoid;
    out.confidence = 1.0 - alpha;
    out.noise_summary = NoiseSpec::gaussian(sigma).summary();
    return out;
}

// Same confidence region expressed as an ellipsoid over vec(Theta).
inline Ellipsoid<double> mle_ellipsoid(const DataRecord& data, double sigma, double alpha) {
    if (!(sigma > 0)) throw std::invalid_argument("mle_ellipsoid: sigma must be positive");
    const Index n = data.state_dim();
    const Index p = n + data.input_dim();
    const Index d = n * p;
    const double r2 = sigma * sigma * chi2_quantile(static_cast<int>(d), 1.0 - alpha);
    const MatrixX<double> gram = data.m * data.m.transpose();
    const MatrixX<double> gram_inv = gram.llt().solve(MatrixX<double>::Identity(p, p));

    Ellipsoid<double> e;
    e.center = vec<double>(data.ols_estimate());
    e.shape = MatrixX<double>::Zero(d, d);
    for (Index j = 0; j < p; ++j)
        for (Index i = 0; i < p; ++i)
            e.shape.block(i * n, j * n, n, n) =
                r2 * gram_inv(i, j) * MatrixX<double>::Identity(n, n);
    return e;
}

// Constrained matrix zonotope for entrywise bounded noise, assembled from
// the zonotope pieces directly; agrees with pullback() applied to the same
// noise set.
inline ParamSet bounded_param_set(const DataRecord& data, const Ccg<double>& noise_zonotope) {
    for (const auto& grp : noise_zonotope.groups) {
        if (grp.p != Norm::inf || grp.indices.size() != 1)
            throw std::invalid_argument("bounded_param_set: noise set must be a plain zonotope");
    }
    if (noise_zonotope.constrained())
        throw std::invalid_argument("bounded_param_set: noise set must be unconstrained");

    const Index n = data.state_dim();
    const Index t = data.horizon();
    const Index p = n + data.input_dim();
    const Index d_kernel = data.kernel_dim();
    if (noise_zonotope.dim() != n * t) throw DimensionError("bounded_param_set: noise set must live on vec(W)");

    const Index gamma = noise_zonotope.num_generators();
    const MatrixX<double> c_w = unvec(noise_zonotope.center, n, t);
    const MatrixX<double> shifted = data.x_plus - c_w;

    MatrixX<double> gens(n * p, gamma);
    MatrixX<double> kernel_rows = MatrixX<double>::Zero(n * d_kernel, gamma);
    for (Index j = 0; j < gamma; ++j) {
        const MatrixX<double> g_w = unvec<double>(noise_zonotope.generators.col(j), n, t);
        gens.col(j) = vec<double>(-g_w * data.m_dagger);
        if (d_kernel > 0) kernel_rows.col(j) = vec<double>(g_w * data.m_perp);
    }

    ParamSet out;
    try {
        if (d_kernel == 0) {
            out.set = Cmcg<double>::from_vectorized(
                n, p,
                Ccg<double>::make(vec<double>(shifted * data.m_dagger), std::move(gens),
                                  singleton_inf_groups(gamma)));
        } else {
            out.set = Cmcg<double>::from_vectorized(
                n, p,
                Ccg<double>::make(vec<double>(shifted * data.m_dagger), std::move(gens),
                                  singleton_inf_groups(gamma), kernel_rows.sparseView(1.0, 1e-300),
                                  vec<double>(shifted * data.m_perp)));
        }
    } catch (const EmptySetError&) {
        throw EmptySetError("bounded_param_set: parameter set is empty (bound too small for the data)");
    }
    out.kind = ParamSetKind::bounded_cmz;
    return out;
}

// Parameter set for additive bounded-plus-Gaussian noise.  The bounded block
// is pulled through the pseudoinverse; the Gaussian block is the chi-squared
// ellipsoid over the d parameter-relevant directions, scaled by
// r_g = sigma * sqrt(chi2(d, 1-alpha)).  The orthogonal-complement Gaussian
// directions absorb the kernel equations (their generators map to zero and
// their span covers the kernel rows), so no equality constraints remain;
// sigma = 0 falls back to the fully constrained bounded set.
inline ParamSet mixed_param_set(const DataRecord& data, const Ccg<double>& bounded_zonotope, double sigma,
                                double alpha) {
    if (sigma < 0) throw std::invalid_argument("mixed_param_set: sigma must be >= 0");
    if (sigma == 0.0) {
        ParamSet out = bounded_param_set(data, bounded_zonotope);
        out.kind = ParamSetKind::mixed_cmcg;
        out.confidence = 1.0;
        out.noise_summary = NoiseSpec::mixed(0, 0).summary();
        return out;
    }
    for (const auto& grp : bounded_zonotope.groups) {
        if (grp.p != Norm::inf || grp.indices.size() != 1)
            throw std::invalid_argument("mixed_param_set: bounded part must be a plain zonotope");
    }
    const Index n = data.state_dim();
    const Index t = data.horizon();
    const Index p = n + data.input_dim();
    const Index d = n * p;
    if (bounded_zonotope.dim() != n * t)
        throw DimensionError("mixed_param_set: bounded part must live on vec(W)");

    const Index gamma_b = bounded_zonotope.num_generators();
    const MatrixX<double> c_w = unvec(bounded_zonotope.center, n, t);
    const MatrixX<double> shifted = data.x_plus - c_w;

    MatrixX<double> gens(d, gamma_b + d);
    for (Index j = 0; j < gamma_b; ++j) {
        const MatrixX<double> g_w = unvec<double>(bounded_zonotope.generators.col(j), n, t);
        gens.col(j) = vec<double>(-g_w * data.m_dagger);
    }
    const double radius = sigma * std::sqrt(chi2_quantile(static_cast<int>(d), 1.0 - alpha));
    const MatrixX<double> gram = data.m * data.m.transpose();
    Eigen::LLT<MatrixX<double>> llt(gram);
    if (llt.info() != Eigen::Success)
        throw RankDeficientError("mixed_param_set: Gram matrix not positive definite");
    const MatrixX<double> l_inv_t = llt.matrixL().transpose().solve(MatrixX<double>::Identity(p, p));
    for (Index j = 0; j < p; ++j)
        for (Index i = 0; i < n; ++i)
            gens.col(gamma_b + j * n + i) =
                radius * vec<double>(VectorX<double>::Unit(n, i) * l_inv_t.col(j).transpose());

    std::vector<NormGroup> groups = singleton_inf_groups(gamma_b);
    const auto tail = single_group(d, Norm::two, gamma_b);
    groups.insert(groups.end(), tail.begin(), tail.end());

    ParamSet out;
    out.set = Cmcg<double>::from_vectorized(
        n, p,
        Ccg<double>::make_unchecked(vec<double>(shifted * data.m_dagger), std::move(gens), std::move(groups),
                                    SparseMatrix<double>(), VectorX<double>(),
                                    VectorX<double>::Zero(gamma_b + d)));
    out.kind = ParamSetKind::mixed_cmcg;
    out.confidence = 1.0 - alpha;
    out.noise_summary = NoiseSpec::mixed(0, sigma).summary();
    return out;
}

// Box baseline: the Gaussian part is replaced by the entrywise m_box * sigma
// box, Minkowski-added to the bounded noise zonotope, and pulled back as a
// constrained matrix zonotope.
inline ParamSet box_cmz_baseline(const DataRecord& data, double sigma, double m_box,
                                 const Ccg<double>& bounded_gens) {
    if (!(m_box > 0)) throw std::invalid_argument("box_cmz_baseline: m_box must be positive");
    const Index n = data.state_dim();
    const Index t = data.horizon();

    ParamSet out = [&] {
        if (sigma == 0.0) return bounded_param_set(data, bounded_gens);
        const Ccg<double> box = entrywise_box_noise(m_box * sigma, n, t);
        if (bounded_gens.num_generators() == 0) return bounded_param_set(data, box);
        return bounded_param_set(data, minkowski_sum(bounded_gens, box));
    }();
    out.kind = ParamSetKind::box_cmz;
    out.noise_summary = "box(" + std::to_string(m_box) + " sigma)";
    return out;
}

// Degenerate parameter set holding exactly one matrix; used by model-based
// propagation baselines.
inline ParamSet singleton_param_set(const MatrixX<double>& theta) {
    ParamSet out;
    out.set = Cmcg<double>::from_vectorized(theta.rows(), theta.cols(),
                                            Ccg<double>::point(vec(theta)));
    out.kind = ParamSetKind::singleton;
    out.noise_summary = "singleton";
    return out;
}

}  // namespace ccg
