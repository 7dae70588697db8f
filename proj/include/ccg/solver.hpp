#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "ccg/core.hpp"
#include "ccg/norms.hpp"
#include "ccg/numeric.hpp"

namespace ccg {
namespace detail {

struct DescentOptions {
    double mu_start = 1e-2;
    double mu_floor = 1e-8;
    double rel_change_tol = 1e-9;
    int max_iterations_per_stage = 20000;
};

// Spectral norm bound via a few power iterations from a fixed pseudo-random
// start (deterministic across runs, never orthogonal to the top singular
// vector in practice); falls back to the Frobenius norm if the iteration
// collapses.
template <typename Scalar, typename Mat>
Scalar spectral_norm_estimate(const Mat& a, int iterations = 30) {
    if (a.rows() == 0 || a.cols() == 0) return Scalar(0);
    VectorX<Scalar> x(a.cols());
    std::uint64_t state = 0x853c49e6748fea9bULL;
    for (Index i = 0; i < x.size(); ++i) {
        state = state * 6364136223846793005ULL + 1442695040888963407ULL;
        x[i] = Scalar(2) * (Scalar(static_cast<double>(state >> 11) * 0x1.0p-53) - Scalar(0.5));
    }
    x.normalize();
    Scalar sigma = 0;
    for (int i = 0; i < iterations; ++i) {
        VectorX<Scalar> y = a * x;
        sigma = y.norm();
        VectorX<Scalar> z = a.transpose() * y;
        const Scalar zn = z.norm();
        if (zn < std::numeric_limits<Scalar>::min()) break;
        x = z / zn;
    }
    const Scalar frob = a.norm();
    if (!(sigma > frob * Scalar(1e-8))) sigma = frob;
    return sigma;
}

// Minimizes f(z) = g'z + sum_k || (w + M z)_{I_k} ||_{q_k} over z, where the
// group norms are the duals of the stored primal norms.  The nonsmooth sum is
// replaced by Moreau envelopes with an annealed smoothing parameter; each
// stage runs accelerated gradient steps with adaptive restart and is declared
// converged when the relative objective change drops below the tolerance.
//
// The returned value is the objective evaluated with the exact (unsmoothed)
// norms at the final iterate, so it upper-bounds the true minimum for the
// support dual it serves.
template <typename Scalar, typename ApplyM, typename ApplyMT>
struct GroupNormDescent {
    const VectorX<Scalar>& g;
    const VectorX<Scalar>& w;
    ApplyM apply_m;      // z -> M z            (length of w)
    ApplyMT apply_mt;    // u -> M^T u          (length of z)
    const std::vector<NormGroup>& groups;
    Scalar m_norm_bound;  // upper bound on ||M||_2

    struct Result {
        Scalar value = std::numeric_limits<Scalar>::infinity();
        VectorX<Scalar> z;
        bool diverged = false;
    };

    Scalar exact_value(const VectorX<Scalar>& z) const {
        const VectorX<Scalar> v = w + apply_m(z);
        Scalar f = g.size() ? g.dot(z) : Scalar(0);
        return f + grouped_dual_norm_sum(v, groups);
    }

    Result run(const DescentOptions& opts, Index z_dim,
               const VectorX<Scalar>* warm_start = nullptr) const {
        Result out;
        out.z = warm_start && warm_start->size() == z_dim ? *warm_start
                                                          : VectorX<Scalar>::Zero(z_dim);
        if (z_dim == 0) {
            out.value = exact_value(out.z);
            return out;
        }

        const Scalar scale = std::max<Scalar>({Scalar(1), w.size() ? w.template lpNorm<Eigen::Infinity>() : Scalar(0),
                                               g.size() ? g.template lpNorm<Eigen::Infinity>() : Scalar(0)});
        const Scalar divergence_floor = Scalar(-1e14) * scale;
        const Scalar m2 = std::max<Scalar>(m_norm_bound * m_norm_bound, Scalar(1e-300));

        VectorX<Scalar> u(w.size());
        std::size_t max_group = 1;
        for (const auto& grp : groups) max_group = std::max(max_group, grp.indices.size());
        VectorX<Scalar> scratch(static_cast<Index>(max_group));
        auto eval = [&](const VectorX<Scalar>& z, Scalar mu, VectorX<Scalar>& grad) -> Scalar {
            const VectorX<Scalar> v = w + apply_m(z);
            Scalar f = g.size() ? g.dot(z) : Scalar(0);
            for (const auto& grp : groups) {
                if (grp.indices.size() == 1) {
                    // Every norm agrees on scalars; the envelope is the Huber
                    // function.
                    const Index idx = grp.indices[0];
                    const Scalar x = v[idx];
                    if (std::abs(x) <= mu) {
                        u[idx] = x / mu;
                        f += Scalar(0.5) * x * x / mu;
                    } else {
                        u[idx] = x > 0 ? Scalar(1) : Scalar(-1);
                        f += std::abs(x) - Scalar(0.5) * mu;
                    }
                    continue;
                }
                const Index s = static_cast<Index>(grp.indices.size());
                for (Index i = 0; i < s; ++i) scratch[i] = v[grp.indices[static_cast<std::size_t>(i)]];
                const auto sm = smoothed_norm(VectorX<Scalar>(scratch.head(s)), dual_norm(grp.p), mu);
                f += sm.value;
                for (Index i = 0; i < s; ++i) u[grp.indices[static_cast<std::size_t>(i)]] = sm.gradient[i];
            }
            grad = apply_mt(u);
            if (g.size()) grad += g;
            return f;
        };

        VectorX<Scalar> z = out.z;
        for (Scalar mu_rel = Scalar(opts.mu_start); mu_rel >= Scalar(opts.mu_floor) * Scalar(0.999);
             mu_rel /= Scalar(10)) {
            const Scalar mu = mu_rel * scale;
            const Scalar step = mu / (Scalar(1.5) * m2);

            VectorX<Scalar> y = z, z_prev = z, grad(z_dim);
            Scalar t = 1;
            Scalar f_window = std::numeric_limits<Scalar>::infinity();
            constexpr int window = 32;
            for (int iter = 0; iter < opts.max_iterations_per_stage; ++iter) {
                const Scalar f = eval(y, mu, grad);
                z_prev = z;
                z = y - step * grad;
                const Scalar t_next = Scalar(0.5) * (Scalar(1) + std::sqrt(Scalar(1) + Scalar(4) * t * t));
                VectorX<Scalar> momentum = z - z_prev;
                if (momentum.dot(grad) > Scalar(0)) {
                    // adaptive restart
                    t = 1;
                    y = z;
                } else {
                    y = z + ((t - Scalar(1)) / t_next) * momentum;
                    t = t_next;
                }
                if (f < divergence_floor) {
                    out.diverged = true;
                    out.z = z;
                    out.value = -std::numeric_limits<Scalar>::infinity();
                    return out;
                }
                // Progress is judged over a window so that slow but steady
                // tail convergence is not cut off prematurely.
                if (iter % window == 0) {
                    if (f_window - f <= Scalar(opts.rel_change_tol) * (Scalar(1) + std::abs(f)) &&
                        iter > 0) {
                        break;
                    }
                    f_window = f;
                }
            }
        }
        out.z = z;
        out.value = exact_value(z);
        return out;
    }
};

template <typename Scalar, typename ApplyM, typename ApplyMT>
auto make_descent(const VectorX<Scalar>& g, const VectorX<Scalar>& w, ApplyM&& am, ApplyMT&& amt,
                  const std::vector<NormGroup>& groups, Scalar m_norm_bound) {
    return GroupNormDescent<Scalar, ApplyM, ApplyMT>{g, w, std::forward<ApplyM>(am),
                                                     std::forward<ApplyMT>(amt), groups, m_norm_bound};
}

}  // namespace detail
}  // namespace ccg
