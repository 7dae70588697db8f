#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ccg/core.hpp"

namespace ccg {

// Coefficient groups carry one of the three norms the set calculus supports.
enum class Norm { one, two, inf };

inline Norm dual_norm(Norm p) {
    switch (p) {
        case Norm::one: return Norm::inf;
        case Norm::inf: return Norm::one;
        case Norm::two: return Norm::two;
    }
    return Norm::two;
}

inline const char* norm_name(Norm p) {
    switch (p) {
        case Norm::one: return "1";
        case Norm::two: return "2";
        case Norm::inf: return "inf";
    }
    return "?";
}

template <typename Scalar>
Scalar vector_norm(const VectorX<Scalar>& v, Norm p) {
    switch (p) {
        case Norm::one: return v.template lpNorm<1>();
        case Norm::two: return v.norm();
        case Norm::inf: return v.size() == 0 ? Scalar(0) : v.template lpNorm<Eigen::Infinity>();
    }
    return Scalar(0);
}

// Euclidean projection onto the unit ball of the given norm.
template <typename Scalar>
VectorX<Scalar> project_unit_ball(const VectorX<Scalar>& v, Norm p) {
    switch (p) {
        case Norm::inf:
            return v.cwiseMin(Scalar(1)).cwiseMax(Scalar(-1));
        case Norm::two: {
            const Scalar n = v.norm();
            return n <= Scalar(1) ? v : VectorX<Scalar>(v / n);
        }
        case Norm::one: {
            // Duchi-style simplex projection on |v|.
            if (v.template lpNorm<1>() <= Scalar(1)) return v;
            std::vector<Scalar> mag(v.size());
            for (Index i = 0; i < v.size(); ++i) mag[i] = std::abs(v[i]);
            std::sort(mag.begin(), mag.end(), std::greater<Scalar>());
            Scalar cumulative = 0, theta = 0;
            for (std::size_t j = 0; j < mag.size(); ++j) {
                cumulative += mag[j];
                const Scalar candidate = (cumulative - Scalar(1)) / Scalar(j + 1);
                if (mag[j] > candidate) {
                    theta = candidate;
                } else {
                    break;
                }
            }
            VectorX<Scalar> out(v.size());
            for (Index i = 0; i < v.size(); ++i) {
                const Scalar shrunk = std::max(std::abs(v[i]) - theta, Scalar(0));
                out[i] = v[i] >= 0 ? shrunk : -shrunk;
            }
            return out;
        }
    }
    return v;
}

// One block of coefficients sharing a p-norm bound.
struct NormGroup {
    std::vector<Index> indices;
    Norm p = Norm::inf;
};

inline std::vector<NormGroup> singleton_inf_groups(Index count) {
    std::vector<NormGroup> groups;
    groups.reserve(static_cast<std::size_t>(count));
    for (Index i = 0; i < count; ++i) groups.push_back({{i}, Norm::inf});
    return groups;
}

inline std::vector<NormGroup> single_group(Index count, Norm p, Index offset = 0) {
    NormGroup g;
    g.p = p;
    g.indices.resize(static_cast<std::size_t>(count));
    std::iota(g.indices.begin(), g.indices.end(), offset);
    return {g};
}

// Sum over groups of the dual-norm values of the gathered entries, with a
// scalar fast path for singleton groups.
template <typename Scalar>
Scalar grouped_dual_norm_sum(const VectorX<Scalar>& v, const std::vector<NormGroup>& groups) {
    Scalar sum = 0;
    for (const auto& grp : groups) {
        if (grp.indices.size() == 1) {
            sum += std::abs(v[grp.indices[0]]);
            continue;
        }
        VectorX<Scalar> sub(grp.indices.size());
        for (std::size_t i = 0; i < grp.indices.size(); ++i)
            sub[static_cast<Index>(i)] = v[grp.indices[i]];
        sum += vector_norm(sub, dual_norm(grp.p));
    }
    return sum;
}

// Moreau envelope of the norm q at smoothing mu.  The gradient is the
// projection of v/mu onto the unit ball of the dual norm of q, which keeps
// every piece closed-form for q in {1, 2, inf}.
template <typename Scalar>
struct SmoothedNorm {
    Scalar value;
    VectorX<Scalar> gradient;
};

template <typename Scalar>
SmoothedNorm<Scalar> smoothed_norm(const VectorX<Scalar>& v, Norm q, Scalar mu) {
    SmoothedNorm<Scalar> out;
    out.gradient = project_unit_ball<Scalar>(v / mu, dual_norm(q));
    const VectorX<Scalar> prox = v - mu * out.gradient;
    out.value = vector_norm(prox, q) + Scalar(0.5) * mu * out.gradient.squaredNorm();
    return out;
}

}  // namespace ccg
