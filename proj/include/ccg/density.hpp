#pragma once

#include <cmath>
#include <variant>
#include <vector>

#include "ccg/core.hpp"

namespace ccg {

struct GaussianDensity {
    double sigma = 1.0;
};

struct UniformDensity {
    double half_width = 1.0;
};

struct MixtureDensity {
    std::vector<double> weights;
    std::vector<double> means;
    std::vector<double> sigmas;
};

using Density1D = std::variant<GaussianDensity, UniformDensity, MixtureDensity>;

inline double normal_pdf(double x, double mean, double sigma) {
    const double z = (x - mean) / sigma;
    return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * M_PI));
}

inline void validate_density(const Density1D& f) {
    std::visit(
        [](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, GaussianDensity>) {
                if (!(d.sigma > 0)) throw std::invalid_argument("density: sigma must be positive");
            } else if constexpr (std::is_same_v<T, UniformDensity>) {
                if (!(d.half_width > 0)) throw std::invalid_argument("density: half width must be positive");
            } else {
                if (d.weights.empty() || d.weights.size() != d.means.size() ||
                    d.weights.size() != d.sigmas.size())
                    throw std::invalid_argument("density: mixture pieces must align");
                double sum = 0;
                for (std::size_t i = 0; i < d.weights.size(); ++i) {
                    if (!(d.weights[i] > 0)) throw std::invalid_argument("density: weights must be positive");
                    if (!(d.sigmas[i] > 0)) throw std::invalid_argument("density: sigmas must be positive");
                    sum += d.weights[i];
                }
                if (std::abs(sum - 1.0) > 1e-12)
                    throw std::invalid_argument("density: weights must sum to one");
            }
        },
        f);
}

inline double pdf(const Density1D& f, double x) {
    return std::visit(
        [x](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, GaussianDensity>) {
                return normal_pdf(x, 0.0, d.sigma);
            } else if constexpr (std::is_same_v<T, UniformDensity>) {
                return std::abs(x) <= d.half_width ? 0.5 / d.half_width : 0.0;
            } else {
                double v = 0;
                for (std::size_t i = 0; i < d.weights.size(); ++i)
                    v += d.weights[i] * normal_pdf(x, d.means[i], d.sigmas[i]);
                return v;
            }
        },
        f);
}

inline double density_variance(const Density1D& f) {
    return std::visit(
        [](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, GaussianDensity>) {
                return d.sigma * d.sigma;
            } else if constexpr (std::is_same_v<T, UniformDensity>) {
                return d.half_width * d.half_width / 3.0;
            } else {
                double mean = 0;
                for (std::size_t i = 0; i < d.weights.size(); ++i) mean += d.weights[i] * d.means[i];
                double second = 0;
                for (std::size_t i = 0; i < d.weights.size(); ++i)
                    second += d.weights[i] * (d.sigmas[i] * d.sigmas[i] + d.means[i] * d.means[i]);
                return second - mean * mean;
            }
        },
        f);
}

// Grid range covering at least eight standard-deviation-equivalents of mass
// on both tails.
inline std::pair<double, double> density_grid_range(const Density1D& f) {
    return std::visit(
        [](const auto& d) -> std::pair<double, double> {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, GaussianDensity>) {
                return {-8.0 * d.sigma, 8.0 * d.sigma};
            } else if constexpr (std::is_same_v<T, UniformDensity>) {
                return {-1.02 * d.half_width, 1.02 * d.half_width};
            } else {
                double lo = 0, hi = 0;
                for (std::size_t i = 0; i < d.weights.size(); ++i) {
                    lo = std::min(lo, d.means[i] - 8.0 * d.sigmas[i]);
                    hi = std::max(hi, d.means[i] + 8.0 * d.sigmas[i]);
                }
                return {lo, hi};
            }
        },
        f);
}

struct HdrInterval {
    double lo = 0;
    double hi = 0;
    double length() const { return hi - lo; }
};

struct HdrRegion {
    std::vector<HdrInterval> intervals;
    double threshold = 0;
    double coverage = 0;

    double total_length() const {
        double sum = 0;
        for (const auto& i : intervals) sum += i.length();
        return sum;
    }
    HdrInterval hull() const {
        if (intervals.empty()) return {};
        return {intervals.front().lo, intervals.back().hi};
    }
};

namespace detail {

// Mass of the super-level set {f >= tau} by the trapezoid rule, with linear
// interpolation of the crossing inside boundary cells.
inline double superlevel_mass(const std::vector<double>& xs, const std::vector<double>& fs, double tau) {
    double mass = 0;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        const double h = xs[i + 1] - xs[i];
        const bool in0 = fs[i] >= tau, in1 = fs[i + 1] >= tau;
        if (in0 && in1) {
            mass += 0.5 * (fs[i] + fs[i + 1]) * h;
        } else if (in0 != in1) {
            const double denom = fs[i + 1] - fs[i];
            const double frac = std::abs(denom) < 1e-300 ? 0.5 : (tau - fs[i]) / denom;
            if (in1) {
                const double w = (1.0 - frac) * h;
                mass += 0.5 * (tau + fs[i + 1]) * w;
            } else {
                const double w = frac * h;
                mass += 0.5 * (fs[i] + tau) * w;
            }
        }
    }
    return mass;
}

}  // namespace detail

// Highest-density region of a scalar density: the largest threshold whose
// super-level set still carries mass at least 1 - alpha, with the level-set
// components extracted as disjoint intervals.
inline HdrRegion hdr_1d(const Density1D& f, double alpha, int grid_points = 20001) {
    validate_density(f);
    if (!(alpha > 0 && alpha < 1)) throw std::invalid_argument("hdr_1d: alpha must be in (0,1)");
    if (grid_points < 16) throw GridTooCoarseError("hdr_1d: grid too coarse");

    const auto [lo, hi] = density_grid_range(f);
    std::vector<double> xs(static_cast<std::size_t>(grid_points));
    std::vector<double> fs(static_cast<std::size_t>(grid_points));
    const double step = (hi - lo) / (grid_points - 1);
    double fmax = 0;
    for (int i = 0; i < grid_points; ++i) {
        xs[static_cast<std::size_t>(i)] = lo + i * step;
        fs[static_cast<std::size_t>(i)] = pdf(f, xs[static_cast<std::size_t>(i)]);
        fmax = std::max(fmax, fs[static_cast<std::size_t>(i)]);
    }

    const double want = 1.0 - alpha;
    if (detail::superlevel_mass(xs, fs, 0.0) < want - 1e-3) {
        throw GridTooCoarseError("hdr_1d: grid does not capture the requested mass");
    }

    double tau_lo = 0.0, tau_hi = fmax;
    if (detail::superlevel_mass(xs, fs, tau_hi) >= want) {
        tau_lo = tau_hi;  // flat-top density: the full support is the region
    }
    for (int iter = 0; iter < 200 && (tau_hi - tau_lo) > 1e-10 * fmax; ++iter) {
        const double mid = 0.5 * (tau_lo + tau_hi);
        if (detail::superlevel_mass(xs, fs, mid) >= want) tau_lo = mid; else tau_hi = mid;
    }
    const double tau = tau_lo;

    HdrRegion region;
    region.threshold = tau;
    region.coverage = detail::superlevel_mass(xs, fs, tau);

    bool open = false;
    HdrInterval current;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const bool in = fs[i] >= tau;
        if (in && !open) {
            current.lo = xs[i];
            if (i > 0) {
                const double denom = fs[i] - fs[i - 1];
                if (std::abs(denom) > 1e-300) {
                    current.lo = xs[i - 1] + (tau - fs[i - 1]) / denom * step;
                }
            }
            open = true;
        } else if (!in && open) {
            current.hi = xs[i - 1];
            const double denom = fs[i] - fs[i - 1];
            if (std::abs(denom) > 1e-300) {
                current.hi = xs[i - 1] + (tau - fs[i - 1]) / denom * step;
            }
            region.intervals.push_back(current);
            open = false;
        }
    }
    if (open) {
        current.hi = xs.back();
        region.intervals.push_back(current);
    }
    return region;
}

}  // namespace ccg
