#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include "ccg/core.hpp"

namespace ccg {

// Regularized lower incomplete gamma P(a, x): series expansion for
// x < a + 1, Lentz continued fraction for the complement otherwise.
inline double regularized_lower_gamma(double a, double x) {
    if (a <= 0.0) throw std::invalid_argument("regularized_lower_gamma: a must be positive");
    if (x < 0.0) throw std::invalid_argument("regularized_lower_gamma: x must be nonnegative");
    if (x == 0.0) return 0.0;

    const double log_gamma_a = std::lgamma(a);
    if (x < a + 1.0) {
        double term = 1.0 / a;
        double sum = term;
        double ap = a;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if (std::abs(term) < std::abs(sum) * 1e-16) break;
        }
        return sum * std::exp(-x + a * std::log(x) - log_gamma_a);
    }
    // Continued fraction for Q(a, x) = 1 - P(a, x).
    const double tiny = std::numeric_limits<double>::min() / 1e-30;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    const double q = std::exp(-x + a * std::log(x) - log_gamma_a) * h;
    return 1.0 - q;
}

inline double chi2_cdf(int dof, double x) {
    if (x <= 0.0) return 0.0;
    return regularized_lower_gamma(0.5 * dof, 0.5 * x);
}

inline double chi2_pdf(int dof, double x) {
    if (x <= 0.0) return 0.0;
    const double a = 0.5 * dof;
    return std::exp((a - 1.0) * std::log(x) - 0.5 * x - a * std::log(2.0) - std::lgamma(a));
}

// Quantile of the chi-squared distribution: Wilson-Hilferty start, Newton
// iterations, bisection fallback on the bracketing interval.
inline double chi2_quantile(int dof, double conf) {
    if (dof < 1) throw std::invalid_argument("chi2_quantile: dof must be >= 1");
    if (!(conf > 0.0 && conf < 1.0)) throw std::invalid_argument("chi2_quantile: conf must be in (0,1)");

    // Wilson-Hilferty approximation needs the standard normal quantile;
    // a coarse logistic start is enough because Newton refines it.
    const double z_rough = [] (double p) {
        // Beasley-Springer/Moro-free start: invert via erf with Newton.
        double z = 0.0;
        for (int i = 0; i < 60; ++i) {
            const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
            const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
            if (pdf < 1e-300) break;
            const double step = (cdf - p) / pdf;
            z -= step;
            if (std::abs(step) < 1e-13) break;
        }
        return z;
    }(conf);

    const double d = static_cast<double>(dof);
    double x = d * std::pow(1.0 - 2.0 / (9.0 * d) + z_rough * std::sqrt(2.0 / (9.0 * d)), 3.0);
    if (!(x > 0.0) || !std::isfinite(x)) x = d;

    // Establish a bracket around the root.
    double lo = 0.0, hi = std::max(x, 1.0);
    while (chi2_cdf(dof, hi) < conf) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e12) break;
    }

    for (int i = 0; i < 200; ++i) {
        const double f = chi2_cdf(dof, x) - conf;
        if (f > 0.0) hi = x; else lo = x;
        const double pdf = chi2_pdf(dof, x);
        double next = (pdf > 1e-300) ? x - f / pdf : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) < 1e-12 * std::max(1.0, x)) {
            x = next;
            break;
        }
        x = next;
    }
    return x;
}

// Volume ratio between the q-cube [-1,1]^q and the unit q-ball:
// 2^q / V_q with V_q = pi^{q/2} / Gamma(q/2 + 1).
inline double volume_inflation_ratio(int q) {
    if (q < 1) throw std::invalid_argument("volume_inflation_ratio: q must be >= 1");
    const double qd = static_cast<double>(q);
    return std::exp(qd * std::log(2.0) + std::lgamma(0.5 * qd + 1.0) - 0.5 * qd * std::log(M_PI));
}

// Radius of the Frobenius-norm confidence ball for an i.i.d. Gaussian matrix
// with q entries at level 1 - alpha.
inline double gaussian_frobenius_hdr(double sigma, int q, double alpha) {
    if (sigma < 0.0) throw std::invalid_argument("gaussian_frobenius_hdr: sigma must be >= 0");
    if (sigma == 0.0) return 0.0;
    return sigma * std::sqrt(chi2_quantile(q, 1.0 - alpha));
}

}  // namespace ccg
