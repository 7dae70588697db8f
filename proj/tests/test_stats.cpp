#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "ccg/stats.hpp"

namespace {

// Independent oracle: chi-squared CDF by composite Simpson integration of
// the density, with the substitution t = u^2 for dof = 1 to remove the
// integrable singularity at the origin.
double chi2_cdf_by_quadrature(int dof, double x) {
    if (x <= 0.0) return 0.0;
    const int panels = 200000;
    auto simpson = [&](auto f, double a, double b) {
        const double h = (b - a) / panels;
        double sum = f(a) + f(b);
        for (int i = 1; i < panels; ++i) sum += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
        return sum * h / 3.0;
    };
    if (dof == 1) {
        // P(chi2_1 <= x) = integral over u in [0, sqrt(x)] of 2*phi(u).
        return simpson([](double u) { return 2.0 * std::exp(-0.5 * u * u) / std::sqrt(2.0 * M_PI); },
                       0.0, std::sqrt(x));
    }
    const double a = 0.5 * dof;
    const double log_norm = -a * std::log(2.0) - std::lgamma(a);
    return simpson(
        [&](double t) {
            if (t <= 0.0) return 0.0;
            return std::exp((a - 1.0) * std::log(t) - 0.5 * t + log_norm);
        },
        0.0, x);
}

double chi2_quantile_by_bisection(int dof, double conf) {
    double lo = 0.0, hi = 1.0;
    while (chi2_cdf_by_quadrature(dof, hi) < conf) hi *= 2.0;
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (chi2_cdf_by_quadrature(dof, mid) < conf) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("chi-squared quantiles against the quadrature oracle") {
    const double q1 = chi2_quantile_by_bisection(1, 0.95);
    const double q2 = chi2_quantile_by_bisection(2, 0.95);
    const double q30 = chi2_quantile_by_bisection(30, 0.95);

    CHECK(q1 == doctest::Approx(3.8415).epsilon(1e-3));
    CHECK(q2 == doctest::Approx(5.9915).epsilon(1e-3));
    CHECK(q30 == doctest::Approx(43.773).epsilon(1e-3));

    CHECK(std::abs(ccg::chi2_quantile(1, 0.95) - q1) < 1e-3);
    CHECK(std::abs(ccg::chi2_quantile(2, 0.95) - q2) < 1e-3);
    CHECK(std::abs(ccg::chi2_quantile(30, 0.95) - q30) < 1e-3);
}

TEST_CASE("chi-squared quantile inverts the CDF to 1e-8") {
    for (int dof : {1, 2, 3, 5, 10, 30, 120}) {
        for (double conf : {0.01, 0.05, 0.5, 0.9, 0.95, 0.99, 0.999}) {
            const double x = ccg::chi2_quantile(dof, conf);
            CHECK(std::abs(ccg::chi2_cdf(dof, x) - conf) < 1e-8);
        }
    }
}

TEST_CASE("chi-squared quantile limit for conf -> 0+") {
    CHECK(ccg::chi2_quantile(3, 1e-12) < 1e-3);
    CHECK(ccg::chi2_quantile(1, 1e-10) < 1e-3);
}

TEST_CASE("volume inflation ratio of box over ball") {
    CHECK(ccg::volume_inflation_ratio(2) == doctest::Approx(4.0 / M_PI).epsilon(1e-12));
    CHECK(ccg::volume_inflation_ratio(2) == doctest::Approx(1.2732).epsilon(1e-2));
    CHECK(ccg::volume_inflation_ratio(2) >= 1.27);
    CHECK(ccg::volume_inflation_ratio(2) <= 1.28);
    CHECK(ccg::volume_inflation_ratio(5) == doctest::Approx(6.079).epsilon(1e-2));

    // 2^10 / V_10 with V_10 = pi^5/120 evaluates to about 401.5; tables that
    // quote roughly 310 for this ratio are not consistent with the formula.
    const double v10 = std::pow(M_PI, 5) / 120.0;
    CHECK(ccg::volume_inflation_ratio(10) == doctest::Approx(1024.0 / v10).epsilon(1e-12));
    CHECK(ccg::volume_inflation_ratio(10) == doctest::Approx(401.5).epsilon(1e-2));
    CHECK(ccg::volume_inflation_ratio(10) != doctest::Approx(310.0).epsilon(0.1));

    for (int q = 2; q < 20; ++q) {
        CHECK(ccg::volume_inflation_ratio(q + 1) > ccg::volume_inflation_ratio(q));
    }
}

TEST_CASE("Frobenius-ball radius for Gaussian matrices") {
    CHECK(ccg::gaussian_frobenius_hdr(1.0, 2, 0.05) == doctest::Approx(2.4477).epsilon(1e-3));
    const double r30 = ccg::gaussian_frobenius_hdr(0.02, 30, 0.05);
    CHECK(r30 == doctest::Approx(0.02 * std::sqrt(43.773)).epsilon(1e-4));
    CHECK(r30 == doctest::Approx(0.1323).epsilon(1e-2));
    CHECK(ccg::gaussian_frobenius_hdr(0.0, 5, 0.05) == 0.0);
}
