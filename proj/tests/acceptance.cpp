// Acceptance suite: one numbered criterion per test case, each printing a
// single pass/fail line with its headline value and runtime.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <chrono>
#include <iostream>

#include "ccg/experiments.hpp"

using ccg::Ccg;
using ccg::Cmcg;
using ccg::Index;
using ccg::MatrixX;
using ccg::Norm;
using ccg::NormGroup;
using ccg::VectorX;

namespace {

struct Stopwatch {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

void report(int criterion, const std::string& name, bool pass, double value, double seconds,
            double budget_seconds) {
    std::cout << (pass ? "[PASS]" : "[FAIL]") << " criterion " << criterion << ": " << name
              << " (value " << value << ", " << seconds << " s)\n";
    CHECK(pass);
    CHECK(seconds < budget_seconds);
}

double box_ball_margin(const VectorX<double>& r, double a, double rho) {
    auto fits = [&](double t) {
        double d2 = 0;
        for (Index i = 0; i < r.size(); ++i) {
            const double excess = std::max(std::abs(r[i]) - t * a, 0.0);
            d2 += excess * excess;
        }
        return std::sqrt(d2) <= t * rho;
    };
    double lo = 0, hi = 1.0;
    while (!fits(hi)) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (fits(mid)) hi = mid; else lo = mid;
    }
    return hi;
}

// Brute-force chi-squared CDF (Simpson) and quantile (bisection); the
// independent oracle for criterion 8.
double chi2_cdf_quadrature(int dof, double x) {
    if (x <= 0.0) return 0.0;
    const int panels = 100000;
    auto simpson = [&](auto f, double a, double b) {
        const double h = (b - a) / panels;
        double sum = f(a) + f(b);
        for (int i = 1; i < panels; ++i) sum += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
        return sum * h / 3.0;
    };
    if (dof == 1) {
        return simpson([](double u) { return 2.0 * std::exp(-0.5 * u * u) / std::sqrt(2.0 * M_PI); }, 0.0,
                       std::sqrt(x));
    }
    const double a = 0.5 * dof;
    const double log_norm = -a * std::log(2.0) - std::lgamma(a);
    return simpson(
        [&](double t) { return t <= 0.0 ? 0.0 : std::exp((a - 1.0) * std::log(t) - 0.5 * t + log_norm); },
        0.0, x);
}

double chi2_quantile_quadrature(int dof, double conf) {
    double lo = 0.0, hi = 1.0;
    while (chi2_cdf_quadrature(dof, hi) < conf) hi *= 2.0;
    for (int i = 0; i < 50; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (chi2_cdf_quadrature(dof, mid) < conf) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

Ccg<double> random_zonotope(ccg::Rng& rng, Index dim, Index count) {
    MatrixX<double> g(dim, count);
    for (Index j = 0; j < count; ++j) g.col(j) = rng.normal_vector(dim);
    return Ccg<double>::zonotope(rng.normal_vector(dim), g);
}

Ccg<double> random_mixed_set(ccg::Rng& rng, Index dim, Index nb, Index ng) {
    MatrixX<double> g(dim, nb + ng);
    for (Index j = 0; j < nb + ng; ++j) g.col(j) = 0.5 * rng.normal_vector(dim);
    auto groups = ccg::singleton_inf_groups(nb);
    if (ng > 0) {
        const auto tail = ccg::single_group(ng, Norm::two, nb);
        groups.insert(groups.end(), tail.begin(), tail.end());
    }
    return Ccg<double>::make(rng.normal_vector(dim), g, groups);
}

Cmcg<double> random_mixed_cmcg(ccg::Rng& rng, Index rows, Index cols, Index nb, Index ng,
                               bool constrained) {
    const Index d = rows * cols;
    MatrixX<double> g(d, nb + ng);
    for (Index j = 0; j < nb + ng; ++j) g.col(j) = 0.3 * rng.normal_vector(d);
    auto groups = ccg::singleton_inf_groups(nb);
    if (ng > 0) {
        const auto tail = ccg::single_group(ng, Norm::two, nb);
        groups.insert(groups.end(), tail.begin(), tail.end());
    }
    ccg::SparseMatrix<double> a;
    VectorX<double> b;
    if (constrained && nb >= 2) {
        a.resize(1, 2);
        a.insert(0, 0) = 1.0;
        a.insert(0, 1) = 1.0;
        b = VectorX<double>::Constant(1, 0.4);
    }
    return Cmcg<double>::from_vectorized(rows, cols,
                                         Ccg<double>::make(rng.normal_vector(d), g, groups, a, b));
}

}  // namespace

TEST_CASE("criterion 1: gaussian set equals the likelihood ellipsoid") {
    Stopwatch watch;
    const auto cfg = ccg::ExperimentConfig::experiment1_defaults();
    const auto sim = ccg::simulate_trajectory(cfg.system, cfg.noise, cfg.horizon, cfg.input_half_width,
                                              cfg.seed, cfg.x0_center);
    const auto rec = ccg::build_data_equation(sim.trajectory);
    const auto gauss = ccg::gaussian_param_set(rec, cfg.noise.sigma, cfg.alpha);
    const auto ellipsoid = ccg::mle_ellipsoid(rec, cfg.noise.sigma, cfg.alpha);
    double max_dev = 0;
    for (int k = 0; k < 256; ++k) {
        const double angle = 2.0 * M_PI * k / 256.0;
        VectorX<double> l(2);
        l << std::cos(angle), std::sin(angle);
        max_dev = std::max(max_dev, std::abs(ccg::support(gauss.set.coefficients, l) - ellipsoid.support(l)));
    }
    report(1, "generator form matches the ellipsoid within 1e-8 over 256 directions", max_dev <= 1e-8,
           max_dev, watch.seconds(), 1.0);
}

TEST_CASE("criterion 2: pullback membership equals the residual test") {
    Stopwatch watch;
    Index disagreements = 0;
    Index compared = 0;
    const double alpha = 0.05;
    int dataset = 0;
    for (Index t : {2, 3, 4}) {
        for (int rep = 0; rep < 20; ++rep) {
            const int kind = dataset % 3;
            const auto seed = ccg::split_seed(515, static_cast<std::uint64_t>(dataset));
            ++dataset;

            ccg::NoiseSpec sim_noise = kind == 0   ? ccg::NoiseSpec::bounded(0.08)
                                       : kind == 1 ? ccg::NoiseSpec::gaussian(0.03)
                                                   : ccg::NoiseSpec::mixed(0.05, 0.02);
            const auto sim = ccg::simulate_trajectory(ccg::SystemSpec::scalar(0.8, 0.5), sim_noise, t, 1.0,
                                                      seed, VectorX<double>::Constant(1, 1.0));
            const auto rec = ccg::build_data_equation(sim.trajectory);

            const double a = 0.1, sigma = 0.05, rho = ccg::gaussian_frobenius_hdr(sigma, int(t), alpha);
            Ccg<double> noise_set = kind == 0 ? ccg::entrywise_box_noise(a, 1, t)
                                   : kind == 1
                                       ? ccg::frobenius_ball_noise(sigma, 1, t, alpha)
                                       : ccg::minkowski_sum(ccg::entrywise_box_noise(a, 1, t),
                                                            ccg::frobenius_ball_noise(sigma, 1, t, alpha));
            const auto ps = ccg::pullback(noise_set, rec);
            const auto theta_hat = rec.ols_estimate();
            for (int ia = 0; ia < 50; ++ia) {
                for (int ib = 0; ib < 50; ++ib) {
                    MatrixX<double> theta(1, 2);
                    theta << theta_hat(0, 0) - 0.5 + 1.0 * ia / 49.0,
                        theta_hat(0, 1) - 0.5 + 1.0 * ib / 49.0;
                    const VectorX<double> r = ccg::vec<double>(rec.x_plus - theta * rec.m);
                    const double oracle = kind == 0   ? r.lpNorm<Eigen::Infinity>() / a
                                          : kind == 1 ? r.norm() / rho
                                                      : box_ball_margin(r, a, rho);
                    if (std::abs(oracle - 1.0) <= 2e-6) continue;  // boundary guard band
                    const auto got = ps.set.contains(theta, 1e-6);
                    const bool oracle_in = oracle <= 1.0 + 1e-6;
                    if (got.member != oracle_in) ++disagreements;
                    ++compared;
                }
            }
        }
    }
    report(2, "zero membership disagreements on " + std::to_string(compared) + " grid points",
           disagreements == 0, static_cast<double>(disagreements), watch.seconds(), 120.0);
}

TEST_CASE("criterion 3: coverage of the gaussian and mixed parameter sets") {
    Stopwatch watch;
    const auto sys = ccg::SystemSpec::scalar(0.8, 0.5);
    const int trials = 2000;
    const double sigma = 0.02, a = sigma / 100.0;
    int hits_gauss = 0, hits_mixed = 0;
    for (int trial = 0; trial < trials; ++trial) {
        {
            const auto seed = ccg::split_seed(31337, static_cast<std::uint64_t>(trial));
            const auto sim = ccg::simulate_trajectory(sys, ccg::NoiseSpec::gaussian(sigma), 30, 1.0, seed);
            const auto rec = ccg::build_data_equation(sim.trajectory);
            const auto set = ccg::gaussian_param_set(rec, sigma, 0.05);
            if (set.set.contains(sim.theta_star).member) ++hits_gauss;
        }
        {
            const auto seed = ccg::split_seed(77777, static_cast<std::uint64_t>(trial));
            const auto sim = ccg::simulate_trajectory(sys, ccg::NoiseSpec::mixed(a, sigma), 30, 1.0, seed);
            const auto rec = ccg::build_data_equation(sim.trajectory);
            const auto set = ccg::mixed_param_set(rec, ccg::entrywise_box_noise(a, 1, 30), sigma, 0.05);
            if (set.set.contains(sim.theta_star).member) ++hits_mixed;
        }
    }
    const double cov_gauss = double(hits_gauss) / trials;
    const double cov_mixed = double(hits_mixed) / trials;
    std::cout << "    coverage: gaussian " << cov_gauss << ", mixed " << cov_mixed << "\n";
    const bool ok = cov_gauss >= 0.935 && cov_gauss <= 0.965 && cov_mixed >= 0.935 && cov_mixed <= 0.965;
    report(3, "empirical coverage within [0.935, 0.965] over 2000 trials", ok,
           std::min(cov_gauss, cov_mixed), watch.seconds(), 300.0);
}

TEST_CASE("criterion 4: product containment by sampling and corner enumeration") {
    Stopwatch watch;
    ccg::Rng rng(2025);
    Index violations = 0;
    Index samples = 0;
    double max_margin = 0;
    const ccg::ProductConfig cfg;

    // Monte Carlo across several instance shapes, 10^4 admissible pairs.
    for (int instance = 0; instance < 5; ++instance) {
        const auto n = random_mixed_cmcg(rng, 2, 2, 2 + instance % 2, 2, instance % 2 == 0);
        const auto e = random_mixed_set(rng, 2, 2, 2 - instance % 2);
        const auto rep = ccg::product_containment_check(n, e, cfg, 2000,
                                                        ccg::split_seed(4242, instance));
        violations += rep.violations;
        samples += rep.samples;
        max_margin = std::max(max_margin, rep.max_margin);
    }
    // Full corner enumeration on small instances.
    for (int instance = 0; instance < 3; ++instance) {
        const auto n = random_mixed_cmcg(rng, 2, 2, 2, 2, instance == 1);
        const auto e = random_mixed_set(rng, 2, 2, 2);
        const auto rep = ccg::product_corner_check(n, e, cfg);
        violations += rep.violations;
        samples += rep.samples;
        max_margin = std::max(max_margin, rep.max_margin);
    }
    std::cout << "    samples " << samples << ", max margin " << max_margin << "\n";
    report(4, "zero containment violations at margin tolerance 1e-5", violations == 0,
           static_cast<double>(violations), watch.seconds(), 120.0);
}

TEST_CASE("criterion 5: gaussian-gaussian gap bound") {
    Stopwatch watch;
    ccg::Rng rng(555);
    bool ok = true;
    double worst_slack = std::numeric_limits<double>::infinity();
    for (int instance = 0; instance < 50; ++instance) {
        const Index gt = 1 + static_cast<Index>(rng.index(3));
        const Index gz = 1 + static_cast<Index>(rng.index(3));
        const auto n = random_mixed_cmcg(rng, 2, 2, 0, gt, false);
        const auto e = random_mixed_set(rng, 2, 0, gz);
        const double bound = ccg::gg_gap_bound(n, e);
        if (gt == 1 && gz == 1 && std::abs(bound) > 1e-12) ok = false;
        for (int i = 0; i < 100; ++i) {
            const VectorX<double> h = rng.unit_sphere(2);
            MatrixX<double> m_h(gt, gz);
            for (Index j = 0; j < gt; ++j)
                for (Index r = 0; r < gz; ++r)
                    m_h(j, r) = h.dot(n.generator_matrix(j) * e.generators.col(r));
            const double gap = m_h.cwiseAbs().sum() - m_h.jacobiSvd().singularValues()[0];
            if (gap < -1e-10 || gap > bound + 1e-9) ok = false;
            worst_slack = std::min(worst_slack, bound - gap);
            if (gt == 1 && gz == 1 && std::abs(gap) > 1e-10) ok = false;
        }
    }
    report(5, "measured gap within [0, bound], zero at unit group sizes", ok, worst_slack, watch.seconds(),
           60.0);
}

TEST_CASE("criterion 6: five-state reachability hierarchy and magnitudes") {
    Stopwatch watch;
    auto cfg = ccg::ExperimentConfig::experiment2_defaults();
    cfg.out_dir = "acceptance_out/exp2";
    const auto rep = ccg::run_experiment2(cfg);
    rep.print(std::cout);
    report(6, "hierarchy holds; volume and wall-time ratios at least 10", rep.passed(),
           rep.metrics.value("volume_ratio", 0.0), watch.seconds(), 600.0);
}

TEST_CASE("criterion 7: box-over-ball volume inflation values") {
    Stopwatch watch;
    const double q2 = ccg::volume_inflation_ratio(2);
    const double q5 = ccg::volume_inflation_ratio(5);
    const double q10 = ccg::volume_inflation_ratio(10);
    bool ok = std::abs(q2 - 1.2732) <= 0.01 * 1.2732;
    ok = ok && std::abs(q5 - 6.079) <= 0.01 * 6.079;
    // The q = 10 value follows the closed form 2^q Gamma(q/2+1) / pi^{q/2}
    // = 401.5; a rounded table value of 310 sometimes quoted for this ratio
    // is not reproducible from the formula, and the divergence is recorded
    // here rather than patched over.
    ok = ok && std::abs(q10 - 401.5) <= 0.01 * 401.5;
    ok = ok && std::abs(q10 - 310.0) > 50.0;
    std::cout << "    ratios: q=2 " << q2 << ", q=5 " << q5 << ", q=10 " << q10
              << " (documented divergence from the 310 table value)\n";
    report(7, "inflation ratios 1.2732 / 6.079 within 1%, q=10 computes to 401.5", ok, q10,
           watch.seconds(), 10.0);
}

TEST_CASE("criterion 8: chi-squared quantiles against the quadrature oracle") {
    Stopwatch watch;
    const double o1 = chi2_quantile_quadrature(1, 0.95);
    const double o2 = chi2_quantile_quadrature(2, 0.95);
    const double o30 = chi2_quantile_quadrature(30, 0.95);
    bool ok = std::abs(ccg::chi2_quantile(1, 0.95) - o1) < 1e-3;
    ok = ok && std::abs(ccg::chi2_quantile(2, 0.95) - o2) < 1e-3;
    ok = ok && std::abs(ccg::chi2_quantile(30, 0.95) - o30) < 1e-3;
    ok = ok && std::abs(o1 - 3.8415) < 2e-3 && std::abs(o2 - 5.9915) < 2e-3 && std::abs(o30 - 43.773) < 2e-3;
    report(8, "quantiles 3.8415 / 5.9915 / 43.773 within 1e-3 of the oracle", ok,
           ccg::chi2_quantile(30, 0.95), watch.seconds(), 1.0);
}

TEST_CASE("criterion 9: scalar mixture noise experiment") {
    Stopwatch watch;
    auto cfg = ccg::ExperimentConfig::experiment3_defaults();
    cfg.out_dir = "acceptance_out/exp3";
    const auto rep = ccg::run_experiment3(cfg);
    rep.print(std::cout);
    report(9, "two-interval region, covered surrogate, nested tubes", rep.passed(),
           rep.metrics.value("surrogate_coverage", 0.0), watch.seconds(), 120.0);
}

TEST_CASE("criterion 10: set-calculus property suite") {
    Stopwatch watch;
    ccg::Rng rng(10101);
    bool ok = true;

    // Support additivity under Minkowski sums.
    for (int i = 0; i < 100; ++i) {
        const auto e1 = random_mixed_set(rng, 3, 3, 2);
        const auto e2 = random_mixed_set(rng, 3, 2, 2);
        const auto sum = ccg::minkowski_sum(e1, e2);
        const auto dir = rng.unit_sphere(3);
        if (std::abs(ccg::support(sum, dir) - ccg::support(e1, dir) - ccg::support(e2, dir)) > 1e-6)
            ok = false;
    }
    // Linear-map commutation.
    for (int i = 0; i < 100; ++i) {
        const auto e = random_mixed_set(rng, 3, 3, 2);
        MatrixX<double> r(2, 3);
        for (Index a = 0; a < 2; ++a) r.row(a) = rng.normal_vector(3).transpose();
        const auto dir = rng.unit_sphere(2);
        if (std::abs(ccg::support(ccg::linear_map(r, e), dir) -
                     ccg::support(e, VectorX<double>(r.transpose() * dir))) > 1e-6)
            ok = false;
    }
    // Zonotope closed form against the constrained solver path through
    // duplicated, tied columns.
    for (int i = 0; i < 100; ++i) {
        const auto base = random_zonotope(rng, 3, 4);
        MatrixX<double> doubled(3, 8);
        doubled << base.generators, base.generators;
        std::vector<Eigen::Triplet<double>> trip;
        for (Index j = 0; j < 4; ++j) {
            trip.emplace_back(j, j, 1.0);
            trip.emplace_back(j, j + 4, -1.0);
        }
        ccg::SparseMatrix<double> a(4, 8);
        a.setFromTriplets(trip.begin(), trip.end());
        const auto tied = Ccg<double>::make(base.center, doubled, ccg::singleton_inf_groups(8), a,
                                            VectorX<double>::Zero(4));
        const auto dir = rng.unit_sphere(3);
        const double closed = dir.dot(base.center) +
                              (2.0 * base.generators.transpose() * dir).cwiseAbs().sum();
        if (std::abs(ccg::support(tied, dir) - closed) > 1e-8) ok = false;
    }
    // Membership/support consistency.
    for (int i = 0; i < 100; ++i) {
        const auto e = random_mixed_set(rng, 3, 3, 2);
        VectorX<double> beta(5);
        for (Index j = 0; j < 3; ++j) beta[j] = rng.uniform(-0.7, 0.7);
        beta.tail(2) = 0.7 * rng.unit_ball(2);
        const VectorX<double> x = e.center + e.generators * beta;
        const auto res = ccg::contains_point(e, x);
        if (!res.member) ok = false;
        if (res.margin <= 1.0 - 1e-4) {
            const auto dir = rng.unit_sphere(3);
            if (dir.dot(x) > ccg::support(e, dir) + 1e-6) ok = false;
        }
    }
    // Order reduction produces supersets.
    for (int i = 0; i < 100; ++i) {
        const auto e = random_mixed_set(rng, 3, 8, 4);
        const auto reduced = ccg::reduce_order(e, 6);
        const auto dir = rng.unit_sphere(3);
        if (ccg::support(reduced, dir) < ccg::support(e, dir) - 1e-8) ok = false;
    }
    report(10, "additivity, commutation, closed form, membership, reduction over 100 instances each", ok,
           1.0, watch.seconds(), 120.0);
}
