#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "ccg/operations.hpp"

using ccg::Ccg;
using ccg::Index;
using ccg::MatrixX;
using ccg::Norm;
using ccg::NormGroup;
using ccg::VectorX;

namespace {

VectorX<double> vec2(double a, double b) {
    VectorX<double> v(2);
    v << a, b;
    return v;
}

Ccg<double> unit_box2() { return Ccg<double>::box(VectorX<double>::Zero(2), VectorX<double>::Ones(2)); }
Ccg<double> unit_ball2() { return Ccg<double>::ball(VectorX<double>::Zero(2), 1.0); }

// The constrained pair-set used throughout: G = I2, one inf group over both
// coefficients, and the coupling beta_1 + beta_2 = 0.
Ccg<double> constrained_pair() {
    ccg::SparseMatrix<double> a(1, 2);
    a.insert(0, 0) = 1;
    a.insert(0, 1) = 1;
    VectorX<double> b(1);
    b << 0.0;
    std::vector<NormGroup> groups{{{0, 1}, Norm::inf}};
    return Ccg<double>::make(VectorX<double>::Zero(2), MatrixX<double>::Identity(2, 2), groups, a, b);
}

Ccg<double> random_zonotope(std::mt19937_64& gen, Index dim, Index count) {
    std::normal_distribution<double> dist;
    MatrixX<double> g(dim, count);
    VectorX<double> c(dim);
    for (Index i = 0; i < dim; ++i) c[i] = dist(gen);
    for (Index i = 0; i < dim; ++i)
        for (Index j = 0; j < count; ++j) g(i, j) = dist(gen);
    return Ccg<double>::zonotope(c, g);
}

VectorX<double> random_direction(std::mt19937_64& gen, Index dim) {
    std::normal_distribution<double> dist;
    VectorX<double> d(dim);
    do {
        for (Index i = 0; i < dim; ++i) d[i] = dist(gen);
    } while (d.norm() < 1e-8);
    return d;
}

}  // namespace

TEST_CASE("support closed forms") {
    CHECK(ccg::support(unit_box2(), vec2(1, 0)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ccg::support(unit_ball2(), vec2(0.6, 0.8)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("support of the constrained pair") {
    const auto e = constrained_pair();
    CHECK(ccg::support(e, vec2(1, 0)) == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(ccg::support(e, vec2(0, 1)) == doctest::Approx(1.0).epsilon(1e-7));
    // The feasible segment is { (t, -t) : |t| <= 1 }.
    CHECK(ccg::support(e, vec2(1, -1)) == doctest::Approx(2.0).epsilon(1e-7));
    CHECK(ccg::support(e, vec2(1, 1)) == doctest::Approx(0.0).scale(1).epsilon(1e-7));
}

TEST_CASE("duplicated-column constraints reproduce a plain zonotope") {
    // Columns [g g] with beta_1 - beta_2 = 0 collapse to a single generator
    // 2g, whose support is known in closed form.
    std::mt19937_64 gen(17);
    for (int trial = 0; trial < 20; ++trial) {
        const auto base = random_zonotope(gen, 3, 4);
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
        const auto twice = Ccg<double>::zonotope(base.center, MatrixX<double>(2.0 * base.generators));
        const auto dir = random_direction(gen, 3);
        const double solver_value = ccg::support(tied, dir);
        const double closed_form = ccg::support(twice, dir);
        CHECK(solver_value == doctest::Approx(closed_form).epsilon(1e-8));
    }
}

TEST_CASE("membership") {
    SUBCASE("inside the unit box") {
        const auto res = ccg::contains_point(unit_box2(), vec2(0.5, -0.5));
        CHECK(res.member);
        CHECK(res.margin == doctest::Approx(0.5).epsilon(1e-6));
    }
    SUBCASE("outside the unit disk") {
        const auto res = ccg::contains_point(unit_ball2(), vec2(1, 1));
        CHECK_FALSE(res.member);
        CHECK(res.margin == doctest::Approx(std::sqrt(2.0)).epsilon(1e-6));
    }
    SUBCASE("endpoint of the constrained segment") {
        const auto res = ccg::contains_point(constrained_pair(), vec2(1, -1));
        CHECK(res.member);
        CHECK(res.margin == doctest::Approx(1.0).epsilon(1e-6));
    }
    SUBCASE("point off the affine span") {
        // 1-D segment embedded in the plane: points off the line have no
        // representation at any scale.
        MatrixX<double> g(2, 1);
        g << 1, 1;
        const auto e = Ccg<double>::zonotope(VectorX<double>::Zero(2), g);
        const auto res = ccg::contains_point(e, vec2(1.0, -1.0));
        CHECK_FALSE(res.member);
        CHECK(std::isinf(res.margin));
    }
    SUBCASE("center of a point set") {
        const auto e = Ccg<double>::point(vec2(1, 2));
        CHECK(ccg::contains_point(e, vec2(1, 2)).member);
        CHECK_FALSE(ccg::contains_point(e, vec2(1, 2.5)).member);
    }
}

TEST_CASE("interval hull") {
    SUBCASE("unit disk") {
        const auto hull = ccg::interval_hull(unit_ball2());
        CHECK(hull.lo.isApprox(vec2(-1, -1), 1e-12));
        CHECK(hull.hi.isApprox(vec2(1, 1), 1e-12));
    }
    SUBCASE("two-generator zonotope") {
        MatrixX<double> g(2, 2);
        g << 1, 1, 1, -1;
        const auto e = Ccg<double>::zonotope(VectorX<double>::Zero(2), g);
        const auto hull = ccg::interval_hull(e);
        CHECK(hull.lo.isApprox(vec2(-2, -2), 1e-12));
        CHECK(hull.hi.isApprox(vec2(2, 2), 1e-12));
    }
}

TEST_CASE("support additivity under minkowski sums") {
    std::mt19937_64 gen(23);
    for (int trial = 0; trial < 10; ++trial) {
        const auto e1 = random_zonotope(gen, 3, 5);
        const auto e2 = random_zonotope(gen, 3, 4);
        const auto sum = ccg::minkowski_sum(e1, e2);
        for (int i = 0; i < 10; ++i) {
            const auto dir = random_direction(gen, 3);
            CHECK(ccg::support(sum, dir) ==
                  doctest::Approx(ccg::support(e1, dir) + ccg::support(e2, dir)).epsilon(1e-6));
        }
    }
}

TEST_CASE("support commutes with linear maps") {
    std::mt19937_64 gen(29);
    std::normal_distribution<double> dist;
    for (int trial = 0; trial < 10; ++trial) {
        const auto e = random_zonotope(gen, 3, 6);
        MatrixX<double> r(2, 3);
        for (Index i = 0; i < 2; ++i)
            for (Index j = 0; j < 3; ++j) r(i, j) = dist(gen);
        const auto mapped = ccg::linear_map(r, e);
        for (int i = 0; i < 10; ++i) {
            const auto dir = random_direction(gen, 2);
            const VectorX<double> pulled = r.transpose() * dir;
            CHECK(ccg::support(mapped, dir) == doctest::Approx(ccg::support(e, pulled)).epsilon(1e-6));
        }
    }
}

TEST_CASE("membership is consistent with supports") {
    std::mt19937_64 gen(31);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    const auto e = constrained_pair();
    for (int trial = 0; trial < 50; ++trial) {
        const double t = unif(gen);
        const VectorX<double> x = vec2(t, -t);  // inside the segment
        const auto res = ccg::contains_point(e, x);
        REQUIRE(res.member);
        if (res.margin > 1.0 - 1e-4) continue;
        for (int i = 0; i < 10; ++i) {
            const auto dir = random_direction(gen, 2);
            CHECK(dir.dot(x) <= ccg::support(e, dir) + 1e-6);
        }
    }
}
