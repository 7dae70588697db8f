#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "ccg/core.hpp"

namespace ccg {

// Deterministic random streams: mt19937_64 supplies the bits (its output is
// fully specified by the standard, so runs reproduce across platforms),
// uniforms come from the top 53 bits, and normals from the Box-Muller
// transform of two uniforms.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        while (u1 <= 1e-300) u1 = uniform01();
        const double u2 = uniform01();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    VectorX<double> normal_vector(Index n) {
        VectorX<double> v(n);
        for (Index i = 0; i < n; ++i) v[i] = normal();
        return v;
    }

    VectorX<double> uniform_vector(Index n, double lo, double hi) {
        VectorX<double> v(n);
        for (Index i = 0; i < n; ++i) v[i] = uniform(lo, hi);
        return v;
    }

    VectorX<double> unit_sphere(Index n) {
        VectorX<double> v = normal_vector(n);
        while (v.norm() < 1e-12) v = normal_vector(n);
        return v / v.norm();
    }

    // Uniform inside the unit 2-norm ball.
    VectorX<double> unit_ball(Index n) {
        const VectorX<double> dir = unit_sphere(n);
        return std::pow(uniform01(), 1.0 / static_cast<double>(n)) * dir;
    }

    std::size_t index(std::size_t count) {
        return static_cast<std::size_t>(uniform01() * static_cast<double>(count)) % count;
    }

  private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0;
};

// splitmix64 step; used to derive independent substream seeds.
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace ccg
