#pragma once

#include <string>
#include <unsupported/Eigen/MatrixFunctions>

#include "ccg/core.hpp"
#include "ccg/density.hpp"
#include "ccg/random.hpp"

namespace ccg {

// Process noise description for simulation and set construction.
struct NoiseSpec {
    enum class Kind { bounded, gaussian, mixed, gaussian_mixture };
    Kind kind = Kind::gaussian;
    double bound = 0;  // entrywise half-width of the bounded part
    double sigma = 0;  // standard deviation of the Gaussian part
    std::vector<double> weights, means, sigmas;

    static NoiseSpec bounded(double a) { return {Kind::bounded, a, 0, {}, {}, {}}; }
    static NoiseSpec gaussian(double sigma) { return {Kind::gaussian, 0, sigma, {}, {}, {}}; }
    static NoiseSpec mixed(double a, double sigma) { return {Kind::mixed, a, sigma, {}, {}, {}}; }
    static NoiseSpec gaussian_mixture(std::vector<double> w, std::vector<double> m, std::vector<double> s) {
        return {Kind::gaussian_mixture, 0, 0, std::move(w), std::move(m), std::move(s)};
    }

    Density1D marginal() const {
        switch (kind) {
            case Kind::bounded: return UniformDensity{bound};
            case Kind::gaussian: return GaussianDensity{sigma};
            case Kind::gaussian_mixture: return MixtureDensity{weights, means, sigmas};
            case Kind::mixed: break;
        }
        throw std::invalid_argument("NoiseSpec: mixed noise has no single scalar marginal");
    }

    std::string summary() const {
        switch (kind) {
            case Kind::bounded: return "bounded(a=" + std::to_string(bound) + ")";
            case Kind::gaussian: return "gaussian(sigma=" + std::to_string(sigma) + ")";
            case Kind::mixed:
                return "mixed(a=" + std::to_string(bound) + ", sigma=" + std::to_string(sigma) + ")";
            case Kind::gaussian_mixture: return "gaussian_mixture(" + std::to_string(weights.size()) + ")";
        }
        return "?";
    }
};

inline VectorX<double> sample_noise_vector(const NoiseSpec& spec, Index n, Rng& rng) {
    VectorX<double> w(n);
    switch (spec.kind) {
        case NoiseSpec::Kind::bounded:
            for (Index i = 0; i < n; ++i) w[i] = rng.uniform(-spec.bound, spec.bound);
            break;
        case NoiseSpec::Kind::gaussian:
            for (Index i = 0; i < n; ++i) w[i] = spec.sigma * rng.normal();
            break;
        case NoiseSpec::Kind::mixed:
            for (Index i = 0; i < n; ++i)
                w[i] = rng.uniform(-spec.bound, spec.bound) + spec.sigma * rng.normal();
            break;
        case NoiseSpec::Kind::gaussian_mixture:
            for (Index i = 0; i < n; ++i) {
                const double pick = rng.uniform01();
                double acc = 0;
                std::size_t k = 0;
                for (; k + 1 < spec.weights.size(); ++k) {
                    acc += spec.weights[k];
                    if (pick < acc) break;
                }
                w[i] = spec.means[k] + spec.sigmas[k] * rng.normal();
            }
            break;
    }
    return w;
}

// count i.i.d. noise vectors as columns, reproducible under the seed.
inline MatrixX<double> sample_noise(const NoiseSpec& spec, Index n, Index count, std::uint64_t seed) {
    Rng rng(seed);
    MatrixX<double> w(n, count);
    for (Index j = 0; j < count; ++j) w.col(j) = sample_noise_vector(spec, n, rng);
    return w;
}

struct SystemSpec {
    MatrixX<double> a;
    MatrixX<double> b;
    double dt = 0;

    Index state_dim() const { return a.rows(); }
    Index input_dim() const { return b.cols(); }

    double spectral_radius() const {
        Eigen::EigenSolver<MatrixX<double>> eig(a);
        return eig.eigenvalues().cwiseAbs().maxCoeff();
    }

    static SystemSpec scalar(double a_coeff, double b_coeff) {
        SystemSpec s;
        s.a = MatrixX<double>::Constant(1, 1, a_coeff);
        s.b = MatrixX<double>::Constant(1, 1, b_coeff);
        return s;
    }

    // Chain of n integrators with input on the last state, discretized
    // exactly over dt, then scaled to the requested spectral radius.
    static SystemSpec chain_of_integrators(Index n, double dt, double spectral_radius) {
        MatrixX<double> a_cont = MatrixX<double>::Zero(n, n);
        for (Index i = 0; i + 1 < n; ++i) a_cont(i, i + 1) = 1.0;
        MatrixX<double> b_cont = MatrixX<double>::Zero(n, 1);
        b_cont(n - 1, 0) = 1.0;

        // Exact discretization through the augmented exponential.
        MatrixX<double> aug = MatrixX<double>::Zero(n + 1, n + 1);
        aug.topLeftCorner(n, n) = a_cont * dt;
        aug.topRightCorner(n, 1) = b_cont * dt;
        const MatrixX<double> exp_aug = aug.exp();

        SystemSpec s;
        s.a = spectral_radius * exp_aug.topLeftCorner(n, n);
        s.b = exp_aug.topRightCorner(n, 1);
        s.dt = dt;
        return s;
    }
};

struct Trajectory {
    MatrixX<double> states;  // n x (T+1)
    MatrixX<double> inputs;  // m x T

    Index horizon() const { return inputs.cols(); }
    void validate() const {
        if (states.cols() != inputs.cols() + 1)
            throw DimensionError("Trajectory: need T+1 states for T inputs");
        if (!states.allFinite() || !inputs.allFinite())
            throw DimensionError("Trajectory: entries must be finite");
    }
};

struct SimulationResult {
    Trajectory trajectory;
    MatrixX<double> theta_star;  // [A B]
    MatrixX<double> noise;       // n x T realized disturbances
};

// Iterates the dynamics with sampled noise and a seeded uniform input
// policy; the true parameter matrix is recorded for coverage checks.
inline SimulationResult simulate_trajectory(const SystemSpec& sys, const NoiseSpec& noise, Index t_steps,
                                            double input_half_width, std::uint64_t seed,
                                            const VectorX<double>& x0 = VectorX<double>()) {
    const Index n = sys.state_dim();
    const Index m = sys.input_dim();
    Rng rng(seed);

    SimulationResult out;
    out.trajectory.states.resize(n, t_steps + 1);
    out.trajectory.inputs.resize(m, t_steps);
    out.noise.resize(n, t_steps);
    out.trajectory.states.col(0) = x0.size() == n ? x0 : VectorX<double>::Zero(n);

    for (Index k = 0; k < t_steps; ++k) {
        const VectorX<double> u = rng.uniform_vector(m, -input_half_width, input_half_width);
        const VectorX<double> w = sample_noise_vector(noise, n, rng);
        out.trajectory.inputs.col(k) = u;
        out.noise.col(k) = w;
        out.trajectory.states.col(k + 1) =
            sys.a * out.trajectory.states.col(k) + sys.b * u + w;
    }
    out.theta_star.resize(n, n + m);
    out.theta_star << sys.a, sys.b;
    return out;
}

}  // namespace ccg
