#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ccg/serialize.hpp"

namespace ccg {

struct ExperimentConfig {
    std::uint64_t seed = 1;
    double alpha = 0.05;
    Index horizon = 30;  // data length T
    Index steps = 5;     // propagation horizon K
    double m_box = 5.0;
    SystemSpec system = SystemSpec::scalar(0.8, 0.5);
    NoiseSpec noise = NoiseSpec::gaussian(0.02);
    VectorX<double> x0_center;
    VectorX<double> x0_half_width;
    double input_half_width = 1.0;
    Index reduction_order = 0;
    bool tighten_bounds = false;
    BudgetPolicy budget = BudgetPolicy::per_step;
    Index angles = 256;
    Index hierarchy_directions = 20;
    std::string out_dir = "out";

    static ExperimentConfig experiment1_defaults();
    static ExperimentConfig experiment2_defaults();
    static ExperimentConfig experiment3_defaults();

    // Overlays every field present in j onto this configuration.
    void apply_json(const json& j);
    json to_json() const;
};

struct CheckResult {
    std::string name;
    bool pass = false;
    double value = 0;
};

struct ExperimentReport {
    std::string name;
    std::vector<CheckResult> checks;
    json metrics;

    bool passed() const;
    void print(std::ostream& os) const;
    json to_json() const;
};

// Support points of the projection of e onto coordinates (i, j), one per
// direction angle.  Unconstrained sets yield exact touching points; for
// constrained sets the polygon of consecutive support-line intersections is
// returned (an outer polygon, still convex).
MatrixX<double> export_set_2d(const Ccg<double>& e, Index i, Index j, Index angles);

double polygon_area(const MatrixX<double>& polyline);
bool polygon_is_convex(const MatrixX<double>& polyline, double tol = 1e-9);

ExperimentReport run_experiment1(const ExperimentConfig& cfg);
ExperimentReport run_experiment2(const ExperimentConfig& cfg);
ExperimentReport run_experiment3(const ExperimentConfig& cfg);

// Identification and reachability entry points for the command line driver.
json identify_command(const ExperimentConfig& cfg, const std::optional<Trajectory>& trajectory);
json reach_command(const ExperimentConfig& cfg, const std::optional<Trajectory>& trajectory);

int run_selftest(std::ostream& os);

}  // namespace ccg
