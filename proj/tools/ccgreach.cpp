#include <CLI11.hpp>
#include <iostream>

#include "ccg/experiments.hpp"

namespace {

struct CommonOptions {
    std::string config_path;
    std::string out_dir;
    std::int64_t seed = -1;
    std::int64_t reduce = -1;
    bool tighten = false;
    std::string budget;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
    cmd->add_option("--config", opts.config_path, "configuration file (JSON)");
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--seed", opts.seed, "random seed override");
    cmd->add_option("--reduce", opts.reduce, "generator order for per-step reduction (0 = off)");
    cmd->add_flag("--tighten-bounds", opts.tighten, "tighten coefficient bounds with support solves");
    cmd->add_option("--budget", opts.budget, "confidence budget policy: per-step or shared")
        ->check(CLI::IsMember({"per-step", "shared"}));
}

ccg::ExperimentConfig build_config(ccg::ExperimentConfig cfg, const CommonOptions& opts) {
    if (!opts.config_path.empty()) cfg.apply_json(ccg::read_json_file(opts.config_path));
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    if (opts.seed >= 0) cfg.seed = static_cast<std::uint64_t>(opts.seed);
    if (opts.reduce >= 0) cfg.reduction_order = opts.reduce;
    if (opts.tighten) cfg.tighten_bounds = true;
    if (!opts.budget.empty())
        cfg.budget = opts.budget == "shared" ? ccg::BudgetPolicy::shared : ccg::BudgetPolicy::per_step;
    return cfg;
}

std::optional<ccg::Trajectory> load_trajectory(const std::string& config_path) {
    if (config_path.empty()) return std::nullopt;
    const auto j = ccg::read_json_file(config_path);
    if (j.contains("trajectory")) return ccg::trajectory_from_json(j.at("trajectory"));
    if (j.contains("trajectory_file"))
        return ccg::trajectory_from_json(ccg::read_json_file(j.at("trajectory_file").get<std::string>()));
    return std::nullopt;
}

int run_report(const ccg::ExperimentReport& report) {
    report.print(std::cout);
    return report.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reachability analysis from data with mixed-norm constrained convex generators"};
    app.require_subcommand(1);

    CommonOptions identify_opts, reach_opts, exp1_opts, exp2_opts, exp3_opts;
    auto* identify = app.add_subcommand("identify", "build a data-consistent parameter set");
    add_common(identify, identify_opts);
    auto* reach = app.add_subcommand("reach", "identify and propagate a reachable tube");
    add_common(reach, reach_opts);
    auto* exp1 = app.add_subcommand("exp1", "parameter-set comparison on a scalar system");
    add_common(exp1, exp1_opts);
    auto* exp2 = app.add_subcommand("exp2", "reachability comparison on a 5-state system");
    add_common(exp2, exp2_opts);
    auto* exp3 = app.add_subcommand("exp3", "scalar mixture noise with an enclosing-interval surrogate");
    add_common(exp3, exp3_opts);
    app.add_subcommand("selftest", "quick numeric sanity checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (identify->parsed()) {
            ccg::ExperimentConfig cfg;
            cfg.out_dir = "out/identify";
            cfg = build_config(cfg, identify_opts);
            const auto result = ccg::identify_command(cfg, load_trajectory(identify_opts.config_path));
            std::cout << result.at("summary").get<std::string>();
            return 0;
        }
        if (reach->parsed()) {
            ccg::ExperimentConfig cfg;
            cfg.out_dir = "out/reach";
            cfg = build_config(cfg, reach_opts);
            const auto result = ccg::reach_command(cfg, load_trajectory(reach_opts.config_path));
            std::cout << result.dump(2) << "\n";
            return 0;
        }
        if (exp1->parsed()) {
            return run_report(
                ccg::run_experiment1(build_config(ccg::ExperimentConfig::experiment1_defaults(), exp1_opts)));
        }
        if (exp2->parsed()) {
            return run_report(
                ccg::run_experiment2(build_config(ccg::ExperimentConfig::experiment2_defaults(), exp2_opts)));
        }
        if (exp3->parsed()) {
            return run_report(
                ccg::run_experiment3(build_config(ccg::ExperimentConfig::experiment3_defaults(), exp3_opts)));
        }
        return ccg::run_selftest(std::cout);
    } catch (const std::invalid_argument& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const ccg::DimensionError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
