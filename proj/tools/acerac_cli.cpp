// acerac: train, evaluate and plot ACERAC runs.
#include "acerac/acerac.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

constexpr int kExitInvalidConfig = 2;
constexpr int kExitNonFinite = 3;

int run_train(const std::string& env, const std::string& config_path, std::optional<std::uint64_t> seed,
              const std::string& out_dir) {
    acerac::RunConfig cfg;
    acerac::Logger log{acerac::log_level_from_env()};
    try {
        if (!config_path.empty()) {
            cfg = acerac::load_config_file(config_path);
        }
        if (!env.empty()) {
            cfg.env = env;
        }
        if (seed) {
            cfg.seed = *seed;
        }
        auto probe = acerac::make_environment(cfg.env);
        acerac::bind_environment(cfg, *probe);
        cfg.validate();
    } catch (const std::exception& e) {
        std::cerr << "invalid configuration: " << e.what() << '\n';
        return kExitInvalidConfig;
    }

    try {
        const auto result = acerac::train(cfg, out_dir, log);
        const auto& last = result.rows.back();
        std::cout << "final timestep " << last.timestep << " mean_return " << acerac::format_double(last.mean_return)
                  << " std_return " << acerac::format_double(last.std_return) << '\n';
    } catch (const acerac::NonFiniteError& e) {
        std::cerr << "aborting: " << e.what() << '\n' << e.dump();
        std::filesystem::create_directories(out_dir);
        std::ofstream(std::filesystem::path(out_dir) / "diagnostics.txt") << e.what() << '\n' << e.dump();
        return kExitNonFinite;
    }
    return 0;
}

int run_eval(const std::string& checkpoint, int episodes, std::uint64_t seed, const std::string& env_override) {
    const auto ckpt = acerac::load_checkpoint(checkpoint);
    auto env = acerac::make_environment(env_override.empty() ? ckpt.env : env_override);
    acerac::LearnerConfig cfg;
    cfg.action_low = env->spec().action_low;
    cfg.action_high = env->spec().action_high;
    const auto result = acerac::evaluate(ckpt.actor, *env, cfg, episodes, seed);
    std::cout << "env " << env->name() << " episodes " << episodes << " mean_return "
              << acerac::format_double(result.mean) << " std_return " << acerac::format_double(result.std) << '\n';
    return 0;
}

int run_plot(const std::vector<std::string>& runs, const std::string& out) {
    std::vector<std::filesystem::path> dirs(runs.begin(), runs.end());
    const auto rows = acerac::emit_plot_data(dirs, out);
    std::cout << "wrote " << rows.size() << " rows to " << out << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ACERAC: actor-critic with experience replay and autocorrelated actions"};
    app.require_subcommand(1);

    std::string env;
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    auto* train = app.add_subcommand("train", "Train an agent and write metrics.csv and checkpoint.bin");
    train->add_option("--env", env, "Environment name (pendulum, point_mass)");
    train->add_option("--config", config_path, "key=value configuration file")->check(CLI::ExistingFile);
    train->add_option("--seed", seed, "Random seed");
    train->add_option("--out", out_dir, "Output directory")->required();

    std::string checkpoint;
    int episodes = 5;
    std::uint64_t eval_seed = 0;
    std::string eval_env;
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint without exploration");
    eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
    eval->add_option("--episodes", episodes, "Number of test episodes")->check(CLI::PositiveNumber);
    eval->add_option("--seed", eval_seed, "Seed for episode initial states");
    eval->add_option("--env", eval_env, "Override the environment stored in the checkpoint");

    std::vector<std::string> runs;
    std::string plot_out;
    auto* plot = app.add_subcommand("plot", "Aggregate runs into a mean/std learning-curve table");
    plot->add_option("--runs", runs, "Run directories containing metrics.csv")->required();
    plot->add_option("--out", plot_out, "Output table")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitInvalidConfig;
    }

    try {
        if (*train) {
            return run_train(env, config_path, seed, out_dir);
        }
        if (*eval) {
            return run_eval(checkpoint, episodes, eval_seed, eval_env);
        }
        return run_plot(runs, plot_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
