// Training loop, evaluation protocol, run configuration and metrics files.
#pragma once

#include "acerac/checkpoint.hpp"
#include "acerac/environments.hpp"
#include "acerac/learner.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace acerac {

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Raised when training produces NaN/Inf; carries a human-readable dump.
class NonFiniteError : public std::runtime_error {
  public:
    NonFiniteError(const std::string& what, std::string dump) : std::runtime_error(what), dump_(std::move(dump)) {}
    [[nodiscard]] const std::string& dump() const { return dump_; }

  private:
    std::string dump_;
};

// ---------------------------------------------------------------------------
// Logging (ACERAC_LOG=debug|info, default info)

enum class LogLevel { info = 0, debug = 1 };

inline LogLevel log_level_from_env() {
    const char* raw = std::getenv("ACERAC_LOG");
    if (raw != nullptr && std::string(raw) == "debug") {
        return LogLevel::debug;
    }
    return LogLevel::info;
}

struct Logger {
    LogLevel level = LogLevel::info;
    std::ostream* sink = &std::cerr;
    bool quiet = false;

    void info(const std::string& msg) const {
        if (!quiet) {
            *sink << "[info] " << msg << '\n';
        }
    }
    void debug(const std::string& msg) const {
        if (!quiet && level == LogLevel::debug) {
            *sink << "[debug] " << msg << '\n';
        }
    }
};

// ---------------------------------------------------------------------------
// Run configuration

struct RunConfig {
    std::string env = "pendulum";
    long long total_timesteps = 200000;
    long long eval_interval = 5000;
    int eval_episodes = 5;
    std::uint64_t seed = 0;
    double reward_scale = 1.0; ///< multiplies rewards before they enter replay; evaluation reports raw returns
    LearnerConfig learner;
    bool custom_bounds = false;

    void validate() const {
        if (total_timesteps < 0) {
            throw ConfigError("total_timesteps must be >= 0");
        }
        if (eval_interval < 1) {
            throw ConfigError("eval_interval must be >= 1");
        }
        if (total_timesteps > 0 && eval_interval > total_timesteps) {
            throw ConfigError("eval_interval must not exceed total_timesteps");
        }
        if (eval_episodes < 1) {
            throw ConfigError("eval_episodes must be >= 1");
        }
        if (!(reward_scale > 0.0) || !std::isfinite(reward_scale)) {
            throw ConfigError("reward_scale must be finite and > 0");
        }
        try {
            learner.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) {
        return {};
    }
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    const char* first = text.data();
    const char* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) {
        throw ConfigError("invalid value for '" + key + "': " + text);
    }
    return value;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(parse_number<T>(key, trim(item)));
    }
    if (out.empty()) {
        throw ConfigError("empty list for '" + key + "'");
    }
    return out;
}

inline Vector to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

} // namespace detail

/// Applies `key = value` lines on top of `base`. Blank lines and `#` comments are ignored;
/// unknown keys are errors.
inline RunConfig parse_config(const std::string& text, RunConfig base = {}) {
    RunConfig cfg = std::move(base);
    LearnerConfig& l = cfg.learner;
    using detail::parse_list;
    using detail::parse_number;
    const std::map<std::string, std::function<void(const std::string&, const std::string&)>> setters = {
        {"env", [&](auto&, auto& v) { cfg.env = v; }},
        {"total_timesteps", [&](auto& k, auto& v) { cfg.total_timesteps = parse_number<long long>(k, v); }},
        {"eval_interval", [&](auto& k, auto& v) { cfg.eval_interval = parse_number<long long>(k, v); }},
        {"eval_episodes", [&](auto& k, auto& v) { cfg.eval_episodes = parse_number<int>(k, v); }},
        {"seed", [&](auto& k, auto& v) { cfg.seed = parse_number<std::uint64_t>(k, v); }},
        {"reward_scale", [&](auto& k, auto& v) { cfg.reward_scale = parse_number<double>(k, v); }},
        {"gamma", [&](auto& k, auto& v) { l.gamma = parse_number<double>(k, v); }},
        {"tau", [&](auto& k, auto& v) { l.tau = parse_number<int>(k, v); }},
        {"b", [&](auto& k, auto& v) { l.b = parse_number<double>(k, v); }},
        {"sigma", [&](auto& k, auto& v) { l.sigma = parse_number<double>(k, v); }},
        {"alpha", [&](auto& k, auto& v) { l.alpha = parse_number<double>(k, v); }},
        {"actor_lr", [&](auto& k, auto& v) { l.actor_lr = parse_number<double>(k, v); }},
        {"critic_lr", [&](auto& k, auto& v) { l.critic_lr = parse_number<double>(k, v); }},
        {"minibatch", [&](auto& k, auto& v) { l.minibatch = parse_number<int>(k, v); }},
        {"gradient_steps", [&](auto& k, auto& v) { l.gradient_steps = parse_number<int>(k, v); }},
        {"learning_start", [&](auto& k, auto& v) { l.learning_start = parse_number<long long>(k, v); }},
        {"memory_size", [&](auto& k, auto& v) { l.memory_size = parse_number<long long>(k, v); }},
        {"bound_penalty_weight", [&](auto& k, auto& v) { l.bound_penalty_weight = parse_number<double>(k, v); }},
        {"actor_hidden", [&](auto& k, auto& v) { l.actor_hidden = parse_list<int>(k, v); }},
        {"critic_hidden", [&](auto& k, auto& v) { l.critic_hidden = parse_list<int>(k, v); }},
        {"action_low",
         [&](auto& k, auto& v) {
             l.action_low = detail::to_vector(parse_list<double>(k, v));
             cfg.custom_bounds = true;
         }},
        {"action_high",
         [&](auto& k, auto& v) {
             l.action_high = detail::to_vector(parse_list<double>(k, v));
             cfg.custom_bounds = true;
         }},
    };

    std::stringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = detail::trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        const auto it = setters.find(key);
        if (it == setters.end()) {
            throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
        it->second(key, value);
    }
    return cfg;
}

inline RunConfig load_config_file(const std::string& path, RunConfig base = {}) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file: " + path);
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str(), std::move(base));
}

/// Fills action bounds from the environment unless the config overrides them.
inline void bind_environment(RunConfig& cfg, const Environment& env) {
    const EnvSpec& spec = env.spec();
    if (!cfg.custom_bounds) {
        cfg.learner.action_low = spec.action_low;
        cfg.learner.action_high = spec.action_high;
    }
    if (cfg.learner.action_dim() != spec.action_dim) {
        throw ConfigError("action bounds do not match the action dimension of " + env.name());
    }
}

// ---------------------------------------------------------------------------
// Seeding

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

enum SeedStream : std::uint64_t {
    kInitStream = 1,
    kNoiseStream = 2,
    kReplayStream = 3,
    kTrialStream = 4,
    kEvalStream = 5,
};

// ---------------------------------------------------------------------------
// Evaluation

struct EvalResult {
    double mean = 0.0;
    double std = 0.0; ///< sample standard deviation, 0 for a single episode
};

inline double sample_std(const std::vector<double>& xs, double mean) {
    if (xs.size() < 2) {
        return 0.0;
    }
    double ss = 0.0;
    for (double x : xs) {
        ss += (x - mean) * (x - mean);
    }
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

/// Runs `episodes` trials with an arbitrary deterministic controller; episode e starts from
/// reset(mix_seed(seed, e)).
template <typename Policy>
EvalResult evaluate_policy(const Environment& env, Policy&& policy, int episodes, std::uint64_t seed) {
    detail::require(episodes >= 1, "evaluate: episodes must be >= 1");
    auto sim = env.clone();
    std::vector<double> returns;
    returns.reserve(static_cast<std::size_t>(episodes));
    for (int e = 0; e < episodes; ++e) {
        Vector s = sim->reset(mix_seed(seed, static_cast<std::uint64_t>(e)));
        double total = 0.0;
        for (;;) {
            const StepResult r = sim->step(policy(s));
            total += r.reward;
            if (r.done()) {
                break;
            }
            s = r.state;
        }
        returns.push_back(total);
    }
    double mean = 0.0;
    for (double x : returns) {
        mean += x;
    }
    mean /= static_cast<double>(returns.size());
    return EvalResult{mean, sample_std(returns, mean)};
}

/// Frozen-weight, noise-free evaluation of the actor.
inline EvalResult evaluate(const Mlp& actor, const Environment& env, const LearnerConfig& cfg, int episodes,
                           std::uint64_t seed) {
    return evaluate_policy(env, [&](const Vector& s) { return act_greedy(s, actor, cfg); }, episodes, seed);
}

// ---------------------------------------------------------------------------
// Metrics

inline constexpr const char* kMetricsHeader = "timestep,mean_return,std_return,actor_loss,critic_loss,mean_abs_ratio";

struct MetricsRow {
    long long timestep = 0;
    double mean_return = 0.0;
    double std_return = 0.0;
    double actor_loss = 0.0;
    double critic_loss = 0.0;
    double mean_abs_ratio = 0.0;
};

/// Shortest round-trip decimal representation.
inline std::string format_double(double x) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    if (ec != std::errc{}) {
        throw std::runtime_error("format_double failed");
    }
    return std::string(buf, ptr);
}

inline std::string format_row(const MetricsRow& row) {
    return std::to_string(row.timestep) + ',' + format_double(row.mean_return) + ',' +
           format_double(row.std_return) + ',' + format_double(row.actor_loss) + ',' +
           format_double(row.critic_loss) + ',' + format_double(row.mean_abs_ratio);
}

inline std::vector<MetricsRow> read_metrics(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw std::runtime_error("cannot read metrics file: " + file.string());
    }
    std::string line;
    if (!std::getline(in, line) || detail::trim(line) != kMetricsHeader) {
        throw std::runtime_error("unexpected metrics header in " + file.string());
    }
    std::vector<MetricsRow> rows;
    while (std::getline(in, line)) {
        line = detail::trim(line);
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string item;
        while (std::getline(ss, item, ',')) {
            fields.push_back(item);
        }
        if (fields.size() != 6) {
            throw std::runtime_error("malformed metrics row in " + file.string() + ": " + line);
        }
        MetricsRow row;
        row.timestep = std::stoll(fields[0]);
        row.mean_return = std::stod(fields[1]);
        row.std_return = std::stod(fields[2]);
        row.actor_loss = std::stod(fields[3]);
        row.critic_loss = std::stod(fields[4]);
        row.mean_abs_ratio = std::stod(fields[5]);
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Training

struct TrainResult {
    std::vector<MetricsRow> rows;
    Checkpoint checkpoint;
    std::size_t replay_size = 0;
};

/**
 * @brief Runs the interaction loop act → step → register → replay.
 *
 * An evaluation row is produced before training and after every
 * eval_interval environment steps. When out_dir is non-empty, metrics.csv is
 * written row by row and checkpoint.bin after the last step.
 */
inline TrainResult train(RunConfig cfg, const std::filesystem::path& out_dir = {}, const Logger& log = {}) {
    auto env = make_environment(cfg.env);
    bind_environment(cfg, *env);
    cfg.validate();
    const LearnerConfig& lc = cfg.learner;
    const EnvSpec& spec = env->spec();

    std::mt19937_64 init_rng(mix_seed(cfg.seed, kInitStream));
    std::mt19937_64 noise_rng(mix_seed(cfg.seed, kNoiseStream));
    std::mt19937_64 replay_rng(mix_seed(cfg.seed, kReplayStream));
    const std::uint64_t trial_seed = mix_seed(cfg.seed, kTrialStream);
    const std::uint64_t eval_seed = mix_seed(cfg.seed, kEvalStream);

    const NoiseModel model = lc.noise_model();
    Approximator actor(Mlp::initialized(MlpSpec{spec.state_dim, lc.actor_hidden, spec.action_dim}, init_rng),
                       lc.actor_lr);
    Approximator critic(Mlp::initialized(MlpSpec{spec.state_dim, lc.critic_hidden, 1}, init_rng), lc.critic_lr);
    ReplayMemory memory(static_cast<std::size_t>(lc.memory_size), spec.state_dim, spec.action_dim);

    std::ofstream metrics;
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        metrics.open(out_dir / "metrics.csv", std::ios::trunc);
        if (!metrics) {
            throw std::runtime_error("cannot write " + (out_dir / "metrics.csv").string());
        }
        metrics << kMetricsHeader << '\n' << std::flush;
    }

    TrainResult result;
    double actor_loss_sum = 0.0;
    double critic_loss_sum = 0.0;
    double ratio_sum = 0.0;
    long long updates = 0;

    auto emit = [&](long long t) {
        const EvalResult ev = evaluate(actor.net, *env, lc, cfg.eval_episodes, eval_seed);
        MetricsRow row{t, ev.mean, ev.std, 0.0, 0.0, 0.0};
        if (updates > 0) {
            row.actor_loss = actor_loss_sum / updates;
            row.critic_loss = critic_loss_sum / updates;
            row.mean_abs_ratio = ratio_sum / updates;
        }
        actor_loss_sum = critic_loss_sum = ratio_sum = 0.0;
        updates = 0;
        result.rows.push_back(row);
        if (metrics.is_open()) {
            metrics << format_row(row) << '\n' << std::flush;
        }
        log.info("t=" + std::to_string(t) + " return=" + format_double(ev.mean) + " std=" + format_double(ev.std) +
                 " critic_loss=" + format_double(row.critic_loss));
    };

    emit(0);

    long long trial = 0;
    long long step_in_trial = 0;
    Vector s = env->reset(mix_seed(trial_seed, 0));
    NoiseState noise = reset_trial(model.params());

    for (long long t = 1; t <= cfg.total_timesteps; ++t) {
        ActResult choice = act(s, noise, actor.net, model.params(), lc, noise_rng);
        noise = std::move(choice.noise);
        StepResult r = env->step(choice.action);
        memory.push(Transition{s, std::move(choice.actor_output), std::move(choice.action), cfg.reward_scale * r.reward, r.state,
                               r.terminal, trial, step_in_trial});
        if (r.done()) {
            ++trial;
            step_in_trial = 0;
            s = env->reset(mix_seed(trial_seed, static_cast<std::uint64_t>(trial)));
            noise = reset_trial(model.params());
        } else {
            ++step_in_trial;
            s = std::move(r.state);
        }

        if (memory.size() >= static_cast<std::size_t>(std::max<long long>(lc.learning_start, 1))) {
            const ReplayStats st = train_step(memory, actor, critic, model, lc, replay_rng);
            if (!std::isfinite(st.actor_loss) || !std::isfinite(st.critic_loss) || !actor.net.params().allFinite() ||
                !critic.net.params().allFinite()) {
                std::ostringstream dump;
                dump << "timestep=" << t << "\nactor_loss=" << format_double(st.actor_loss)
                     << "\ncritic_loss=" << format_double(st.critic_loss)
                     << "\nmean_ratio=" << format_double(st.mean_ratio)
                     << "\nactor_params_finite=" << actor.net.params().allFinite()
                     << "\ncritic_params_finite=" << critic.net.params().allFinite() << '\n';
                throw NonFiniteError("non-finite loss at timestep " + std::to_string(t), dump.str());
            }
            actor_loss_sum += st.actor_loss;
            critic_loss_sum += st.critic_loss;
            ratio_sum += st.mean_ratio;
            ++updates;
            if (log.level == LogLevel::debug && t % 1000 == 0) {
                log.debug("t=" + std::to_string(t) + " actor_loss=" + format_double(st.actor_loss) +
                          " critic_loss=" + format_double(st.critic_loss) +
                          " mean_ratio=" + format_double(st.mean_ratio));
            }
        }

        if (t % cfg.eval_interval == 0) {
            emit(t);
        }
    }

    result.checkpoint = Checkpoint{cfg.env, actor.net, critic.net, actor.optimizer.steps(), cfg.total_timesteps};
    result.replay_size = memory.size();
    if (!out_dir.empty()) {
        save_checkpoint((out_dir / "checkpoint.bin").string(), result.checkpoint);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Plot data

struct PlotRow {
    long long timestep = 0;
    double mean_return = 0.0;
    double std_return = 0.0;
};

/// Mean and sample std of mean_return across runs at every evaluation point.
inline std::vector<PlotRow> aggregate_runs(const std::vector<std::vector<MetricsRow>>& runs,
                                           const std::vector<std::string>& names) {
    detail::require(!runs.empty(), "aggregate_runs: no runs");
    detail::require(names.size() == runs.size(), "aggregate_runs: names and runs differ in length");
    const auto& grid = runs.front();
    std::vector<std::string> mismatched;
    for (std::size_t k = 1; k < runs.size(); ++k) {
        bool same = runs[k].size() == grid.size();
        for (std::size_t j = 0; same && j < grid.size(); ++j) {
            same = runs[k][j].timestep == grid[j].timestep;
        }
        if (!same) {
            mismatched.push_back(names[k]);
        }
    }
    if (!mismatched.empty()) {
        std::string msg = "evaluation grids differ from " + names.front() + ":";
        for (const auto& n : mismatched) {
            msg += " " + n;
        }
        throw std::runtime_error(msg);
    }

    std::vector<PlotRow> out;
    out.reserve(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) {
        std::vector<double> xs;
        xs.reserve(runs.size());
        double mean = 0.0;
        for (const auto& run : runs) {
            xs.push_back(run[j].mean_return);
            mean += run[j].mean_return;
        }
        mean /= static_cast<double>(runs.size());
        out.push_back(PlotRow{grid[j].timestep, mean, sample_std(xs, mean)});
    }
    return out;
}

inline std::vector<PlotRow> emit_plot_data(const std::vector<std::filesystem::path>& run_dirs,
                                           const std::filesystem::path& out_file) {
    std::vector<std::vector<MetricsRow>> runs;
    std::vector<std::string> names;
    for (const auto& dir : run_dirs) {
        runs.push_back(read_metrics(dir / "metrics.csv"));
        names.push_back(dir.string());
    }
    const auto rows = aggregate_runs(runs, names);
    std::ofstream out(out_file, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write plot data: " + out_file.string());
    }
    out << "# timestep mean_return std_return\n";
    for (const auto& r : rows) {
        out << r.timestep << ' ' << format_double(r.mean_return) << ' ' << format_double(r.std_return) << '\n';
    }
    return rows;
}

} // namespace acerac
