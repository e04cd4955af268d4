// ACERAC update engine: actor-critic with experience replay and autocorrelated
// actions. Replayed action blocks of length n = 1..τ' are reweighted by a
// soft-truncated density ratio between the current and the behavior policy,
// both conditioned on the noise value preceding the block.
#pragma once

#include "acerac/environments.hpp"
#include "acerac/gaussian_density.hpp"
#include "acerac/mlp.hpp"
#include "acerac/noise_process.hpp"
#include "acerac/replay_memory.hpp"
#include "acerac/types.hpp"

#include <cmath>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace acerac {

struct LearnerConfig {
    double gamma = 0.99;
    int tau = 4;
    double b = 2.0;
    double sigma = 0.4;
    double alpha = 0.5;
    double actor_lr = 3e-5;
    double critic_lr = 6e-5;
    int minibatch = 256;
    int gradient_steps = 1;
    long long learning_start = 1000;
    long long memory_size = 1000000;
    double bound_penalty_weight = 1.0;
    std::vector<int> actor_hidden{256, 256};
    std::vector<int> critic_hidden{256, 256};
    Vector action_low;
    Vector action_high;

    void validate() const {
        detail::require(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
        detail::require(tau >= 1, "tau must be >= 1");
        detail::require(b > 1.0, "b must be > 1");
        detail::require(sigma > 0.0, "sigma must be > 0");
        detail::require(alpha >= 0.0 && alpha < 1.0, "alpha must lie in [0, 1)");
        detail::require(actor_lr > 0.0 && critic_lr > 0.0, "step sizes must be > 0");
        detail::require(minibatch >= 1, "minibatch must be >= 1");
        detail::require(gradient_steps >= 1, "gradient_steps must be >= 1");
        detail::require(learning_start >= 0, "learning_start must be >= 0");
        detail::require(memory_size >= 1, "memory_size must be >= 1");
        detail::require(bound_penalty_weight >= 0.0, "bound_penalty_weight must be >= 0");
        detail::require(action_low.size() == action_high.size() && action_low.size() >= 1,
                        "action bounds must be set and have equal length");
        detail::require((action_low.array() <= action_high.array()).all(), "action_low must not exceed action_high");
    }

    [[nodiscard]] int action_dim() const { return static_cast<int>(action_low.size()); }

    [[nodiscard]] NoiseModel noise_model() const {
        return NoiseModel(NoiseParams::isotropic(alpha, sigma, action_dim()), tau);
    }
};

// ---------------------------------------------------------------------------
// Acting

struct ActResult {
    Vector action;       ///< clamp(A + ξ)
    Vector actor_output; ///< A(s; θ)
    NoiseState noise;
};

inline Vector clamp_action(const Vector& a, const LearnerConfig& cfg) {
    return a.cwiseMax(cfg.action_low).cwiseMin(cfg.action_high);
}

template <typename Rng>
ActResult act(const Vector& s, const NoiseState& noise, const Mlp& actor, const NoiseParams& params,
              const LearnerConfig& cfg, Rng& rng) {
    Vector actor_output = actor.forward(s);
    auto [xi, next] = sample_step(noise, params, rng);
    Vector action = clamp_action(actor_output + xi, cfg);
    return ActResult{std::move(action), std::move(actor_output), std::move(next)};
}

inline Vector act_greedy(const Vector& s, const Mlp& actor, const LearnerConfig& cfg) {
    return clamp_action(actor.forward(s), cfg);
}

// ---------------------------------------------------------------------------
// Replayed segment distributions

/**
 * @brief Stacked quantities of a replayed segment for its full horizon τ'.
 *
 * The block for horizon n <= τ' is the leading n·d entries of each vector, since
 * conditional means of the AR process are blockwise in n.
 */
struct SegmentDistribution {
    int horizon = 0;
    int action_dim = 0;
    bool trial_start = true;
    Vector mu_bar;           ///< behavior-conditioned noise means
    Vector eta_bar;          ///< current-policy-conditioned noise means
    Vector a_bar;            ///< executed actions
    Vector A_bar_behavior;   ///< stored actor outputs
    Vector A_bar_current;    ///< actor outputs under the current θ
    const NoiseModel* model = nullptr;

    [[nodiscard]] const CovariancePtr& omega2(int n) const {
        return trial_start ? model->marginal(n) : model->conditional(n);
    }
    [[nodiscard]] Vector actions(int n) const { return a_bar.head(n * action_dim); }
    [[nodiscard]] GaussianSpec numerator(int n) const {
        const Eigen::Index m = n * action_dim;
        return GaussianSpec(A_bar_current.head(m) + eta_bar.head(m), omega2(n));
    }
    [[nodiscard]] GaussianSpec denominator(int n) const {
        const Eigen::Index m = n * action_dim;
        return GaussianSpec(A_bar_behavior.head(m) + mu_bar.head(m), omega2(n));
    }
};

namespace detail {

/// current_outputs: d×τ' actor outputs at s_i..s_{i+τ'-1}; current_prev: A(s_{i-1}; θ) when not a trial start.
inline SegmentDistribution assemble_distribution(const Segment& seg, const Matrix& current_outputs,
                                                 const Vector* current_prev, const NoiseModel& model) {
    const int h = seg.horizon();
    const int d = static_cast<int>(model.params().dim());
    SegmentDistribution dist;
    dist.horizon = h;
    dist.action_dim = d;
    dist.trial_start = seg.is_trial_start();
    dist.model = &model;
    dist.a_bar.resize(h * d);
    dist.A_bar_behavior.resize(h * d);
    dist.A_bar_current = Eigen::Map<const Vector>(current_outputs.data(), h * d);
    for (int j = 0; j < h; ++j) {
        require_size(seg.steps[j]->action.size(), d, "segment action");
        dist.a_bar.segment(j * d, d) = seg.steps[j]->action;
        dist.A_bar_behavior.segment(j * d, d) = seg.steps[j]->actor_output;
    }
    if (dist.trial_start) {
        dist.mu_bar = Vector::Zero(h * d);
        dist.eta_bar = Vector::Zero(h * d);
    } else {
        const Transition& prev = *seg.prev;
        dist.mu_bar = model.conditional_mean(h, prev.action - prev.actor_output);
        dist.eta_bar = model.conditional_mean(h, prev.action - *current_prev);
    }
    return dist;
}

} // namespace detail

inline SegmentDistribution build_segment_distribution(const Segment& seg, const Mlp& actor, const NoiseModel& model) {
    detail::require(seg.horizon() >= 1, "build_segment_distribution: empty segment");
    detail::require(seg.horizon() <= model.max_horizon(), "build_segment_distribution: horizon exceeds tau");
    Matrix states(actor.input_dim(), seg.horizon());
    for (int j = 0; j < seg.horizon(); ++j) {
        states.col(j) = seg.steps[j]->s;
    }
    const Matrix outputs = actor.forward_batch(states);
    if (seg.is_trial_start()) {
        return detail::assemble_distribution(seg, outputs, nullptr, model);
    }
    const Vector prev_output = actor.forward(seg.prev->s);
    return detail::assemble_distribution(seg, outputs, &prev_output, model);
}

// ---------------------------------------------------------------------------
// Returns and temporal differences

/// Σ_{j<n} γʲ r_{i+j} + γⁿ V(s_{i+n}), where V is taken as 0 at an absorbing state.
inline double n_step_return(const Segment& seg, int n, double bootstrap_value, double gamma) {
    detail::require(n >= 1 && n <= seg.horizon(), "n_step_return: n out of range");
    double total = 0.0;
    double discount = 1.0;
    for (int j = 0; j < n; ++j, discount *= gamma) {
        total += discount * seg.steps[j]->reward;
    }
    return total + (seg.bootstrap_terminal(n) ? 0.0 : discount * bootstrap_value);
}

inline double n_step_return(const Segment& seg, int n, const Mlp& critic, double gamma) {
    detail::require(n >= 1 && n <= seg.horizon(), "n_step_return: n out of range");
    const double bootstrap = seg.bootstrap_terminal(n) ? 0.0 : critic.forward(seg.bootstrap_state(n))[0];
    return n_step_return(seg, n, bootstrap, gamma);
}

struct TemporalDifference {
    double advantage = 0.0; ///< n-step return minus V(s_i)
    double log_ratio = 0.0; ///< log of the current/behavior density ratio
    double weight = 0.0;    ///< ψ_b(ratio)
    double value = 0.0;     ///< advantage · weight
};

inline TemporalDifference weighted_difference(double advantage, const SegmentDistribution& dist, int n, double b) {
    TemporalDifference td;
    td.advantage = advantage;
    td.log_ratio = log_density_ratio(dist.actions(n), dist.numerator(n), dist.denominator(n));
    td.weight = truncated_ratio(td.log_ratio, b);
    td.value = advantage * td.weight;
    return td;
}

inline TemporalDifference temporal_difference(const Segment& seg, int n, const SegmentDistribution& dist,
                                              const Mlp& critic, const LearnerConfig& cfg) {
    const double advantage = n_step_return(seg, n, critic, cfg.gamma) - critic.forward(seg.first().s)[0];
    return weighted_difference(advantage, dist, n, cfg.b);
}

// ---------------------------------------------------------------------------
// Bound penalty L(s, θ) = w Σ_j [max(0, A_j - high_j)² + max(0, low_j - A_j)²]

/// ∂L/∂A at actor output A.
inline Vector bound_penalty_output_grad(const Vector& actor_output, const LearnerConfig& cfg) {
    const Vector over = (actor_output - cfg.action_high).cwiseMax(0.0);
    const Vector under = (cfg.action_low - actor_output).cwiseMax(0.0);
    return 2.0 * cfg.bound_penalty_weight * (over - under);
}

inline double bound_penalty_value(const Vector& actor_output, const LearnerConfig& cfg) {
    const Vector over = (actor_output - cfg.action_high).cwiseMax(0.0);
    const Vector under = (cfg.action_low - actor_output).cwiseMax(0.0);
    return cfg.bound_penalty_weight * (over.squaredNorm() + under.squaredNorm());
}

struct PenaltyResult {
    double value = 0.0;
    Vector gradient; ///< ∇_θ L
};

inline PenaltyResult bound_penalty(const Vector& s, const Mlp& actor, const LearnerConfig& cfg) {
    const Vector out = actor.forward(s);
    return PenaltyResult{bound_penalty_value(out, cfg), actor.backward(s, bound_penalty_output_grad(out, cfg))};
}

// ---------------------------------------------------------------------------
// Improvement directions

struct ReplayStats {
    double actor_loss = 0.0;  ///< mean of -(1/τ')Σ ln φ·dⁿ + L
    double critic_loss = 0.0; ///< mean of (1/τ')Σ ½(n-step advantage)²
    double mean_ratio = 0.0;  ///< mean density ratio over all replayed blocks
    int segments = 0;
};

struct Directions {
    Vector actor;  ///< Δθ averaged over segments
    Vector critic; ///< Δν averaged over segments
    ReplayStats stats;
};

/**
 * @brief Δθ and Δν averaged over a batch of replayed segments.
 *
 * Every network evaluation is batched: one actor pass over all s_{i-1}, s_i, …,
 * one critic pass over all s_i and bootstrap states, then one backward pass per
 * network. dⁿᵢ and η̄ are treated as constants with respect to θ.
 */
inline Directions replay_directions(std::span<const Segment> segments, const Mlp& actor, const Mlp& critic,
                                    const NoiseModel& model, const LearnerConfig& cfg) {
    detail::require(!segments.empty(), "replay_directions: no segments");
    const int d = cfg.action_dim();
    detail::require_size(actor.output_dim(), d, "actor output");
    detail::require_size(critic.output_dim(), 1, "critic output");

    // Column layout.
    std::vector<int> actor_col(segments.size());
    std::vector<int> critic_col(segments.size());
    int actor_cols = 0;
    int critic_cols = 0;
    for (std::size_t k = 0; k < segments.size(); ++k) {
        const Segment& seg = segments[k];
        detail::require(seg.horizon() >= 1 && seg.horizon() <= model.max_horizon(),
                        "replay_directions: segment horizon out of range");
        actor_col[k] = actor_cols;
        actor_cols += seg.horizon() + (seg.is_trial_start() ? 0 : 1);
        critic_col[k] = critic_cols;
        critic_cols += 1 + seg.horizon();
    }

    Matrix actor_in(actor.input_dim(), actor_cols);
    Matrix critic_in(critic.input_dim(), critic_cols);
    for (std::size_t k = 0; k < segments.size(); ++k) {
        const Segment& seg = segments[k];
        int c = actor_col[k];
        if (!seg.is_trial_start()) {
            actor_in.col(c++) = seg.prev->s;
        }
        for (const Transition* t : seg.steps) {
            actor_in.col(c++) = t->s;
        }
        critic_in.col(critic_col[k]) = seg.first().s;
        for (int n = 1; n <= seg.horizon(); ++n) {
            critic_in.col(critic_col[k] + n) = seg.bootstrap_state(n);
        }
    }

    Mlp::Tape actor_tape;
    Mlp::Tape critic_tape;
    const Matrix actor_out = actor.forward_batch(actor_in, actor_tape);
    const Matrix critic_out = critic.forward_batch(critic_in, critic_tape);

    Matrix actor_up = Matrix::Zero(d, actor_cols);
    Matrix critic_up = Matrix::Zero(1, critic_cols);
    ReplayStats stats;
    stats.segments = static_cast<int>(segments.size());
    int ratio_count = 0;

    for (std::size_t k = 0; k < segments.size(); ++k) {
        const Segment& seg = segments[k];
        const int h = seg.horizon();
        const int first = actor_col[k] + (seg.is_trial_start() ? 0 : 1);
        Vector prev_out;
        if (!seg.is_trial_start()) {
            prev_out = actor_out.col(actor_col[k]);
        }
        const SegmentDistribution dist = detail::assemble_distribution(
            seg, actor_out.middleCols(first, h), seg.is_trial_start() ? nullptr : &prev_out, model);

        const double v_first = critic_out(0, critic_col[k]);
        Vector block_up = Vector::Zero(h * d);
        double d_sum = 0.0;
        double surrogate = 0.0;
        double sq_adv = 0.0;
        for (int n = 1; n <= h; ++n) {
            const double ret = n_step_return(seg, n, critic_out(0, critic_col[k] + n), cfg.gamma);
            const TemporalDifference td = weighted_difference(ret - v_first, dist, n, cfg.b);
            const GaussianSpec num = dist.numerator(n);
            block_up.head(n * d) += td.value * grad_log_density_wrt_mean(dist.actions(n), num);
            d_sum += td.value;
            surrogate += log_density(dist.actions(n), num) * td.value;
            sq_adv += 0.5 * td.advantage * td.advantage;
            stats.mean_ratio += std::exp(std::clamp(td.log_ratio, -kLogRatioClamp, kLogRatioClamp));
            ++ratio_count;
        }
        block_up /= static_cast<double>(h);

        const Vector first_out = actor_out.col(first);
        const double penalty = bound_penalty_value(first_out, cfg);
        for (int j = 0; j < h; ++j) {
            actor_up.col(first + j) = block_up.segment(j * d, d);
        }
        actor_up.col(first) -= bound_penalty_output_grad(first_out, cfg);
        critic_up(0, critic_col[k]) = d_sum / h;

        stats.actor_loss += -surrogate / h + penalty;
        stats.critic_loss += sq_adv / h;
    }

    const double inv = 1.0 / static_cast<double>(segments.size());
    Directions out;
    out.actor = actor.backward_batch(actor_tape, actor_up) * inv;
    out.critic = critic.backward_batch(critic_tape, critic_up) * inv;
    stats.actor_loss *= inv;
    stats.critic_loss *= inv;
    stats.mean_ratio /= static_cast<double>(ratio_count);
    out.stats = stats;
    return out;
}

inline Vector actor_direction(const Segment& seg, const Mlp& actor, const Mlp& critic, const NoiseModel& model,
                              const LearnerConfig& cfg) {
    return replay_directions(std::span<const Segment>(&seg, 1), actor, critic, model, cfg).actor;
}

inline Vector critic_direction(const Segment& seg, const Mlp& actor, const Mlp& critic, const NoiseModel& model,
                               const LearnerConfig& cfg) {
    return replay_directions(std::span<const Segment>(&seg, 1), actor, critic, model, cfg).critic;
}

// ---------------------------------------------------------------------------
// Training

/// Samples cfg.minibatch segments, averages their directions and takes one ADAM ascent step
/// on each network; repeated cfg.gradient_steps times. Returns the stats of the last step.
template <typename Rng>
ReplayStats train_step(const ReplayMemory& memory, Approximator& actor, Approximator& critic, const NoiseModel& model,
                       const LearnerConfig& cfg, Rng& rng) {
    if (memory.size() < static_cast<std::size_t>(std::max<long long>(cfg.learning_start, 1)) ||
        memory.eligible_count() == 0) {
        throw NotReadyError("train_step: replay memory below learning_start");
    }
    ReplayStats stats;
    std::vector<Segment> batch;
    batch.reserve(static_cast<std::size_t>(cfg.minibatch));
    for (int g = 0; g < cfg.gradient_steps; ++g) {
        batch.clear();
        for (int k = 0; k < cfg.minibatch; ++k) {
            batch.push_back(memory.extract_segment(memory.sample_index(rng), cfg.tau));
        }
        const Directions dir = replay_directions(batch, actor.net, critic.net, model, cfg);
        actor.ascend(dir.actor);
        critic.ascend(dir.critic);
        stats = dir.stats;
    }
    return stats;
}

// ---------------------------------------------------------------------------
// Monte-Carlo estimate of the noise-value function

/**
 * Mean discounted return from state s with ξ_{t-1} = xi under the exploring policy.
 * With xi empty the noise starts from its unconditional distribution, which
 * estimates the value function instead. Rollouts stop at a terminal state or
 * after `horizon` steps.
 */
template <typename Rng>
double monte_carlo_noise_value(const Environment& env, const Mlp& actor, const LearnerConfig& cfg,
                               const NoiseParams& params, const std::optional<Vector>& xi, const Vector& s,
                               int episodes, int horizon, Rng& rng) {
    detail::require(episodes >= 1 && horizon >= 1, "monte_carlo_noise_value: episodes and horizon must be >= 1");
    auto sim = env.clone();
    double total = 0.0;
    for (int e = 0; e < episodes; ++e) {
        sim->restore(s);
        NoiseState noise = xi ? NoiseState{*xi, false} : reset_trial(params);
        Vector state = s;
        double discount = 1.0;
        double ret = 0.0;
        for (int t = 0; t < horizon; ++t) {
            ActResult step = act(state, noise, actor, params, cfg, rng);
            noise = std::move(step.noise);
            const StepResult r = sim->step(step.action);
            ret += discount * r.reward;
            discount *= cfg.gamma;
            if (r.terminal) {
                break;
            }
            state = r.state;
        }
        total += ret;
    }
    return total / episodes;
}

} // namespace acerac
