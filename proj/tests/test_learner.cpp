#include "acerac/learner.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace acerac;
using acerac::testing::ConstantReward;
using acerac::testing::finite_difference_gradient;
using acerac::testing::frozen_actor_objective;
using acerac::testing::frozen_critic_objective;
using acerac::testing::collect;
using acerac::testing::perturbed;
using acerac::testing::max_relative_error;
using acerac::testing::QuadraticBandit;
using acerac::testing::random_vector;
using acerac::testing::small_config;

namespace {

struct Fixture {
    LearnerConfig cfg;
    NoiseModel model;
    Mlp actor;
    Mlp critic;
    ReplayMemory memory;

    Fixture(const LearnerConfig& c, int state_dim, std::mt19937_64& rng)
        : cfg(c),
          model(c.noise_model()),
          actor(Mlp::initialized(MlpSpec{state_dim, c.actor_hidden, c.action_dim()}, rng, 1.0)),
          critic(Mlp::initialized(MlpSpec{state_dim, c.critic_hidden, 1}, rng, 1.0)),
          memory(10000, state_dim, c.action_dim()) {}
};

} // namespace

// =============================================================================
// Acting
// =============================================================================

TEST(Act, ClampsToBounds) {
    const LearnerConfig cfg = small_config(1);
    EXPECT_DOUBLE_EQ(clamp_action(Vector::Constant(1, 0.0 + 0.3), cfg)[0], 0.3);
    EXPECT_DOUBLE_EQ(clamp_action(Vector::Constant(1, 0.9 + 0.5), cfg)[0], 1.0);
    EXPECT_DOUBLE_EQ(clamp_action(Vector::Constant(1, -3.0), cfg)[0], -1.0);
}

TEST(Act, AddsSampledNoiseToActorOutput) {
    LearnerConfig cfg = small_config(2, 10.0);
    const auto params = NoiseParams::isotropic(0.5, 0.4, 2);
    const Mlp zero(MlpSpec{3, {4}, 2});
    std::mt19937_64 a(5);
    std::mt19937_64 b(5);
    const NoiseState start = reset_trial(params);
    const ActResult r = act(Vector::Ones(3), start, zero, params, cfg, a);
    const auto [xi, next] = sample_step(start, params, b);
    EXPECT_EQ(r.actor_output, Vector::Zero(2));
    EXPECT_EQ(r.action, xi);
    EXPECT_EQ(r.noise.xi, next.xi);
    EXPECT_FALSE(r.noise.fresh);
}

TEST(Act, GreedyIsDeterministicAndClamped) {
    const LearnerConfig cfg = small_config(1);
    const Mlp zero(MlpSpec{2, {3}, 1});
    EXPECT_EQ(act_greedy(Vector::Ones(2), zero, cfg), Vector::Zero(1));
    // Output bias 5 pushes A beyond the bound.
    Mlp big = zero;
    big.params()[big.num_params() - 1] = 5.0;
    EXPECT_EQ(act_greedy(Vector::Ones(2), big, cfg)[0], 1.0);
    std::mt19937_64 rng(1);
    const Mlp net = Mlp::initialized(MlpSpec{2, {3}, 1}, rng, 1.0);
    EXPECT_EQ(act_greedy(Vector::Ones(2), net, cfg), act_greedy(Vector::Ones(2), net, cfg));
}

// =============================================================================
// Segment distributions
// =============================================================================

TEST(SegmentDistribution, TrialStartUsesMarginal) {
    std::mt19937_64 rng(2);
    Fixture f(small_config(2), 3, rng);
    acerac::testing::push_random_trial(f.memory, 0, 6, 3, 2, rng);
    const Segment seg = f.memory.extract_segment(0, 4);
    const SegmentDistribution dist = build_segment_distribution(seg, f.actor, f.model);
    EXPECT_TRUE(dist.trial_start);
    EXPECT_EQ(dist.mu_bar, Vector::Zero(8));
    EXPECT_EQ(dist.eta_bar, Vector::Zero(8));
    for (int n = 1; n <= 4; ++n) {
        EXPECT_EQ(dist.omega2(n), f.model.marginal(n));
    }
}

TEST(SegmentDistribution, OnPolicyMeansCoincide) {
    std::mt19937_64 rng(3);
    Fixture f(small_config(2), 3, rng);
    f.actor = perturbed(f.actor, rng, 0.5);
    acerac::testing::push_random_trial(f.memory, 0, 6, 3, 2, rng);
    // Rewrite stored actor outputs as if collected by the current actor.
    ReplayMemory memory(100, 3, 2);
    for (std::size_t k = 0; k < f.memory.size(); ++k) {
        Transition t = f.memory.at(k);
        t.actor_output = f.actor.forward(t.s);
        memory.push(t);
    }
    const SegmentDistribution dist = build_segment_distribution(memory.extract_segment(2, 4), f.actor, f.model);
    EXPECT_FALSE(dist.trial_start);
    EXPECT_EQ(dist.eta_bar, dist.mu_bar);
    EXPECT_EQ(dist.A_bar_current, dist.A_bar_behavior);
    EXPECT_EQ(dist.omega2(3), f.model.conditional(3));
    EXPECT_NE(dist.mu_bar, Vector::Zero(8));
}

TEST(SegmentDistribution, WhiteNoiseForgetsPreviousValue) {
    std::mt19937_64 rng(4);
    LearnerConfig cfg = small_config(1);
    cfg.alpha = 0.0;
    Fixture f(cfg, 2, rng);
    acerac::testing::push_random_trial(f.memory, 0, 8, 2, 1, rng);
    const SegmentDistribution dist = build_segment_distribution(f.memory.extract_segment(3, 4), f.actor, f.model);
    EXPECT_FALSE(dist.trial_start);
    EXPECT_EQ(dist.mu_bar, Vector::Zero(4));
    EXPECT_EQ(dist.eta_bar, Vector::Zero(4));
}

// =============================================================================
// Returns and temporal differences
// =============================================================================

TEST(NStepReturn, Examples) {
    ReplayMemory memory(10, 1, 1);
    for (int k = 0; k < 3; ++k) {
        memory.push(Transition{Vector::Zero(1), Vector::Zero(1), Vector::Zero(1), 1.0, Vector::Zero(1), false, 0, k});
    }
    const Segment seg = memory.extract_segment(0, 4);
    EXPECT_NEAR(n_step_return(seg, 2, 0.0, 0.99), 1.99, 1e-15);

    ReplayMemory one(10, 1, 1);
    one.push(Transition{Vector::Zero(1), Vector::Zero(1), Vector::Zero(1), 0.0, Vector::Ones(1), false, 0, 0});
    EXPECT_NEAR(n_step_return(one.extract_segment(0, 4), 1, 5.0, 0.99), 4.95, 1e-15);

    ReplayMemory term(10, 1, 1);
    term.push(Transition{Vector::Zero(1), Vector::Zero(1), Vector::Zero(1), 2.0, Vector::Zero(1), false, 0, 0});
    term.push(Transition{Vector::Zero(1), Vector::Zero(1), Vector::Zero(1), 3.0, Vector::Ones(1), true, 0, 1});
    EXPECT_NEAR(n_step_return(term.extract_segment(0, 4), 2, 1000.0, 0.9), 2.0 + 0.9 * 3.0, 1e-15);

    // Critic overload bootstraps with V(s_{i+n}).
    const Mlp critic(MlpSpec{1, {1}, 1}, (Vector(4) << 0.0, 0.0, 0.0, 5.0).finished());
    EXPECT_NEAR(n_step_return(one.extract_segment(0, 4), 1, critic, 0.99), 4.95, 1e-15);
}

TEST(TemporalDifference, OnPolicyRatioIsOne) {
    std::mt19937_64 rng(5);
    LearnerConfig cfg = small_config(2);
    Fixture f(cfg, 3, rng);
    f.actor = perturbed(f.actor, rng, 0.3);
    PointMass env;
    LearnerConfig env_cfg = cfg;
    env_cfg.action_low = env.spec().action_low;
    env_cfg.action_high = env.spec().action_high;
    Fixture g(env_cfg, 6, rng);
    collect(g.memory, env, g.actor, g.model.params(), env_cfg, 500, rng);
    for (int k = 0; k < 200; ++k) {
        const Segment seg = g.memory.extract_segment(g.memory.sample_index(rng), cfg.tau);
        const SegmentDistribution dist = build_segment_distribution(seg, g.actor, g.model);
        for (int n = 1; n <= seg.horizon(); ++n) {
            const TemporalDifference td = temporal_difference(seg, n, dist, g.critic, env_cfg);
            EXPECT_LT(std::abs(td.log_ratio), 1e-10);
            EXPECT_NEAR(td.value, td.advantage * 2.0 * std::tanh(0.5), 1e-10 * (1 + std::abs(td.advantage)));
        }
    }
}

TEST(TemporalDifference, ZeroAdvantageGivesZero) {
    std::mt19937_64 rng(6);
    LearnerConfig cfg = small_config(1);
    Fixture f(cfg, 1, rng);
    // Constant critic V ≡ c and rewards chosen so the 1-step return equals c.
    const double c = 2.0;
    const Mlp critic(MlpSpec{1, {1}, 1}, (Vector(4) << 0.0, 0.0, 0.0, c).finished());
    ReplayMemory memory(10, 1, 1);
    memory.push(Transition{Vector::Zero(1), Vector::Zero(1), Vector::Constant(1, 0.3), c * (1 - cfg.gamma),
                           Vector::Zero(1), false, 0, 0});
    const Segment seg = memory.extract_segment(0, 1);
    const SegmentDistribution dist = build_segment_distribution(seg, perturbed(f.actor, rng, 1.0), f.model);
    EXPECT_NEAR(temporal_difference(seg, 1, dist, critic, cfg).value, 0.0, 1e-14);
}

TEST(TemporalDifference, TruncationBoundsFuzzed) {
    std::mt19937_64 rng(7);
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        LearnerConfig cfg = small_config(1 + trial % 3);
        cfg.b = 1.1 + (trial % 5);
        cfg.alpha = 0.1 * (trial % 10);
        Fixture f(cfg, 2, rng);
        acerac::testing::push_random_trial(f.memory, 0, 30, 2, cfg.action_dim(), rng);
        const Mlp actor = perturbed(f.actor, rng, 2.0);
        for (int k = 0; k < 30; ++k) {
            const Segment seg = f.memory.extract_segment(f.memory.sample_index(rng), cfg.tau);
            const SegmentDistribution dist = build_segment_distribution(seg, actor, f.model);
            for (int n = 1; n <= seg.horizon(); ++n) {
                const TemporalDifference td = temporal_difference(seg, n, dist, f.critic, cfg);
                EXPECT_LE(std::abs(td.value), cfg.b * std::abs(td.advantage) + 1e-12);
                ++checked;
            }
        }
    }
    EXPECT_GE(checked, 10000);
}

TEST(TemporalDifference, WhiteNoiseBlockRatioFactorizes) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        LearnerConfig cfg = small_config(1 + trial % 3);
        cfg.alpha = 0.0;
        Fixture f(cfg, 2, rng);
        acerac::testing::push_random_trial(f.memory, 0, 12, 2, cfg.action_dim(), rng);
        const Mlp actor = perturbed(f.actor, rng, 0.5);
        const Segment seg = f.memory.extract_segment(f.memory.sample_index(rng), cfg.tau);
        const SegmentDistribution dist = build_segment_distribution(seg, actor, f.model);
        const int d = cfg.action_dim();
        const auto c = f.model.params().covariance();
        for (int n = 1; n <= seg.horizon(); ++n) {
            double per_step = 0.0;
            for (int j = 0; j < n; ++j) {
                const Vector a = dist.a_bar.segment(j * d, d);
                per_step += log_density_ratio(a, GaussianSpec(dist.A_bar_current.segment(j * d, d), c),
                                              GaussianSpec(dist.A_bar_behavior.segment(j * d, d), c));
            }
            const double block = log_density_ratio(dist.actions(n), dist.numerator(n), dist.denominator(n));
            EXPECT_NEAR(block, per_step, 1e-10);
        }
    }
}

// =============================================================================
// Bound penalty
// =============================================================================

TEST(BoundPenalty, Examples) {
    LearnerConfig cfg = small_config(1);
    cfg.bound_penalty_weight = 1.0;
    const Mlp inside(MlpSpec{1, {1}, 1}, (Vector(4) << 0.0, 0.0, 0.0, 0.5).finished());
    const PenaltyResult zero = bound_penalty(Vector::Ones(1), inside, cfg);
    EXPECT_EQ(zero.value, 0.0);
    EXPECT_EQ(zero.gradient, Vector::Zero(4));

    const Mlp outside(MlpSpec{1, {1}, 1}, (Vector(4) << 0.0, 0.0, 0.0, 1.5).finished());
    const PenaltyResult p = bound_penalty(Vector::Ones(1), outside, cfg);
    EXPECT_DOUBLE_EQ(p.value, 0.25);
    // ∂L/∂(output bias) = 2wδ
    EXPECT_DOUBLE_EQ(p.gradient[3], 1.0);

    cfg.bound_penalty_weight = 3.0;
    const Mlp below(MlpSpec{1, {1}, 1}, (Vector(4) << 0.0, 0.0, 0.0, -1.2).finished());
    EXPECT_NEAR(bound_penalty(Vector::Ones(1), below, cfg).gradient[3], -2 * 3.0 * 0.2, 1e-12);
}

TEST(BoundPenalty, MatchesFiniteDifferences) {
    std::mt19937_64 rng(9);
    double worst = 0.0;
    for (int trial = 0; trial < 60; ++trial) {
        LearnerConfig cfg = small_config(1 + trial % 3, 0.2);
        cfg.bound_penalty_weight = 0.5 + trial % 4;
        Mlp actor = Mlp::initialized(MlpSpec{2, {3}, cfg.action_dim()}, rng, 1.0);
        actor.params() += random_vector(actor.num_params(), rng, 0.5);
        const Vector s = random_vector(2, rng);
        const PenaltyResult p = bound_penalty(s, actor, cfg);
        const Vector fd = finite_difference_gradient(
            [&](const Vector& w) { return bound_penalty_value(Mlp(actor.spec(), w).forward(s), cfg); },
            actor.params());
        if (p.value > 1e-6) {
            worst = std::max(worst, max_relative_error(p.gradient, fd));
        }
    }
    EXPECT_LT(worst, 1e-4);
}

// =============================================================================
// Improvement directions
// =============================================================================

TEST(ActorDirection, ZeroWhenAllDifferencesVanish) {
    std::mt19937_64 rng(10);
    LearnerConfig cfg = small_config(1, 100.0);
    cfg.gamma = 0.5;
    Fixture f(cfg, 1, rng);
    // Zero rewards and a zero critic give zero advantages.
    const Mlp critic(MlpSpec{1, cfg.critic_hidden, 1});
    ReplayMemory memory(10, 1, 1);
    for (int k = 0; k < 5; ++k) {
        memory.push(Transition{random_vector(1, rng), random_vector(1, rng), random_vector(1, rng), 0.0,
                               random_vector(1, rng), false, 0, k});
    }
    const Segment seg = memory.extract_segment(1, 4);
    EXPECT_EQ(actor_direction(seg, f.actor, critic, f.model, cfg), Vector::Zero(f.actor.num_params()));
    EXPECT_EQ(critic_direction(seg, f.actor, critic, f.model, cfg), Vector::Zero(critic.num_params()));
}

TEST(ActorDirection, MatchesFrozenFiniteDifferences) {
    std::mt19937_64 rng(11);
    double worst = 0.0;
    for (int trial = 0; trial < 60; ++trial) {
        LearnerConfig cfg = small_config(1 + trial % 2, 0.3);
        cfg.tau = 1 + trial % 4;
        cfg.alpha = 0.2 * (trial % 5);
        cfg.bound_penalty_weight = (trial % 3) * 0.5;
        cfg.actor_hidden = {1 + trial % 3};
        Fixture f(cfg, 2, rng);
        acerac::testing::push_random_trial(f.memory, 0, 10, 2, cfg.action_dim(), rng, trial % 2 == 0);
        const Mlp actor = perturbed(f.actor, rng, 0.3);
        const Segment seg = f.memory.extract_segment(f.memory.sample_index(rng), cfg.tau);
        const Vector analytic = actor_direction(seg, actor, f.critic, f.model, cfg);
        const Vector fd = finite_difference_gradient(
            [&](const Vector& p) { return frozen_actor_objective(p, seg, actor, f.critic, f.model, cfg); },
            actor.params());
        worst = std::max(worst, max_relative_error(analytic, fd));
    }
    EXPECT_LT(worst, 1e-4);
}

TEST(CriticDirection, MatchesFiniteDifferencesAndUnfactorizedSum) {
    std::mt19937_64 rng(12);
    double worst_fd = 0.0;
    double worst_sum = 0.0;
    for (int trial = 0; trial < 60; ++trial) {
        LearnerConfig cfg = small_config(1 + trial % 2);
        cfg.tau = 1 + trial % 4;
        Fixture f(cfg, 2, rng);
        acerac::testing::push_random_trial(f.memory, 0, 10, 2, cfg.action_dim(), rng);
        const Mlp actor = perturbed(f.actor, rng, 0.3);
        const Segment seg = f.memory.extract_segment(f.memory.sample_index(rng), cfg.tau);
        const Vector analytic = critic_direction(seg, actor, f.critic, f.model, cfg);
        const Vector fd = finite_difference_gradient(
            [&](const Vector& p) { return frozen_critic_objective(p, seg, actor, f.critic, f.model, cfg); },
            f.critic.params());
        worst_fd = std::max(worst_fd, max_relative_error(analytic, fd));

        const SegmentDistribution dist = build_segment_distribution(seg, actor, f.model);
        Vector unfactorized = Vector::Zero(f.critic.num_params());
        for (int n = 1; n <= seg.horizon(); ++n) {
            const double dn = temporal_difference(seg, n, dist, f.critic, cfg).value;
            unfactorized += f.critic.backward(seg.first().s, Vector::Constant(1, dn)) / seg.horizon();
        }
        worst_sum = std::max(worst_sum, (analytic - unfactorized).cwiseAbs().maxCoeff());
    }
    EXPECT_LT(worst_fd, 1e-4);
    EXPECT_LT(worst_sum, 1e-12);
}

TEST(CriticDirection, SingleHorizonScalesGradient) {
    std::mt19937_64 rng(13);
    LearnerConfig cfg = small_config(1);
    cfg.tau = 1;
    Fixture f(cfg, 2, rng);
    acerac::testing::push_random_trial(f.memory, 0, 3, 2, 1, rng);
    const Segment seg = f.memory.extract_segment(1, 1);
    const SegmentDistribution dist = build_segment_distribution(seg, f.actor, f.model);
    const double c = temporal_difference(seg, 1, dist, f.critic, cfg).value;
    const Vector expected = c * f.critic.backward(seg.first().s, Vector::Ones(1));
    EXPECT_LT((critic_direction(seg, f.actor, f.critic, f.model, cfg) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ReplayDirections, IdenticalSegmentsAverageToSingle) {
    std::mt19937_64 rng(14);
    LearnerConfig cfg = small_config(2);
    Fixture f(cfg, 3, rng);
    acerac::testing::push_random_trial(f.memory, 0, 10, 3, 2, rng);
    const Mlp actor = perturbed(f.actor, rng, 0.3);
    const Segment seg = f.memory.extract_segment(4, cfg.tau);
    const std::vector<Segment> batch(5, seg);
    const Directions many = replay_directions(batch, actor, f.critic, f.model, cfg);
    EXPECT_LT((many.actor - actor_direction(seg, actor, f.critic, f.model, cfg)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((many.critic - critic_direction(seg, actor, f.critic, f.model, cfg)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ReplayDirections, BatchEqualsMeanOfSingles) {
    std::mt19937_64 rng(15);
    LearnerConfig cfg = small_config(1);
    Fixture f(cfg, 2, rng);
    acerac::testing::push_random_trial(f.memory, 0, 7, 2, 1, rng);
    acerac::testing::push_random_trial(f.memory, 1, 3, 2, 1, rng, true);
    const Mlp actor = perturbed(f.actor, rng, 0.3);
    std::vector<Segment> batch;
    Vector actor_mean = Vector::Zero(actor.num_params());
    Vector critic_mean = Vector::Zero(f.critic.num_params());
    for (std::size_t i = 0; i < f.memory.size(); ++i) {
        batch.push_back(f.memory.extract_segment(i, cfg.tau));
        actor_mean += actor_direction(batch.back(), actor, f.critic, f.model, cfg);
        critic_mean += critic_direction(batch.back(), actor, f.critic, f.model, cfg);
    }
    const Directions dir = replay_directions(batch, actor, f.critic, f.model, cfg);
    EXPECT_LT((dir.actor - actor_mean / batch.size()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((dir.critic - critic_mean / batch.size()).cwiseAbs().maxCoeff(), 1e-12);
}

// A single-step bandit where the executed action earned more than V(s):
// the actor update must raise the likelihood of that action.
TEST(ActorDirection, PositiveAdvantageMovesTowardExecutedAction) {
    std::mt19937_64 rng(16);
    LearnerConfig cfg = small_config(1, 2.0);
    cfg.tau = 1;
    Fixture f(cfg, 1, rng);
    const Mlp critic(MlpSpec{1, cfg.critic_hidden, 1}); // V ≡ 0
    ReplayMemory memory(10, 1, 1);
    const Vector s = Vector::Ones(1);
    const Vector a = Vector::Constant(1, 0.8);
    memory.push(Transition{s, f.actor.forward(s), a, 1.0, s, true, 0, 0});
    const Segment seg = memory.extract_segment(0, 1);
    const Vector delta = actor_direction(seg, f.actor, critic, f.model, cfg);
    const auto cov = f.model.marginal(1);
    const Vector up = finite_difference_gradient(
        [&](const Vector& p) { return log_density(a, GaussianSpec(Mlp(f.actor.spec(), p).forward(s), cov)); },
        f.actor.params());
    EXPECT_GT(delta.dot(up), 0.0);

    Approximator actor(f.actor, 1e-2);
    const double before = std::abs(actor.net.forward(s)[0] - a[0]);
    actor.ascend(delta);
    EXPECT_LT(std::abs(actor.net.forward(s)[0] - a[0]), before);
}

// =============================================================================
// train_step
// =============================================================================

TEST(TrainStep, NotReadyBelowLearningStart) {
    std::mt19937_64 rng(17);
    LearnerConfig cfg = small_config(1);
    cfg.learning_start = 100;
    Fixture f(cfg, 2, rng);
    acerac::testing::push_random_trial(f.memory, 0, 50, 2, 1, rng);
    Approximator actor(f.actor, cfg.actor_lr);
    Approximator critic(f.critic, cfg.critic_lr);
    const Vector before = actor.net.params();
    EXPECT_THROW(train_step(f.memory, actor, critic, f.model, cfg, rng), NotReadyError);
    EXPECT_EQ(actor.net.params(), before);
}

TEST(TrainStep, ZeroStepSizesLeaveParamsUnchanged) {
    std::mt19937_64 rng(18);
    LearnerConfig cfg = small_config(1);
    cfg.learning_start = 10;
    cfg.minibatch = 8;
    Fixture f(cfg, 2, rng);
    acerac::testing::push_random_trial(f.memory, 0, 50, 2, 1, rng);
    Approximator actor(f.actor, 0.0);
    Approximator critic(f.critic, 0.0);
    const Vector a0 = actor.net.params();
    const Vector c0 = critic.net.params();
    train_step(f.memory, actor, critic, f.model, cfg, rng);
    EXPECT_EQ(actor.net.params(), a0);
    EXPECT_EQ(critic.net.params(), c0);
}

TEST(TrainStep, UpdatesBothNetworksAndRepeatsGradientSteps) {
    std::mt19937_64 rng(19);
    LearnerConfig cfg = small_config(1);
    cfg.learning_start = 10;
    cfg.minibatch = 8;
    cfg.gradient_steps = 3;
    Fixture f(cfg, 2, rng);
    acerac::testing::push_random_trial(f.memory, 0, 50, 2, 1, rng);
    Approximator actor(f.actor, 1e-3);
    Approximator critic(f.critic, 1e-3);
    const ReplayStats stats = train_step(f.memory, actor, critic, f.model, cfg, rng);
    EXPECT_EQ(actor.optimizer.steps(), 3);
    EXPECT_EQ(critic.optimizer.steps(), 3);
    EXPECT_NE(actor.net.params(), f.actor.params());
    EXPECT_EQ(stats.segments, 8);
    EXPECT_TRUE(std::isfinite(stats.actor_loss));
    EXPECT_GT(stats.mean_ratio, 0.0);
}

// =============================================================================
// Monte-Carlo noise value
// =============================================================================

TEST(MonteCarloNoiseValue, ZeroAndConstantRewards) {
    std::mt19937_64 rng(20);
    LearnerConfig cfg = small_config(1);
    const NoiseParams params = NoiseParams::isotropic(0.5, 0.4, 1);
    const Mlp actor(MlpSpec{1, {2}, 1});
    ConstantReward zero(0.0);
    EXPECT_EQ(monte_carlo_noise_value(zero, actor, cfg, params, Vector::Zero(1), Vector::Zero(1), 3, 100, rng), 0.0);
    ConstantReward one(1.0);
    const double w = monte_carlo_noise_value(one, actor, cfg, params, Vector::Zero(1), Vector::Zero(1), 2, 3000, rng);
    EXPECT_NEAR(w, (1.0 - std::pow(0.99, 3000)) / 0.01, 1e-9);
    EXPECT_NEAR(w, 100.0, 1e-6);
}

// V(s) = E[W(ξ_{t-1}, s)] over the stationary ξ law: averaging single-rollout W estimates over
// ξ ~ N(0, C) must agree with rollouts that start the noise afresh.
TEST(MonteCarloNoiseValue, AveragingOverNoiseRecoversValue) {
    std::mt19937_64 rng(21);
    LearnerConfig cfg = small_config(1, 2.0);
    cfg.gamma = 0.95;
    const NoiseParams params = NoiseParams::isotropic(0.8, 0.8, 1);
    std::mt19937_64 init(3);
    const Mlp actor = Mlp::initialized(MlpSpec{3, {8}, 1}, init, 1.0);
    Pendulum env;
    Vector s(3);
    s << std::cos(2.5), std::sin(2.5), 0.3;

    const int draws = 4000;
    double w_sum = 0.0;
    double w_sq = 0.0;
    for (int k = 0; k < draws; ++k) {
        const Vector xi = draw_innovation(params, rng);
        const double w = monte_carlo_noise_value(env, actor, cfg, params, xi, s, 1, 60, rng);
        w_sum += w;
        w_sq += w * w;
    }
    double v_sum = 0.0;
    double v_sq = 0.0;
    for (int k = 0; k < draws; ++k) {
        const double v = monte_carlo_noise_value(env, actor, cfg, params, std::nullopt, s, 1, 60, rng);
        v_sum += v;
        v_sq += v * v;
    }
    const double w_mean = w_sum / draws;
    const double v_mean = v_sum / draws;
    const double se = std::sqrt((w_sq / draws - w_mean * w_mean) / draws + (v_sq / draws - v_mean * v_mean) / draws);
    EXPECT_LT(std::abs(w_mean - v_mean), 4.0 * se + 1e-9);
}
