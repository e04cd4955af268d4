// Seedable continuous-control toy tasks.
//
// pendulum   Swing-up of a rigid rod driven by a bounded torque.
//            observation (cos θ, sin θ, θ̇), θ = 0 upright, torque in [-2, 2].
//            θ̈ = 3g/(2l) sin θ + 3u/(m l²) - c θ̇, semi-implicit Euler, dt = 0.05,
//            |θ̇| clipped to 8. reward -(θ² + 0.1 θ̇² + 0.001 u²) on the pre-step
//            state with θ wrapped to [-π, π). 200 steps per trial.
//
// point_mass Planar double integrator reaching a random goal.
//            observation (p, v, goal) in R⁶, acceleration in [-1, 1]², dt = 0.1,
//            velocity damping 0.5, positions clipped to [-2, 2]. reward -‖p' - goal‖²
//            on the post-step position. 100 steps per trial.
//
// Neither task has an absorbing state; the step limit truncates the trial.
#pragma once

#include "acerac/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <random>
#include <string>

namespace acerac {

struct EnvSpec {
    int state_dim = 1;
    int action_dim = 1;
    Vector action_low;
    Vector action_high;
    double dt = 0.05;
    int max_episode_steps = 200;
};

struct StepResult {
    Vector state;
    double reward = 0.0;
    bool terminal = false;  ///< reached an absorbing state
    bool truncated = false; ///< step limit hit
    [[nodiscard]] bool done() const { return terminal || truncated; }
};

class Environment {
  public:
    virtual ~Environment() = default;
    [[nodiscard]] virtual const EnvSpec& spec() const = 0;
    [[nodiscard]] virtual std::string name() const = 0;
    virtual Vector reset(std::uint64_t seed) = 0;
    virtual StepResult step(const Vector& action) = 0;
    /// Put the environment into the state described by an observation and zero the step counter.
    virtual void restore(const Vector& state) = 0;
    [[nodiscard]] virtual std::unique_ptr<Environment> clone() const = 0;

  protected:
    void check_action(const Vector& action) const {
        detail::require_size(action.size(), spec().action_dim, "Environment::step action");
        detail::require(action.allFinite(), "Environment::step: action must be finite");
    }
};

inline double wrap_angle(double x) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    x = std::fmod(x + std::numbers::pi, two_pi);
    if (x < 0.0) {
        x += two_pi;
    }
    return x - std::numbers::pi;
}

class Pendulum final : public Environment {
  public:
    struct Physics {
        double gravity = 10.0;
        double mass = 1.0;
        double length = 1.0;
        double damping = 0.0;
        double max_speed = 8.0;
        double max_torque = 2.0;
    };

    Pendulum() : Pendulum(Physics{}) {}

    explicit Pendulum(Physics physics) : physics_(physics) {
        spec_.state_dim = 3;
        spec_.action_dim = 1;
        spec_.action_low = Vector::Constant(1, -physics_.max_torque);
        spec_.action_high = Vector::Constant(1, physics_.max_torque);
        spec_.dt = 0.05;
        spec_.max_episode_steps = 200;
    }

    [[nodiscard]] const EnvSpec& spec() const override { return spec_; }
    [[nodiscard]] std::string name() const override { return "pendulum"; }
    [[nodiscard]] const Physics& physics() const { return physics_; }

    Vector reset(std::uint64_t seed) override {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
        std::uniform_real_distribution<double> speed(-1.0, 1.0);
        theta_ = angle(rng);
        theta_dot_ = speed(rng);
        steps_ = 0;
        return observation();
    }

    StepResult step(const Vector& action) override {
        check_action(action);
        const double u = std::clamp(action[0], -physics_.max_torque, physics_.max_torque);
        const double th = wrap_angle(theta_);
        const double cost = th * th + 0.1 * theta_dot_ * theta_dot_ + 0.001 * u * u;

        const auto& p = physics_;
        const double accel = 3.0 * p.gravity / (2.0 * p.length) * std::sin(theta_) +
                             3.0 / (p.mass * p.length * p.length) * u - p.damping * theta_dot_;
        theta_dot_ = std::clamp(theta_dot_ + spec_.dt * accel, -p.max_speed, p.max_speed);
        theta_ = wrap_angle(theta_ + spec_.dt * theta_dot_);
        ++steps_;
        return StepResult{observation(), -cost, false, steps_ >= spec_.max_episode_steps};
    }

    void restore(const Vector& state) override {
        detail::require_size(state.size(), 3, "Pendulum::restore");
        theta_ = std::atan2(state[1], state[0]);
        theta_dot_ = state[2];
        steps_ = 0;
    }

    [[nodiscard]] std::unique_ptr<Environment> clone() const override { return std::make_unique<Pendulum>(*this); }

    [[nodiscard]] double angle() const { return theta_; }
    [[nodiscard]] double angular_velocity() const { return theta_dot_; }

    /// ½θ̇² + 3g/(2l)·cos θ, conserved by the continuous dynamics without torque or damping.
    [[nodiscard]] double energy() const { return energy(theta_, theta_dot_); }
    [[nodiscard]] double energy(double theta, double theta_dot) const {
        return 0.5 * theta_dot * theta_dot + 3.0 * physics_.gravity / (2.0 * physics_.length) * std::cos(theta);
    }

  private:
    [[nodiscard]] Vector observation() const {
        Vector s(3);
        s << std::cos(theta_), std::sin(theta_), theta_dot_;
        return s;
    }

    Physics physics_;
    EnvSpec spec_;
    double theta_ = 0.0;
    double theta_dot_ = 0.0;
    int steps_ = 0;
};

/**
 * @brief Hand-tuned swing-up controller for Pendulum.
 *
 * Pumps energy toward the upright level and switches to a PD stabilizer
 * near the top. Used as the near-optimal reference return.
 */
inline Vector pendulum_energy_controller(const Pendulum& env, const Vector& obs) {
    const double theta = std::atan2(obs[1], obs[0]);
    const double theta_dot = obs[2];
    const double max_torque = env.physics().max_torque;
    const double target = env.energy(0.0, 0.0);
    double u = 0.0;
    if (std::cos(theta) > 0.85) {
        u = -(10.0 * theta + 2.0 * theta_dot);
    } else {
        const double gap = target - env.energy(theta, theta_dot);
        u = 0.5 * gap * (theta_dot >= 0.0 ? 1.0 : -1.0);
    }
    return Vector::Constant(1, std::clamp(u, -max_torque, max_torque));
}

class PointMass final : public Environment {
  public:
    PointMass() {
        spec_.state_dim = 6;
        spec_.action_dim = 2;
        spec_.action_low = Vector::Constant(2, -1.0);
        spec_.action_high = Vector::Constant(2, 1.0);
        spec_.dt = 0.1;
        spec_.max_episode_steps = 100;
        state_ = Vector::Zero(6);
    }

    [[nodiscard]] const EnvSpec& spec() const override { return spec_; }
    [[nodiscard]] std::string name() const override { return "point_mass"; }

    Vector reset(std::uint64_t seed) override {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> box(-1.0, 1.0);
        state_ << box(rng), box(rng), 0.0, 0.0, box(rng), box(rng);
        steps_ = 0;
        return state_;
    }

    StepResult step(const Vector& action) override {
        check_action(action);
        const double dt = spec_.dt;
        for (int k = 0; k < 2; ++k) {
            const double a = std::clamp(action[k], -1.0, 1.0);
            double& p = state_[k];
            double& v = state_[2 + k];
            v += dt * (a - kDamping * v);
            p += dt * v;
            if (std::abs(p) > kWall) {
                p = std::clamp(p, -kWall, kWall);
                v = 0.0;
            }
        }
        ++steps_;
        const double reward = -(state_.head<2>() - state_.tail<2>()).squaredNorm();
        return StepResult{state_, reward, false, steps_ >= spec_.max_episode_steps};
    }

    void restore(const Vector& state) override {
        detail::require_size(state.size(), 6, "PointMass::restore");
        state_ = state;
        steps_ = 0;
    }

    [[nodiscard]] std::unique_ptr<Environment> clone() const override { return std::make_unique<PointMass>(*this); }

  private:
    static constexpr double kDamping = 0.5;
    static constexpr double kWall = 2.0;

    EnvSpec spec_;
    Vector state_;
    int steps_ = 0;
};

inline std::unique_ptr<Environment> make_environment(const std::string& name) {
    if (name == "pendulum") {
        return std::make_unique<Pendulum>();
    }
    if (name == "point_mass") {
        return std::make_unique<PointMass>();
    }
    throw std::invalid_argument("unknown environment: " + name);
}

} // namespace acerac
