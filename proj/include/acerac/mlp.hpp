// Feedforward tanh networks with exact reverse-mode gradients, plus ADAM.
#pragma once

#include "acerac/types.hpp"

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace acerac {

/// Layer widths of a fully connected network; tanh on hidden layers, identity on the output.
struct MlpSpec {
    int input_dim = 1;
    std::vector<int> hidden{256, 256};
    int output_dim = 1;

    void validate() const {
        detail::require(input_dim >= 1, "MlpSpec: input_dim must be >= 1");
        detail::require(output_dim >= 1, "MlpSpec: output_dim must be >= 1");
        for (int w : hidden) {
            detail::require(w >= 1, "MlpSpec: hidden widths must be >= 1");
        }
    }

    /// Widths of every layer including input and output.
    [[nodiscard]] std::vector<int> widths() const {
        std::vector<int> out;
        out.reserve(hidden.size() + 2);
        out.push_back(input_dim);
        out.insert(out.end(), hidden.begin(), hidden.end());
        out.push_back(output_dim);
        return out;
    }

    [[nodiscard]] Eigen::Index num_params() const {
        const auto w = widths();
        Eigen::Index total = 0;
        for (std::size_t l = 1; l < w.size(); ++l) {
            total += static_cast<Eigen::Index>(w[l]) * (w[l - 1] + 1);
        }
        return total;
    }

    bool operator==(const MlpSpec&) const = default;
};

/**
 * @brief A network together with its flat parameter vector.
 *
 * Parameters are laid out layer by layer: the weight matrix (out×in,
 * column-major) followed by the bias vector.
 */
class Mlp {
  public:
    /// Activations recorded by a batched forward pass; column j belongs to input j.
    struct Tape {
        std::vector<Matrix> activations;
    };

    Mlp() = default;

    explicit Mlp(MlpSpec spec) : spec_(std::move(spec)) {
        spec_.validate();
        params_ = Vector::Zero(spec_.num_params());
    }

    Mlp(MlpSpec spec, Vector params) : spec_(std::move(spec)), params_(std::move(params)) {
        spec_.validate();
        detail::require_size(params_.size(), spec_.num_params(), "Mlp parameters");
    }

    /// Glorot-uniform weights, zero biases; the output layer is scaled by output_scale.
    template <typename Rng>
    static Mlp initialized(MlpSpec spec, Rng& rng, double output_scale = 0.1) {
        Mlp net(std::move(spec));
        const auto w = net.spec_.widths();
        Eigen::Index offset = 0;
        for (std::size_t l = 1; l < w.size(); ++l) {
            const double limit = std::sqrt(6.0 / (w[l - 1] + w[l]));
            const double scale = (l + 1 == w.size()) ? output_scale : 1.0;
            std::uniform_real_distribution<double> uniform(-limit, limit);
            const Eigen::Index n_weights = static_cast<Eigen::Index>(w[l]) * w[l - 1];
            for (Eigen::Index k = 0; k < n_weights; ++k) {
                net.params_[offset + k] = scale * uniform(rng);
            }
            offset += n_weights + w[l];
        }
        return net;
    }

    [[nodiscard]] const MlpSpec& spec() const { return spec_; }
    [[nodiscard]] const Vector& params() const { return params_; }
    [[nodiscard]] Vector& params() { return params_; }
    [[nodiscard]] Eigen::Index num_params() const { return params_.size(); }
    [[nodiscard]] int input_dim() const { return spec_.input_dim; }
    [[nodiscard]] int output_dim() const { return spec_.output_dim; }

    [[nodiscard]] Vector forward(const Vector& s) const {
        detail::require_size(s.size(), spec_.input_dim, "Mlp::forward input");
        return forward_batch(s);
    }

    [[nodiscard]] Matrix forward_batch(const Matrix& inputs) const {
        Tape tape;
        return forward_batch(inputs, tape);
    }

    Matrix forward_batch(const Matrix& inputs, Tape& tape) const {
        detail::require_size(inputs.rows(), spec_.input_dim, "Mlp::forward_batch input rows");
        const auto w = spec_.widths();
        tape.activations.clear();
        tape.activations.reserve(w.size());
        tape.activations.push_back(inputs);
        Eigen::Index offset = 0;
        for (std::size_t l = 1; l < w.size(); ++l) {
            const auto [weights, bias] = layer(offset, w[l], w[l - 1]);
            Matrix z = weights * tape.activations.back();
            z.colwise() += bias;
            if (l + 1 < w.size()) {
                z = z.array().tanh().matrix();
            }
            tape.activations.push_back(std::move(z));
            offset += static_cast<Eigen::Index>(w[l]) * (w[l - 1] + 1);
        }
        return tape.activations.back();
    }

    /// (∂output/∂params)ᵀ · upstream for a single input.
    [[nodiscard]] Vector backward(const Vector& s, const Vector& upstream) const {
        detail::require_size(s.size(), spec_.input_dim, "Mlp::backward input");
        detail::require_size(upstream.size(), spec_.output_dim, "Mlp::backward upstream");
        Tape tape;
        forward_batch(s, tape);
        return backward_batch(tape, upstream);
    }

    /// Gradient summed over the batch columns recorded in tape.
    [[nodiscard]] Vector backward_batch(const Tape& tape, const Matrix& upstream) const {
        const auto w = spec_.widths();
        detail::require(tape.activations.size() == w.size(), "Mlp::backward_batch: tape does not match network");
        detail::require_size(upstream.rows(), spec_.output_dim, "Mlp::backward_batch upstream rows");
        detail::require_size(upstream.cols(), tape.activations.front().cols(), "Mlp::backward_batch upstream cols");

        Vector grad(params_.size());
        Eigen::Index offset = params_.size();
        Matrix delta = upstream;
        for (std::size_t l = w.size() - 1; l >= 1; --l) {
            const Eigen::Index n_weights = static_cast<Eigen::Index>(w[l]) * w[l - 1];
            offset -= n_weights + w[l];
            const Matrix& below = tape.activations[l - 1];
            Eigen::Map<Matrix>(grad.data() + offset, w[l], w[l - 1]).noalias() = delta * below.transpose();
            grad.segment(offset + n_weights, w[l]) = delta.rowwise().sum();
            if (l > 1) {
                const auto [weights, bias] = layer(offset, w[l], w[l - 1]);
                Matrix back = weights.transpose() * delta;
                delta = (back.array() * (1.0 - below.array().square())).matrix();
            }
        }
        return grad;
    }

  private:
    [[nodiscard]] std::pair<Eigen::Map<const Matrix>, Eigen::Map<const Vector>> layer(Eigen::Index offset, int out,
                                                                                      int in) const {
        const double* base = params_.data() + offset;
        return {Eigen::Map<const Matrix>(base, out, in),
                Eigen::Map<const Vector>(base + static_cast<Eigen::Index>(out) * in, out)};
    }

    MlpSpec spec_;
    Vector params_;
};

/// ADAM state for one parameter vector. step() applies an ascent step along `direction`
/// when sign = +1.
class Adam {
  public:
    double step_size = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    Adam() = default;
    Adam(Eigen::Index n, double lr) : step_size(lr), m_(Vector::Zero(n)), v_(Vector::Zero(n)) {}

    void step(Vector& params, const Vector& direction, double sign = 1.0) {
        detail::require_size(direction.size(), params.size(), "Adam::step direction");
        detail::require_size(m_.size(), params.size(), "Adam::step state");
        ++t_;
        m_ = beta1 * m_ + (1.0 - beta1) * direction;
        v_ = beta2 * v_ + (1.0 - beta2) * direction.cwiseAbs2();
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
        params.array() += sign * step_size * (m_.array() / c1) / ((v_.array() / c2).sqrt() + epsilon);
    }

    [[nodiscard]] long long steps() const { return t_; }
    void set_steps(long long t) { t_ = t; }
    [[nodiscard]] const Vector& first_moment() const { return m_; }
    [[nodiscard]] const Vector& second_moment() const { return v_; }

  private:
    Vector m_;
    Vector v_;
    long long t_ = 0;
};

/// A network paired with its optimizer state.
struct Approximator {
    Mlp net;
    Adam optimizer;

    Approximator() = default;
    Approximator(Mlp net_, double step_size)
        : net(std::move(net_)), optimizer(net.num_params(), step_size) {}

    void ascend(const Vector& direction) { optimizer.step(net.params(), direction, 1.0); }
};

} // namespace acerac
