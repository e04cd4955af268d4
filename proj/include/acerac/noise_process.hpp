// Autoregressive exploration noise
//   ξ_1 = ε_1,  ξ_t = α ξ_{t-1} + √(1-α²) ε_t,  ε_t ~ N(0, C)
// and the closed-form parameters of its stacked marginal and conditional
// distributions.
#pragma once

#include "acerac/gaussian_density.hpp"
#include "acerac/types.hpp"

#include <cmath>
#include <random>
#include <utility>
#include <vector>

namespace acerac {

/**
 * @brief Parameters of the AR(1) noise process.
 *
 * Invariants: 0 <= alpha < 1 and cov_c symmetric positive definite. Both are
 * checked on construction; the Cholesky factor of C is kept for sampling.
 */
class NoiseParams {
  public:
    NoiseParams(double alpha, Matrix cov_c) : alpha_(alpha), cov_(make_covariance(std::move(cov_c))) {
        detail::require(alpha >= 0.0 && alpha < 1.0, "NoiseParams: alpha must lie in [0, 1)");
        chol_ = cov_->cholesky_lower();
    }

    /// C = σ² I_d
    static NoiseParams isotropic(double alpha, double sigma, Eigen::Index dim) {
        detail::require(sigma > 0.0, "NoiseParams: sigma must be positive");
        detail::require(dim >= 1, "NoiseParams: dimension must be >= 1");
        return NoiseParams(alpha, sigma * sigma * Matrix::Identity(dim, dim));
    }

    [[nodiscard]] double alpha() const { return alpha_; }
    [[nodiscard]] const Matrix& cov_c() const { return cov_->matrix(); }
    [[nodiscard]] const CovariancePtr& covariance() const { return cov_; }
    [[nodiscard]] const Matrix& cholesky() const { return chol_; }
    [[nodiscard]] Eigen::Index dim() const { return cov_->dim(); }

  private:
    double alpha_;
    CovariancePtr cov_;
    Matrix chol_;
};

/// Markov state of the process: the last emitted ξ, or nothing at the start of a trial.
struct NoiseState {
    Vector xi;
    bool fresh = true;
};

inline NoiseState reset_trial(const NoiseParams& params) {
    return NoiseState{Vector::Zero(params.dim()), true};
}

/// Deterministic part of one AR step given the innovation ε.
inline NoiseState advance(const NoiseState& state, const NoiseParams& params, const Vector& eps) {
    detail::require_size(eps.size(), params.dim(), "noise innovation");
    if (state.fresh) {
        return NoiseState{eps, false};
    }
    detail::require_size(state.xi.size(), params.dim(), "noise state");
    const double a = params.alpha();
    return NoiseState{a * state.xi + std::sqrt(1.0 - a * a) * eps, false};
}

/// ε ~ N(0, C)
template <typename Rng>
Vector draw_innovation(const NoiseParams& params, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector z(params.dim());
    for (Eigen::Index k = 0; k < z.size(); ++k) {
        z[k] = normal(rng);
    }
    return params.cholesky() * z;
}

template <typename Rng>
std::pair<Vector, NoiseState> sample_step(const NoiseState& state, const NoiseParams& params, Rng& rng) {
    NoiseState next = advance(state, params, draw_innovation(params, rng));
    Vector xi = next.xi;
    return {std::move(xi), std::move(next)};
}

/// E ξ_t ξ_{t+k}ᵀ = α^k C
inline Matrix autocovariance(const NoiseParams& params, int k) {
    detail::require(k >= 0, "autocovariance: lag must be non-negative");
    return std::pow(params.alpha(), k) * params.cov_c();
}

enum class StackedKind { marginal, conditional };

/// Covariance of n stacked noise values, omega = lambda ⊗ C.
struct StackedCov {
    int horizon = 0;
    Matrix omega;
    Matrix lambda;
    StackedKind kind = StackedKind::marginal;
};

inline Matrix kronecker(const Matrix& lhs, const Matrix& rhs) {
    Matrix out(lhs.rows() * rhs.rows(), lhs.cols() * rhs.cols());
    for (Eigen::Index r = 0; r < lhs.rows(); ++r) {
        for (Eigen::Index c = 0; c < lhs.cols(); ++c) {
            out.block(r * rhs.rows(), c * rhs.cols(), rhs.rows(), rhs.cols()) = lhs(r, c) * rhs;
        }
    }
    return out;
}

/// (Λ₀ⁿ)_{l,k} = α^{|l-k|}
inline Matrix marginal_structure(double alpha, int n) {
    Matrix lambda(n, n);
    for (int l = 0; l < n; ++l) {
        for (int k = 0; k < n; ++k) {
            lambda(l, k) = std::pow(alpha, std::abs(l - k));
        }
    }
    return lambda;
}

/// (Λ₁ⁿ)_{l,k} = α^{|l-k|} - α^{l+k+2}
inline Matrix conditional_structure(double alpha, int n) {
    Matrix lambda(n, n);
    for (int l = 0; l < n; ++l) {
        for (int k = 0; k < n; ++k) {
            lambda(l, k) = std::pow(alpha, std::abs(l - k)) - std::pow(alpha, l + k + 2);
        }
    }
    return lambda;
}

inline StackedCov stacked_marginal_cov(const NoiseParams& params, int n) {
    detail::require(n >= 1, "stacked_marginal_cov: horizon must be >= 1");
    Matrix lambda = marginal_structure(params.alpha(), n);
    Matrix omega = kronecker(lambda, params.cov_c());
    return StackedCov{n, std::move(omega), std::move(lambda), StackedKind::marginal};
}

/// Bⁿ: nd×d matrix whose j-th block is α^{j+1} I.
inline Matrix conditional_mean_map(const NoiseParams& params, int n) {
    detail::require(n >= 1, "conditional_mean_map: horizon must be >= 1");
    const Eigen::Index d = params.dim();
    Matrix b = Matrix::Zero(n * d, d);
    for (int j = 0; j < n; ++j) {
        b.block(j * d, 0, d, d) = std::pow(params.alpha(), j + 1) * Matrix::Identity(d, d);
    }
    return b;
}

struct ConditionalNoise {
    Vector mean;
    StackedCov cov;
};

/// Distribution of [ξ_t; …; ξ_{t+n-1}] given ξ_{t-1} = xi_prev.
inline ConditionalNoise conditional_params(const NoiseParams& params, int n, const Vector& xi_prev) {
    detail::require(n >= 1, "conditional_params: horizon must be >= 1");
    detail::require_size(xi_prev.size(), params.dim(), "conditional_params xi_prev");
    const Eigen::Index d = params.dim();
    Vector mean(n * d);
    for (int j = 0; j < n; ++j) {
        mean.segment(j * d, d) = std::pow(params.alpha(), j + 1) * xi_prev;
    }
    Matrix lambda = conditional_structure(params.alpha(), n);
    Matrix omega = kronecker(lambda, params.cov_c());
    return ConditionalNoise{std::move(mean),
                            StackedCov{n, std::move(omega), std::move(lambda), StackedKind::conditional}};
}

/**
 * @brief Noise parameters together with factorized Ω₀ⁿ and Ω₁ⁿ for n = 1..max_horizon.
 *
 * Both covariances depend only on (n, α, C), so the learner looks them up here
 * instead of refactorizing per replayed segment.
 */
class NoiseModel {
  public:
    NoiseModel(NoiseParams params, int max_horizon) : params_(std::move(params)) {
        detail::require(max_horizon >= 1, "NoiseModel: max horizon must be >= 1");
        for (int n = 1; n <= max_horizon; ++n) {
            marginal_.push_back(make_covariance(stacked_marginal_cov(params_, n).omega));
            conditional_.push_back(
                make_covariance(conditional_params(params_, n, Vector::Zero(params_.dim())).cov.omega));
        }
    }

    [[nodiscard]] const NoiseParams& params() const { return params_; }
    [[nodiscard]] int max_horizon() const { return static_cast<int>(marginal_.size()); }

    [[nodiscard]] const CovariancePtr& marginal(int n) const { return marginal_.at(n - 1); }
    [[nodiscard]] const CovariancePtr& conditional(int n) const { return conditional_.at(n - 1); }

    /// Stacked conditional mean Bⁿ xi_prev.
    [[nodiscard]] Vector conditional_mean(int n, const Vector& xi_prev) const {
        const Eigen::Index d = params_.dim();
        detail::require_size(xi_prev.size(), d, "NoiseModel::conditional_mean");
        Vector mean(n * d);
        double scale = params_.alpha();
        for (int j = 0; j < n; ++j, scale *= params_.alpha()) {
            mean.segment(j * d, d) = scale * xi_prev;
        }
        return mean;
    }

  private:
    NoiseParams params_;
    std::vector<CovariancePtr> marginal_;
    std::vector<CovariancePtr> conditional_;
};

} // namespace acerac
