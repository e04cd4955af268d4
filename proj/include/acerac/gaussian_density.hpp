// Multivariate normal log-densities, density ratios and the soft-truncating
// function applied to replayed density ratios.
#pragma once

#include "acerac/types.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <utility>

namespace acerac {

/**
 * @brief Symmetric positive-definite covariance with its factorization cached.
 *
 * The inverse and log-determinant are computed once on construction so that
 * repeated density evaluations against the same covariance only cost a
 * quadratic form. SPD acceptance requires the smallest eigenvalue to exceed
 * 1e-12 times the largest.
 */
class Covariance {
  public:
    explicit Covariance(Matrix cov) : cov_(std::move(cov)) {
        detail::require(cov_.rows() == cov_.cols() && cov_.rows() > 0,
                        "Covariance: matrix must be square and non-empty");
        const double scale = std::max(1.0, cov_.cwiseAbs().maxCoeff());
        detail::require((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale,
                        "Covariance: matrix must be symmetric");
        cov_ = 0.5 * (cov_ + cov_.transpose());

        Eigen::SelfAdjointEigenSolver<Matrix> eig(cov_, Eigen::EigenvaluesOnly);
        const double lo = eig.eigenvalues().minCoeff();
        const double hi = eig.eigenvalues().maxCoeff();
        detail::require(hi > 0.0 && lo > 1e-12 * hi, "Covariance: matrix is not positive definite");

        llt_.compute(cov_);
        detail::require(llt_.info() == Eigen::Success, "Covariance: Cholesky factorization failed");
        precision_ = llt_.solve(Matrix::Identity(dim(), dim()));
        precision_ = 0.5 * (precision_ + precision_.transpose());
        log_det_ = 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
    }

    [[nodiscard]] Eigen::Index dim() const { return cov_.rows(); }
    [[nodiscard]] const Matrix& matrix() const { return cov_; }
    [[nodiscard]] const Matrix& precision() const { return precision_; }
    [[nodiscard]] double log_det() const { return log_det_; }
    /// Lower-triangular factor L with L Lᵀ = cov.
    [[nodiscard]] Matrix cholesky_lower() const { return llt_.matrixL(); }

    /// (x)ᵀ cov⁻¹ (x)
    [[nodiscard]] double quadratic_form(const Vector& x) const {
        detail::require_size(x.size(), dim(), "Covariance::quadratic_form");
        return x.dot(precision_ * x);
    }

  private:
    Matrix cov_;
    Matrix precision_;
    Eigen::LLT<Matrix> llt_;
    double log_det_ = 0.0;
};

using CovariancePtr = std::shared_ptr<const Covariance>;

inline CovariancePtr make_covariance(Matrix cov) {
    return std::make_shared<const Covariance>(std::move(cov));
}

/// Normal distribution N(mean, cov).
struct GaussianSpec {
    Vector mean;
    CovariancePtr cov;

    GaussianSpec(Vector mean_, CovariancePtr cov_) : mean(std::move(mean_)), cov(std::move(cov_)) {
        detail::require(cov != nullptr, "GaussianSpec: null covariance");
        detail::require_size(mean.size(), cov->dim(), "GaussianSpec mean");
    }

    [[nodiscard]] Eigen::Index dim() const { return mean.size(); }
};

/// -½(x-μ)ᵀΩ⁻¹(x-μ) - ½ log det(2πΩ)
inline double log_density(const Vector& x, const GaussianSpec& g) {
    detail::require_size(x.size(), g.dim(), "log_density");
    const Vector diff = x - g.mean;
    const double m = static_cast<double>(g.dim());
    return -0.5 * g.cov->quadratic_form(diff) -
           0.5 * (m * std::log(2.0 * std::numbers::pi) + g.cov->log_det());
}

/**
 * log φ_num(x) - log φ_den(x).
 *
 * When both specs share a covariance the normalizers cancel and only the
 * quadratic forms are compared, so identical specs give exactly 0.
 */
inline double log_density_ratio(const Vector& x, const GaussianSpec& numerator,
                                const GaussianSpec& denominator) {
    detail::require_size(x.size(), numerator.dim(), "log_density_ratio numerator");
    detail::require_size(x.size(), denominator.dim(), "log_density_ratio denominator");
    const Vector diff_num = x - numerator.mean;
    const Vector diff_den = x - denominator.mean;
    const bool shared = numerator.cov == denominator.cov ||
                        numerator.cov->matrix() == denominator.cov->matrix();
    if (shared) {
        const Matrix& prec = numerator.cov->precision();
        return -0.5 * (diff_num.dot(prec * diff_num) - diff_den.dot(prec * diff_den));
    }
    return -0.5 * (numerator.cov->quadratic_form(diff_num) + numerator.cov->log_det()) +
           0.5 * (denominator.cov->quadratic_form(diff_den) + denominator.cov->log_det());
}

/// ∇_μ log φ(x; μ, Ω) = Ω⁻¹(x - μ)
inline Vector grad_log_density_wrt_mean(const Vector& x, const GaussianSpec& g) {
    detail::require_size(x.size(), g.dim(), "grad_log_density_wrt_mean");
    return g.cov->precision() * (x - g.mean);
}

/// ψ_b(x) = b·tanh(x/b), b > 1.
inline double soft_truncate(double x, double b) { return b * std::tanh(x / b); }

inline constexpr double kLogRatioClamp = 30.0;

/// ψ_b applied to a density ratio given in log space.
inline double truncated_ratio(double log_ratio, double b) {
    return soft_truncate(std::exp(std::clamp(log_ratio, -kLogRatioClamp, kLogRatioClamp)), b);
}

} // namespace acerac
