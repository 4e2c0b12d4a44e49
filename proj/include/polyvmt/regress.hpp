#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace polyvmt {

enum class CovarianceType { Robust, Classical };

struct OlsFit {
    std::vector<std::string> names;
    Eigen::VectorXd beta;
    Eigen::MatrixXd cov_robust;      // HC1 sandwich
    Eigen::MatrixXd cov_classical;   // s^2 (X'X)^-1
    Eigen::VectorXd fitted;
    Eigen::VectorXd residuals;
    double ssr = 0.0;
    double r2 = 0.0;
    std::size_t n = 0;
    std::size_t p = 0;

    Eigen::VectorXd robust_se() const { return cov_robust.diagonal().cwiseSqrt(); }
};

/// Least squares with heteroskedasticity-robust covariance. Requires n > p and
/// full column rank; a rank-deficient design raises EstimationError naming a
/// dependent column.
OlsFit ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<std::string> names = {});

/// Throws EstimationError naming a linearly dependent column, if any.
void require_full_rank(const Eigen::MatrixXd& X, const std::vector<std::string>& names);

/// Left-censored Gaussian log-likelihood in Olsen coordinates
/// (theta = beta / sigma, gamma = 1 / sigma), packed as [theta; gamma].
/// Censored rows (y <= c) add log Phi(gamma c - x'theta); the others add
/// log gamma + log phi(gamma y - x'theta). Globally concave.
class TobitObjective {
public:
    TobitObjective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double censor_point = 0.0);

    double loglik(const Eigen::VectorXd& params) const;
    Eigen::VectorXd gradient(const Eigen::VectorXd& params) const;
    Eigen::MatrixXd hessian(const Eigen::VectorXd& params) const;
    /// Per-row score contributions, n x (p + 1).
    Eigen::MatrixXd scores(const Eigen::VectorXd& params) const;

    std::size_t censored_count() const noexcept { return n_censored_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(y_.size()); }

private:
    const Eigen::MatrixXd& X_;
    const Eigen::VectorXd& y_;
    double c_;
    std::vector<char> censored_;
    std::size_t n_censored_ = 0;
};

struct ConvergenceRecord {
    int iterations = 0;
    double grad_norm = 0.0;
    bool converged = false;
    int step_halvings = 0;
    bool hessian_negative_definite = true;   // at every iterate
    std::vector<double> loglik_path;
};

struct TobitOptions {
    double censor_point = 0.0;
    CovarianceType covariance = CovarianceType::Robust;
    int max_iterations = 200;
    double grad_tol = 1e-8;
    double rel_loglik_tol = 1e-10;
};

struct TobitFit {
    std::vector<std::string> names;
    Eigen::VectorXd beta;
    double sigma = 0.0;
    /// Covariance of (beta, sigma); robust unless Classical was requested.
    Eigen::MatrixXd cov;
    Eigen::MatrixXd cov_robust;
    Eigen::MatrixXd cov_classical;
    CovarianceType covariance = CovarianceType::Robust;
    double loglik = 0.0;
    std::size_t n = 0;
    std::size_t n_censored = 0;
    double censor_point = 0.0;
    ConvergenceRecord convergence;
    std::vector<std::string> warnings;

    std::size_t num_params() const noexcept { return static_cast<std::size_t>(beta.size()) + 1; }
    /// Standard errors of beta under `cov`.
    Eigen::VectorXd se() const;
    double sigma_se() const;
    /// Throws LookupError for unknown names.
    std::size_t index_of(const std::string& name) const;
    double coef(const std::string& name) const { return beta(static_cast<Eigen::Index>(index_of(name))); }
};

/// Maximum-likelihood Tobit via Newton iterations in Olsen coordinates,
/// started from OLS, with step halving so the log-likelihood never drops.
/// All-censored samples raise EstimationError; uncensored samples fit (and
/// equal OLS) but carry a warning.
TobitFit tobit_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<std::string> names = {},
                   const TobitOptions& options = {});

/// Intercept-only Tobit on the same response.
TobitFit tobit_null(const Eigen::VectorXd& y, const TobitOptions& options = {});

struct LrTest {
    double statistic = 0.0;
    std::size_t dof = 0;
    double p_value = 1.0;
};

/// 2 (l_full - l_restricted) against chi-square with the parameter-count
/// difference. Fits on different samples raise EstimationError.
LrTest lr_test(const TobitFit& full, const TobitFit& restricted);

} // namespace polyvmt
