#include "polyvmt/regress.hpp"

#include "polyvmt/error.hpp"
#include "polyvmt/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace polyvmt {

namespace {

std::vector<std::string> default_names(std::vector<std::string> names, Eigen::Index p) {
    if (names.empty())
        for (Eigen::Index j = 0; j < p; ++j)
            names.push_back("x" + std::to_string(j));
    if (static_cast<Eigen::Index>(names.size()) != p)
        throw std::invalid_argument("regressor names do not match the design width");
    return names;
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

} // namespace

void require_full_rank(const Eigen::MatrixXd& X, const std::vector<std::string>& names) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    const auto rank = qr.rank();
    if (rank < X.cols()) {
        const auto col = qr.colsPermutation().indices()(rank);
        const std::string name = static_cast<std::size_t>(col) < names.size() ? names[static_cast<std::size_t>(col)]
                                                                              : "x" + std::to_string(col);
        throw EstimationError("design matrix is rank deficient: column '" + name +
                              "' is a linear combination of the others");
    }
}

OlsFit ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<std::string> names) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    if (y.size() != n)
        throw DataError("response length does not match the design");
    names = default_names(std::move(names), p);
    if (n <= p)
        throw EstimationError("OLS needs more observations (" + std::to_string(n) + ") than regressors (" +
                              std::to_string(p) + "); robust covariance is undefined");
    require_full_rank(X, names);

    OlsFit fit;
    fit.names = std::move(names);
    fit.n = static_cast<std::size_t>(n);
    fit.p = static_cast<std::size_t>(p);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
    fit.beta = qr.solve(y);
    fit.fitted = X * fit.beta;
    fit.residuals = y - fit.fitted;
    fit.ssr = fit.residuals.squaredNorm();
    const double mean = y.mean();
    const double tss = (y.array() - mean).square().sum();
    fit.r2 = tss > 0.0 ? 1.0 - fit.ssr / tss : 1.0;

    const Eigen::MatrixXd R = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd Rinv = R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
    const Eigen::MatrixXd xtx_inv = Rinv * Rinv.transpose();
    const double s2 = fit.ssr / static_cast<double>(n - p);
    fit.cov_classical = s2 * xtx_inv;
    const Eigen::MatrixXd weighted = X.array().colwise() * fit.residuals.array();
    const Eigen::MatrixXd meat = weighted.transpose() * weighted;
    fit.cov_robust = symmetrize(xtx_inv * meat * xtx_inv * (static_cast<double>(n) / static_cast<double>(n - p)));
    return fit;
}

TobitObjective::TobitObjective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double censor_point)
    : X_(X), y_(y), c_(censor_point), censored_(static_cast<std::size_t>(y.size()), 0) {
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (y(i) <= c_) {
            censored_[static_cast<std::size_t>(i)] = 1;
            ++n_censored_;
        }
    }
}

double TobitObjective::loglik(const Eigen::VectorXd& params) const {
    const Eigen::Index p = X_.cols();
    const Eigen::VectorXd theta = params.head(p);
    const double gamma = params(p);
    if (!(gamma > 0.0))
        return -std::numeric_limits<double>::infinity();
    const Eigen::VectorXd xb = X_ * theta;
    const double log_gamma = std::log(gamma);
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
    CompensatedSum acc;
    for (Eigen::Index i = 0; i < y_.size(); ++i) {
        if (censored_[static_cast<std::size_t>(i)]) {
            acc.add(log_norm_cdf(gamma * c_ - xb(i)));
        } else {
            const double e = gamma * y_(i) - xb(i);
            acc.add(log_gamma - half_log_2pi - 0.5 * e * e);
        }
    }
    return acc.value();
}

Eigen::MatrixXd TobitObjective::scores(const Eigen::VectorXd& params) const {
    const Eigen::Index p = X_.cols();
    const Eigen::Index n = X_.rows();
    const Eigen::VectorXd theta = params.head(p);
    const double gamma = params(p);
    const Eigen::VectorXd xb = X_ * theta;
    Eigen::MatrixXd S(n, p + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (censored_[static_cast<std::size_t>(i)]) {
            const double lambda = inverse_mills(gamma * c_ - xb(i));
            S.row(i).head(p) = -lambda * X_.row(i);
            S(i, p) = lambda * c_;
        } else {
            const double e = gamma * y_(i) - xb(i);
            S.row(i).head(p) = e * X_.row(i);
            S(i, p) = 1.0 / gamma - e * y_(i);
        }
    }
    return S;
}

Eigen::VectorXd TobitObjective::gradient(const Eigen::VectorXd& params) const {
    const Eigen::MatrixXd S = scores(params);
    Eigen::VectorXd g(S.cols());
    for (Eigen::Index j = 0; j < S.cols(); ++j) {
        CompensatedSum acc;
        for (Eigen::Index i = 0; i < S.rows(); ++i)
            acc.add(S(i, j));
        g(j) = acc.value();
    }
    return g;
}

Eigen::MatrixXd TobitObjective::hessian(const Eigen::VectorXd& params) const {
    const Eigen::Index p = X_.cols();
    const Eigen::Index n = X_.rows();
    const Eigen::VectorXd theta = params.head(p);
    const double gamma = params(p);
    const Eigen::VectorXd xb = X_ * theta;
    // H = -U' diag(a) U - (n_uncensored / gamma^2) e_gamma e_gamma', with
    // u_i = (-x_i, t_i), t_i = c (censored) or y_i (uncensored).
    Eigen::MatrixXd U(n, p + 1);
    Eigen::VectorXd a(n);
    std::size_t uncensored = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        U.row(i).head(p) = -X_.row(i);
        if (censored_[static_cast<std::size_t>(i)]) {
            const double z = gamma * c_ - xb(i);
            const double lambda = inverse_mills(z);
            a(i) = lambda * (z + lambda);
            U(i, p) = c_;
        } else {
            a(i) = 1.0;
            U(i, p) = y_(i);
            ++uncensored;
        }
    }
    const Eigen::MatrixXd scaled = U.array().colwise() * a.array().sqrt();
    Eigen::MatrixXd H = -(scaled.transpose() * scaled);
    H(p, p) -= static_cast<double>(uncensored) / (gamma * gamma);
    return symmetrize(H);
}

Eigen::VectorXd TobitFit::se() const {
    return cov.diagonal().head(beta.size()).cwiseSqrt();
}

double TobitFit::sigma_se() const { return std::sqrt(cov(beta.size(), beta.size())); }

std::size_t TobitFit::index_of(const std::string& name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end())
        throw LookupError("no coefficient named '" + name + "'");
    return static_cast<std::size_t>(it - names.begin());
}

TobitFit tobit_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<std::string> names,
                   const TobitOptions& options) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    if (y.size() != n)
        throw DataError("response length does not match the design");
    names = default_names(std::move(names), p);

    TobitObjective objective(X, y, options.censor_point);
    if (objective.censored_count() == static_cast<std::size_t>(n))
        throw EstimationError("all observations are censored; the Tobit likelihood has no maximum");
    if (n <= p + 1)
        throw EstimationError("Tobit needs more observations than parameters");

    TobitFit fit;
    if (objective.censored_count() == 0)
        fit.warnings.push_back("no censored observations; Tobit reduces to Gaussian regression");

    const OlsFit start = ols_fit(X, y, names);
    const double sigma0 = std::sqrt(start.ssr / static_cast<double>(n - p));
    if (!(sigma0 > 0.0))
        throw EstimationError("response is an exact linear function of the regressors; scale is not identified");

    Eigen::VectorXd params(p + 1);
    params.head(p) = start.beta / sigma0;
    params(p) = 1.0 / sigma0;

    auto& conv = fit.convergence;
    double ll = objective.loglik(params);
    conv.loglik_path.push_back(ll);
    Eigen::VectorXd grad;
    Eigen::MatrixXd H;
    for (int it = 0;; ++it) {
        grad = objective.gradient(params);
        H = objective.hessian(params);
        conv.grad_norm = grad.norm();
        conv.iterations = it;
        if (conv.grad_norm < options.grad_tol) {
            conv.converged = true;
            break;
        }
        if (it >= options.max_iterations)
            break;
        Eigen::LLT<Eigen::MatrixXd> llt(-H);
        if (llt.info() != Eigen::Success) {
            conv.hessian_negative_definite = false;
            throw EstimationError("Tobit Hessian is not negative definite; the design is degenerate");
        }
        const Eigen::VectorXd step = llt.solve(grad);

        double t = 1.0;
        Eigen::VectorXd trial = params + step;
        double trial_ll = objective.loglik(trial);
        int halvings = 0;
        while (!(trial_ll >= ll) && halvings < 60) {
            t *= 0.5;
            ++halvings;
            trial = params + t * step;
            trial_ll = objective.loglik(trial);
        }
        conv.step_halvings += halvings;
        if (!(trial_ll >= ll)) {
            // No ascent left at floating-point resolution.
            conv.converged = std::abs(ll) > 0.0 && conv.grad_norm < 1e3 * options.grad_tol;
            break;
        }
        const double change = trial_ll - ll;
        params = trial;
        ll = trial_ll;
        conv.loglik_path.push_back(ll);
        if (change <= options.rel_loglik_tol * std::abs(ll) && t == 1.0) {
            // Tiny full Newton step: one more gradient evaluation decides.
            grad = objective.gradient(params);
            if (grad.norm() < options.grad_tol) {
                H = objective.hessian(params);
                conv.grad_norm = grad.norm();
                conv.iterations = it + 1;
                conv.converged = true;
                break;
            }
        }
    }
    if (!conv.converged)
        fit.warnings.push_back("Newton iterations stopped before the gradient tolerance was met");

    const Eigen::VectorXd theta = params.head(p);
    const double gamma = params(p);
    fit.names = std::move(names);
    fit.beta = theta / gamma;
    fit.sigma = 1.0 / gamma;
    fit.loglik = ll;
    fit.n = static_cast<std::size_t>(n);
    fit.n_censored = objective.censored_count();
    fit.censor_point = options.censor_point;
    fit.covariance = options.covariance;

    Eigen::LLT<Eigen::MatrixXd> info(-H);
    if (info.info() != Eigen::Success)
        throw EstimationError("information matrix at the Tobit solution is singular");
    const Eigen::MatrixXd A = info.solve(Eigen::MatrixXd::Identity(p + 1, p + 1));
    const Eigen::MatrixXd S = objective.scores(params);
    const Eigen::MatrixXd meat = S.transpose() * S;
    const Eigen::MatrixXd robust_olsen =
        A * meat * A * (static_cast<double>(n) / static_cast<double>(n - 1));

    // Delta method from (theta, gamma) to (beta, sigma).
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(p + 1, p + 1);
    J.topLeftCorner(p, p) = Eigen::MatrixXd::Identity(p, p) / gamma;
    J.col(p).head(p) = -theta / (gamma * gamma);
    J(p, p) = -1.0 / (gamma * gamma);
    fit.cov_classical = symmetrize(J * A * J.transpose());
    fit.cov_robust = symmetrize(J * robust_olsen * J.transpose());
    fit.cov = options.covariance == CovarianceType::Robust ? fit.cov_robust : fit.cov_classical;
    return fit;
}

TobitFit tobit_null(const Eigen::VectorXd& y, const TobitOptions& options) {
    return tobit_fit(Eigen::MatrixXd::Ones(y.size(), 1), y, {"intercept"}, options);
}

LrTest lr_test(const TobitFit& full, const TobitFit& restricted) {
    if (full.n != restricted.n || full.n_censored != restricted.n_censored)
        throw EstimationError("likelihood-ratio test needs both fits on the same sample (n " +
                              std::to_string(full.n) + " vs " + std::to_string(restricted.n) + ")");
    if (restricted.num_params() > full.num_params())
        throw EstimationError("restricted model has more parameters than the full model");
    LrTest out;
    out.dof = full.num_params() - restricted.num_params();
    out.statistic = std::max(0.0, 2.0 * (full.loglik - restricted.loglik));
    out.p_value = out.dof == 0 ? 1.0 : chi2_sf(out.statistic, static_cast<double>(out.dof));
    return out;
}

} // namespace polyvmt
