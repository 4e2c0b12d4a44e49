#include "polyvmt/effects.hpp"

#include "polyvmt/error.hpp"
#include "polyvmt/numeric.hpp"

#include <cmath>

namespace polyvmt {

std::string to_string(ElasticityPolicy p) {
    return p == ElasticityPolicy::ObservedPositive ? "observed-positive" : "predicted";
}

ElasticityPolicy parse_elasticity_policy(std::string_view s) {
    if (s == "observed-positive" || s == "observed")
        return ElasticityPolicy::ObservedPositive;
    if (s == "predicted")
        return ElasticityPolicy::Predicted;
    throw ConfigError("unknown elasticity policy '" + std::string(s) + "' (expected observed-positive or predicted)");
}

double marginal_effect(const TobitFit& fit, const Eigen::Ref<const Eigen::RowVectorXd>& row, const std::string& var) {
    const std::size_t k = fit.index_of(var);
    if (row.size() != fit.beta.size())
        throw DataError("row width does not match the fitted coefficients");
    const double z = row.dot(fit.beta) / fit.sigma;
    return norm_cdf(z) * fit.beta(static_cast<Eigen::Index>(k));
}

double censored_mean(const TobitFit& fit, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    const double xb = row.dot(fit.beta);
    const double z = xb / fit.sigma;
    return norm_cdf(z) * xb + fit.sigma * norm_pdf(z);
}

ElasticityEstimate elasticity(const TobitFit& fit, const Eigen::MatrixXd& X, const Eigen::VectorXd& vmt,
                              const std::string& var, ElasticityPolicy policy) {
    const auto k = static_cast<Eigen::Index>(fit.index_of(var));
    if (X.cols() != fit.beta.size() || X.rows() != vmt.size())
        throw DataError("elasticity inputs do not match the fitted model");
    ElasticityEstimate out;
    out.variable = var;
    out.policy = policy;
    CompensatedSum acc;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        double denom = 0.0;
        if (policy == ElasticityPolicy::ObservedPositive) {
            if (!(vmt(i) > 0.0))
                continue;
            denom = vmt(i);
        } else {
            denom = censored_mean(fit, X.row(i));
        }
        acc.add(marginal_effect(fit, X.row(i), var) * X(i, k) / denom);
        ++out.n_used;
    }
    if (out.n_used == 0)
        throw EstimationError("no households enter the elasticity average for '" + var + "'");
    out.value = acc.value() / static_cast<double>(out.n_used);
    return out;
}

ScenarioResult scenario_vmt_change(double elasticity, double pct_change_in_access) {
    ScenarioResult r;
    r.pct_access_change = pct_change_in_access;
    r.pct_vmt_change = elasticity * pct_change_in_access;
    return r;
}

} // namespace polyvmt
