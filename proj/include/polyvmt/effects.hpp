#pragma once

#include "polyvmt/regress.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>

namespace polyvmt {

/// How the VMT denominator of the elasticity average is formed.
enum class ElasticityPolicy {
    ObservedPositive,   // observed VMT, zero-VMT rows excluded
    Predicted,          // model-implied E[VMT | x], all rows
};

std::string to_string(ElasticityPolicy p);
ElasticityPolicy parse_elasticity_policy(std::string_view s);

struct ElasticityEstimate {
    std::string variable;
    double value = 0.0;
    std::size_t n_used = 0;
    ElasticityPolicy policy = ElasticityPolicy::ObservedPositive;
};

/// Phi(x'beta / sigma) * beta_var.
double marginal_effect(const TobitFit& fit, const Eigen::Ref<const Eigen::RowVectorXd>& row, const std::string& var);

/// Censored mean E[y | x] = Phi(z) x'beta + sigma phi(z), z = x'beta / sigma (censor point 0).
double censored_mean(const TobitFit& fit, const Eigen::Ref<const Eigen::RowVectorXd>& row);

/// Mean over households of me_i * access_i / VMT_i. `X` must use the fit's
/// column order; the access values are read from the `var` column of X.
ElasticityEstimate elasticity(const TobitFit& fit, const Eigen::MatrixXd& X, const Eigen::VectorXd& vmt,
                              const std::string& var, ElasticityPolicy policy = ElasticityPolicy::ObservedPositive);

struct ScenarioResult {
    double pct_access_change = 0.0;
    double pct_vmt_change = 0.0;
    std::string method = "constant-elasticity linear approximation";
};

/// %dVMT = e * %dAccess.
ScenarioResult scenario_vmt_change(double elasticity, double pct_change_in_access);
inline ScenarioResult scenario_vmt_change(const ElasticityEstimate& e, double pct_change_in_access) {
    return scenario_vmt_change(e.value, pct_change_in_access);
}

} // namespace polyvmt
