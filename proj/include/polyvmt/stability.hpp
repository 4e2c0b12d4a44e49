#pragma once

#include "polyvmt/effects.hpp"
#include "polyvmt/household.hpp"
#include "polyvmt/regress.hpp"

#include <string>
#include <vector>

namespace polyvmt {

struct StabilityRow {
    std::string variable;
    double coef_with = 0.0;
    double coef_without = 0.0;
    bool same_sign = true;
    double elasticity_with = 0.0;
    double elasticity_without = 0.0;
    /// |b_with - b_without| / |b_with|
    double movement_ratio = 0.0;
};

/// Access coefficients with and without the household controls. Reports only.
struct StabilityReport {
    std::vector<StabilityRow> rows;
    TobitFit with_controls;
    TobitFit without_controls;
};

/// `access` and `controls` exclude the intercept, which is added to both specifications.
StabilityReport coefficient_stability(const Eigen::VectorXd& y, const Eigen::MatrixXd& access,
                                      const std::vector<std::string>& access_names, const Eigen::MatrixXd& controls,
                                      const std::vector<std::string>& control_names,
                                      ElasticityPolicy policy = ElasticityPolicy::ObservedPositive);

StabilityReport coefficient_stability(const HouseholdSample& sample, const std::vector<std::string>& access_cols,
                                      const std::vector<std::string>& controls, const RowFilter& filter = {},
                                      ElasticityPolicy policy = ElasticityPolicy::ObservedPositive);

} // namespace polyvmt
