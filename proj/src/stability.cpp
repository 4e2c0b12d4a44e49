#include "polyvmt/stability.hpp"

#include <cmath>

namespace polyvmt {

StabilityReport coefficient_stability(const Eigen::VectorXd& y, const Eigen::MatrixXd& access,
                                      const std::vector<std::string>& access_names, const Eigen::MatrixXd& controls,
                                      const std::vector<std::string>& control_names, ElasticityPolicy policy) {
    const Eigen::Index n = y.size();
    const Eigen::Index a = access.cols();
    const Eigen::Index c = controls.cols();

    Eigen::MatrixXd without(n, 1 + a);
    without.col(0).setOnes();
    without.rightCols(a) = access;
    std::vector<std::string> names_without{"intercept"};
    names_without.insert(names_without.end(), access_names.begin(), access_names.end());

    Eigen::MatrixXd with(n, 1 + a + c);
    with.leftCols(1 + a) = without;
    with.rightCols(c) = controls;
    std::vector<std::string> names_with = names_without;
    names_with.insert(names_with.end(), control_names.begin(), control_names.end());

    StabilityReport out;
    out.with_controls = tobit_fit(with, y, names_with);
    out.without_controls = tobit_fit(without, y, names_without);
    for (const auto& name : access_names) {
        StabilityRow row;
        row.variable = name;
        row.coef_with = out.with_controls.coef(name);
        row.coef_without = out.without_controls.coef(name);
        row.same_sign = std::signbit(row.coef_with) == std::signbit(row.coef_without);
        row.elasticity_with = elasticity(out.with_controls, with, y, name, policy).value;
        row.elasticity_without = elasticity(out.without_controls, without, y, name, policy).value;
        row.movement_ratio = std::abs(row.coef_with - row.coef_without) / std::abs(row.coef_with);
        out.rows.push_back(row);
    }
    return out;
}

StabilityReport coefficient_stability(const HouseholdSample& sample, const std::vector<std::string>& access_cols,
                                      const std::vector<std::string>& controls, const RowFilter& filter,
                                      ElasticityPolicy policy) {
    const Design d = build_design(sample, access_cols, controls, filter);
    const auto a = static_cast<Eigen::Index>(access_cols.size());
    const Eigen::Index c = d.X.cols() - 1 - a;
    std::vector<std::string> control_names(d.names.begin() + 1 + a, d.names.end());
    return coefficient_stability(d.y, d.X.middleCols(1, a), access_cols, d.X.rightCols(c), control_names, policy);
}

} // namespace polyvmt
