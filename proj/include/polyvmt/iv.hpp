#pragma once

#include "polyvmt/regress.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace polyvmt {

inline constexpr double kWeakInstrumentF = 10.0;
/// Reported when the instruments explain the endogenous column exactly.
inline constexpr double kFStatisticCap = 1e12;

/// Structural equation y = [exog, endog] b + e with excluded instruments.
/// `exog` carries the intercept.
struct IvData {
    Eigen::VectorXd y;
    Eigen::MatrixXd endog;
    std::vector<std::string> endog_names;
    Eigen::MatrixXd exog;
    std::vector<std::string> exog_names;
    Eigen::MatrixXd instruments;
    std::vector<std::string> instrument_names;

    Eigen::Index rows() const { return y.size(); }
    /// [exog, endog]
    Eigen::MatrixXd structural() const;
    std::vector<std::string> structural_names() const;
    /// Throws unless shapes agree and the order condition holds.
    void validate() const;
    IvData resample(const std::vector<Eigen::Index>& rows) const;
};

struct FirstStage {
    std::string endog;
    double F = 0.0;
    bool weak = false;
    bool capped = false;
    double p_value = 1.0;
    double r2 = 0.0;
    double ssr_unrestricted = 0.0;
    double ssr_restricted = 0.0;
    std::size_t df_num = 0;
    std::size_t df_den = 0;
    Eigen::VectorXd fitted;
};

/// Per endogenous column: OLS on [instruments, exog] and the joint F for
/// excluding the instruments. F < 10 is flagged weak.
std::vector<FirstStage> first_stage(const IvData& data);

struct TslsFit {
    std::vector<std::string> names;
    Eigen::VectorXd beta;
    Eigen::MatrixXd cov_robust;
    Eigen::MatrixXd cov_classical;
    Eigen::VectorXd residuals;   // y - X b with the original regressors
    std::size_t n = 0;

    Eigen::VectorXd robust_se() const { return cov_robust.diagonal().cwiseSqrt(); }
};

TslsFit two_sls(const IvData& data);

struct SarganTest {
    double statistic = 0.0;
    std::size_t dof = 0;
    double p_value = 1.0;
};

/// n R^2 of the 2SLS residuals on [instruments, exog]. Exactly identified
/// models raise EstimationError: the test is undefined.
SarganTest sargan_test(const TslsFit& fit, const IvData& data);

struct BootstrapRecord {
    int reps = 0;
    std::uint64_t seed = 0;
    std::size_t redraws = 0;
    Eigen::VectorXd beta_se;
    double sigma_se = 0.0;
};

struct IvTobitOptions {
    int bootstrap_reps = 200;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    TobitOptions tobit;
};

struct IvFit {
    std::vector<FirstStage> first_stages;
    /// Tobit on [exog, fitted endog]. Its covariance ignores the generated
    /// regressors and is kept only as the naive reference.
    TobitFit second_stage;
    Eigen::VectorXd naive_se;
    std::optional<TslsFit> tsls;
    std::optional<SarganTest> sargan;
    BootstrapRecord bootstrap;

    /// Bootstrap standard errors when replications were run, else the naive ones.
    Eigen::VectorXd reported_se() const;
    bool se_is_bootstrap() const { return bootstrap.reps > 0; }
};

/// Plug-in two-step IV-Tobit: first-stage OLS fitted values replace the
/// endogenous columns in a Tobit fit. Standard errors from a pairs bootstrap
/// rerunning both stages; replication r draws from its own substream of
/// `seed`, so results do not depend on scheduling.
IvFit iv_tobit_two_step(const IvData& data, const IvTobitOptions& options = {});

} // namespace polyvmt
