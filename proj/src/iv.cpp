#include "polyvmt/iv.hpp"

#include "polyvmt/error.hpp"
#include "polyvmt/numeric.hpp"

#include <cmath>
#include <random>

namespace polyvmt {

namespace {

Eigen::MatrixXd hcat(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows(), a.cols() + b.cols());
    out << a, b;
    return out;
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

Eigen::MatrixXd fitted_endog(const IvData& data) {
    const Eigen::MatrixXd Z = hcat(data.instruments, data.exog);
    const auto names = concat(data.instrument_names, data.exog_names);
    Eigen::MatrixXd out(data.rows(), data.endog.cols());
    for (Eigen::Index k = 0; k < data.endog.cols(); ++k)
        out.col(k) = ols_fit(Z, data.endog.col(k), names).fitted;
    return out;
}

struct TwoStepPoint {
    Eigen::VectorXd beta;
    double sigma = 0.0;
};

TwoStepPoint two_step_point(const IvData& data, const TobitOptions& options) {
    const Eigen::MatrixXd X = hcat(data.exog, fitted_endog(data));
    const TobitFit fit = tobit_fit(X, data.y, data.structural_names(), options);
    return {fit.beta, fit.sigma};
}

} // namespace

Eigen::MatrixXd IvData::structural() const { return hcat(exog, endog); }

std::vector<std::string> IvData::structural_names() const { return concat(exog_names, endog_names); }

void IvData::validate() const {
    const Eigen::Index n = y.size();
    if (endog.rows() != n || exog.rows() != n || instruments.rows() != n)
        throw DataError("instrumental-variable inputs have mismatched row counts");
    if (static_cast<Eigen::Index>(endog_names.size()) != endog.cols() ||
        static_cast<Eigen::Index>(exog_names.size()) != exog.cols() ||
        static_cast<Eigen::Index>(instrument_names.size()) != instruments.cols())
        throw DataError("instrumental-variable column names do not match the data");
    if (endog.cols() == 0)
        throw ConfigError("no endogenous regressors given");
    if (instruments.cols() < endog.cols())
        throw EstimationError("order condition fails: " + std::to_string(instruments.cols()) +
                              " instruments for " + std::to_string(endog.cols()) + " endogenous regressors");
}

IvData IvData::resample(const std::vector<Eigen::Index>& rows) const {
    IvData out;
    out.endog_names = endog_names;
    out.exog_names = exog_names;
    out.instrument_names = instrument_names;
    const auto m = static_cast<Eigen::Index>(rows.size());
    out.y.resize(m);
    out.endog.resize(m, endog.cols());
    out.exog.resize(m, exog.cols());
    out.instruments.resize(m, instruments.cols());
    for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::Index src = rows[static_cast<std::size_t>(i)];
        out.y(i) = y(src);
        out.endog.row(i) = endog.row(src);
        out.exog.row(i) = exog.row(src);
        out.instruments.row(i) = instruments.row(src);
    }
    return out;
}

std::vector<FirstStage> first_stage(const IvData& data) {
    data.validate();
    const Eigen::MatrixXd Z = hcat(data.instruments, data.exog);
    const auto z_names = concat(data.instrument_names, data.exog_names);
    require_full_rank(Z, z_names);
    const Eigen::Index n = data.rows();
    const auto kz = static_cast<std::size_t>(data.instruments.cols());
    const auto kw = static_cast<std::size_t>(data.exog.cols());
    if (static_cast<std::size_t>(n) <= kz + kw)
        throw EstimationError("first stage needs more observations than instruments plus exogenous regressors");

    std::vector<FirstStage> out;
    for (Eigen::Index k = 0; k < data.endog.cols(); ++k) {
        const OlsFit unrestricted = ols_fit(Z, data.endog.col(k), z_names);
        const OlsFit restricted = ols_fit(data.exog, data.endog.col(k), data.exog_names);
        FirstStage fs;
        fs.endog = data.endog_names[static_cast<std::size_t>(k)];
        fs.ssr_unrestricted = unrestricted.ssr;
        fs.ssr_restricted = restricted.ssr;
        fs.df_num = kz;
        fs.df_den = static_cast<std::size_t>(n) - kz - kw;
        fs.r2 = unrestricted.r2;
        fs.fitted = unrestricted.fitted;
        if (fs.ssr_unrestricted <= 1e-12 * std::max(fs.ssr_restricted, 1e-300)) {
            fs.F = kFStatisticCap;
            fs.capped = true;
        } else {
            fs.F = ((fs.ssr_restricted - fs.ssr_unrestricted) / static_cast<double>(fs.df_num)) /
                   (fs.ssr_unrestricted / static_cast<double>(fs.df_den));
            fs.F = std::min(std::max(fs.F, 0.0), kFStatisticCap);
            fs.capped = fs.F >= kFStatisticCap;
        }
        fs.p_value = fs.capped ? 0.0 : f_sf(fs.F, static_cast<double>(fs.df_num), static_cast<double>(fs.df_den));
        fs.weak = fs.F < kWeakInstrumentF;
        out.push_back(std::move(fs));
    }
    return out;
}

TslsFit two_sls(const IvData& data) {
    data.validate();
    const Eigen::MatrixXd X = data.structural();
    const Eigen::MatrixXd Xhat = hcat(data.exog, fitted_endog(data));
    const auto names = data.structural_names();
    const OlsFit second = ols_fit(Xhat, data.y, names);

    TslsFit fit;
    fit.names = names;
    fit.beta = second.beta;
    fit.n = static_cast<std::size_t>(data.rows());
    fit.residuals = data.y - X * fit.beta;
    const Eigen::Index n = data.rows();
    const Eigen::Index p = X.cols();
    const Eigen::MatrixXd bread = (Xhat.transpose() * Xhat).ldlt().solve(Eigen::MatrixXd::Identity(p, p));
    const double s2 = fit.residuals.squaredNorm() / static_cast<double>(n - p);
    fit.cov_classical = s2 * bread;
    const Eigen::MatrixXd weighted = Xhat.array().colwise() * fit.residuals.array();
    const Eigen::MatrixXd meat = weighted.transpose() * weighted;
    const Eigen::MatrixXd robust = bread * meat * bread * (static_cast<double>(n) / static_cast<double>(n - p));
    fit.cov_robust = 0.5 * (robust + robust.transpose());
    return fit;
}

SarganTest sargan_test(const TslsFit& fit, const IvData& data) {
    data.validate();
    const auto kz = static_cast<std::size_t>(data.instruments.cols());
    const auto ke = static_cast<std::size_t>(data.endog.cols());
    if (kz <= ke)
        throw EstimationError("over-identification test undefined: model is exactly identified (" +
                              std::to_string(kz) + " instruments, " + std::to_string(ke) + " endogenous)");
    if (fit.residuals.size() != data.rows())
        throw DataError("2SLS residuals do not match the data");
    const Eigen::MatrixXd Z = hcat(data.instruments, data.exog);
    const OlsFit aux = ols_fit(Z, fit.residuals, concat(data.instrument_names, data.exog_names));
    const double uu = fit.residuals.squaredNorm();
    const double r2 = uu > 0.0 ? 1.0 - aux.ssr / uu : 0.0;
    SarganTest out;
    out.dof = kz - ke;
    out.statistic = static_cast<double>(data.rows()) * r2;
    out.p_value = chi2_sf(out.statistic, static_cast<double>(out.dof));
    return out;
}

Eigen::VectorXd IvFit::reported_se() const { return se_is_bootstrap() ? bootstrap.beta_se : naive_se; }

IvFit iv_tobit_two_step(const IvData& data, const IvTobitOptions& options) {
    data.validate();
    if (options.bootstrap_reps < 0)
        throw ConfigError("bootstrap replications must be non-negative");
    IvFit out;
    out.first_stages = first_stage(data);

    Eigen::MatrixXd fitted(data.rows(), data.endog.cols());
    for (std::size_t k = 0; k < out.first_stages.size(); ++k)
        fitted.col(static_cast<Eigen::Index>(k)) = out.first_stages[k].fitted;
    const Eigen::MatrixXd X = hcat(data.exog, fitted);
    out.second_stage = tobit_fit(X, data.y, data.structural_names(), options.tobit);
    out.naive_se = out.second_stage.se();

    if (data.instruments.cols() > data.endog.cols()) {
        out.tsls = two_sls(data);
        out.sargan = sargan_test(*out.tsls, data);
    }

    out.bootstrap.reps = options.bootstrap_reps;
    out.bootstrap.seed = options.seed;
    if (options.bootstrap_reps == 0)
        return out;

    const auto reps = static_cast<std::size_t>(options.bootstrap_reps);
    const Eigen::Index n = data.rows();
    const Eigen::Index p = X.cols();
    constexpr std::size_t kMaxRedraws = 100;
    Eigen::MatrixXd draws(static_cast<Eigen::Index>(reps), p + 1);
    std::vector<std::size_t> redraws(reps, 0);
    parallel_for(reps, options.threads, [&](std::size_t r) {
        std::mt19937_64 rng(substream_seed(options.seed, r));
        std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
        std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
        for (;;) {
            for (auto& idx : rows)
                idx = pick(rng);
            try {
                const TwoStepPoint pt = two_step_point(data.resample(rows), options.tobit);
                draws.row(static_cast<Eigen::Index>(r)).head(p) = pt.beta.transpose();
                draws(static_cast<Eigen::Index>(r), p) = pt.sigma;
                return;
            } catch (const Error&) {
                if (++redraws[r] > kMaxRedraws)
                    throw EstimationError("bootstrap replication " + std::to_string(r) +
                                          " kept drawing degenerate samples");
            }
        }
    });
    for (auto c : redraws)
        out.bootstrap.redraws += c;

    Eigen::VectorXd se(p + 1);
    for (Eigen::Index j = 0; j <= p; ++j) {
        CompensatedSum mean_acc;
        for (Eigen::Index r = 0; r < draws.rows(); ++r)
            mean_acc.add(draws(r, j));
        const double mean = mean_acc.value() / static_cast<double>(reps);
        CompensatedSum var_acc;
        for (Eigen::Index r = 0; r < draws.rows(); ++r)
            var_acc.add((draws(r, j) - mean) * (draws(r, j) - mean));
        se(j) = reps > 1 ? std::sqrt(var_acc.value() / static_cast<double>(reps - 1)) : 0.0;
    }
    out.bootstrap.beta_se = se.head(p);
    out.bootstrap.sigma_se = se(p);
    return out;
}

} // namespace polyvmt
