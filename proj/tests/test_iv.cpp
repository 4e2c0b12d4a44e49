#include "doctest.h"

#include "oracles.hpp"
#include "polyvmt/error.hpp"
#include "polyvmt/iv.hpp"

#include <random>

using namespace polyvmt;

namespace {

// One endogenous regressor x = z1 + 0.5 z2 + v, y* = 1 + 0.5 w - 1.0 x + u with corr(u, v) = rho.
IvData confounded(std::uint64_t seed, int n, double rho, double strength = 1.0, bool censor = false) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01;
    IvData d;
    d.y.resize(n);
    d.endog.resize(n, 1);
    d.exog.resize(n, 2);
    d.instruments.resize(n, 2);
    for (int i = 0; i < n; ++i) {
        const double z1 = n01(rng), z2 = n01(rng), w = n01(rng);
        const double v = n01(rng);
        const double u = rho * v + std::sqrt(1.0 - rho * rho) * n01(rng);
        const double x = strength * (z1 + 0.5 * z2) + 0.3 * w + v;
        const double y = 1.0 + 0.5 * w - 1.0 * x + u;
        d.y(i) = censor ? std::max(0.0, y) : y;
        d.endog(i, 0) = x;
        d.exog.row(i) << 1.0, w;
        d.instruments.row(i) << z1, z2;
    }
    d.endog_names = {"x"};
    d.exog_names = {"intercept", "w"};
    d.instrument_names = {"z1", "z2"};
    return d;
}

} // namespace

TEST_CASE("order condition and data validation") {
    auto d = confounded(1, 200, 0.0);
    IvData under = d;
    under.instruments = d.instruments.leftCols(0);
    under.instrument_names.clear();
    CHECK_THROWS_AS(first_stage(under), EstimationError);
    IvData bad = d;
    bad.instruments.col(1) = 2.0 * bad.instruments.col(0);
    CHECK_THROWS_AS(first_stage(bad), EstimationError);
}

TEST_CASE("first-stage F equals the SSR formula on a fixture") {
    const auto d = confounded(2, 60, 0.3, 0.4);
    const auto fs = first_stage(d);
    REQUIRE(fs.size() == 1);
    Eigen::MatrixXd Z(60, 4);
    Z << d.instruments, d.exog;
    const Eigen::VectorXd x = d.endog.col(0);
    const double ssr_u = (x - Z * oracle::normal_equations(Z, x)).squaredNorm();
    const double ssr_r = (x - d.exog * oracle::normal_equations(d.exog, x)).squaredNorm();
    const double F = ((ssr_r - ssr_u) / 2.0) / (ssr_u / (60.0 - 4.0));
    CHECK(std::abs(fs[0].F - F) <= 1e-10 * F);
    CHECK(fs[0].df_num == 2);
    CHECK(fs[0].df_den == 56);
    CHECK(fs[0].F >= 0.0);
}

TEST_CASE("perfect instrument gives a capped F and reproduces plain estimators") {
    auto d = confounded(3, 500, 0.5, 1.0, true);
    d.instruments = d.endog;
    d.instrument_names = {"x_copy"};
    const auto fs = first_stage(d);
    CHECK(fs[0].capped);
    CHECK(fs[0].F == kFStatisticCap);
    CHECK(fs[0].r2 == doctest::Approx(1.0));
    CHECK_FALSE(fs[0].weak);

    const auto tsls = two_sls(d);
    const auto ols = ols_fit(d.structural(), d.y);
    for (Eigen::Index j = 0; j < ols.beta.size(); ++j)
        CHECK(std::abs(tsls.beta(j) - ols.beta(j)) <= 1e-8 * std::abs(ols.beta(j)));

    IvTobitOptions opts;
    opts.bootstrap_reps = 0;
    const auto iv = iv_tobit_two_step(d, opts);
    const auto plain = tobit_fit(d.structural(), d.y, d.structural_names());
    for (Eigen::Index j = 0; j < plain.beta.size(); ++j)
        CHECK(std::abs(iv.second_stage.beta(j) - plain.beta(j)) <= 1e-8 * std::abs(plain.beta(j)));
    CHECK(std::abs(iv.second_stage.sigma - plain.sigma) <= 1e-8 * plain.sigma);
    CHECK_FALSE(iv.sargan.has_value());
}

TEST_CASE("exactly identified 2SLS equals the IV ratio") {
    auto d = confounded(4, 300, 0.6);
    d.instruments = d.instruments.leftCols(1).eval();
    d.instrument_names = {"z1"};
    d.exog = d.exog.leftCols(1).eval();
    d.exog_names = {"intercept"};
    const auto fit = two_sls(d);
    const Eigen::VectorXd z = d.instruments.col(0).array() - d.instruments.col(0).mean();
    const Eigen::VectorXd x = d.endog.col(0).array() - d.endog.col(0).mean();
    const Eigen::VectorXd y = d.y.array() - d.y.mean();
    const double ratio = z.dot(y) / z.dot(x);
    CHECK(std::abs(fit.beta(1) - ratio) <= 1e-8 * std::abs(ratio));
    CHECK_THROWS_WITH_AS(sargan_test(fit, d), doctest::Contains("exactly identified"), EstimationError);
}

TEST_CASE("Sargan statistic is invariant to recombining instruments") {
    const auto d = confounded(5, 800, 0.4);
    const auto s1 = sargan_test(two_sls(d), d);
    IvData mixed = d;
    Eigen::Matrix2d M;
    M << 2.0, -1.0, 0.5, 3.0;
    mixed.instruments = d.instruments * M;
    const auto s2 = sargan_test(two_sls(mixed), mixed);
    CHECK(s1.dof == 1);
    CHECK(std::abs(s1.statistic - s2.statistic) <= 1e-8 * std::max(1.0, s1.statistic));
}

TEST_CASE("irrelevant instruments are flagged weak") {
    int weak = 0;
    double mean_f = 0.0;
    const int reps = 200;
    for (int r = 0; r < reps; ++r) {
        auto d = confounded(100 + r, 2000, 0.5, 0.0);
        const auto fs = first_stage(d);
        mean_f += fs[0].F / reps;
        weak += fs[0].weak ? 1 : 0;
    }
    CHECK(mean_f == doctest::Approx(1.0).epsilon(0.2));
    CHECK(weak > 95 * reps / 100);
}

TEST_CASE("2SLS under clean and confounded designs") {
    int near_ols = 0, covers = 0;
    const int reps = 100;
    for (int r = 0; r < reps; ++r) {
        const auto clean = confounded(300 + r, 1000, 0.0);
        const auto t = two_sls(clean);
        const auto o = ols_fit(clean.structural(), clean.y);
        near_ols += std::abs(t.beta(2) - o.beta(2)) < 2.0 * t.robust_se()(2) ? 1 : 0;

        const auto conf = confounded(500 + r, 1000, 0.7);
        const auto t2 = two_sls(conf);
        covers += std::abs(t2.beta(2) + 1.0) < 3.0 * t2.robust_se()(2) ? 1 : 0;
        if (r == 0) {
            const auto o2 = ols_fit(conf.structural(), conf.y);
            CHECK(std::abs(o2.beta(2) + 1.0) > 10.0 * o2.robust_se()(2));
        }
    }
    CHECK(near_ols >= 95);
    CHECK(covers >= 95);
}

TEST_CASE("bootstrap is reproducible and schedule independent") {
    const auto d = confounded(7, 400, 0.5, 1.0, true);
    IvTobitOptions opts;
    opts.bootstrap_reps = 30;
    opts.seed = 99;
    opts.threads = 1;
    const auto a = iv_tobit_two_step(d, opts);
    opts.threads = 3;
    const auto b = iv_tobit_two_step(d, opts);
    CHECK(a.bootstrap.beta_se == b.bootstrap.beta_se);
    CHECK(a.bootstrap.sigma_se == b.bootstrap.sigma_se);
    CHECK(a.bootstrap.reps == 30);
    CHECK(a.bootstrap.seed == 99);
    CHECK(a.se_is_bootstrap());
    CHECK(a.reported_se() == a.bootstrap.beta_se);
    CHECK(a.naive_se.size() == a.second_stage.beta.size());
    REQUIRE(a.sargan.has_value());
    CHECK(a.sargan->dof == 1);
    opts.seed = 100;
    const auto c = iv_tobit_two_step(d, opts);
    CHECK(c.bootstrap.beta_se != a.bootstrap.beta_se);
    // Generated regressors make the naive errors too small.
    CHECK(a.bootstrap.beta_se(2) > 0.0);
}
