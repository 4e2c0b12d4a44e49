#include "doctest.h"

#include "oracles.hpp"
#include "polyvmt/error.hpp"
#include "polyvmt/regress.hpp"
#include "polyvmt/stability.hpp"

#include <random>

using namespace polyvmt;

namespace {

struct Sim {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
};

// y* = 2 + 1.5 x - 0.8 z + e, e ~ N(0, sigma^2), censored at 0.
Sim tobit_dgp(std::uint64_t seed, int n, double sigma = 3.0, double shift = 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nx(0.0, 2.0), nz(1.0, 1.5), ne(0.0, sigma);
    Sim s{Eigen::MatrixXd(n, 3), Eigen::VectorXd(n)};
    for (int i = 0; i < n; ++i) {
        const double x = nx(rng), z = nz(rng);
        s.X.row(i) << 1.0, x, z;
        s.y(i) = std::max(0.0, 2.0 + shift + 1.5 * x - 0.8 * z + ne(rng));
    }
    return s;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::abs(b)); }

} // namespace

TEST_CASE("OLS against the normal equations") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n01;
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 80 + trial * 10, p = 4;
        Eigen::MatrixXd X(n, p);
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            X(i, 0) = 1.0;
            for (int j = 1; j < p; ++j)
                X(i, j) = n01(rng) * (j + 1);
            y(i) = X.row(i).sum() + n01(rng) * (1.0 + std::abs(X(i, 1)));
        }
        const auto fit = ols_fit(X, y);
        const Eigen::VectorXd b = oracle::normal_equations(X, y);
        for (int j = 0; j < p; ++j)
            CHECK(rel(fit.beta(j), b(j)) < 1e-8);

        // HC1 written out directly.
        const Eigen::MatrixXd inv = (X.transpose() * X).inverse();
        const Eigen::VectorXd e = y - X * b;
        Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(p, p);
        for (int i = 0; i < n; ++i)
            meat += e(i) * e(i) * X.row(i).transpose() * X.row(i);
        const Eigen::MatrixXd hc1 = inv * meat * inv * (double(n) / (n - p));
        CHECK((fit.cov_robust - hc1).norm() < 1e-8 * hc1.norm());
        CHECK((fit.cov_classical - inv * (e.squaredNorm() / (n - p))).norm() < 1e-8 * fit.cov_classical.norm());
    }
}

TEST_CASE("OLS degenerate cases") {
    Eigen::MatrixXd X(6, 2);
    X << 1, 1, 1, 2, 1, 3, 1, 4, 1, 5, 1, 6;
    const Eigen::VectorXd y = 3.0 + 2.0 * X.col(1).array();
    const auto fit = ols_fit(X, y);
    CHECK(fit.residuals.norm() < 1e-12);
    CHECK(fit.r2 == doctest::Approx(1.0));

    CHECK_THROWS_AS(ols_fit(X.topRows(2), y.head(2)), EstimationError);
    Eigen::MatrixXd Xd(6, 3);
    Xd << X, 2.0 * X.col(1);
    CHECK_THROWS_WITH_AS(ols_fit(Xd, y, {"intercept", "a", "twice_a"}), doctest::Contains("'"), EstimationError);
}

TEST_CASE("Tobit without censoring equals OLS") {
    auto s = tobit_dgp(3, 2000, 1.0, 40.0);
    REQUIRE(s.y.minCoeff() > 0.0);
    const auto fit = tobit_fit(s.X, s.y);
    const auto ols = ols_fit(s.X, s.y);
    CHECK(fit.n_censored == 0);
    CHECK_FALSE(fit.warnings.empty());
    for (int j = 0; j < 3; ++j)
        CHECK(rel(fit.beta(j), ols.beta(j)) < 1e-6);
    CHECK(rel(fit.sigma, std::sqrt(ols.ssr / 2000.0)) < 1e-6);
}

TEST_CASE("analytic gradient and Hessian against finite differences") {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> jitter(0.0, 0.3);
    auto s = tobit_dgp(4, 400);
    // Standardize the non-constant columns.
    for (int j = 1; j < 3; ++j) {
        const double m = s.X.col(j).mean();
        const double sd = std::sqrt((s.X.col(j).array() - m).square().mean());
        s.X.col(j) = (s.X.col(j).array() - m) / sd;
    }
    const TobitObjective obj(s.X, s.y);
    auto oracle_ll = [&](const Eigen::VectorXd& olsen) {
        return oracle::tobit_loglik(s.X, s.y, olsen.head(3) / olsen(3), 1.0 / olsen(3));
    };
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd p(4);
        p << 0.6 + jitter(rng), 0.5 + jitter(rng), -0.25 + jitter(rng), 0.33 + 0.1 * std::abs(jitter(rng));
        CHECK(obj.loglik(p) == doctest::Approx(oracle_ll(p)).epsilon(1e-12));
        const Eigen::VectorXd g = obj.gradient(p);
        const Eigen::MatrixXd H = obj.hessian(p);
        const double h = 1e-5;
        for (int k = 0; k < 4; ++k) {
            Eigen::VectorXd up = p, dn = p;
            up(k) += h;
            dn(k) -= h;
            const double fd = (oracle_ll(up) - oracle_ll(dn)) / (2 * h);
            CHECK(std::abs(g(k) - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
            const Eigen::VectorXd fdh = (obj.gradient(up) - obj.gradient(dn)) / (2 * h);
            CHECK((H.col(k) - fdh).norm() <= 1e-5 * std::max(1.0, fdh.norm()));
        }
        // Negative definite on nondegenerate data.
        CHECK(Eigen::LLT<Eigen::MatrixXd>(-H).info() == Eigen::Success);
    }
}

TEST_CASE("Newton path and solution properties") {
    const auto s = tobit_dgp(5, 3000);
    const auto fit = tobit_fit(s.X, s.y, {"intercept", "x", "z"});
    const auto& c = fit.convergence;
    CHECK(c.converged);
    CHECK(c.grad_norm < 1e-8);
    CHECK(c.hessian_negative_definite);
    for (std::size_t k = 1; k < c.loglik_path.size(); ++k)
        CHECK(c.loglik_path[k] >= c.loglik_path[k - 1]);
    CHECK(fit.sigma > 0.0);
    CHECK(fit.cov.isApprox(fit.cov.transpose()));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fit.cov);
    CHECK(eig.eigenvalues().minCoeff() >= 0.0);
    CHECK(fit.loglik == doctest::Approx(oracle::tobit_loglik(s.X, s.y, fit.beta, fit.sigma)).epsilon(1e-12));
    CHECK(fit.coef("x") == doctest::Approx(1.5).epsilon(0.1));
    CHECK_THROWS_AS(fit.coef("w"), LookupError);
}

TEST_CASE("robust covariance matches a finite-difference sandwich in (beta, sigma)") {
    const auto s = tobit_dgp(6, 500);
    const auto fit = tobit_fit(s.X, s.y);
    Eigen::VectorXd est(4);
    est << fit.beta, fit.sigma;
    auto row_ll = [&](Eigen::Index i, const Eigen::VectorXd& q) {
        return oracle::tobit_loglik(s.X.row(i), s.y.segment(i, 1), q.head(3), q(3));
    };
    auto total_ll = [&](const Eigen::VectorXd& q) { return oracle::tobit_loglik(s.X, s.y, q.head(3), q(3)); };
    const double h = 1e-4;
    Eigen::MatrixXd H(4, 4);
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            Eigen::VectorXd pp = est, pm = est, mp = est, mm = est;
            pp(a) += h, pp(b) += h;
            pm(a) += h, pm(b) -= h;
            mp(a) -= h, mp(b) += h;
            mm(a) -= h, mm(b) -= h;
            H(a, b) = (total_ll(pp) - total_ll(pm) - total_ll(mp) + total_ll(mm)) / (4 * h * h);
        }
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(4, 4);
    for (Eigen::Index i = 0; i < s.y.size(); ++i) {
        Eigen::VectorXd si(4);
        for (int a = 0; a < 4; ++a) {
            Eigen::VectorXd up = est, dn = est;
            up(a) += 1e-6;
            dn(a) -= 1e-6;
            si(a) = (row_ll(i, up) - row_ll(i, dn)) / 2e-6;
        }
        B += si * si.transpose();
    }
    const Eigen::MatrixXd Ainv = (-H).inverse();
    const Eigen::MatrixXd robust = Ainv * B * Ainv * (500.0 / 499.0);
    CHECK((fit.cov_robust - robust).norm() < 1e-3 * robust.norm());
    CHECK((fit.cov_classical - Ainv).norm() < 1e-3 * Ainv.norm());
}

TEST_CASE("scale equivariance and row-permutation invariance") {
    const auto s = tobit_dgp(7, 1500);
    const auto base = tobit_fit(s.X, s.y);
    const auto scaled = tobit_fit(s.X, 4.0 * s.y);
    for (int j = 0; j < 3; ++j)
        CHECK(rel(scaled.beta(j), 4.0 * base.beta(j)) < 1e-8);
    CHECK(rel(scaled.sigma, 4.0 * base.sigma) < 1e-8);

    std::vector<int> perm(1500);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(3));
    Eigen::MatrixXd Xp(1500, 3);
    Eigen::VectorXd yp(1500);
    for (int i = 0; i < 1500; ++i) {
        Xp.row(i) = s.X.row(perm[i]);
        yp(i) = s.y(perm[i]);
    }
    const auto permuted = tobit_fit(Xp, yp);
    for (int j = 0; j < 3; ++j)
        CHECK(rel(permuted.beta(j), base.beta(j)) < 1e-10);
    CHECK(rel(permuted.loglik, base.loglik) < 1e-12);
}

TEST_CASE("censoring extremes") {
    auto s = tobit_dgp(8, 200);
    CHECK_THROWS_AS(tobit_fit(s.X, Eigen::VectorXd::Zero(200)), EstimationError);
    Eigen::MatrixXd Xd(200, 4);
    Xd << s.X, s.X.col(1);
    CHECK_THROWS_AS(tobit_fit(Xd, s.y), EstimationError);
}

TEST_CASE("likelihood-ratio test") {
    const auto s = tobit_dgp(9, 2000);
    const auto full = tobit_fit(s.X, s.y);
    const auto same = lr_test(full, full);
    CHECK(same.statistic == 0.0);
    CHECK(same.p_value == 1.0);
    const auto null = tobit_null(s.y);
    const auto lr = lr_test(full, null);
    CHECK(lr.dof == 2);
    CHECK(lr.statistic == doctest::Approx(2.0 * (full.loglik - null.loglik)));
    const auto other = tobit_dgp(10, 1000);
    CHECK_THROWS_AS(lr_test(full, tobit_null(other.y)), EstimationError);
}

TEST_CASE("likelihood-ratio power against a strong extra coefficient") {
    int rejections = 0;
    const int reps = 100;
    for (int r = 0; r < reps; ++r) {
        std::mt19937_64 rng(1000 + r);
        std::normal_distribution<double> n01;
        const int n = 2000;
        Eigen::MatrixXd X(n, 3);
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            X.row(i) << 1.0, n01(rng), n01(rng);
            y(i) = std::max(0.0, 1.0 + X(i, 1) + 0.5 * X(i, 2) + 2.0 * n01(rng));
        }
        const auto full = tobit_fit(X, y);
        const auto restricted = tobit_fit(X.leftCols(2), y);
        rejections += lr_test(full, restricted).p_value < 0.05 ? 1 : 0;
    }
    CHECK(rejections > 99 * reps / 100);
}

TEST_CASE("coefficient stability report") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> n01;
    const int n = 4000;
    SUBCASE("orthogonal controls barely move the access coefficient") {
        Eigen::MatrixXd A(n, 1), C(n, 1);
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            A(i, 0) = 3.0 + n01(rng);
            C(i, 0) = n01(rng);
        }
        // Remove any sample correlation so the controls are exactly orthogonal to access.
        const double ca = ((A.col(0).array() - A.col(0).mean()) * C.col(0).array()).sum() /
                          (A.col(0).array() - A.col(0).mean()).square().sum();
        C.col(0) = C.col(0).array() - C.col(0).mean() - ca * (A.col(0).array() - A.col(0).mean());
        for (int i = 0; i < n; ++i)
            y(i) = std::max(0.0, 10.0 - 2.0 * A(i, 0) + 1.0 * C(i, 0) + 3.0 * n01(rng));
        const auto rep = coefficient_stability(y, A, {"acc"}, C, {"ctrl"});
        REQUIRE(rep.rows.size() == 1);
        CHECK(rep.rows[0].movement_ratio < 0.02);
        CHECK(rep.rows[0].same_sign);
    }
    SUBCASE("confounded design keeps the sign while the magnitude moves") {
        Eigen::MatrixXd A(n, 1), C(n, 1);
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            C(i, 0) = n01(rng);
            A(i, 0) = 3.0 + 0.6 * C(i, 0) + n01(rng);
            y(i) = std::max(0.0, 10.0 - 2.0 * A(i, 0) - 1.5 * C(i, 0) + 3.0 * n01(rng));
        }
        const auto rep = coefficient_stability(y, A, {"acc"}, C, {"ctrl"});
        CHECK(rep.rows[0].same_sign);
        CHECK(rep.rows[0].movement_ratio > 0.1);
        CHECK(rep.rows[0].coef_with < 0.0);
    }
    SUBCASE("controls identical to access are rank deficient") {
        Eigen::MatrixXd A(n, 1);
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            A(i, 0) = n01(rng);
            y(i) = std::max(0.0, 1.0 + A(i, 0) + n01(rng));
        }
        CHECK_THROWS_AS(coefficient_stability(y, A, {"acc"}, A, {"acc_copy"}), EstimationError);
    }
}
