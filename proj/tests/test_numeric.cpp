#include "doctest.h"

#include "polyvmt/error.hpp"
#include "polyvmt/numeric.hpp"

#include <atomic>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

using namespace polyvmt;

namespace {

// Composite Simpson integral of the normal density from -40 to z.
long double simpson_cdf(long double z) {
    const int n = 200000;
    const long double a = -40.0L;
    const long double h = (z - a) / n;
    auto f = [](long double x) { return std::exp(-0.5L * x * x) / std::sqrt(2.0L * 3.14159265358979323846264L); };
    long double s = f(a) + f(z);
    for (int i = 1; i < n; ++i)
        s += f(a + i * h) * (i % 2 ? 4.0L : 2.0L);
    return s * h / 3.0L;
}

} // namespace

TEST_CASE("compensated sum beats naive summation on cancellation") {
    std::vector<double> v{1e16, 1.0, -1e16, 1.0};
    CHECK(compensated_sum(v) == 2.0);
    std::vector<double> w(1000, 0.1);
    CHECK(compensated_sum(w) == doctest::Approx(100.0).epsilon(1e-15));
}

TEST_CASE("norm_cdf matches a quadrature oracle") {
    for (double z : {-8.0, -3.0, -1.2, 0.0, 0.4, 2.5, 6.0}) {
        const double oracle = static_cast<double>(simpson_cdf(z));
        CHECK(std::abs(norm_cdf(z) - oracle) < 1e-12);
    }
    CHECK(norm_cdf(0.0) == 0.5);
}

TEST_CASE("log_norm_cdf and inverse_mills stay finite deep in the tail") {
    for (double z : {-5.0, -12.0, -25.0, -29.0}) {
        const long double cdf = 0.5L * std::erfc(-static_cast<long double>(z) / std::sqrt(2.0L));
        const long double pdf = std::exp(-0.5L * z * z) / std::sqrt(2.0L * 3.14159265358979323846264L);
        CHECK(log_norm_cdf(z) == doctest::Approx(static_cast<double>(std::log(cdf))).epsilon(1e-12));
        CHECK(inverse_mills(z) == doctest::Approx(static_cast<double>(pdf / cdf)).epsilon(1e-10));
    }
    for (double z : {-31.0, -60.0, -500.0, -1e6}) {
        CHECK(std::isfinite(log_norm_cdf(z)));
        // Mills ratio bounds -z < phi/Phi < -z - 1/z; the upper gap is below one ulp at 1e6.
        CHECK(inverse_mills(z) > -z);
        CHECK(inverse_mills(z) <= -z - 1.0 / z);
    }
    CHECK(log_norm_cdf(40.0) == doctest::Approx(0.0));
    CHECK(inverse_mills(40.0) >= 0.0);
}

TEST_CASE("chi-square and F tails against closed forms") {
    for (double x : {0.1, 1.0, 4.0, 9.5})
        CHECK(chi2_sf(x, 2.0) == doctest::Approx(std::exp(-x / 2.0)).epsilon(1e-12));
    CHECK(chi2_sf(3.841458820694124, 1.0) == doctest::Approx(0.05).epsilon(1e-10));
    CHECK(chi2_sf(5.0, 0.0) == 1.0);
    // F(2, d2) has survival (1 + 2x/d2)^(-d2/2).
    for (double d2 : {5.0, 30.0, 400.0})
        for (double x : {0.3, 2.0, 7.0})
            CHECK(f_sf(x, 2.0, d2) == doctest::Approx(std::pow(1.0 + 2.0 * x / d2, -d2 / 2.0)).epsilon(1e-10));
}

TEST_CASE("parallel_for visits each index once and rethrows worker errors") {
    for (unsigned threads : {1u, 3u, 8u}) {
        std::vector<std::atomic<int>> hits(1001);
        parallel_for(hits.size(), threads, [&](std::size_t i) { hits[i]++; });
        bool once = true;
        for (auto& h : hits)
            once = once && h.load() == 1;
        CHECK(once);
    }
    CHECK_THROWS_AS(parallel_for(100, 4,
                                 [](std::size_t i) {
                                     if (i == 77)
                                         throw DataError("boom");
                                 }),
                    DataError);
    parallel_for(0, 4, [](std::size_t) { FAIL("no work expected"); });
}

TEST_CASE("substreams are deterministic and distinct") {
    CHECK(substream_seed(7, 3) == substream_seed(7, 3));
    CHECK(substream_seed(7, 3) != substream_seed(7, 4));
    CHECK(substream_seed(7, 3) != substream_seed(8, 3));
}
