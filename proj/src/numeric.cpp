#include "polyvmt/numeric.hpp"

#include <algorithm>
#include <exception>
#include <numbers>
#include <thread>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>

namespace polyvmt {

namespace {

constexpr double kTailCut = -30.0;

// Asymptotic factor S(z) with Phi(z) ~ phi(z) / (-z) * S(z) for z -> -inf.
double lower_tail_series(double z) {
    const double inv2 = 1.0 / (z * z);
    return 1.0 + inv2 * (-1.0 + inv2 * (3.0 + inv2 * (-15.0 + inv2 * (105.0 - 945.0 * inv2))));
}

} // namespace

double compensated_sum(std::span<const double> values) {
    CompensatedSum acc;
    for (double v : values)
        acc.add(v);
    return acc.value();
}

double norm_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double norm_cdf(double z) {
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

double log_norm_cdf(double z) {
    if (z >= kTailCut)
        return std::log(norm_cdf(z));
    return -0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi) - std::log(-z) +
           std::log(lower_tail_series(z));
}

double inverse_mills(double z) {
    if (z >= kTailCut)
        return norm_pdf(z) / norm_cdf(z);
    return -z / lower_tail_series(z);
}

double chi2_sf(double stat, double dof) {
    if (dof <= 0.0)
        return 1.0;
    if (stat <= 0.0)
        return 1.0;
    if (!std::isfinite(stat))
        return 0.0;
    return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), stat));
}

double f_sf(double stat, double d1, double d2) {
    if (stat <= 0.0)
        return 1.0;
    if (!std::isfinite(stat))
        return 0.0;
    return boost::math::cdf(boost::math::complement(boost::math::fisher_f(d1, d2), stat));
}

std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index) {
    // splitmix64 finaliser over (master, index)
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

unsigned default_threads() {
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body) {
    if (n == 0)
        return;
    const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), n);
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i)
            body(i);
        return;
    }
    const std::size_t block = (n + workers - 1) / workers;
    std::vector<std::exception_ptr> errors(workers);
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t lo = w * block;
            const std::size_t hi = std::min(n, lo + block);
            if (lo >= hi)
                break;
            pool.emplace_back([lo, hi, &body, &err = errors[w]] {
                try {
                    for (std::size_t i = lo; i < hi; ++i)
                        body(i);
                } catch (...) {
                    err = std::current_exception();
                }
            });
        }
    }
    for (auto& err : errors)
        if (err)
            std::rethrow_exception(err);
}

} // namespace polyvmt
