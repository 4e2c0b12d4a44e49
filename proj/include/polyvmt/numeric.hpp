#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

namespace polyvmt {

/// Neumaier compensated accumulator. Summing the same sequence in the same
/// order always gives the same result, independent of threading.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

double compensated_sum(std::span<const double> values);

// Standard normal helpers. Tail branches keep log_norm_cdf and inverse_mills
// finite far below the underflow point of Phi.
double norm_pdf(double z);
double norm_cdf(double z);
double log_norm_cdf(double z);
/// phi(z) / Phi(z)
double inverse_mills(double z);

/// Upper tail of chi-square with `dof` degrees of freedom; dof == 0 gives 1.
double chi2_sf(double stat, double dof);
/// Upper tail of F(d1, d2).
double f_sf(double stat, double d1, double d2);

/// Runs body(i) for i in [0, n). Work is split into contiguous blocks; with
/// threads <= 1 everything runs on the caller's thread.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

unsigned default_threads();

/// Seed of the independent random stream `index` derived from `master`.
std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index);

} // namespace polyvmt
