#pragma once

#include <vector>

#include "mbcd/rng.hpp"

namespace mbcd::gauss {

// Variances at or below this are rejected: log-likelihood ratios blow up as
// the variance collapses.
inline constexpr double kMinVariance = 1e-12;

// Multivariate Gaussian with diagonal covariance, stored as per-dimension
// mean and variance.
struct DiagonalGaussian {
    Vec mean;
    Vec var;

    std::size_t dim() const { return mean.size(); }
};

// log N(y; mean, diag(var)) = -0.5 * sum_i [ ln(2*pi*var_i) + (y_i-mean_i)^2/var_i ]
double log_density(const DiagonalGaussian& g, const Vec& y);

// Log-likelihood ratio log p1(y) - log p0(y).
double llr(const DiagonalGaussian& p1, const DiagonalGaussian& p0, const Vec& y);

// Closed-form KL(p1 || p0) between diagonal Gaussians. Nonnegative, zero iff equal.
double kl_divergence(const DiagonalGaussian& p1, const DiagonalGaussian& p0);

// Draw one sample.
Vec sample(const DiagonalGaussian& g, Rng& rng);

}  // namespace mbcd::gauss
