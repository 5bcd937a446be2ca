#include "mbcd/gaussian.hpp"

#include <cmath>
#include <stdexcept>

namespace mbcd::gauss {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_variances(const Vec& var) {
    for (double v : var) {
        if (!(v > kMinVariance)) {
            throw std::domain_error("DiagonalGaussian: non-positive or degenerate variance");
        }
    }
}

}  // namespace

double log_density(const DiagonalGaussian& g, const Vec& y) {
    if (y.size() != g.mean.size() || g.var.size() != g.mean.size()) {
        throw std::invalid_argument("log_density: dimension mismatch");
    }
    check_variances(g.var);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - g.mean[i];
        acc += kLog2Pi + std::log(g.var[i]) + d * d / g.var[i];
    }
    return -0.5 * acc;
}

double llr(const DiagonalGaussian& p1, const DiagonalGaussian& p0, const Vec& y) {
    if (p1.dim() != p0.dim() || y.size() != p0.dim()) {
        throw std::invalid_argument("llr: dimension mismatch");
    }
    return log_density(p1, y) - log_density(p0, y);
}

double kl_divergence(const DiagonalGaussian& p1, const DiagonalGaussian& p0) {
    if (p1.dim() != p0.dim()) {
        throw std::invalid_argument("kl_divergence: dimension mismatch");
    }
    check_variances(p1.var);
    check_variances(p0.var);
    double acc = 0.0;
    for (std::size_t i = 0; i < p1.dim(); ++i) {
        const double dm = p1.mean[i] - p0.mean[i];
        acc += std::log(p0.var[i] / p1.var[i]) + (p1.var[i] + dm * dm) / p0.var[i] - 1.0;
    }
    return 0.5 * acc;
}

Vec sample(const DiagonalGaussian& g, Rng& rng) {
    check_variances(g.var);
    Vec out(g.dim());
    for (std::size_t i = 0; i < g.dim(); ++i) {
        out[i] = g.mean[i] + std::sqrt(g.var[i]) * rng.normal();
    }
    return out;
}

}  // namespace mbcd::gauss
