#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mbcd/gaussian.hpp"

using namespace mbcd;
using gauss::DiagonalGaussian;

namespace {

// Independent density evaluation for oracle checks.
double naive_log_density(const Vec& mean, const Vec& var, const Vec& y) {
    double p = 1.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        p *= std::exp(-(y[i] - mean[i]) * (y[i] - mean[i]) / (2.0 * var[i])) /
             std::sqrt(2.0 * M_PI * var[i]);
    }
    return std::log(p);
}

}  // namespace

TEST_CASE("log_density matches closed form") {
    CHECK(gauss::log_density({{0.0}, {1.0}}, {0.0}) == doctest::Approx(-0.9189385332046727));
    CHECK(gauss::log_density({{0.0, 0.0}, {1.0, 1.0}}, {0.0, 0.0}) ==
          doctest::Approx(-1.8378770664093455));
    CHECK(gauss::log_density({{0.0}, {1.0}}, {1.0}) == doctest::Approx(-1.4189385332046727));
}

TEST_CASE("log_density agrees with a naive product-density oracle") {
    const DiagonalGaussian g{{0.3, -1.2, 4.0}, {0.5, 2.0, 0.1}};
    const Vec y{0.0, -1.0, 4.2};
    CHECK(gauss::log_density(g, y) == doctest::Approx(naive_log_density(g.mean, g.var, y)));
}

TEST_CASE("log_density rejects bad inputs") {
    CHECK_THROWS_AS(gauss::log_density({{0.0}, {0.0}}, {0.0}), std::domain_error);
    CHECK_THROWS_AS(gauss::log_density({{0.0}, {-1.0}}, {0.0}), std::domain_error);
    CHECK_THROWS_AS(gauss::log_density({{0.0}, {1.0}}, {0.0, 1.0}), std::invalid_argument);
}

TEST_CASE("llr basics") {
    const DiagonalGaussian p0{{0.0}, {1.0}};
    const DiagonalGaussian p1{{1.0}, {1.0}};
    CHECK(gauss::llr(p0, p0, {0.7}) == doctest::Approx(0.0));
    CHECK(gauss::llr(p1, p0, {1.0}) == doctest::Approx(0.5));
    CHECK(gauss::llr(p1, p0, {0.0}) == doctest::Approx(-0.5));
}

TEST_CASE("kl divergence closed form") {
    const DiagonalGaussian p0{{0.0}, {1.0}};
    const DiagonalGaussian p1{{1.0}, {1.0}};
    CHECK(gauss::kl_divergence(p0, p0) == doctest::Approx(0.0));
    CHECK(gauss::kl_divergence(p1, p0) == doctest::Approx(0.5));
    CHECK(gauss::kl_divergence(p1, p0) >= 0.0);
}

TEST_CASE("kl divergence matches Monte Carlo expectation of the llr") {
    const DiagonalGaussian p1{{0.4, -0.3, 1.1}, {0.7, 1.6, 0.2}};
    const DiagonalGaussian p0{{0.0, 0.2, 0.8}, {1.2, 0.9, 0.5}};
    Rng rng(7);
    const int n = 1000000;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const Vec y = gauss::sample(p1, rng);
        const double l = gauss::llr(p1, p0, y);
        sum += l;
        sum_sq += l * l;
    }
    const double mc = sum / n;
    const double se = std::sqrt((sum_sq / n - mc * mc) / n);
    CHECK(std::fabs(gauss::kl_divergence(p1, p0) - mc) < 3.0 * se);
}

TEST_CASE("llr expectation is -KL(p0||p1) under p0 and +KL(p1||p0) under p1") {
    const DiagonalGaussian p0{{0.0, 0.0}, {1.0, 1.0}};
    const DiagonalGaussian p1{{1.0, -0.5}, {0.8, 1.5}};
    Rng rng(11);
    const int n = 400000;
    double under_p0 = 0.0;
    double under_p1 = 0.0;
    for (int i = 0; i < n; ++i) {
        under_p0 += gauss::llr(p1, p0, gauss::sample(p0, rng));
        under_p1 += gauss::llr(p1, p0, gauss::sample(p1, rng));
    }
    under_p0 /= n;
    under_p1 /= n;
    CHECK(under_p0 < 0.0);
    CHECK(under_p1 > 0.0);
    CHECK(under_p0 == doctest::Approx(-gauss::kl_divergence(p0, p1)).epsilon(0.05));
    CHECK(under_p1 == doctest::Approx(gauss::kl_divergence(p1, p0)).epsilon(0.05));
}

TEST_CASE("density integrates to one on a 1-D grid") {
    const DiagonalGaussian g{{0.4}, {0.6}};
    double integral = 0.0;
    const double dx = 1e-3;
    for (double x = -8.0; x < 8.0; x += dx) {
        integral += std::exp(gauss::log_density(g, {x + 0.5 * dx})) * dx;
    }
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("sample is seed-reproducible with correct moments") {
    const DiagonalGaussian g{{2.0, -1.0}, {4.0, 0.25}};
    Rng a(42);
    Rng b(42);
    CHECK(gauss::sample(g, a) == gauss::sample(g, b));

    Rng rng(3);
    const int n = 100000;
    Vec mean(2, 0.0);
    for (int i = 0; i < n; ++i) {
        const Vec y = gauss::sample(g, rng);
        mean[0] += y[0];
        mean[1] += y[1];
    }
    CHECK(mean[0] / n == doctest::Approx(2.0).epsilon(0.02));
    CHECK(mean[1] / n == doctest::Approx(-1.0).epsilon(0.02));
}
