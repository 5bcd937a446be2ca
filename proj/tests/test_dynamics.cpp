#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fd_check.hpp"
#include "linear_model.hpp"
#include "mbcd/dynamics.hpp"

using namespace mbcd;

namespace {

// Members with zero weights emit their output-layer bias regardless of the
// input, which pins exact per-member (mean, logvar) values.
dyn::ContextModel bias_only_model(std::size_t state_dim, std::size_t action_dim,
                                  const std::vector<Vec>& means,
                                  const std::vector<Vec>& logvars, bool predict_delta = false) {
    dyn::ModelConfig cfg;
    cfg.ensemble_size = means.size();
    cfg.hidden = {4};
    cfg.predict_delta = predict_delta;
    dyn::ContextModel model(1, state_dim, action_dim, cfg, 16, 0);
    const std::size_t d = model.target_dim();
    for (std::size_t m = 0; m < means.size(); ++m) {
        auto& layers = model.members()[m].layers();
        for (auto& layer : layers) {
            std::fill(layer.w.begin(), layer.w.end(), 0.0);
            std::fill(layer.b.begin(), layer.b.end(), 0.0);
        }
        for (std::size_t i = 0; i < d; ++i) {
            layers.back().b[i] = means[m][i];
            layers.back().b[d + i] = logvars[m][i];
        }
    }
    return model;
}

Transition make_transition(Vec s, Vec a, double r, Vec s_next) {
    return Transition{std::move(s), std::move(a), r, std::move(s_next), false};
}

}  // namespace

TEST_CASE("single-member prediction equals the member's own gaussian") {
    auto model = bias_only_model(1, 1, {{0.7, 0.3}}, {{std::log(0.5), std::log(2.0)}});
    const dyn::EnsemblePrediction p = model.predict({0.0, 0.0});
    CHECK(p.mixture.mean[0] == doctest::Approx(0.7));
    CHECK(p.mixture.mean[1] == doctest::Approx(0.3));
    CHECK(p.mixture.var[0] == doctest::Approx(0.5));
    CHECK(p.mixture.var[1] == doctest::Approx(2.0));
}

TEST_CASE("equal member means average the variances") {
    auto model = bias_only_model(1, 1, {{0.4, 0.0}, {0.4, 0.0}},
                                 {{std::log(1.0), 0.0}, {std::log(3.0), 0.0}});
    const dyn::EnsemblePrediction p = model.predict({0.1, -0.1});
    CHECK(p.mixture.mean[0] == doctest::Approx(0.4));
    CHECK(p.mixture.var[0] == doctest::Approx(2.0));
}

TEST_CASE("mixture moments add the spread of member means") {
    // Two members, d = 1 view: means {0, 2}, variances {1, 1} -> mu* = 1,
    // sigma* = 2. The reward dimension mirrors it.
    auto model = bias_only_model(0, 1, {{0.0}, {2.0}}, {{0.0}, {0.0}});
    const dyn::EnsemblePrediction p = model.predict({0.0});
    CHECK(p.mixture.mean[0] == doctest::Approx(1.0));
    CHECK(p.mixture.var[0] == doctest::Approx(2.0));
}

TEST_CASE("mixture moments match a Monte Carlo oracle of the gaussian mixture") {
    auto model = bias_only_model(1, 1, {{0.5, -1.0}, {1.5, 2.0}},
                                 {{std::log(0.4), std::log(1.2)}, {std::log(0.9), std::log(0.3)}});
    const dyn::EnsemblePrediction p = model.predict({0.3, 0.3});

    Rng rng(31);
    const int n = 400000;
    Vec sum(2, 0.0);
    Vec sum_sq(2, 0.0);
    for (int i = 0; i < n; ++i) {
        const std::size_t m = rng.index(2);
        for (int d = 0; d < 2; ++d) {
            const double y =
                p.member_means[m][d] + std::sqrt(p.member_vars[m][d]) * rng.normal();
            sum[d] += y;
            sum_sq[d] += y * y;
        }
    }
    for (int d = 0; d < 2; ++d) {
        const double mean = sum[d] / n;
        const double var = sum_sq[d] / n - mean * mean;
        CHECK(p.mixture.mean[d] == doctest::Approx(mean).epsilon(0.02));
        CHECK(p.mixture.var[d] == doctest::Approx(var).epsilon(0.02));
    }
}

TEST_CASE("log_likelihood is the density of the moment-matched prediction") {
    auto model = bias_only_model(1, 1, {{0.2, 0.1}, {0.6, -0.1}}, {{0.0, 0.0}, {0.0, 0.0}});
    const Vec x{0.4, -0.4};
    const Vec y{0.3, 0.05};
    CHECK(model.log_likelihood(x, y) ==
          doctest::Approx(gauss::log_density(model.predictive(x), y)));

    auto clone = bias_only_model(1, 1, {{0.2, 0.1}, {0.6, -0.1}}, {{0.0, 0.0}, {0.0, 0.0}});
    CHECK(model.log_likelihood(x, y) == clone.log_likelihood(x, y));

    // At the mixture mean with unit variances the density is -d/2 log(2 pi).
    auto unit = bias_only_model(1, 1, {{0.5, 0.5}}, {{0.0, 0.0}});
    CHECK(unit.log_likelihood(x, {0.5, 0.5}) == doctest::Approx(-1.8378770664093455));
}

TEST_CASE("law of total variance holds for random ensembles") {
    Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        dyn::ModelConfig cfg;
        cfg.ensemble_size = 3;
        cfg.hidden = {8};
        dyn::ContextModel model(1, 2, 2, cfg, 16, rng.raw());
        const Vec x{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        const dyn::EnsemblePrediction p = model.predict(x);
        for (std::size_t d = 0; d < p.mixture.var.size(); ++d) {
            double mean_var = 0.0;
            double mean_sq = 0.0;
            double mean = 0.0;
            for (std::size_t m = 0; m < 3; ++m) {
                mean_var += p.member_vars[m][d] / 3.0;
                mean += p.member_means[m][d] / 3.0;
                mean_sq += p.member_means[m][d] * p.member_means[m][d] / 3.0;
            }
            const double spread = mean_sq - mean * mean;
            CHECK(p.mixture.var[d] >= mean_var - 1e-9);
            CHECK(p.mixture.var[d] >= spread - 1e-9);
            CHECK(p.mixture.var[d] > 0.0);
        }
    }
}

TEST_CASE("disagreement is the variance of member means") {
    auto same = bias_only_model(1, 1, {{0.3, 0.3}, {0.3, 0.3}}, {{0.0, 0.0}, {0.0, 0.0}});
    CHECK(same.disagreement({0.0, 0.0}) == doctest::Approx(0.0));

    // d = 1 view with means {0, 2}: population variance 1. The second (reward)
    // dimension is zero for both members, so the mean over dims halves it.
    auto spread = bias_only_model(0, 1, {{0.0}, {2.0}}, {{0.0}, {0.0}});
    CHECK(spread.disagreement({0.0}) == doctest::Approx(1.0));

    // Scaling the spread by c scales disagreement by c^2.
    auto spread3 = bias_only_model(0, 1, {{0.0}, {6.0}}, {{0.0}, {0.0}});
    CHECK(spread3.disagreement({0.0}) == doctest::Approx(9.0));
}

TEST_CASE("sample_next is seeded and concentrates at the floor variance") {
    const auto rows = testutil::maze_like_rows(0.5);
    auto model = testutil::exact_linear_model(2, 2, rows, {0.0, 0.0, 0.0});
    const Vec x{1.0, -1.0, 0.5, 0.5};

    Rng a(8);
    Rng b(8);
    auto [s1, r1] = model.sample_next(x, a);
    auto [s2, r2] = model.sample_next(x, b);
    CHECK(s1 == s2);
    CHECK(r1 == r2);

    // Floor variance exp(-10): samples hug the mean.
    CHECK(s1[0] == doctest::Approx(1.25).epsilon(0.02));
    CHECK(s1[1] == doctest::Approx(-0.75).epsilon(0.02));

    Rng rng(9);
    const int n = 100000;
    double mean0 = 0.0;
    for (int i = 0; i < n; ++i) mean0 += model.sample_next(x, rng).first[0];
    mean0 /= n;
    const double se = std::sqrt(std::exp(-10.0) / n);
    CHECK(std::fabs(mean0 - 1.25) < 3.0 * se + 1e-12);
}

TEST_CASE("training fits a deterministic linear system") {
    dyn::ModelConfig cfg;
    cfg.ensemble_size = 3;
    cfg.hidden = {32, 32};
    cfg.predict_delta = false;
    dyn::ContextModel model(1, 1, 0, cfg, 4000, 2024);

    Rng rng(55);
    for (int i = 0; i < 2000; ++i) {
        const double x = rng.uniform(-1.0, 1.0);
        model.buffer().push(make_transition({x}, {}, 0.0, {2.0 * x}));
    }
    const Vec trace = model.train(2000, 64, rng);
    CHECK(std::isfinite(trace.back()));
    CHECK(trace.back() < trace.front());

    double worst = 0.0;
    for (double x = -1.0; x <= 1.0; x += 0.05) {
        const dyn::EnsemblePrediction p = model.predict({x});
        worst = std::max(worst, std::fabs(p.mixture.mean[0] - 2.0 * x));
    }
    CHECK(worst < 0.05);
}

TEST_CASE("training on one repeated datapoint memorizes it with bounded loss") {
    dyn::ModelConfig cfg;
    cfg.ensemble_size = 2;
    cfg.hidden = {16};
    cfg.predict_delta = false;
    cfg.lv_min = -6.0;
    dyn::ContextModel model(1, 1, 0, cfg, 256, 3);
    for (int i = 0; i < 64; ++i) model.buffer().push(make_transition({0.5}, {}, 1.0, {0.25}));
    Rng rng(4);
    const Vec trace = model.train(1500, 32, rng);

    const dyn::EnsemblePrediction p = model.predict({0.5});
    CHECK(p.mixture.mean[0] == doctest::Approx(0.25).epsilon(0.02));
    CHECK(p.mixture.mean[1] == doctest::Approx(1.0).epsilon(0.02));
    // d = 2 target; the clamp floors the achievable loss.
    const double bound = 0.5 * 2.0 * (std::log(2.0 * M_PI) + cfg.lv_min);
    CHECK(trace.back() >= bound - 1e-6);
}

TEST_CASE("prediction likelihood gradient matches finite differences") {
    dyn::ModelConfig cfg;
    cfg.ensemble_size = 1;
    cfg.hidden = {8, 8};
    dyn::ContextModel model(1, 2, 1, cfg, 16, 41);
    nn::DenseNetwork& net = model.members()[0];
    const nn::GaussianHead& head = model.head();

    const std::vector<Vec> xs{{0.2, -0.4, 0.6}, {0.9, 0.1, -0.3}, {-0.5, 0.5, 0.0}};
    const std::vector<Vec> ys{{0.1, 0.3, -0.2}, {-0.6, 0.2, 0.4}, {0.3, -0.1, 0.9}};

    nn::DenseNetwork::Tape tape;
    Vec analytic(net.param_count(), 0.0);
    Vec d_raw;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const Vec raw = net.forward(xs[i], tape);
        head.nll(raw, ys[i], &d_raw);
        for (double& g : d_raw) g /= static_cast<double>(xs.size());
        net.backward(tape, d_raw, &analytic);
    }

    auto loss = [&](const Vec& p) {
        nn::DenseNetwork probe = net;
        probe.set_params(p);
        double total = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            total += head.nll(probe.forward(xs[i]), ys[i], nullptr);
        }
        return total / static_cast<double>(xs.size());
    };
    const Vec fd = testutil::finite_diff(loss, net.params());
    CHECK(testutil::max_rel_err(analytic, fd) < 1e-4);
}

TEST_CASE("bootstrap members diverge on noisy data") {
    dyn::ModelConfig cfg;
    cfg.ensemble_size = 3;
    cfg.hidden = {16};
    cfg.predict_delta = false;
    dyn::ContextModel model(1, 1, 0, cfg, 512, 7);
    Rng rng(10);
    for (int i = 0; i < 300; ++i) {
        const double x = rng.uniform(-1.0, 1.0);
        model.buffer().push(make_transition({x}, {}, rng.normal(), {x + rng.normal() * 0.5}));
    }
    model.train(400, 32, rng);
    double max_dis = 0.0;
    for (double x = -1.0; x <= 1.0; x += 0.1) {
        max_dis = std::max(max_dis, model.disagreement({x}));
    }
    CHECK(max_dis > 0.0);
}

TEST_CASE("normalizer round-trips affine input rescaling") {
    Rng rng(6);
    std::vector<Vec> raw(200, Vec(3));
    std::vector<Vec> scaled(200, Vec(3));
    const Vec a{2.0, -0.5, 10.0};
    const Vec b{1.0, 3.0, -4.0};
    for (std::size_t i = 0; i < raw.size(); ++i) {
        for (int d = 0; d < 3; ++d) {
            raw[i][d] = rng.normal() * (d + 1.0);
            scaled[i][d] = a[d] * raw[i][d] + b[d];
        }
    }
    std::vector<const Vec*> raw_ptrs;
    std::vector<const Vec*> scaled_ptrs;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        raw_ptrs.push_back(&raw[i]);
        scaled_ptrs.push_back(&scaled[i]);
    }
    dyn::Normalizer n_raw;
    dyn::Normalizer n_scaled;
    n_raw.fit(raw_ptrs);
    n_scaled.fit(scaled_ptrs);

    const Vec x{0.7, -1.1, 5.0};
    const Vec x_scaled{a[0] * x[0] + b[0], a[1] * x[1] + b[1], a[2] * x[2] + b[2]};
    const Vec za = n_raw.normalize(x);
    const Vec zb = n_scaled.normalize(x_scaled);
    for (int d = 0; d < 3; ++d) {
        // Sign flips with negative scale; the standardized magnitude is
        // invariant.
        const double expect = (a[d] < 0 ? -1.0 : 1.0) * za[d];
        CHECK(zb[d] == doctest::Approx(expect).epsilon(1e-9));
    }
}

TEST_CASE("delta prediction reports absolute next states") {
    std::vector<Vec> means{{0.25, 0.0, 0.5}};  // delta-s = (0.25, 0), r = 0.5
    auto model = bias_only_model(2, 1, means, {{0.0, 0.0, 0.0}}, true);
    const dyn::EnsemblePrediction p = model.predict({1.0, 2.0, 0.0});
    CHECK(p.mixture.mean[0] == doctest::Approx(1.25));
    CHECK(p.mixture.mean[1] == doctest::Approx(2.0));
    CHECK(p.mixture.mean[2] == doctest::Approx(0.5));
}

TEST_CASE("construction and training reject bad shapes") {
    dyn::ModelConfig cfg;
    cfg.ensemble_size = 0;
    CHECK_THROWS_AS(dyn::ContextModel(1, 2, 2, cfg, 16, 0), std::invalid_argument);

    dyn::ModelConfig ok;
    ok.ensemble_size = 1;
    ok.hidden = {4};
    dyn::ContextModel model(1, 1, 1, ok, 16, 0);
    Rng rng(0);
    CHECK_THROWS_AS(model.train(10, 8, rng), std::invalid_argument);
    CHECK_THROWS_AS(model.predict({1.0}), std::invalid_argument);
}
