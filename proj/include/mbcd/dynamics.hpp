#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "mbcd/gaussian.hpp"
#include "mbcd/net.hpp"
#include "mbcd/replay.hpp"
#include "mbcd/rng.hpp"

namespace mbcd::dyn {

struct ModelConfig {
    std::size_t ensemble_size = 5;
    std::vector<std::size_t> hidden = {32, 32};
    double lv_min = -10.0;
    double lv_max = 4.0;
    // Predict the state part of the target as a delta (s' - s) rather than
    // absolutely; the reward part is always absolute.
    bool predict_delta = true;
    double learning_rate = 1e-3;
};

// Running mean/std over model inputs. normalize() is the identity until the
// first fit.
struct Normalizer {
    Vec mean;
    Vec stddev;

    void fit(const std::vector<const Vec*>& xs);
    Vec normalize(const Vec& x) const;
    bool fitted() const { return !mean.empty(); }
};

// Moment-matched mixture over the ensemble: mu* is the mean of member means
// and sigma* adds the spread of member means to the mean member variance.
struct EnsemblePrediction {
    gauss::DiagonalGaussian mixture;
    std::vector<Vec> member_means;
    std::vector<Vec> member_vars;
};

// Probabilistic ensemble dynamics model for one context: N networks with
// Gaussian heads over the joint (next-state, reward) target, an input
// normalizer, and the context's experience buffer.
class ContextModel {
public:
    ContextModel(int id, std::size_t state_dim, std::size_t action_dim,
                 const ModelConfig& cfg, std::size_t buffer_capacity, std::uint64_t seed);

    // x = (s, a). All outputs are in absolute (s', r) coordinates regardless
    // of predict_delta.
    EnsemblePrediction predict(const Vec& x) const;
    gauss::DiagonalGaussian predictive(const Vec& x) const { return predict(x).mixture; }

    // Log-density of y = (s', r) under the moment-matched predictive Gaussian.
    double log_likelihood(const Vec& x, const Vec& y) const;

    // Trains each member on its own bootstrap resample of the buffer with
    // minibatch Adam on the Gaussian negative log-likelihood. Returns the
    // per-step batch loss trace.
    Vec train(std::size_t steps, std::size_t batch_size, Rng& rng);

    // Draws (s', r) from the predictive distribution.
    std::pair<Vec, double> sample_next(const Vec& x, Rng& rng) const;

    // Mean over target dimensions of the variance of member means; zero iff
    // the members agree exactly.
    double disagreement(const Vec& x) const;

    ReplayBuffer& buffer() { return buffer_; }
    const ReplayBuffer& buffer() const { return buffer_; }

    int id() const { return id_; }
    std::size_t state_dim() const { return state_dim_; }
    std::size_t action_dim() const { return action_dim_; }
    std::size_t target_dim() const { return state_dim_ + 1; }
    const ModelConfig& config() const { return cfg_; }
    std::size_t train_rounds() const { return train_rounds_; }

    std::vector<nn::DenseNetwork>& members() { return members_; }
    const std::vector<nn::DenseNetwork>& members() const { return members_; }
    Normalizer& normalizer() { return norm_; }
    const Normalizer& normalizer() const { return norm_; }
    const nn::GaussianHead& head() const { return head_; }

private:
    Vec target_of(const Transition& t) const;

    int id_;
    std::size_t state_dim_;
    std::size_t action_dim_;
    ModelConfig cfg_;
    nn::GaussianHead head_;
    std::vector<nn::DenseNetwork> members_;
    std::vector<nn::AdamState> adam_;
    Normalizer norm_;
    ReplayBuffer buffer_;
    std::size_t train_rounds_ = 0;
};

}  // namespace mbcd::dyn
