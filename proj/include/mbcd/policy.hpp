#pragma once

#include <cstdint>
#include <vector>

#include "mbcd/dynamics.hpp"
#include "mbcd/net.hpp"
#include "mbcd/replay.hpp"
#include "mbcd/rng.hpp"

namespace mbcd::sac {

struct SacConfig {
    std::vector<std::size_t> actor_hidden = {64, 64};
    std::vector<std::size_t> critic_hidden = {64, 64};
    double discount = 0.99;      // gamma
    double tau = 0.005;          // target smoothing
    double entropy_coef = 0.2;   // beta
    double actor_lr = 3e-4;
    double critic_lr = 3e-4;
    std::size_t batch = 256;
    double log_std_min = -5.0;
    double log_std_max = 2.0;
};

// Soft actor-critic learner: a squashed-Gaussian actor, twin critics with
// slow-moving target copies, and entropy-regularized updates. Plain value
// type; copying a policy copies networks, targets, and optimizer state.
class SacPolicy {
public:
    SacPolicy(std::size_t state_dim, std::size_t action_dim, const SacConfig& cfg,
              std::uint64_t seed);

    // Stochastic mode samples from the squashed Gaussian; deterministic mode
    // returns tanh(mean). Either way the action lands in (-1, 1)^dim.
    Vec act(const Vec& s, bool deterministic, Rng& rng) const;

    // Samples an action and returns its log-probability under the policy.
    double sample_action(const Vec& s, Rng& rng, Vec* action_out) const;

    // Soft Bellman targets y = r + gamma*(1-terminal)*(min target q - beta log pi).
    Vec compute_targets(const std::vector<const Transition*>& batch, Rng& rng) const;

    // Mean squared error of one critic against fixed targets; accumulates the
    // gradient with respect to that critic's parameters when grad is non-null.
    double critic_loss(int which, const std::vector<const Transition*>& batch,
                       const Vec& targets, Vec* grad) const;

    // One Adam step on both critics against the given targets, then
    // tau-averages the target networks. Returns the mean critic loss.
    double critic_apply(const std::vector<const Transition*>& batch, const Vec& targets);

    double critic_update(const std::vector<const Transition*>& batch, Rng& rng);

    // Reparameterized actor loss mean(beta*log pi - min q) under frozen
    // per-sample noise; accumulates the actor parameter gradient.
    double actor_loss(const std::vector<const Transition*>& batch,
                      const std::vector<Vec>& noise, Vec* grad) const;

    double actor_update(const std::vector<const Transition*>& batch, Rng& rng);

    double q_min(const Vec& s, const Vec& a) const;

    // target := tau * online + (1 - tau) * target.
    void sync_targets(double tau);

    // Fresh critic/target parameters and optimizer state; actor untouched.
    void reinit_critics(Rng& rng);

    std::size_t state_dim() const { return state_dim_; }
    std::size_t action_dim() const { return action_dim_; }
    const SacConfig& config() const { return cfg_; }

    nn::DenseNetwork& actor() { return actor_; }
    const nn::DenseNetwork& actor() const { return actor_; }
    nn::DenseNetwork& critic(int which) { return which == 0 ? critic1_ : critic2_; }
    const nn::DenseNetwork& critic(int which) const { return which == 0 ? critic1_ : critic2_; }
    nn::DenseNetwork& target_critic(int which) { return which == 0 ? target1_ : target2_; }
    const nn::DenseNetwork& target_critic(int which) const { return which == 0 ? target1_ : target2_; }

private:
    struct ActorSample {
        Vec action;
        Vec u;        // pre-squash
        Vec mean;
        Vec log_std;  // clamped
        std::vector<bool> clamped;
        double log_prob;
    };

    ActorSample squash(const Vec& raw, const Vec& noise) const;

    std::size_t state_dim_;
    std::size_t action_dim_;
    SacConfig cfg_;
    nn::DenseNetwork actor_;
    nn::DenseNetwork critic1_;
    nn::DenseNetwork critic2_;
    nn::DenseNetwork target1_;
    nn::DenseNetwork target2_;
    nn::AdamState actor_adam_;
    nn::AdamState critic1_adam_;
    nn::AdamState critic2_adam_;
};

struct OptimizeReport {
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    std::size_t model_samples = 0;
    std::size_t real_samples = 0;
    bool model_fallback = false;  // wanted model data but the buffer was empty
};

// L one-step simulated rollouts: states drawn uniformly from `source`,
// actions from the policy, successors from the model; appended to `sink`.
void dyna_rollouts(const SacPolicy& policy, const dyn::ContextModel& model,
                   const ReplayBuffer& source, ReplayBuffer& sink, std::size_t count,
                   Rng& rng);

// One critic + actor update on a batch mixed from the two buffers:
// `mix` gives the fraction drawn from the model buffer.
OptimizeReport optimize_step(SacPolicy& policy, const ReplayBuffer& real,
                             const ReplayBuffer& model, double mix, Rng& rng);

}  // namespace mbcd::sac
