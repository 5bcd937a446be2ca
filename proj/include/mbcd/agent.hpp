#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "mbcd/changepoint.hpp"
#include "mbcd/dynamics.hpp"
#include "mbcd/env.hpp"
#include "mbcd/policy.hpp"

namespace mbcd::agent {

struct AgentConfig {
    cpd::DetectorConfig detector;
    dyn::ModelConfig model;
    sac::SacConfig sac;

    std::size_t model_train_interval = 250;  // F
    std::size_t model_train_steps = 200;     // Adam steps per member per round
    std::size_t model_train_batch = 64;
    std::size_t rollout_count = 400;         // L; reference value is 1e5, desk-scaled here
    double model_mix = 0.95;                 // fraction of model data per SAC batch

    std::size_t warmup_steps = 1000;
    double warmup_disagreement = 0.05;

    std::size_t real_buffer_capacity = 100000;
    std::size_t model_buffer_capacity = 100000;
    std::size_t policy_update_start = 200;   // real samples before SAC updates begin
    std::size_t random_action_steps = 500;   // uniform exploration at run start
    bool copy_critics_on_spawn = true;
    bool policy_updates = true;              // off when an action override plans instead
};

struct StepReport {
    long t = 0;
    int z_before = 1;
    int z_after = 1;
    Vec s;
    Vec action;
    double reward = 0.0;
    Vec s_next;
    bool warmup = false;
    std::size_t context_count = 1;
    double disagreement = 0.0;
    std::map<int, double> w;
    std::map<int, double> loglik;
    std::optional<cpd::DetectionEvent> event;
    bool model_trained = false;
    bool policy_updated = false;
    bool model_fallback = false;
    double critic_loss = 0.0;
    double actor_loss = 0.0;
};

// Context library orchestrator: grows a library of (model, policy, buffer)
// triples, runs MCUSUM detection over all library models each step, switches
// or spawns contexts on detections, and schedules model training, Dyna
// rollouts, and SAC updates.
class MbcdAgent {
public:
    // Plans an action from the current context's dynamics model; installed by
    // the harness for planner-based action selection.
    using ActionOverride =
        std::function<Vec(const dyn::ContextModel& model, const Vec& s, Rng& rng)>;

    MbcdAgent(std::size_t state_dim, std::size_t action_dim, AgentConfig cfg,
              std::uint64_t seed);

    // One full loop iteration: act, observe, detect, switch, store, train.
    StepReport step(env::Environment& environment);

    // True while the active context's model is still too young or its
    // ensemble disagreement over the recent window is too high; detection is
    // suppressed and statistics stay frozen at zero.
    bool warmup_active() const;

    // Switches to an existing context or spawns a fresh one (cpd::kNewContext).
    // Resets the detector and clears the model buffer either way.
    void switch_to(int k);

    int context() const { return z_; }
    std::size_t context_count() const { return entries_.size(); }
    long total_steps() const { return t_; }

    dyn::ContextModel& model(int k) { return entries_.at(index_of(k)).model; }
    const dyn::ContextModel& model(int k) const { return entries_.at(index_of(k)).model; }
    sac::SacPolicy& policy(int k) { return entries_.at(index_of(k)).policy; }
    const sac::SacPolicy& policy(int k) const { return entries_.at(index_of(k)).policy; }
    ReplayBuffer& model_buffer() { return model_buffer_; }
    const cpd::CusumBank& bank() const { return bank_; }
    const AgentConfig& config() const { return cfg_; }
    Rng& rng() { return rng_; }

    void set_action_override(ActionOverride fn) { action_override_ = std::move(fn); }

private:
    struct ContextEntry {
        dyn::ContextModel model;
        sac::SacPolicy policy;
    };

    std::size_t index_of(int k) const;
    Vec select_action(const Vec& s);

    std::size_t state_dim_;
    std::size_t action_dim_;
    AgentConfig cfg_;
    Rng rng_;
    std::vector<ContextEntry> entries_;
    ReplayBuffer model_buffer_;
    cpd::CusumBank bank_;
    int z_ = 1;
    long t_ = 0;
    std::deque<double> recent_disagreement_;
    ActionOverride action_override_;
};

}  // namespace mbcd::agent
