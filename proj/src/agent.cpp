#include "mbcd/agent.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mbcd::agent {

MbcdAgent::MbcdAgent(std::size_t state_dim, std::size_t action_dim, AgentConfig cfg,
                     std::uint64_t seed)
    : state_dim_(state_dim),
      action_dim_(action_dim),
      cfg_(std::move(cfg)),
      rng_(seed),
      model_buffer_(cfg_.model_buffer_capacity) {
    entries_.push_back(ContextEntry{
        dyn::ContextModel(1, state_dim_, action_dim_, cfg_.model, cfg_.real_buffer_capacity,
                          rng_.raw()),
        sac::SacPolicy(state_dim_, action_dim_, cfg_.sac, rng_.raw())});
    bank_.add_candidate(cpd::kNewContext);
    bank_.add_candidate(1);
    bank_.current = 1;
}

std::size_t MbcdAgent::index_of(int k) const {
    if (k < 1 || static_cast<std::size_t>(k) > entries_.size()) {
        throw std::out_of_range("MbcdAgent: unknown context id");
    }
    return static_cast<std::size_t>(k - 1);
}

Vec MbcdAgent::select_action(const Vec& s) {
    if (t_ < static_cast<long>(cfg_.random_action_steps)) {
        Vec a(action_dim_);
        for (double& v : a) v = rng_.uniform(-1.0, 1.0);
        return a;
    }
    if (action_override_) {
        return action_override_(model(z_), s, rng_);
    }
    return policy(z_).act(s, false, rng_);
}

bool MbcdAgent::warmup_active() const {
    if (cfg_.warmup_steps > 0 &&
        entries_[index_of(z_)].model.buffer().size() < cfg_.warmup_steps) {
        return true;
    }
    if (!recent_disagreement_.empty()) {
        const double mean =
            std::accumulate(recent_disagreement_.begin(), recent_disagreement_.end(), 0.0) /
            static_cast<double>(recent_disagreement_.size());
        if (mean > cfg_.warmup_disagreement) return true;
    }
    return false;
}

void MbcdAgent::switch_to(int k) {
    if (k == cpd::kNewContext) {
        const int id = static_cast<int>(entries_.size()) + 1;
        const std::size_t incumbent = index_of(z_);
        entries_.push_back(ContextEntry{
            dyn::ContextModel(id, state_dim_, action_dim_, cfg_.model,
                              cfg_.real_buffer_capacity, rng_.raw()),
            entries_[incumbent].policy});
        if (!cfg_.copy_critics_on_spawn) {
            entries_.back().policy.reinit_critics(rng_);
        }
        bank_.add_candidate(id);
        z_ = id;
    } else {
        index_of(k);  // validates
        z_ = k;
    }
    bank_.current = z_;
    cpd::reset(bank_);
    model_buffer_.clear();
    recent_disagreement_.clear();
}

StepReport MbcdAgent::step(env::Environment& environment) {
    if (environment.state_dim() != state_dim_ || environment.action_dim() != action_dim_) {
        throw std::invalid_argument("MbcdAgent: environment dimensions do not match agent");
    }

    StepReport report;
    report.s = environment.state();
    report.z_before = z_;
    report.action = select_action(report.s);
    auto [reward, terminal] = environment.step(report.action);
    report.reward = reward;
    report.s_next = environment.state();
    ++t_;
    report.t = t_;

    Vec x = report.s;
    x.insert(x.end(), report.action.begin(), report.action.end());
    Vec y = report.s_next;
    y.push_back(reward);

    report.disagreement = model(z_).disagreement(x);
    recent_disagreement_.push_back(report.disagreement);
    while (recent_disagreement_.size() > cfg_.model_train_interval) {
        recent_disagreement_.pop_front();
    }

    for (const auto& entry : entries_) {
        report.loglik[entry.model.id()] = entry.model.log_likelihood(x, y);
    }

    report.warmup = warmup_active();
    if (!report.warmup) {
        std::map<int, gauss::DiagonalGaussian> predictions;
        for (const auto& entry : entries_) {
            predictions.emplace(entry.model.id(), entry.model.predictive(x));
        }
        cpd::bank_update(bank_, predictions, y, cfg_.detector);
        const int decided = cpd::decide_context(bank_, cfg_.detector);
        if (decided != z_) {
            cpd::DetectionEvent event;
            event.gamma = t_;
            event.context = decided;
            report.event = event;
            switch_to(decided);
        }
    }
    report.z_after = z_;
    report.w = bank_.w;
    report.context_count = entries_.size();

    ContextEntry& active = entries_[index_of(z_)];
    active.model.buffer().push(
        Transition{report.s, report.action, reward, report.s_next, terminal});

    if (cfg_.model_train_interval > 0 && t_ % static_cast<long>(cfg_.model_train_interval) == 0 &&
        active.model.buffer().size() >= cfg_.model_train_batch) {
        active.model.train(cfg_.model_train_steps, cfg_.model_train_batch, rng_);
        report.model_trained = true;
        if (cfg_.rollout_count > 0) {
            sac::dyna_rollouts(active.policy, active.model, active.model.buffer(), model_buffer_,
                               cfg_.rollout_count, rng_);
        }
    }

    if (cfg_.policy_updates && active.model.buffer().size() >= cfg_.policy_update_start) {
        const sac::OptimizeReport opt = sac::optimize_step(
            active.policy, active.model.buffer(), model_buffer_, cfg_.model_mix, rng_);
        report.policy_updated = true;
        report.model_fallback = opt.model_fallback;
        report.critic_loss = opt.critic_loss;
        report.actor_loss = opt.actor_loss;
    }
    return report;
}

}  // namespace mbcd::agent
