#include "mbcd/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mbcd::sac {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kLog2 = 0.6931471805599453094172321214582;

double softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

// log(1 - tanh(u)^2), evaluated stably.
double log_one_minus_tanh_sq(double u) {
    return 2.0 * (kLog2 - u - softplus(-2.0 * u));
}

Vec concat(const Vec& a, const Vec& b) {
    Vec out;
    out.reserve(a.size() + b.size());
    out.insert(out.end(), a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

}  // namespace

SacPolicy::SacPolicy(std::size_t state_dim, std::size_t action_dim, const SacConfig& cfg,
                     std::uint64_t seed)
    : state_dim_(state_dim), action_dim_(action_dim), cfg_(cfg) {
    Rng init(seed);
    std::vector<std::size_t> actor_dims{state_dim};
    actor_dims.insert(actor_dims.end(), cfg.actor_hidden.begin(), cfg.actor_hidden.end());
    actor_dims.push_back(2 * action_dim);
    actor_ = nn::DenseNetwork(actor_dims, init);

    std::vector<std::size_t> critic_dims{state_dim + action_dim};
    critic_dims.insert(critic_dims.end(), cfg.critic_hidden.begin(), cfg.critic_hidden.end());
    critic_dims.push_back(1);
    critic1_ = nn::DenseNetwork(critic_dims, init);
    critic2_ = nn::DenseNetwork(critic_dims, init);
    target1_ = critic1_;
    target2_ = critic2_;

    actor_adam_ = nn::AdamState(actor_.param_count(), nn::AdamConfig{cfg.actor_lr, 0.9, 0.999, 1e-8});
    critic1_adam_ = nn::AdamState(critic1_.param_count(), nn::AdamConfig{cfg.critic_lr, 0.9, 0.999, 1e-8});
    critic2_adam_ = nn::AdamState(critic2_.param_count(), nn::AdamConfig{cfg.critic_lr, 0.9, 0.999, 1e-8});
}

SacPolicy::ActorSample SacPolicy::squash(const Vec& raw, const Vec& noise) const {
    ActorSample s;
    s.mean.assign(raw.begin(), raw.begin() + action_dim_);
    s.log_std.resize(action_dim_);
    s.clamped.resize(action_dim_);
    s.u.resize(action_dim_);
    s.action.resize(action_dim_);
    s.log_prob = 0.0;
    for (std::size_t i = 0; i < action_dim_; ++i) {
        double ls = raw[action_dim_ + i];
        s.clamped[i] = ls < cfg_.log_std_min || ls > cfg_.log_std_max;
        ls = std::clamp(ls, cfg_.log_std_min, cfg_.log_std_max);
        s.log_std[i] = ls;
        const double sigma = std::exp(ls);
        s.u[i] = s.mean[i] + sigma * noise[i];
        s.action[i] = std::tanh(s.u[i]);
        s.log_prob += -0.5 * kLog2Pi - ls - 0.5 * noise[i] * noise[i]
                      - log_one_minus_tanh_sq(s.u[i]);
    }
    return s;
}

Vec SacPolicy::act(const Vec& s, bool deterministic, Rng& rng) const {
    const Vec raw = actor_.forward(s);
    Vec a(action_dim_);
    if (deterministic) {
        for (std::size_t i = 0; i < action_dim_; ++i) a[i] = std::tanh(raw[i]);
        return a;
    }
    Vec noise(action_dim_);
    for (double& n : noise) n = rng.normal();
    return squash(raw, noise).action;
}

double SacPolicy::sample_action(const Vec& s, Rng& rng, Vec* action_out) const {
    const Vec raw = actor_.forward(s);
    Vec noise(action_dim_);
    for (double& n : noise) n = rng.normal();
    ActorSample sample = squash(raw, noise);
    if (action_out) *action_out = std::move(sample.action);
    return sample.log_prob;
}

Vec SacPolicy::compute_targets(const std::vector<const Transition*>& batch, Rng& rng) const {
    Vec targets(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const Transition& t = *batch[b];
        double y = t.r;
        if (!t.terminal && cfg_.discount > 0.0) {
            Vec a_next;
            const double logp = sample_action(t.s_next, rng, &a_next);
            const Vec sa = concat(t.s_next, a_next);
            const double q1 = target1_.forward(sa)[0];
            const double q2 = target2_.forward(sa)[0];
            y += cfg_.discount * (std::min(q1, q2) - cfg_.entropy_coef * logp);
        }
        targets[b] = y;
    }
    return targets;
}

double SacPolicy::critic_loss(int which, const std::vector<const Transition*>& batch,
                              const Vec& targets, Vec* grad) const {
    if (batch.empty()) throw std::invalid_argument("critic_loss: empty batch");
    if (targets.size() != batch.size()) {
        throw std::invalid_argument("critic_loss: target count mismatch");
    }
    const nn::DenseNetwork& critic = which == 0 ? critic1_ : critic2_;
    nn::DenseNetwork::Tape tape;
    double loss = 0.0;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const Transition& t = *batch[b];
        const Vec sa = concat(t.s, t.a);
        const double q = critic.forward(sa, tape)[0];
        const double err = q - targets[b];
        loss += err * err * inv_b;
        if (grad) {
            critic.backward(tape, {2.0 * err * inv_b}, grad);
        }
    }
    return loss;
}

double SacPolicy::critic_apply(const std::vector<const Transition*>& batch, const Vec& targets) {
    double total = 0.0;
    for (int which = 0; which < 2; ++which) {
        nn::DenseNetwork& critic = which == 0 ? critic1_ : critic2_;
        nn::AdamState& adam = which == 0 ? critic1_adam_ : critic2_adam_;
        Vec grad(critic.param_count(), 0.0);
        total += critic_loss(which, batch, targets, &grad);
        nn::adam_step(adam, critic, grad);
    }
    sync_targets(cfg_.tau);
    return 0.5 * total;
}

double SacPolicy::critic_update(const std::vector<const Transition*>& batch, Rng& rng) {
    return critic_apply(batch, compute_targets(batch, rng));
}

double SacPolicy::actor_loss(const std::vector<const Transition*>& batch,
                             const std::vector<Vec>& noise, Vec* grad) const {
    if (batch.empty()) throw std::invalid_argument("actor_loss: empty batch");
    if (noise.size() != batch.size()) {
        throw std::invalid_argument("actor_loss: noise count mismatch");
    }
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    const double beta = cfg_.entropy_coef;
    nn::DenseNetwork::Tape actor_tape;
    nn::DenseNetwork::Tape critic_tape;
    double loss = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const Vec& s = batch[b]->s;
        const Vec raw = actor_.forward(s, actor_tape);
        const ActorSample smp = squash(raw, noise[b]);

        const Vec sa = concat(s, smp.action);
        const double q1 = critic1_.forward(sa)[0];
        const bool use_first = q1 <= critic2_.forward(sa)[0];
        const nn::DenseNetwork& critic = use_first ? critic1_ : critic2_;
        const double q = critic.forward(sa, critic_tape)[0];

        loss += (beta * smp.log_prob - q) * inv_b;
        if (!grad) continue;

        // d(-q)/da via the chosen critic's input gradient.
        const Vec d_sa = critic.backward(critic_tape, {-1.0}, nullptr);

        Vec d_raw(2 * action_dim_, 0.0);
        for (std::size_t i = 0; i < action_dim_; ++i) {
            const double a = smp.action[i];
            const double sigma = std::exp(smp.log_std[i]);
            // Through u: the entropy term's tanh correction plus the critic path.
            const double d_u = beta * 2.0 * std::tanh(smp.u[i])
                               + d_sa[state_dim_ + i] * (1.0 - a * a);
            d_raw[i] = d_u * inv_b;
            if (!smp.clamped[i]) {
                d_raw[action_dim_ + i] = (beta * -1.0 + d_u * sigma * noise[b][i]) * inv_b;
            }
        }
        actor_.backward(actor_tape, d_raw, grad);
    }
    return loss;
}

double SacPolicy::actor_update(const std::vector<const Transition*>& batch, Rng& rng) {
    std::vector<Vec> noise(batch.size(), Vec(action_dim_));
    for (Vec& n : noise) {
        for (double& v : n) v = rng.normal();
    }
    Vec grad(actor_.param_count(), 0.0);
    const double loss = actor_loss(batch, noise, &grad);
    nn::adam_step(actor_adam_, actor_, grad);
    return loss;
}

double SacPolicy::q_min(const Vec& s, const Vec& a) const {
    const Vec sa = concat(s, a);
    return std::min(critic1_.forward(sa)[0], critic2_.forward(sa)[0]);
}

void SacPolicy::sync_targets(double tau) {
    for (int which = 0; which < 2; ++which) {
        const nn::DenseNetwork& online = which == 0 ? critic1_ : critic2_;
        nn::DenseNetwork& target = which == 0 ? target1_ : target2_;
        Vec p_online = online.params();
        Vec p_target = target.params();
        for (std::size_t i = 0; i < p_online.size(); ++i) {
            p_target[i] = tau * p_online[i] + (1.0 - tau) * p_target[i];
        }
        target.set_params(p_target);
    }
}

void SacPolicy::reinit_critics(Rng& rng) {
    std::vector<std::size_t> dims{state_dim_ + action_dim_};
    dims.insert(dims.end(), cfg_.critic_hidden.begin(), cfg_.critic_hidden.end());
    dims.push_back(1);
    critic1_ = nn::DenseNetwork(dims, rng);
    critic2_ = nn::DenseNetwork(dims, rng);
    target1_ = critic1_;
    target2_ = critic2_;
    critic1_adam_ = nn::AdamState(critic1_.param_count(), nn::AdamConfig{cfg_.critic_lr, 0.9, 0.999, 1e-8});
    critic2_adam_ = nn::AdamState(critic2_.param_count(), nn::AdamConfig{cfg_.critic_lr, 0.9, 0.999, 1e-8});
}

void dyna_rollouts(const SacPolicy& policy, const dyn::ContextModel& model,
                   const ReplayBuffer& source, ReplayBuffer& sink, std::size_t count,
                   Rng& rng) {
    if (count == 0) return;
    if (source.empty()) throw std::invalid_argument("dyna_rollouts: empty source buffer");
    for (std::size_t i = 0; i < count; ++i) {
        const Transition& seed = source.sample(rng);
        Transition sim;
        sim.s = seed.s;
        sim.a = policy.act(sim.s, false, rng);
        Vec x = sim.s;
        x.insert(x.end(), sim.a.begin(), sim.a.end());
        auto [s_next, r] = model.sample_next(x, rng);
        sim.s_next = std::move(s_next);
        sim.r = r;
        sim.terminal = false;
        sink.push(std::move(sim));
    }
}

OptimizeReport optimize_step(SacPolicy& policy, const ReplayBuffer& real,
                             const ReplayBuffer& model, double mix, Rng& rng) {
    if (real.empty() && model.empty()) {
        throw std::invalid_argument("optimize_step: both buffers empty");
    }
    const std::size_t batch = policy.config().batch;
    OptimizeReport report;

    std::size_t want_model = static_cast<std::size_t>(std::lround(mix * static_cast<double>(batch)));
    want_model = std::min(want_model, batch);
    if (want_model > 0 && model.empty()) {
        report.model_fallback = true;
        want_model = 0;
    }
    std::size_t want_real = batch - want_model;
    if (want_real > 0 && real.empty()) {
        want_model = batch;
        want_real = 0;
    }

    std::vector<const Transition*> samples;
    samples.reserve(batch);
    for (std::size_t i = 0; i < want_model; ++i) samples.push_back(&model.sample(rng));
    for (std::size_t i = 0; i < want_real; ++i) samples.push_back(&real.sample(rng));
    report.model_samples = want_model;
    report.real_samples = want_real;

    report.critic_loss = policy.critic_update(samples, rng);
    report.actor_loss = policy.actor_update(samples, rng);
    return report;
}

}  // namespace mbcd::sac
