#include "mbcd/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mbcd::dyn {

void Normalizer::fit(const std::vector<const Vec*>& xs) {
    if (xs.empty()) return;
    const std::size_t d = xs.front()->size();
    mean.assign(d, 0.0);
    stddev.assign(d, 0.0);
    for (const Vec* x : xs) {
        for (std::size_t i = 0; i < d; ++i) mean[i] += (*x)[i];
    }
    for (std::size_t i = 0; i < d; ++i) mean[i] /= static_cast<double>(xs.size());
    for (const Vec* x : xs) {
        for (std::size_t i = 0; i < d; ++i) {
            const double dv = (*x)[i] - mean[i];
            stddev[i] += dv * dv;
        }
    }
    for (std::size_t i = 0; i < d; ++i) {
        stddev[i] = std::sqrt(stddev[i] / static_cast<double>(xs.size()));
        if (stddev[i] < 1e-8) stddev[i] = 1.0;
    }
}

Vec Normalizer::normalize(const Vec& x) const {
    if (!fitted()) return x;
    if (x.size() != mean.size()) {
        throw std::invalid_argument("Normalizer: input width mismatch");
    }
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean[i]) / stddev[i];
    return out;
}

ContextModel::ContextModel(int id, std::size_t state_dim, std::size_t action_dim,
                           const ModelConfig& cfg, std::size_t buffer_capacity,
                           std::uint64_t seed)
    : id_(id),
      state_dim_(state_dim),
      action_dim_(action_dim),
      cfg_(cfg),
      head_{cfg.lv_min, cfg.lv_max},
      buffer_(buffer_capacity) {
    if (cfg.ensemble_size == 0) {
        throw std::invalid_argument("ContextModel: ensemble must have at least one member");
    }
    Rng init(seed);
    std::vector<std::size_t> dims;
    dims.push_back(state_dim + action_dim);
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(2 * target_dim());
    members_.reserve(cfg.ensemble_size);
    for (std::size_t n = 0; n < cfg.ensemble_size; ++n) {
        members_.emplace_back(dims, init);
        adam_.emplace_back(members_.back().param_count(),
                           nn::AdamConfig{cfg.learning_rate, 0.9, 0.999, 1e-8});
    }
}

Vec ContextModel::target_of(const Transition& t) const {
    Vec y(target_dim());
    for (std::size_t i = 0; i < state_dim_; ++i) {
        y[i] = cfg_.predict_delta ? t.s_next[i] - t.s[i] : t.s_next[i];
    }
    y[state_dim_] = t.r;
    return y;
}

EnsemblePrediction ContextModel::predict(const Vec& x) const {
    if (x.size() != state_dim_ + action_dim_) {
        throw std::invalid_argument("ContextModel::predict: input width mismatch");
    }
    const std::size_t d = target_dim();
    const std::size_t n = members_.size();
    const Vec xn = norm_.normalize(x);

    EnsemblePrediction out;
    out.member_means.resize(n);
    out.member_vars.resize(n);
    for (std::size_t m = 0; m < n; ++m) {
        const gauss::DiagonalGaussian g = head_.to_gaussian(members_[m].forward(xn));
        out.member_means[m] = g.mean;
        out.member_vars[m] = g.var;
        if (cfg_.predict_delta) {
            for (std::size_t i = 0; i < state_dim_; ++i) out.member_means[m][i] += x[i];
        }
    }

    out.mixture.mean.assign(d, 0.0);
    out.mixture.var.assign(d, 0.0);
    for (std::size_t m = 0; m < n; ++m) {
        for (std::size_t i = 0; i < d; ++i) out.mixture.mean[i] += out.member_means[m][i];
    }
    for (std::size_t i = 0; i < d; ++i) out.mixture.mean[i] /= static_cast<double>(n);
    // Sigma* = mean member variance + population variance of member means;
    // the second term is computed directly to avoid cancellation.
    for (std::size_t m = 0; m < n; ++m) {
        for (std::size_t i = 0; i < d; ++i) {
            const double dm = out.member_means[m][i] - out.mixture.mean[i];
            out.mixture.var[i] += out.member_vars[m][i] + dm * dm;
        }
    }
    for (std::size_t i = 0; i < d; ++i) out.mixture.var[i] /= static_cast<double>(n);
    return out;
}

double ContextModel::log_likelihood(const Vec& x, const Vec& y) const {
    return gauss::log_density(predictive(x), y);
}

Vec ContextModel::train(std::size_t steps, std::size_t batch_size, Rng& rng) {
    if (buffer_.size() < batch_size || buffer_.empty()) {
        throw std::invalid_argument("ContextModel::train: buffer smaller than batch");
    }

    std::vector<const Vec*> xs;
    std::vector<Vec> inputs(buffer_.size());
    std::vector<Vec> targets(buffer_.size());
    for (std::size_t i = 0; i < buffer_.size(); ++i) {
        const Transition& t = buffer_.at(i);
        inputs[i] = t.s;
        inputs[i].insert(inputs[i].end(), t.a.begin(), t.a.end());
        targets[i] = target_of(t);
        xs.push_back(&inputs[i]);
    }
    norm_.fit(xs);
    for (Vec& x : inputs) x = norm_.normalize(x);

    // Independent bootstrap resample per member, size |D|.
    std::vector<std::vector<std::size_t>> resample(members_.size());
    for (auto& idx : resample) {
        idx.resize(buffer_.size());
        for (std::size_t& j : idx) j = rng.index(buffer_.size());
    }

    Vec trace(steps, 0.0);
    nn::DenseNetwork::Tape tape;
    Vec d_raw;
    for (std::size_t step = 0; step < steps; ++step) {
        double step_loss = 0.0;
        for (std::size_t m = 0; m < members_.size(); ++m) {
            Vec grad(members_[m].param_count(), 0.0);
            double loss = 0.0;
            for (std::size_t b = 0; b < batch_size; ++b) {
                const std::size_t j = resample[m][rng.index(resample[m].size())];
                const Vec raw = members_[m].forward(inputs[j], tape);
                loss += head_.nll(raw, targets[j], &d_raw);
                for (double& g : d_raw) g /= static_cast<double>(batch_size);
                members_[m].backward(tape, d_raw, &grad);
            }
            nn::adam_step(adam_[m], members_[m], grad);
            step_loss += loss / static_cast<double>(batch_size);
        }
        trace[step] = step_loss / static_cast<double>(members_.size());
    }
    ++train_rounds_;
    return trace;
}

std::pair<Vec, double> ContextModel::sample_next(const Vec& x, Rng& rng) const {
    const Vec y = gauss::sample(predictive(x), rng);
    Vec s_next(y.begin(), y.begin() + state_dim_);
    return {std::move(s_next), y[state_dim_]};
}

double ContextModel::disagreement(const Vec& x) const {
    const EnsemblePrediction p = predict(x);
    const std::size_t d = target_dim();
    const std::size_t n = p.member_means.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        double var = 0.0;
        for (std::size_t m = 0; m < n; ++m) {
            const double dm = p.member_means[m][i] - p.mixture.mean[i];
            var += dm * dm;
        }
        acc += var / static_cast<double>(n);
    }
    return acc / static_cast<double>(d);
}

}  // namespace mbcd::dyn
