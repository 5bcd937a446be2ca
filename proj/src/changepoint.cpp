#include "mbcd/changepoint.hpp"

#include <cmath>
#include <stdexcept>

namespace mbcd::cpd {

double threshold_from_alpha(double alpha) {
    if (!(alpha > 0.0) || !(alpha < 1.0)) {
        throw std::invalid_argument("threshold_from_alpha: alpha must lie in (0,1)");
    }
    return std::fabs(std::log(alpha));
}

double cusum_update(double w_prev, double l) {
    const double w = w_prev + l;
    return w > 0.0 ? w : 0.0;
}

double new_context_log_likelihood(const gauss::DiagonalGaussian& current_prediction,
                                  const Vec& y, double delta, bool sqrt_shift) {
    if (y.size() != current_prediction.dim()) {
        throw std::invalid_argument("new_context_log_likelihood: dimension mismatch");
    }
    if (delta < 0.0) {
        throw std::invalid_argument("new_context_log_likelihood: delta must be nonnegative");
    }
    gauss::DiagonalGaussian alt;
    alt.var = current_prediction.var;
    alt.mean.resize(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double v = current_prediction.var[i];
        alt.mean[i] = y[i] + delta * (sqrt_shift ? std::sqrt(v) : v);
    }
    return gauss::log_density(alt, y);
}

LlrRecord bank_update(CusumBank& bank, const std::map<int, gauss::DiagonalGaussian>& predictions,
                      const Vec& y, const DetectorConfig& cfg) {
    const auto cur = predictions.find(bank.current);
    if (cur == predictions.end()) {
        throw std::invalid_argument("bank_update: missing current-context prediction");
    }
    const double log_p_current = gauss::log_density(cur->second, y);

    LlrRecord rec;
    rec.y = y;
    for (auto& [k, w] : bank.w) {
        double log_p_k;
        if (k == kNewContext) {
            log_p_k = new_context_log_likelihood(cur->second, y, cfg.delta, cfg.sqrt_shift);
        } else {
            const auto it = predictions.find(k);
            if (it == predictions.end()) {
                throw std::invalid_argument("bank_update: missing prediction for known context");
            }
            log_p_k = gauss::log_density(it->second, y);
        }
        const double l = log_p_k - log_p_current;
        rec.llr[k] = l;
        w = cusum_update(w, l);
    }
    return rec;
}

int decide_context(const CusumBank& bank, const DetectorConfig& cfg) {
    int best = bank.current;
    double best_w = cfg.h;
    // Existing contexts first, ascending; the new-context candidate is
    // considered last so it only wins strict comparisons.
    for (const auto& [k, w] : bank.w) {
        if (k == kNewContext) continue;
        if (w > best_w) {
            best_w = w;
            best = k;
        }
    }
    const auto it = bank.w.find(kNewContext);
    if (it != bank.w.end() && it->second > best_w) {
        return kNewContext;
    }
    return best;
}

double predicted_worst_delay(double h, double kl) {
    if (!(kl > 0.0)) {
        throw std::invalid_argument("predicted_worst_delay: KL divergence must be positive");
    }
    return h / kl;
}

void reset(CusumBank& bank) {
    for (auto& [k, w] : bank.w) w = 0.0;
}

}  // namespace mbcd::cpd
