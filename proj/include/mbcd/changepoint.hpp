#pragma once

#include <map>
#include <optional>
#include <vector>

#include "mbcd/gaussian.hpp"

namespace mbcd::cpd {

// Candidate id reserved for the new-context hypothesis. Real contexts are
// numbered from 1.
inline constexpr int kNewContext = 0;

// h = |ln alpha| bounds the false alarm rate by alpha.
double threshold_from_alpha(double alpha);

struct DetectorConfig {
    double h = 100.0;
    // Minimum meaningful mean shift, in standard deviations.
    double delta = 2.0;
    // The new-context alternative shifts the mean by delta * diag(Sigma),
    // i.e. delta times the variance. With sqrt_shift the shift becomes
    // delta * sqrt(diag(Sigma)) instead, for sensitivity studies.
    bool sqrt_shift = false;
};

// Per-candidate MCUSUM statistics. W[k] >= 0 for all k; the current context's
// own statistic is pinned at zero by the max-with-zero recursion.
struct CusumBank {
    std::map<int, double> w;  // keyed by candidate id, kNewContext included
    int current = 1;

    void add_candidate(int k) { w.emplace(k, 0.0); }
};

// Per-candidate log-likelihood ratios for one observed transition.
struct LlrRecord {
    std::map<int, double> llr;
    Vec y;
};

struct DetectionEvent {
    long gamma = 0;          // detection time (step index)
    int context = 0;         // selected candidate (kNewContext for "new")
    long true_change = -1;   // known change-point, simulation only
    long delay = -1;         // gamma - true_change when both known
};

// One CUSUM recursion step: max(0, w_prev + l).
double cusum_update(double w_prev, double l);

// Log-likelihood of the synthetic new-context alternative: the observation
// evaluated under a Gaussian whose mean sits delta away from it (in the
// units selected by sqrt_shift) with the current model's covariance.
double new_context_log_likelihood(const gauss::DiagonalGaussian& current_prediction,
                                  const Vec& y, double delta, bool sqrt_shift = false);

// Updates every candidate statistic from this step's predictive densities.
// `predictions` must contain an entry for every known context including
// bank.current; the new-context candidate is built internally.
LlrRecord bank_update(CusumBank& bank, const std::map<int, gauss::DiagonalGaussian>& predictions,
                      const Vec& y, const DetectorConfig& cfg);

// argmax_k W_k over candidates exceeding h, else the current context.
// Ties favor the lowest existing context over the new-context candidate.
int decide_context(const CusumBank& bank, const DetectorConfig& cfg);

// Worst-case expected detection delay h / KL.
double predicted_worst_delay(double h, double kl);

// Zeroes every statistic; the current context is left as-is.
void reset(CusumBank& bank);

}  // namespace mbcd::cpd
