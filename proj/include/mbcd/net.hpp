#pragma once

#include <cstddef>
#include <vector>

#include "mbcd/gaussian.hpp"
#include "mbcd/rng.hpp"

namespace mbcd::nn {

// One dense layer, weights stored row-major (out x in).
struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    Vec w;
    Vec b;
};

// Fully-connected network with rectified-linear hidden activations and a
// linear output layer. Parameters are exposed as one flat vector (per layer:
// weights row-major, then bias) so optimizers and serialization work on a
// single contiguous view.
class DenseNetwork {
public:
    DenseNetwork() = default;

    // dims = {input, hidden..., output}. He-style uniform init, zero biases.
    DenseNetwork(const std::vector<std::size_t>& dims, Rng& rng);

    Vec forward(const Vec& x) const;

    // Cached activations for one forward pass; consumed by backward().
    struct Tape {
        std::vector<Vec> inputs;  // input fed to each layer
        std::vector<Vec> pre;     // pre-activation output of each layer
    };

    Vec forward(const Vec& x, Tape& tape) const;

    // Backpropagates the upstream gradient dy through the cached pass.
    // Accumulates parameter gradients into *grad (flat layout) when non-null
    // and returns the gradient with respect to the input.
    Vec backward(const Tape& tape, const Vec& dy, Vec* grad) const;

    std::size_t input_dim() const { return layers_.empty() ? 0 : layers_.front().in; }
    std::size_t output_dim() const { return layers_.empty() ? 0 : layers_.back().out; }
    std::size_t param_count() const;

    Vec params() const;
    void set_params(const Vec& flat);

    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }

    bool finite() const;

private:
    std::vector<Layer> layers_;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Per-parameter first/second moment accumulators plus the step counter.
struct AdamState {
    AdamConfig cfg;
    Vec m;
    Vec v;
    long step = 0;

    AdamState() = default;
    AdamState(std::size_t n, const AdamConfig& c) : cfg(c), m(n, 0.0), v(n, 0.0) {}

    bool second_moments_nonnegative() const {
        for (double x : v) {
            if (x < 0.0) return false;
        }
        return true;
    }
};

// One bias-corrected Adam update: params -= lr * m_hat / (sqrt(v_hat) + eps).
void adam_step(AdamState& state, Vec& params, const Vec& grads);
void adam_step(AdamState& state, DenseNetwork& net, const Vec& grads);

// Interprets a raw network output of width 2d as (mean, log-variance) of a
// diagonal Gaussian, with the log-variance clamped to [lv_min, lv_max].
struct GaussianHead {
    double lv_min = -10.0;
    double lv_max = 4.0;

    gauss::DiagonalGaussian to_gaussian(const Vec& raw) const;

    // Negative log-likelihood of y under to_gaussian(raw). When d_raw is
    // non-null it receives the gradient of the NLL with respect to raw;
    // clamped log-variance entries get zero gradient.
    double nll(const Vec& raw, const Vec& y, Vec* d_raw) const;
};

}  // namespace mbcd::nn
