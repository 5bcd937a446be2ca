#include "mbcd/net.hpp"

#include <cmath>
#include <stdexcept>

namespace mbcd::nn {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}

DenseNetwork::DenseNetwork(const std::vector<std::size_t>& dims, Rng& rng) {
    if (dims.size() < 2) {
        throw std::invalid_argument("DenseNetwork: need at least input and output dims");
    }
    layers_.resize(dims.size() - 1);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Layer& layer = layers_[l];
        layer.in = dims[l];
        layer.out = dims[l + 1];
        layer.w.resize(layer.in * layer.out);
        layer.b.assign(layer.out, 0.0);
        const double limit = std::sqrt(6.0 / static_cast<double>(layer.in));
        for (double& w : layer.w) w = rng.uniform(-limit, limit);
    }
}

Vec DenseNetwork::forward(const Vec& x) const {
    Tape tape;
    return forward(x, tape);
}

Vec DenseNetwork::forward(const Vec& x, Tape& tape) const {
    if (x.size() != input_dim()) {
        throw std::invalid_argument("DenseNetwork::forward: input width mismatch");
    }
    tape.inputs.assign(layers_.size(), {});
    tape.pre.assign(layers_.size(), {});
    Vec act = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        tape.inputs[l] = act;
        Vec z(layer.out);
        for (std::size_t o = 0; o < layer.out; ++o) {
            const double* row = layer.w.data() + o * layer.in;
            double s = layer.b[o];
            for (std::size_t i = 0; i < layer.in; ++i) s += row[i] * act[i];
            z[o] = s;
        }
        tape.pre[l] = z;
        if (l + 1 < layers_.size()) {
            for (double& v : z) v = v > 0.0 ? v : 0.0;
        }
        act = std::move(z);
    }
    return act;
}

Vec DenseNetwork::backward(const Tape& tape, const Vec& dy, Vec* grad) const {
    if (tape.pre.size() != layers_.size()) {
        throw std::invalid_argument("DenseNetwork::backward: tape does not match network");
    }
    if (dy.size() != output_dim()) {
        throw std::invalid_argument("DenseNetwork::backward: upstream gradient width mismatch");
    }
    if (grad && grad->size() != param_count()) {
        throw std::invalid_argument("DenseNetwork::backward: gradient buffer size mismatch");
    }

    // Offsets of each layer's block in the flat parameter vector.
    std::vector<std::size_t> offsets(layers_.size());
    std::size_t off = 0;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        offsets[l] = off;
        off += layers_[l].in * layers_[l].out + layers_[l].out;
    }

    Vec delta = dy;
    for (std::size_t li = layers_.size(); li-- > 0;) {
        const Layer& layer = layers_[li];
        if (li + 1 < layers_.size()) {
            // Gradient through the rectifier of this layer's output.
            for (std::size_t o = 0; o < layer.out; ++o) {
                if (tape.pre[li][o] <= 0.0) delta[o] = 0.0;
            }
        }
        const Vec& input = tape.inputs[li];
        if (grad) {
            double* gw = grad->data() + offsets[li];
            double* gb = gw + layer.in * layer.out;
            for (std::size_t o = 0; o < layer.out; ++o) {
                const double d = delta[o];
                double* row = gw + o * layer.in;
                for (std::size_t i = 0; i < layer.in; ++i) row[i] += d * input[i];
                gb[o] += d;
            }
        }
        Vec dx(layer.in, 0.0);
        for (std::size_t o = 0; o < layer.out; ++o) {
            const double d = delta[o];
            const double* row = layer.w.data() + o * layer.in;
            for (std::size_t i = 0; i < layer.in; ++i) dx[i] += d * row[i];
        }
        delta = std::move(dx);
    }
    return delta;
}

std::size_t DenseNetwork::param_count() const {
    std::size_t n = 0;
    for (const Layer& l : layers_) n += l.in * l.out + l.out;
    return n;
}

Vec DenseNetwork::params() const {
    Vec flat;
    flat.reserve(param_count());
    for (const Layer& l : layers_) {
        flat.insert(flat.end(), l.w.begin(), l.w.end());
        flat.insert(flat.end(), l.b.begin(), l.b.end());
    }
    return flat;
}

void DenseNetwork::set_params(const Vec& flat) {
    if (flat.size() != param_count()) {
        throw std::invalid_argument("DenseNetwork::set_params: size mismatch");
    }
    std::size_t off = 0;
    for (Layer& l : layers_) {
        std::copy(flat.begin() + off, flat.begin() + off + l.w.size(), l.w.begin());
        off += l.w.size();
        std::copy(flat.begin() + off, flat.begin() + off + l.b.size(), l.b.begin());
        off += l.b.size();
    }
}

bool DenseNetwork::finite() const {
    for (const Layer& l : layers_) {
        for (double w : l.w) {
            if (!std::isfinite(w)) return false;
        }
        for (double b : l.b) {
            if (!std::isfinite(b)) return false;
        }
    }
    return true;
}

void adam_step(AdamState& state, Vec& params, const Vec& grads) {
    if (params.size() != grads.size() || state.m.size() != params.size()) {
        throw std::invalid_argument("adam_step: shape mismatch");
    }
    ++state.step;
    const AdamConfig& c = state.cfg;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * grads[i];
        state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * grads[i] * grads[i];
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
}

void adam_step(AdamState& state, DenseNetwork& net, const Vec& grads) {
    Vec p = net.params();
    adam_step(state, p, grads);
    net.set_params(p);
}

gauss::DiagonalGaussian GaussianHead::to_gaussian(const Vec& raw) const {
    if (raw.size() % 2 != 0) {
        throw std::invalid_argument("GaussianHead: raw output width must be even");
    }
    const std::size_t d = raw.size() / 2;
    gauss::DiagonalGaussian g;
    g.mean.assign(raw.begin(), raw.begin() + d);
    g.var.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
        double lv = raw[d + i];
        lv = lv < lv_min ? lv_min : (lv > lv_max ? lv_max : lv);
        g.var[i] = std::exp(lv);
    }
    return g;
}

double GaussianHead::nll(const Vec& raw, const Vec& y, Vec* d_raw) const {
    const std::size_t d = raw.size() / 2;
    if (y.size() != d) {
        throw std::invalid_argument("GaussianHead::nll: target width mismatch");
    }
    if (d_raw) d_raw->assign(raw.size(), 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const bool lo = raw[d + i] < lv_min;
        const bool hi = raw[d + i] > lv_max;
        const double lv = lo ? lv_min : (hi ? lv_max : raw[d + i]);
        const double inv_v = std::exp(-lv);
        const double err = y[i] - raw[i];
        loss += 0.5 * (kLog2Pi + lv + err * err * inv_v);
        if (d_raw) {
            (*d_raw)[i] = -err * inv_v;
            (*d_raw)[d + i] = (lo || hi) ? 0.0 : 0.5 * (1.0 - err * err * inv_v);
        }
    }
    return loss;
}

}  // namespace mbcd::nn
