#pragma once

// Single-layer LSTM with a linear readout, scalar input, trained by
// per-window stochastic gradient descent with hand-written backpropagation
// through time.

#include "bloodflow/error.hpp"
#include "bloodflow/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace bloodflow {

struct LstmConfig {
    int lookback = 10;
    int hidden = 16;
    int epochs = 200;
    double learn_rate = 0.01;
    std::uint64_t init_seed = 7;

    void validate() const {
        if (lookback < 1) throw ValidationError("must be at least 1", "lookback");
        if (hidden < 1) throw ValidationError("must be at least 1", "hidden");
        if (epochs < 0) throw ValidationError("must be non-negative", "epochs");
        if (!(learn_rate > 0.0)) throw ValidationError("must be positive", "learn_rate");
    }
};

class Lstm {
public:
    // Gate blocks are stacked input, forget, candidate, output; each is `hidden` rows.
    Lstm(int hidden, std::uint64_t seed) : h_(hidden), params_(parameter_count(hidden)) {
        if (hidden < 1) throw ValidationError("must be at least 1", "hidden");
        Rng rng(seed);
        const double bound = 1.0 / std::sqrt(static_cast<double>(h_));
        for (double& p : params_) p = (2.0 * rng.uniform01() - 1.0) * bound;
        for (int r = 0; r < 4 * h_; ++r) params_[b_off() + r] = 0.0;
        for (int r = h_; r < 2 * h_; ++r) params_[b_off() + r] = 1.0;
        params_[bout_off()] = 0.0;
    }

    static std::size_t parameter_count(int hidden) {
        const auto h = static_cast<std::size_t>(hidden);
        return 4 * h + 4 * h * h + 4 * h + h + 1;
    }

    int hidden() const noexcept { return h_; }
    std::span<double> parameters() noexcept { return params_; }
    std::span<const double> parameters() const noexcept { return params_; }

    double predict(std::span<const double> inputs) const {
        Trace tr;
        return forward(inputs, tr);
    }

    // Squared-error loss 0.5 * (y - target)^2; its gradient is added into `grad`.
    double loss_and_gradient(std::span<const double> inputs, double target, std::span<double> grad) const {
        Trace tr;
        const double y = forward(inputs, tr);
        const double dy = y - target;
        const int H = h_;
        const std::size_t T = inputs.size();

        std::vector<double> dh(H), dc(H, 0.0), dz(4 * H), dh_prev(H);
        const double* h_last = tr.h.data() + T * H;
        for (int k = 0; k < H; ++k) {
            grad[wout_off() + k] += dy * h_last[k];
            dh[k] = dy * params_[wout_off() + k];
        }
        grad[bout_off()] += dy;

        for (std::size_t t = T; t-- > 0;) {
            const double* gates = tr.gates.data() + t * 4 * H;
            const double* c_prev = tr.c.data() + t * H;
            const double* c_cur = tr.c.data() + (t + 1) * H;
            const double* h_prev = tr.h.data() + t * H;
            for (int k = 0; k < H; ++k) {
                const double i = gates[k], f = gates[H + k], g = gates[2 * H + k], o = gates[3 * H + k];
                const double tc = std::tanh(c_cur[k]);
                const double d_o = dh[k] * tc;
                dc[k] += dh[k] * o * (1.0 - tc * tc);
                dz[k] = dc[k] * g * i * (1.0 - i);
                dz[H + k] = dc[k] * c_prev[k] * f * (1.0 - f);
                dz[2 * H + k] = dc[k] * i * (1.0 - g * g);
                dz[3 * H + k] = d_o * o * (1.0 - o);
                dc[k] *= f;
            }
            std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
            for (int r = 0; r < 4 * H; ++r) {
                grad[wx_off() + r] += dz[r] * inputs[t];
                grad[b_off() + r] += dz[r];
                const std::size_t row = wh_off() + static_cast<std::size_t>(r) * H;
                for (int k = 0; k < H; ++k) {
                    grad[row + k] += dz[r] * h_prev[k];
                    dh_prev[k] += params_[row + k] * dz[r];
                }
            }
            dh.swap(dh_prev);
        }
        return 0.5 * dy * dy;
    }

private:
    struct Trace {
        std::vector<double> h, c, gates;  // h and c hold T+1 states, starting at zero
    };

    std::size_t wx_off() const noexcept { return 0; }
    std::size_t wh_off() const noexcept { return 4 * static_cast<std::size_t>(h_); }
    std::size_t b_off() const noexcept { return wh_off() + 4 * static_cast<std::size_t>(h_) * h_; }
    std::size_t wout_off() const noexcept { return b_off() + 4 * static_cast<std::size_t>(h_); }
    std::size_t bout_off() const noexcept { return wout_off() + static_cast<std::size_t>(h_); }

    static double sigmoid(double z) noexcept { return 1.0 / (1.0 + std::exp(-z)); }

    double forward(std::span<const double> inputs, Trace& tr) const {
        const int H = h_;
        const std::size_t T = inputs.size();
        tr.h.assign((T + 1) * H, 0.0);
        tr.c.assign((T + 1) * H, 0.0);
        tr.gates.assign(T * 4 * H, 0.0);
        for (std::size_t t = 0; t < T; ++t) {
            const double* h_prev = tr.h.data() + t * H;
            const double* c_prev = tr.c.data() + t * H;
            double* gates = tr.gates.data() + t * 4 * H;
            for (int r = 0; r < 4 * H; ++r) {
                double z = params_[wx_off() + r] * inputs[t] + params_[b_off() + r];
                const std::size_t row = wh_off() + static_cast<std::size_t>(r) * H;
                for (int k = 0; k < H; ++k) z += params_[row + k] * h_prev[k];
                gates[r] = (r >= 2 * H && r < 3 * H) ? std::tanh(z) : sigmoid(z);
            }
            double* c_cur = tr.c.data() + (t + 1) * H;
            double* h_cur = tr.h.data() + (t + 1) * H;
            for (int k = 0; k < H; ++k) {
                c_cur[k] = gates[H + k] * c_prev[k] + gates[k] * gates[2 * H + k];
                h_cur[k] = gates[3 * H + k] * std::tanh(c_cur[k]);
            }
        }
        double y = params_[bout_off()];
        const double* h_last = tr.h.data() + T * H;
        for (int k = 0; k < H; ++k) y += params_[wout_off() + k] * h_last[k];
        return y;
    }

    int h_;
    std::vector<double> params_;
};

// Trains on sliding windows of the (already normalized) series, one SGD step per
// window, windows visited in chronological order every epoch.
inline void train_lstm(Lstm& net, std::span<const double> series, const LstmConfig& cfg) {
    cfg.validate();
    const auto lookback = static_cast<std::size_t>(cfg.lookback);
    if (series.size() <= lookback) throw ValidationError("must exceed lookback", "series");
    std::vector<double> grad(net.parameters().size());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (std::size_t t = lookback; t < series.size(); ++t) {
            std::fill(grad.begin(), grad.end(), 0.0);
            const double loss = net.loss_and_gradient(series.subspan(t - lookback, lookback), series[t], grad);
            if (!std::isfinite(loss))
                throw ModelError("LSTM loss became non-finite at epoch " + std::to_string(epoch) +
                                 " with learn_rate " + std::to_string(cfg.learn_rate) +
                                 "; retry with a smaller learning rate");
            epoch_loss += loss;
            auto p = net.parameters();
            for (std::size_t i = 0; i < p.size(); ++i) p[i] -= cfg.learn_rate * grad[i];
        }
        if (!std::isfinite(epoch_loss))
            throw ModelError("LSTM epoch loss non-finite; retry with a smaller learning rate");
    }
}

}  // namespace bloodflow
