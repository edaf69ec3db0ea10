#pragma once

// The HolUE calibration head: a 2 -> 16 -> 16 -> 1 perceptron (tanh hidden
// layers, sigmoid output) mapping normalized (kl1, kl2) to the probability
// that the recognition decision is correct.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "osrue/error.hpp"
#include "osrue/holue.hpp"

namespace osrue {

enum class Label : std::uint8_t { error = 0, correct = 1 };

struct MlpHyper {
    double learning_rate = 0.05;
    double momentum = 0.9;
    int epochs = 2000;
    double init_range = 0.5;  // weights ~ U(-init_range, init_range), biases 0
};

struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weights;  // row-major, out x in
    std::vector<double> biases;

    DenseLayer() = default;
    DenseLayer(std::size_t n_in, std::size_t n_out)
        : in(n_in), out(n_out), weights(n_in * n_out, 0.0), biases(n_out, 0.0) {}

    double w(std::size_t o, std::size_t i) const { return weights[o * in + i]; }
};

class MlpCalibrator {
public:
    static constexpr std::array<std::size_t, 4> kSizes = {2, 16, 16, 1};

    /// All parameters zero: predicts 0.5 everywhere.
    MlpCalibrator() {
        for (std::size_t l = 0; l + 1 < kSizes.size(); ++l) layers_.emplace_back(kSizes[l], kSizes[l + 1]);
    }

    static MlpCalibrator random(std::uint64_t seed, const MlpHyper& hyper) {
        MlpCalibrator net;
        net.hyper_ = hyper;
        net.seed_ = seed;
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(-hyper.init_range, hyper.init_range);
        for (auto& layer : net.layers_)
            for (double& w : layer.weights) w = u(rng);
        return net;
    }

    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
    std::vector<DenseLayer>& layers() noexcept { return layers_; }
    const MlpHyper& hyper() const noexcept { return hyper_; }
    std::uint64_t seed() const noexcept { return seed_; }
    void set_training_record(const MlpHyper& hyper, std::uint64_t seed) {
        hyper_ = hyper;
        seed_ = seed;
    }

    std::size_t num_params() const {
        std::size_t n = 0;
        for (const auto& l : layers_) n += l.weights.size() + l.biases.size();
        return n;
    }

    std::vector<double> flat() const {
        std::vector<double> p;
        p.reserve(num_params());
        for (const auto& l : layers_) {
            p.insert(p.end(), l.weights.begin(), l.weights.end());
            p.insert(p.end(), l.biases.begin(), l.biases.end());
        }
        return p;
    }

    void set_flat(std::span<const double> p) {
        if (p.size() != num_params()) throw Error(Errc::schema, "parameter count mismatch");
        std::size_t k = 0;
        for (auto& l : layers_) {
            for (double& w : l.weights) w = p[k++];
            for (double& b : l.biases) b = p[k++];
        }
    }

    /// Output logit for one input.
    double logit(double x1, double x2) const {
        std::vector<double> a = {x1, x2};
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const auto& layer = layers_[l];
            std::vector<double> z(layer.out);
            for (std::size_t o = 0; o < layer.out; ++o) {
                double s = layer.biases[o];
                for (std::size_t i = 0; i < layer.in; ++i) s += layer.w(o, i) * a[i];
                z[o] = l + 1 < layers_.size() ? std::tanh(s) : s;
            }
            a = std::move(z);
        }
        return a[0];
    }

    double predict(double x1, double x2) const { return sigmoid(logit(x1, x2)); }

    /// Mean binary cross-entropy with target 1 = correct.
    double loss(std::span<const NormalizedKl> x, std::span<const Label> y) const {
        double total = 0.0;
        for (std::size_t n = 0; n < x.size(); ++n) {
            const double z = logit(x[n].kl1n, x[n].kl2n);
            // -log sigmoid(z) = softplus(-z); -log(1 - sigmoid(z)) = softplus(z)
            total += y[n] == Label::correct ? softplus(-z) : softplus(z);
        }
        return total / static_cast<double>(x.size());
    }

    /// Gradient of loss() with respect to flat(), by backpropagation.
    std::vector<double> gradient(std::span<const NormalizedKl> x, std::span<const Label> y) const {
        std::vector<std::vector<double>> gw(layers_.size()), gb(layers_.size());
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            gw[l].assign(layers_[l].weights.size(), 0.0);
            gb[l].assign(layers_[l].biases.size(), 0.0);
        }
        const double inv_n = 1.0 / static_cast<double>(x.size());
        std::vector<std::vector<double>> acts(layers_.size() + 1);
        for (std::size_t n = 0; n < x.size(); ++n) {
            acts[0] = {x[n].kl1n, x[n].kl2n};
            for (std::size_t l = 0; l < layers_.size(); ++l) {
                const auto& layer = layers_[l];
                acts[l + 1].assign(layer.out, 0.0);
                for (std::size_t o = 0; o < layer.out; ++o) {
                    double s = layer.biases[o];
                    for (std::size_t i = 0; i < layer.in; ++i) s += layer.w(o, i) * acts[l][i];
                    acts[l + 1][o] = l + 1 < layers_.size() ? std::tanh(s) : s;
                }
            }
            const double target = y[n] == Label::correct ? 1.0 : 0.0;
            std::vector<double> delta = {(sigmoid(acts.back()[0]) - target) * inv_n};
            for (std::size_t l = layers_.size(); l-- > 0;) {
                const auto& layer = layers_[l];
                for (std::size_t o = 0; o < layer.out; ++o) {
                    gb[l][o] += delta[o];
                    for (std::size_t i = 0; i < layer.in; ++i) gw[l][o * layer.in + i] += delta[o] * acts[l][i];
                }
                if (l == 0) break;
                std::vector<double> prev(layer.in, 0.0);
                for (std::size_t i = 0; i < layer.in; ++i) {
                    double s = 0.0;
                    for (std::size_t o = 0; o < layer.out; ++o) s += layer.w(o, i) * delta[o];
                    const double a = acts[l][i];  // tanh output
                    prev[i] = s * (1.0 - a * a);
                }
                delta = std::move(prev);
            }
        }
        std::vector<double> g;
        g.reserve(num_params());
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            g.insert(g.end(), gw[l].begin(), gw[l].end());
            g.insert(g.end(), gb[l].begin(), gb[l].end());
        }
        return g;
    }

    static double sigmoid(double z) {
        if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
        const double e = std::exp(z);
        return e / (1.0 + e);
    }

private:
    static double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

    std::vector<DenseLayer> layers_;
    MlpHyper hyper_{};
    std::uint64_t seed_ = 0;
};

namespace holue {

/// Full-batch gradient descent with momentum on binary cross-entropy.
inline MlpCalibrator fit_mlp(std::span<const NormalizedKl> features, std::span<const Label> labels,
                             const MlpHyper& hyper, std::uint64_t seed) {
    if (features.size() != labels.size())
        throw Error(Errc::training, "feature and label counts differ");
    bool has_error = false, has_correct = false;
    for (Label l : labels) (l == Label::correct ? has_correct : has_error) = true;
    if (!has_error || !has_correct)
        throw Error(Errc::training, "training labels must contain both error and correct examples");
    for (const auto& f : features)
        if (!std::isfinite(f.kl1n) || !std::isfinite(f.kl2n))
            throw Error(Errc::training, "non-finite training feature");

    auto net = MlpCalibrator::random(seed, hyper);
    auto params = net.flat();
    std::vector<double> velocity(params.size(), 0.0);
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        const auto g = net.gradient(features, labels);
        for (std::size_t i = 0; i < params.size(); ++i) {
            velocity[i] = hyper.momentum * velocity[i] - hyper.learning_rate * g[i];
            params[i] += velocity[i];
        }
        net.set_flat(params);
    }
    return net;
}

inline double mlp_predict(const MlpCalibrator& cal, double kl1n, double kl2n) {
    return cal.predict(kl1n, kl2n);
}

}  // namespace holue
}  // namespace osrue
