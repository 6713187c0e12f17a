#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "sdi/network.hpp"

namespace sdi::nn {

/// Step size, regularization and schedule knobs shared by every training run.
struct Hyper {
    double eta = 0.0001;        // SGD step size
    double l2 = 0.0005;         // L2 strength (penalty l2 * ||theta||^2)
    double dropout = 0.5;
    std::size_t batch_size = 32;
    std::size_t iterations = 10000;
    std::uint64_t seed = 1;

    void validate() const {
        if (eta <= 0) throw std::invalid_argument("eta must be > 0");
        if (l2 < 0) throw std::invalid_argument("l2 must be >= 0");
        if (dropout < 0 || dropout >= 1) throw std::invalid_argument("dropout must be in [0,1)");
        if (batch_size < 1 || iterations < 1)
            throw std::invalid_argument("batch_size and iterations must be positive");
    }
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <typename T>
struct TrainSet {
    std::vector<Tensor<T>> images;
    std::vector<std::size_t> labels;
};

struct TrainStats {
    std::size_t iterations_run = 0;
    double final_loss = 0.0;
    std::vector<double> loss_history;  // one entry per iteration (batch mean NLL)
};

template <typename T>
double training_accuracy(Network<T>& net, const TrainSet<T>& data) {
    std::size_t hit = 0;
    Rng rng(1);
    for (std::size_t i = 0; i < data.images.size(); ++i) {
        auto tr = forward(net, data.images[i], Mode::EVAL, rng);
        std::size_t best = 0;
        for (std::size_t k = 1; k < tr.probs.size(); ++k)
            if (tr.probs[k] > tr.probs[best]) best = k;
        hit += best == data.labels[i];
    }
    return static_cast<double>(hit) / static_cast<double>(data.images.size());
}

/// Mini-batch SGD. Batch gradients are averaged in sample order, so a fixed
/// seed gives a bit-identical parameter trajectory. Dropout masks come from a
/// stream derived per (iteration, batch slot). Throws NumericError on NaN loss.
///
/// `stop` (optional) is polled every `check_every` iterations with the current
/// iteration count; returning true ends training early.
template <typename T>
TrainStats train(Network<T>& net, const TrainSet<T>& data, const Hyper& hyper,
                 std::function<bool(std::size_t)> stop = nullptr,
                 std::size_t check_every = 25) {
    hyper.validate();
    if (data.images.empty()) throw std::invalid_argument("train: empty dataset");
    Rng sampler = Rng::derive(hyper.seed, 0xba7c4);
    TrainStats stats;
    const std::size_t n = data.images.size();
    for (std::size_t it = 0; it < hyper.iterations; ++it) {
        GradientSet<T> acc = zero_gradients(net);
        double batch_loss = 0;
        for (std::size_t s = 0; s < hyper.batch_size; ++s) {
            const std::size_t idx = sampler.uniform_int(n);
            Rng drop_rng = Rng::derive(hyper.seed, it + 1, s + 1);
            auto tr = forward(net, data.images[idx], Mode::TRAIN, drop_rng);
            batch_loss += static_cast<double>(nll_loss(tr.probs, data.labels[idx]));
            auto g = backward(net, tr, data.labels[idx], 0.0);
            accumulate(acc, g, T(1.0 / hyper.batch_size));
        }
        batch_loss /= static_cast<double>(hyper.batch_size);
        if (!std::isfinite(batch_loss)) throw NumericError("non-finite training loss");
        if (hyper.l2 > 0) {
            auto ps = net.params();
            for (std::size_t i = 0; i < ps.size(); ++i)
                for (std::size_t j = 0; j < ps[i]->size(); ++j)
                    acc[i].data[j] += T(2.0 * hyper.l2) * ps[i]->data[j];
        }
        sgd_step(net, acc, hyper.eta);
        stats.loss_history.push_back(batch_loss);
        stats.final_loss = batch_loss;
        stats.iterations_run = it + 1;
        if (stop && (it + 1) % check_every == 0 && stop(it + 1)) break;
    }
    return stats;
}

}  // namespace sdi::nn
