#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "sdi/layers.hpp"

namespace sdi::nn {

struct ReluStep {};
struct PoolStep {};

template <typename T>
using BranchStep = std::variant<ConvLayer<T>, ReluStep, PoolStep>;

/// Ordered layer graph: one branch fed the full H x W x 3 image, or three
/// branches fed the R/G/B planes and joined by channel concatenation, then a
/// shared FC1 -> FC2 -> classifier head under softmax.
template <typename T>
struct Network {
    std::string arch_id;        // "s1", "s2", "s3", "ms"
    std::size_t num_classes = 2;
    std::size_t input_side = 256;
    std::vector<std::vector<BranchStep<T>>> branches;
    FcLayer<T> fc1, fc2, fc_out;
    double dropout_rate = 0.5;  // after fc1/fc2 activations, TRAIN mode only

    bool is_multispectral() const { return branches.size() == 3; }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (auto* t : const_cast<Network*>(this)->params()) n += t->size();
        return n;
    }

    /// Parameter tensors in a fixed enumeration order (biases as rank-1).
    std::vector<Tensor<T>*> params() {
        std::vector<Tensor<T>*> out;
        for (auto& br : branches)
            for (auto& step : br)
                if (auto* conv = std::get_if<ConvLayer<T>>(&step)) {
                    out.push_back(&conv->kernels);
                    out.push_back(&conv->bias);
                }
        for (FcLayer<T>* fc : {&fc1, &fc2, &fc_out}) {
            out.push_back(&fc->weights);
            out.push_back(&fc->bias);
        }
        return out;
    }

    template <typename U>
    Network<U> cast() const {
        Network<U> out;
        out.arch_id = arch_id;
        out.num_classes = num_classes;
        out.input_side = input_side;
        out.dropout_rate = dropout_rate;
        for (const auto& br : branches) {
            std::vector<BranchStep<U>> nbr;
            for (const auto& step : br) {
                if (const auto* conv = std::get_if<ConvLayer<T>>(&step)) {
                    ConvLayer<U> c;
                    c.kernels = conv->kernels.template cast<U>();
                    c.bias = conv->bias.template cast<U>();
                    c.stride = conv->stride;
                    nbr.emplace_back(std::move(c));
                } else if (std::holds_alternative<ReluStep>(step)) {
                    nbr.emplace_back(ReluStep{});
                } else {
                    nbr.emplace_back(PoolStep{});
                }
            }
            out.branches.push_back(std::move(nbr));
        }
        auto cast_fc = [](const FcLayer<T>& f) {
            FcLayer<U> g;
            g.weights = f.weights.template cast<U>();
            g.bias = f.bias.template cast<U>();
            return g;
        };
        out.fc1 = cast_fc(fc1);
        out.fc2 = cast_fc(fc2);
        out.fc_out = cast_fc(fc_out);
        return out;
    }
};

/// One gradient tensor per parameter tensor, in params() order.
template <typename T>
using GradientSet = std::vector<Tensor<T>>;

template <typename T>
GradientSet<T> zero_gradients(Network<T>& net) {
    GradientSet<T> g;
    for (auto* t : net.params()) g.emplace_back(t->dims);
    return g;
}

// ---------------------------------------------------------------------------
// Forward trace: everything backward needs (im2col buffers, pool argmax,
// relu and dropout masks, FC inputs).
// ---------------------------------------------------------------------------

template <typename T>
struct BranchStepCache {
    ConvCache<T> conv;
    PoolCache pool;
    std::vector<std::uint8_t> relu_mask;
};

template <typename T>
struct Trace {
    std::vector<std::vector<BranchStepCache<T>>> branch_caches;
    std::vector<Tensor<T>> branch_outputs;   // pre-concat features
    std::vector<T> flat;                     // concatenated, flattened
    std::vector<T> fc1_out, fc1_act, fc2_in, fc2_out, fc2_act, fc3_in, logits;
    std::vector<std::uint8_t> relu1_mask, relu2_mask, drop1_mask, drop2_mask;
    std::vector<T> probs;
    Mode mode = Mode::EVAL;
    bool valid = false;
};

template <typename T>
Tensor<T> extract_plane(const Tensor<T>& image, std::size_t channel) {
    Tensor<T> out({image.dims[0], image.dims[1], 1});
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data[i] = image.data[i * image.dims[2] + channel];
    return out;
}

/// Channel-stack equally sized feature maps (branch order R, G, B).
template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts) {
    const std::size_t H = parts[0].dims[0], W = parts[0].dims[1];
    std::size_t totC = 0;
    for (const auto& p : parts) {
        if (p.dims[0] != H || p.dims[1] != W)
            throw std::invalid_argument("concat: spatial mismatch");
        totC += p.dims[2];
    }
    Tensor<T> out({H, W, totC});
    for (std::size_t pos = 0; pos < H * W; ++pos) {
        std::size_t off = 0;
        for (const auto& p : parts) {
            const std::size_t C = p.dims[2];
            for (std::size_t c = 0; c < C; ++c)
                out.data[pos * totC + off + c] = p.data[pos * C + c];
            off += C;
        }
    }
    return out;
}

template <typename T>
Tensor<T> run_branch(const std::vector<BranchStep<T>>& branch, Tensor<T> x,
                     std::vector<BranchStepCache<T>>* caches) {
    if (caches) caches->resize(branch.size());
    for (std::size_t i = 0; i < branch.size(); ++i) {
        BranchStepCache<T>* cc = caches ? &(*caches)[i] : nullptr;
        if (const auto* conv = std::get_if<ConvLayer<T>>(&branch[i])) {
            x = conv2d_forward(x, *conv, cc ? &cc->conv : nullptr);
        } else if (std::holds_alternative<ReluStep>(branch[i])) {
            x = relu_forward(x, cc ? &cc->relu_mask : nullptr);
        } else {
            x = maxpool2d_forward(x, cc ? &cc->pool : nullptr);
        }
    }
    return x;
}

/// Full forward pass. `rng` drives the dropout masks (TRAIN mode only).
template <typename T>
Trace<T> forward(Network<T>& net, const Tensor<T>& image, Mode mode, Rng& rng) {
    if (image.rank() != 3 || image.dims[0] != net.input_side ||
        image.dims[1] != net.input_side || image.dims[2] != 3)
        throw std::invalid_argument("forward: image shape mismatch");

    Trace<T> tr;
    tr.mode = mode;
    tr.branch_caches.resize(net.branches.size());
    for (std::size_t b = 0; b < net.branches.size(); ++b) {
        Tensor<T> in = net.is_multispectral() ? extract_plane(image, b) : image;
        tr.branch_outputs.push_back(
            run_branch(net.branches[b], std::move(in), &tr.branch_caches[b]));
    }
    Tensor<T> feat = net.is_multispectral() ? concat_channels(tr.branch_outputs)
                                            : tr.branch_outputs[0];
    tr.flat = feat.data;  // row-major H, W, C flatten

    const double rate = mode == Mode::TRAIN ? net.dropout_rate : 0.0;
    auto dropout_vec = [&](const std::vector<T>& v, std::vector<std::uint8_t>& mask) {
        Tensor<T> t({v.size()});
        t.data = v;
        Tensor<T> o = dropout_forward(t, rate, mode, rng, &mask);
        return o.data;
    };
    auto relu_vec = [](const std::vector<T>& v, std::vector<std::uint8_t>& mask) {
        Tensor<T> t({v.size()});
        t.data = v;
        Tensor<T> o = relu_forward(t, &mask);
        return o.data;
    };

    tr.fc1_out = fc_forward(tr.flat, net.fc1);
    tr.fc1_act = relu_vec(tr.fc1_out, tr.relu1_mask);
    tr.fc2_in = dropout_vec(tr.fc1_act, tr.drop1_mask);
    tr.fc2_out = fc_forward(tr.fc2_in, net.fc2);
    tr.fc2_act = relu_vec(tr.fc2_out, tr.relu2_mask);
    tr.fc3_in = dropout_vec(tr.fc2_act, tr.drop2_mask);
    tr.logits = fc_forward(tr.fc3_in, net.fc_out);
    tr.probs = softmax(tr.logits);
    tr.valid = true;
    return tr;
}

/// -ln p[label] + l2 * sum of squared parameters.
template <typename T>
T loss(Network<T>& net, const Trace<T>& tr, std::size_t label, double l2) {
    T penalty = T(0);
    if (l2 > 0) {
        for (auto* t : net.params())
            for (T v : t->data) penalty += v * v;
    }
    return nll_loss(tr.probs, label) + T(l2) * penalty;
}

/// Gradients of loss() w.r.t. every parameter, in params() order.
/// The L2 term contributes 2 * l2 * theta.
template <typename T>
GradientSet<T> backward(Network<T>& net, Trace<T>& tr, std::size_t label, double l2) {
    if (!tr.valid) throw std::logic_error("backward: missing forward caches");
    if (label >= net.num_classes) throw std::out_of_range("backward: label out of range");

    GradientSet<T> grads = zero_gradients(net);
    // gradient slots per branch: 2 per conv (kernels, bias)
    std::vector<std::size_t> branch_grad_base(net.branches.size());
    std::size_t slot = 0;
    for (std::size_t b = 0; b < net.branches.size(); ++b) {
        branch_grad_base[b] = slot;
        for (const auto& step : net.branches[b])
            if (std::holds_alternative<ConvLayer<T>>(step)) slot += 2;
    }
    const std::size_t fc_base = slot;

    const double rate = tr.mode == Mode::TRAIN ? net.dropout_rate : 0.0;

    std::vector<T> dlogits = tr.probs;
    dlogits[label] -= T(1);

    auto vec_to_t = [](const std::vector<T>& v) {
        Tensor<T> t({v.size()});
        t.data = v;
        return t;
    };

    Tensor<T> dw;
    Tensor<T> db;
    std::vector<T> d = fc_backward(net.fc_out, tr.fc3_in, dlogits, dw, db);
    grads[fc_base + 4] = std::move(dw);
    grads[fc_base + 5] = std::move(db);
    d = dropout_backward(tr.drop2_mask, rate, vec_to_t(d)).data;
    d = relu_backward(tr.relu2_mask, vec_to_t(d)).data;
    d = fc_backward(net.fc2, tr.fc2_in, d, dw, db);
    grads[fc_base + 2] = std::move(dw);
    grads[fc_base + 3] = std::move(db);
    d = dropout_backward(tr.drop1_mask, rate, vec_to_t(d)).data;
    d = relu_backward(tr.relu1_mask, vec_to_t(d)).data;
    d = fc_backward(net.fc1, tr.flat, d, dw, db);
    grads[fc_base + 0] = std::move(dw);
    grads[fc_base + 1] = std::move(db);

    // split the flat gradient back into per-branch feature gradients
    const std::size_t H = tr.branch_outputs[0].dims[0];
    const std::size_t W = tr.branch_outputs[0].dims[1];
    std::vector<Tensor<T>> dfeat;
    if (net.is_multispectral()) {
        std::size_t totC = 0;
        for (const auto& bo : tr.branch_outputs) totC += bo.dims[2];
        std::size_t off = 0;
        for (const auto& bo : tr.branch_outputs) {
            const std::size_t C = bo.dims[2];
            Tensor<T> g({H, W, C});
            for (std::size_t pos = 0; pos < H * W; ++pos)
                for (std::size_t c = 0; c < C; ++c)
                    g.data[pos * C + c] = d[pos * totC + off + c];
            dfeat.push_back(std::move(g));
            off += C;
        }
    } else {
        Tensor<T> g(tr.branch_outputs[0].dims);
        g.data = d;
        dfeat.push_back(std::move(g));
    }

    for (std::size_t b = 0; b < net.branches.size(); ++b) {
        Tensor<T> dx = std::move(dfeat[b]);
        std::size_t gslot = branch_grad_base[b];
        // count convs to index gradient slots from the back
        std::size_t conv_idx = 0;
        std::vector<std::size_t> conv_slots;
        for (const auto& step : net.branches[b])
            if (std::holds_alternative<ConvLayer<T>>(step))
                conv_slots.push_back(gslot + 2 * conv_idx++);
        std::size_t conv_seen = conv_slots.size();
        for (std::size_t i = net.branches[b].size(); i-- > 0;) {
            auto& cache = tr.branch_caches[b][i];
            if (const auto* conv = std::get_if<ConvLayer<T>>(&net.branches[b][i])) {
                --conv_seen;
                dx = conv2d_backward(*conv, cache.conv, dx,
                                     grads[conv_slots[conv_seen]],
                                     grads[conv_slots[conv_seen] + 1]);
            } else if (std::holds_alternative<ReluStep>(net.branches[b][i])) {
                dx = relu_backward(cache.relu_mask, dx);
            } else {
                dx = maxpool2d_backward(cache.pool, dx);
            }
        }
    }

    if (l2 > 0) {
        auto ps = net.params();
        for (std::size_t i = 0; i < ps.size(); ++i)
            for (std::size_t j = 0; j < ps[i]->size(); ++j)
                grads[i].data[j] += T(2.0 * l2) * ps[i]->data[j];
    }
    return grads;
}

template <typename T>
void accumulate(GradientSet<T>& into, const GradientSet<T>& g, T scale = T(1)) {
    for (std::size_t i = 0; i < into.size(); ++i)
        for (std::size_t j = 0; j < into[i].size(); ++j)
            into[i].data[j] += scale * g[i].data[j];
}

/// theta' = theta - eta * grad
template <typename T>
void sgd_step(Network<T>& net, const GradientSet<T>& grads, double eta) {
    auto ps = net.params();
    if (ps.size() != grads.size()) throw std::invalid_argument("sgd: gradient set mismatch");
    for (std::size_t i = 0; i < ps.size(); ++i) {
        if (ps[i]->dims != grads[i].dims)
            throw std::invalid_argument("sgd: shape mismatch");
        for (std::size_t j = 0; j < ps[i]->size(); ++j)
            ps[i]->data[j] -= T(eta) * grads[i].data[j];
    }
}

}  // namespace sdi::nn
