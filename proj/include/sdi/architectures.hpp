#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdi/network.hpp"

namespace sdi::arch {

using nn::BranchStep;
using nn::ConvLayer;
using nn::FcLayer;
using nn::Network;
using nn::PoolStep;
using nn::ReluStep;

struct BuildOptions {
    std::size_t input_side = 256;
    std::size_t fc1_units = 256;
    std::size_t fc2_units = 128;
    double dropout_rate = 0.5;
    std::uint64_t seed = 1;
};

namespace detail {

/// Fan-in scaled Gaussian init (std = sqrt(2/fan_in)), biases zero.
template <typename T>
void init_tensor(Tensor<T>& t, std::size_t fan_in, Rng& rng) {
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& v : t.data) v = static_cast<T>(rng.normal() * std_dev);
}

template <typename T>
ConvLayer<T> make_conv(std::size_t out_c, std::size_t in_c, std::size_t k, Rng& rng) {
    ConvLayer<T> c;
    c.kernels = Tensor<T>({out_c, in_c, k, k});
    c.bias = Tensor<T>({out_c});
    init_tensor(c.kernels, k * k * in_c, rng);
    return c;
}

template <typename T>
FcLayer<T> make_fc(std::size_t out, std::size_t in, Rng& rng) {
    FcLayer<T> f;
    f.weights = Tensor<T>({out, in});
    f.bias = Tensor<T>({out});
    init_tensor(f.weights, in, rng);
    return f;
}

struct ConvSpec {
    std::size_t channels;
    std::size_t ksize;
    bool pool_after;
};

/// Layer plans for the three candidate structures. Channel progression
/// 16/32/32/64/64, truncated to the structure's depth.
inline std::vector<ConvSpec> structure_plan(const std::string& id) {
    if (id == "s1")  // 3 convs, all 3x3, pool after each
        return {{16, 3, true}, {32, 3, true}, {32, 3, true}};
    if (id == "s2")  // 5 convs, all 3x3, pools after conv1/conv3/conv5
        return {{16, 3, true}, {32, 3, false}, {32, 3, true}, {64, 3, false}, {64, 3, true}};
    if (id == "s3")  // conv1 7x7, conv2/3 5x5, conv4/5 3x3
        return {{16, 7, true}, {32, 5, false}, {32, 5, true}, {64, 3, false}, {64, 3, true}};
    throw std::invalid_argument("unknown structure id: " + id);
}

template <typename T>
std::vector<BranchStep<T>> make_branch(const std::vector<ConvSpec>& plan,
                                       std::size_t in_channels, Rng& rng) {
    std::vector<BranchStep<T>> steps;
    std::size_t c = in_channels;
    for (const auto& spec : plan) {
        steps.emplace_back(make_conv<T>(spec.channels, c, spec.ksize, rng));
        steps.emplace_back(ReluStep{});
        if (spec.pool_after) steps.emplace_back(PoolStep{});
        c = spec.channels;
    }
    return steps;
}

inline std::size_t branch_out_side(const std::vector<ConvSpec>& plan, std::size_t side) {
    for (const auto& spec : plan)
        if (spec.pool_after) side = (side + 1) / 2;
    return side;
}

}  // namespace detail

/// Single-branch candidate structures of the depth/kernel study.
template <typename T = float>
Network<T> build_structure(const std::string& id, std::size_t num_classes,
                           const BuildOptions& opts = {}) {
    if (num_classes != 2 && num_classes != 7)
        throw std::invalid_argument("class count must be 2 or 7");
    auto plan = detail::structure_plan(id);
    Rng rng(opts.seed);
    Network<T> net;
    net.arch_id = id;
    net.num_classes = num_classes;
    net.input_side = opts.input_side;
    net.dropout_rate = opts.dropout_rate;
    net.branches.push_back(detail::make_branch<T>(plan, 3, rng));
    const std::size_t side = detail::branch_out_side(plan, opts.input_side);
    const std::size_t fan_in = side * side * plan.back().channels;
    net.fc1 = detail::make_fc<T>(opts.fc1_units, fan_in, rng);
    net.fc2 = detail::make_fc<T>(opts.fc2_units, opts.fc1_units, rng);
    net.fc_out = detail::make_fc<T>(num_classes, opts.fc2_units, rng);
    return net;
}

/// Three independent single-spectrum branches (R, G, B planes), channel
/// concatenation after the third pool, shared FC head.
template <typename T = float>
Network<T> build_mscnn(std::size_t num_classes, const BuildOptions& opts = {}) {
    if (num_classes != 2 && num_classes != 7)
        throw std::invalid_argument("class count must be 2 or 7");
    auto plan = detail::structure_plan("s3");
    Rng rng(opts.seed);
    Network<T> net;
    net.arch_id = "ms";
    net.num_classes = num_classes;
    net.input_side = opts.input_side;
    net.dropout_rate = opts.dropout_rate;
    for (int b = 0; b < 3; ++b)
        net.branches.push_back(detail::make_branch<T>(plan, 1, rng));
    const std::size_t side = detail::branch_out_side(plan, opts.input_side);
    const std::size_t fan_in = side * side * plan.back().channels * 3;
    net.fc1 = detail::make_fc<T>(opts.fc1_units, fan_in, rng);
    net.fc2 = detail::make_fc<T>(opts.fc2_units, opts.fc1_units, rng);
    net.fc_out = detail::make_fc<T>(num_classes, opts.fc2_units, rng);
    return net;
}

template <typename T = float>
Network<T> build(const std::string& id, std::size_t num_classes,
                 const BuildOptions& opts = {}) {
    if (id == "ms") return build_mscnn<T>(num_classes, opts);
    return build_structure<T>(id, num_classes, opts);
}

struct ShapeEntry {
    std::string name;
    std::vector<std::size_t> dims;  // H, W, C
};

/// Symbolic per-layer output shapes of branch 0.
template <typename T>
std::vector<ShapeEntry> shape_trace(const Network<T>& net) {
    std::vector<ShapeEntry> out;
    std::size_t h = net.input_side, w = net.input_side;
    std::size_t c = net.is_multispectral() ? 1 : 3;
    std::size_t conv_i = 0, pool_i = 0;
    for (const auto& step : net.branches[0]) {
        if (const auto* conv = std::get_if<ConvLayer<T>>(&step)) {
            c = conv->out_channels();
            out.push_back({"conv" + std::to_string(++conv_i), {h, w, c}});
        } else if (std::holds_alternative<PoolStep>(step)) {
            h = (h + 1) / 2;
            w = (w + 1) / 2;
            out.push_back({"pool" + std::to_string(++pool_i), {h, w, c}});
        }
    }
    if (net.is_multispectral())
        out.push_back({"concat", {h, w, c * 3}});
    return out;
}

/// EVAL-mode probability vector for one image (deterministic).
template <typename T>
std::vector<T> forward_classify(Network<T>& net, const Tensor<T>& image,
                                nn::Mode mode = nn::Mode::EVAL,
                                std::uint64_t dropout_seed = 0) {
    Rng rng(dropout_seed ? dropout_seed : 1);
    auto tr = nn::forward(net, image, mode, rng);
    return tr.probs;
}

}  // namespace sdi::arch
