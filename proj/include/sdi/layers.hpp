#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sdi/rng.hpp"
#include "sdi/tensor.hpp"

namespace sdi::nn {

enum class Mode { TRAIN, EVAL };

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

// ---------------------------------------------------------------------------
// Convolution, SAME zero padding.
//
// The kernel dot products are evaluated as one matrix product over an
// im2col buffer: column j = (y*W + x) holds the padded receptive field of
// output position (y, x), row r = (ky*k + kx)*inC + c.
// ---------------------------------------------------------------------------

template <typename T>
struct ConvLayer {
    Tensor<T> kernels;        // outC x inC x k x k
    Tensor<T> bias;           // rank-1, outC
    std::size_t stride = 1;

    std::size_t out_channels() const { return kernels.dims[0]; }
    std::size_t in_channels() const { return kernels.dims[1]; }
    std::size_t ksize() const { return kernels.dims[2]; }
};

template <typename T>
struct ConvCache {
    Mat<T> cols;              // (k*k*inC) x (outH*outW)
    std::size_t in_h = 0, in_w = 0;
};

template <typename T>
Mat<T> kernel_matrix(const ConvLayer<T>& p) {
    const std::size_t outC = p.out_channels(), inC = p.in_channels(), k = p.ksize();
    Mat<T> km(outC, k * k * inC);
    for (std::size_t o = 0; o < outC; ++o)
        for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx)
                for (std::size_t c = 0; c < inC; ++c)
                    km(o, (ky * k + kx) * inC + c) = p.kernels.at4(o, c, ky, kx);
    return km;
}

template <typename T>
void im2col(const Tensor<T>& in, std::size_t k, std::size_t stride,
            std::size_t out_h, std::size_t out_w, Mat<T>& cols) {
    const std::size_t H = in.dims[0], W = in.dims[1], C = in.dims[2];
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>((k - 1) / 2);
    cols.setZero(k * k * C, out_h * out_w);
    for (std::size_t oy = 0; oy < out_h; ++oy) {
        for (std::size_t ox = 0; ox < out_w; ++ox) {
            const std::size_t col = oy * out_w + ox;
            for (std::size_t ky = 0; ky < k; ++ky) {
                const std::ptrdiff_t iy =
                    static_cast<std::ptrdiff_t>(oy * stride + ky) - pad;
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                for (std::size_t kx = 0; kx < k; ++kx) {
                    const std::ptrdiff_t ix =
                        static_cast<std::ptrdiff_t>(ox * stride + kx) - pad;
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                    const T* src = &in.data[(static_cast<std::size_t>(iy) * W +
                                             static_cast<std::size_t>(ix)) * C];
                    T* dst = &cols((ky * k + kx) * C, col);
                    for (std::size_t c = 0; c < C; ++c) dst[c] = src[c];
                }
            }
        }
    }
}

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& in, const ConvLayer<T>& p,
                         ConvCache<T>* cache = nullptr) {
    if (in.rank() != 3) throw std::invalid_argument("conv2d: input must be H x W x C");
    if (in.dims[2] != p.in_channels())
        throw std::invalid_argument("conv2d: channel mismatch");
    if (p.ksize() % 2 == 0) throw std::invalid_argument("conv2d: kernel extent must be odd");
    const std::size_t H = in.dims[0], W = in.dims[1];
    const std::size_t out_h = (H + p.stride - 1) / p.stride;
    const std::size_t out_w = (W + p.stride - 1) / p.stride;
    const std::size_t outC = p.out_channels();

    ConvCache<T> local;
    ConvCache<T>& cc = cache ? *cache : local;
    cc.in_h = H;
    cc.in_w = W;
    im2col(in, p.ksize(), p.stride, out_h, out_w, cc.cols);

    Mat<T> km = kernel_matrix(p);
    Mat<T> out_mat = km * cc.cols;  // outC x (out_h*out_w)

    Tensor<T> out({out_h, out_w, outC});
    for (std::size_t pos = 0; pos < out_h * out_w; ++pos)
        for (std::size_t o = 0; o < outC; ++o)
            out.data[pos * outC + o] = out_mat(o, pos) + p.bias.data[o];
    return out;
}

/// Returns gradient w.r.t. the input; fills dkernels/dbias (same shapes as params).
template <typename T>
Tensor<T> conv2d_backward(const ConvLayer<T>& p, const ConvCache<T>& cc,
                          const Tensor<T>& dout, Tensor<T>& dkernels,
                          Tensor<T>& dbias) {
    const std::size_t out_h = dout.dims[0], out_w = dout.dims[1];
    const std::size_t outC = p.out_channels(), inC = p.in_channels(), k = p.ksize();

    Mat<T> dout_mat(outC, out_h * out_w);
    for (std::size_t pos = 0; pos < out_h * out_w; ++pos)
        for (std::size_t o = 0; o < outC; ++o)
            dout_mat(o, pos) = dout.data[pos * outC + o];

    dkernels = Tensor<T>(p.kernels.dims);
    dbias = Tensor<T>({outC});
    for (std::size_t o = 0; o < outC; ++o) dbias.data[o] = dout_mat.row(o).sum();

    Mat<T> dkm = dout_mat * cc.cols.transpose();  // outC x (k*k*inC)
    for (std::size_t o = 0; o < outC; ++o)
        for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx)
                for (std::size_t c = 0; c < inC; ++c)
                    dkernels.at4(o, c, ky, kx) = dkm(o, (ky * k + kx) * inC + c);

    Mat<T> km = kernel_matrix(p);
    Mat<T> dcols = km.transpose() * dout_mat;  // (k*k*inC) x positions

    // col2im: scatter-add back through the padding
    Tensor<T> din({cc.in_h, cc.in_w, inC});
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>((k - 1) / 2);
    for (std::size_t oy = 0; oy < out_h; ++oy) {
        for (std::size_t ox = 0; ox < out_w; ++ox) {
            const std::size_t col = oy * out_w + ox;
            for (std::size_t ky = 0; ky < k; ++ky) {
                const std::ptrdiff_t iy =
                    static_cast<std::ptrdiff_t>(oy * p.stride + ky) - pad;
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(cc.in_h)) continue;
                for (std::size_t kx = 0; kx < k; ++kx) {
                    const std::ptrdiff_t ix =
                        static_cast<std::ptrdiff_t>(ox * p.stride + kx) - pad;
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(cc.in_w)) continue;
                    T* dst = &din.data[(static_cast<std::size_t>(iy) * cc.in_w +
                                        static_cast<std::size_t>(ix)) * inC];
                    const T* src = &dcols((ky * k + kx) * inC, col);
                    for (std::size_t c = 0; c < inC; ++c) dst[c] += src[c];
                }
            }
        }
    }
    return din;
}

// ---------------------------------------------------------------------------
// Max pooling, 2x2 window, stride 2, ceil semantics (partial edge windows).
// Ties break to the first position in row-major scan order.
// ---------------------------------------------------------------------------

struct PoolCache {
    std::vector<std::size_t> argmax;  // flat input index per output element
    std::size_t in_h = 0, in_w = 0, channels = 0;
};

template <typename T>
Tensor<T> maxpool2d_forward(const Tensor<T>& in, PoolCache* cache = nullptr,
                            std::size_t window = 2, std::size_t stride = 2) {
    const std::size_t H = in.dims[0], W = in.dims[1], C = in.dims[2];
    if (H < window || W < window)
        throw std::invalid_argument("maxpool: window larger than input");
    const std::size_t out_h = (H + stride - 1) / stride;
    const std::size_t out_w = (W + stride - 1) / stride;
    Tensor<T> out({out_h, out_w, C});
    PoolCache local;
    PoolCache& pc = cache ? *cache : local;
    pc.in_h = H;
    pc.in_w = W;
    pc.channels = C;
    pc.argmax.assign(out_h * out_w * C, 0);
    for (std::size_t oy = 0; oy < out_h; ++oy) {
        for (std::size_t ox = 0; ox < out_w; ++ox) {
            const std::size_t y0 = oy * stride, x0 = ox * stride;
            const std::size_t y1 = std::min(y0 + window, H), x1 = std::min(x0 + window, W);
            for (std::size_t c = 0; c < C; ++c) {
                T best = in.at(y0, x0, c);
                std::size_t best_idx = (y0 * W + x0) * C + c;
                for (std::size_t y = y0; y < y1; ++y)
                    for (std::size_t x = x0; x < x1; ++x) {
                        const T v = in.at(y, x, c);
                        if (v > best) {
                            best = v;
                            best_idx = (y * W + x) * C + c;
                        }
                    }
                out.at(oy, ox, c) = best;
                pc.argmax[(oy * out_w + ox) * C + c] = best_idx;
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> maxpool2d_backward(const PoolCache& pc, const Tensor<T>& dout) {
    Tensor<T> din({pc.in_h, pc.in_w, pc.channels});
    for (std::size_t i = 0; i < dout.size(); ++i) din.data[pc.argmax[i]] += dout.data[i];
    return din;
}

// ---------------------------------------------------------------------------
// ReLU. Backward gates on x >= 0.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& in, std::vector<std::uint8_t>* mask = nullptr) {
    Tensor<T> out(in.dims);
    if (mask) mask->assign(in.size(), 0);
    for (std::size_t i = 0; i < in.size(); ++i) {
        const bool pass = in.data[i] >= T(0);
        out.data[i] = pass ? in.data[i] : T(0);
        if (mask) (*mask)[i] = pass;
    }
    return out;
}

template <typename T>
Tensor<T> relu_backward(const std::vector<std::uint8_t>& mask, const Tensor<T>& dout) {
    Tensor<T> din(dout.dims);
    for (std::size_t i = 0; i < dout.size(); ++i)
        din.data[i] = mask[i] ? dout.data[i] : T(0);
    return din;
}

// ---------------------------------------------------------------------------
// Fully connected
// ---------------------------------------------------------------------------

template <typename T>
struct FcLayer {
    Tensor<T> weights;  // out x in
    Tensor<T> bias;     // rank-1, out

    std::size_t fan_out() const { return weights.dims[0]; }
    std::size_t fan_in() const { return weights.dims[1]; }
};

template <typename T>
std::vector<T> fc_forward(const std::vector<T>& in, const FcLayer<T>& p) {
    if (in.size() != p.fan_in()) throw std::invalid_argument("fc: dimension mismatch");
    using V = Eigen::Matrix<T, Eigen::Dynamic, 1>;
    Eigen::Map<const Mat<T>> W(p.weights.data.data(), p.fan_in(), p.fan_out());
    Eigen::Map<const V> x(in.data(), in.size());
    std::vector<T> out(p.fan_out());
    Eigen::Map<V> y(out.data(), out.size());
    // weights are row-major (out x in); the map above views them transposed
    y.noalias() = W.transpose() * x;
    for (std::size_t o = 0; o < out.size(); ++o) out[o] += p.bias.data[o];
    return out;
}

template <typename T>
std::vector<T> fc_backward(const FcLayer<T>& p, const std::vector<T>& in,
                           const std::vector<T>& dout, Tensor<T>& dweights,
                           Tensor<T>& dbias) {
    using V = Eigen::Matrix<T, Eigen::Dynamic, 1>;
    dweights = Tensor<T>(p.weights.dims);
    dbias = Tensor<T>({dout.size()});
    dbias.data = dout;
    Eigen::Map<Mat<T>> dW(dweights.data.data(), p.fan_in(), p.fan_out());
    Eigen::Map<const V> x(in.data(), in.size());
    Eigen::Map<const V> dy(dout.data(), dout.size());
    dW.noalias() = x * dy.transpose();
    std::vector<T> din(p.fan_in());
    Eigen::Map<V> dx(din.data(), din.size());
    Eigen::Map<const Mat<T>> W(p.weights.data.data(), p.fan_in(), p.fan_out());
    dx.noalias() = W * dy;
    return din;
}

// ---------------------------------------------------------------------------
// Dropout (inverted: survivors scaled at train time, EVAL is identity)
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> dropout_forward(const Tensor<T>& in, double rate, Mode mode, Rng& rng,
                          std::vector<std::uint8_t>* mask = nullptr) {
    if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0,1)");
    if (mode == Mode::EVAL || rate == 0.0) {
        if (mask) mask->assign(in.size(), 1);
        return in;
    }
    Tensor<T> out(in.dims);
    if (mask) mask->assign(in.size(), 0);
    const T scale = T(1.0 / (1.0 - rate));
    for (std::size_t i = 0; i < in.size(); ++i) {
        const bool keep = rng.uniform() >= rate;
        out.data[i] = keep ? in.data[i] * scale : T(0);
        if (mask) (*mask)[i] = keep;
    }
    return out;
}

template <typename T>
Tensor<T> dropout_backward(const std::vector<std::uint8_t>& mask, double rate,
                           const Tensor<T>& dout) {
    Tensor<T> din(dout.dims);
    const T scale = T(1.0 / (1.0 - rate));
    for (std::size_t i = 0; i < dout.size(); ++i)
        din.data[i] = mask[i] ? dout.data[i] * scale : T(0);
    return din;
}

// ---------------------------------------------------------------------------
// Softmax and cross-entropy loss
// ---------------------------------------------------------------------------

template <typename T>
std::vector<T> softmax(const std::vector<T>& logits) {
    if (logits.empty()) throw std::invalid_argument("softmax: empty input");
    const T m = *std::max_element(logits.begin(), logits.end());
    std::vector<T> p(logits.size());
    T sum = T(0);
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - m);
        sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
}

/// -ln p[label]; the L2 penalty term is added by the network-level loss.
template <typename T>
T nll_loss(const std::vector<T>& probs, std::size_t label) {
    if (label >= probs.size()) throw std::out_of_range("loss: label out of range");
    const T p = std::max(probs[label], T(1e-30));
    return -std::log(p);
}

}  // namespace sdi::nn
