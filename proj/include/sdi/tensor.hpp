#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace sdi {

/// Dense row-major numeric array, rank 1..4. Images are stored H x W x C.
template <typename T>
struct Tensor {
    std::vector<std::size_t> dims;
    std::vector<T> data;

    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> d) : dims(std::move(d)) {
        data.assign(count(), T(0));
    }

    Tensor(std::initializer_list<std::size_t> d)
        : Tensor(std::vector<std::size_t>(d)) {}

    std::size_t count() const {
        std::size_t n = 1;
        for (auto d : dims) {
            if (d < 1) throw std::invalid_argument("tensor dim < 1");
            n *= d;
        }
        return n;
    }

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return dims.size(); }

    T& operator[](std::size_t i) { return data[i]; }
    const T& operator[](std::size_t i) const { return data[i]; }

    // rank-2 (H, W), used for grayscale maps and filter kernels
    T& at(std::size_t y, std::size_t x) { return data[y * dims[1] + x]; }
    const T& at(std::size_t y, std::size_t x) const { return data[y * dims[1] + x]; }

    // rank-3 (H, W, C)
    T& at(std::size_t y, std::size_t x, std::size_t c) {
        return data[(y * dims[1] + x) * dims[2] + c];
    }
    const T& at(std::size_t y, std::size_t x, std::size_t c) const {
        return data[(y * dims[1] + x) * dims[2] + c];
    }

    // rank-4 (a, b, c, d), used for conv kernels (outC, inC, k, k)
    T& at4(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
        return data[((a * dims[1] + b) * dims[2] + c) * dims[3] + d];
    }
    const T& at4(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
        return data[((a * dims[1] + b) * dims[2] + c) * dims[3] + d];
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    bool same_shape(const Tensor& o) const { return dims == o.dims; }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(dims);
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace sdi
