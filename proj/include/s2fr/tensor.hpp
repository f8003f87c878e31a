#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "s2fr/error.hpp"

namespace s2fr {

/// Dense (batch, channels, height, width) array.
template <class T>
struct Tensor {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;
    std::vector<T> data;

    Tensor() = default;
    Tensor(int batch, int channels, int height, int width)
        : n(batch), c(channels), h(height), w(width),
          data(static_cast<std::size_t>(batch) * channels * height * width, T(0)) {}

    std::size_t plane_size() const noexcept { return static_cast<std::size_t>(h) * w; }
    std::size_t sample_size() const noexcept { return plane_size() * c; }
    std::size_t size() const noexcept { return data.size(); }

    std::span<T> sample(int i) { return std::span<T>(data).subspan(i * sample_size(), sample_size()); }
    std::span<const T> sample(int i) const {
        return std::span<const T>(data).subspan(i * sample_size(), sample_size());
    }
    std::span<T> plane(int i, int ch) {
        return std::span<T>(data).subspan((static_cast<std::size_t>(i) * c + ch) * plane_size(), plane_size());
    }
    std::span<const T> plane(int i, int ch) const {
        return std::span<const T>(data).subspan((static_cast<std::size_t>(i) * c + ch) * plane_size(), plane_size());
    }

    T& operator()(int i, int ch, int y, int x) {
        return data[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x];
    }
    const T& operator()(int i, int ch, int y, int x) const {
        return data[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x];
    }

    bool same_shape(const Tensor& o) const noexcept { return n == o.n && c == o.c && h == o.h && w == o.w; }

    template <class U>
    Tensor<U> cast() const {
        Tensor<U> out(n, c, h, w);
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

using TensorF = Tensor<float>;

template <class T>
std::string shape_string(const Tensor<T>& t) {
    return "(" + std::to_string(t.n) + "," + std::to_string(t.c) + "," + std::to_string(t.h) + "," +
           std::to_string(t.w) + ")";
}

}  // namespace s2fr
