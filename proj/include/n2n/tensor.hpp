#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "n2n/error.hpp"

namespace n2n {

/// Dense channels x height x width array, channel-major then row-major.
template <class T>
struct Tensor {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<T> data;

    Tensor() = default;
    Tensor(int c, int h, int w, T fill = T(0)) : channels(c), height(h), width(w) {
        if (c < 1 || h < 1 || w < 1)
            throw ShapeError("invalid tensor shape " + std::to_string(c) + "x" + std::to_string(h) + "x" +
                             std::to_string(w));
        data.assign(static_cast<std::size_t>(c) * h * w, fill);
    }

    std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
    std::size_t size() const { return data.size(); }

    T& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
    T at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }

    bool same_shape(const Tensor& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }

    std::string shape_string() const {
        return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
    }

    template <class U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.channels = channels;
        out.height = height;
        out.width = width;
        out.data.assign(data.begin(), data.end());
        return out;
    }
};

template <class T>
bool all_finite(const std::vector<T>& v) {
    for (T x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

// Active only in debug builds.
template <class T>
inline void debug_check_finite([[maybe_unused]] const Tensor<T>& t, [[maybe_unused]] const char* where) {
#ifndef NDEBUG
    if (!all_finite(t.data)) throw Error(std::string("non-finite activation after ") + where);
#endif
}

}  // namespace n2n
