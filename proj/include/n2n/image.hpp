#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "n2n/error.hpp"

namespace n2n {

/// Normalized raster: one or more slices, each holding planar channels.
///
/// Samples are stored slice-major, then channel-major, then row-major, so a
/// color slice is all of red, then all of green, then all of blue. Values are
/// 32-bit floats, nominally in [0, 1] after loading; nothing clamps them until
/// they are written back to an integer format.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    int slices = 1;
    std::vector<float> data;
    int source_max = 255;
    std::string name;

    Image() = default;

    Image(int w, int h, int c = 1, int s = 1, float fill = 0.0f)
        : width(w), height(h), channels(c), slices(s) {
        if (w < 1 || h < 1 || s < 1 || (c != 1 && c != 3))
            throw ShapeError("invalid image geometry " + std::to_string(w) + "x" + std::to_string(h) +
                             "x" + std::to_string(c) + "x" + std::to_string(s));
        data.assign(sample_count(), fill);
    }

    std::size_t plane_size() const { return static_cast<std::size_t>(width) * height; }
    std::size_t slice_size() const { return plane_size() * channels; }
    std::size_t sample_count() const { return slice_size() * slices; }

    std::size_t index(int x, int y, int c = 0, int s = 0) const {
        return ((static_cast<std::size_t>(s) * channels + c) * height + y) * width + x;
    }

    float& at(int x, int y, int c = 0, int s = 0) { return data[index(x, y, c, s)]; }
    float at(int x, int y, int c = 0, int s = 0) const { return data[index(x, y, c, s)]; }

    std::span<float> plane(int c, int s = 0) { return {data.data() + index(0, 0, c, s), plane_size()}; }
    std::span<const float> plane(int c, int s = 0) const {
        return {data.data() + index(0, 0, c, s), plane_size()};
    }

    bool same_shape(const Image& o) const {
        return width == o.width && height == o.height && channels == o.channels && slices == o.slices;
    }

    std::string shape_string() const {
        return std::to_string(width) + "x" + std::to_string(height) + "x" + std::to_string(channels) +
               "x" + std::to_string(slices);
    }
};

inline void require_same_shape(const Image& a, const Image& b, const char* what) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
}

/// Axis-aligned rectangle in pixel coordinates.
struct Roi {
    int x0 = 0;
    int y0 = 0;
    int width = 1;
    int height = 1;

    bool fits(const Image& img) const {
        return x0 >= 0 && y0 >= 0 && width >= 1 && height >= 1 && x0 + width <= img.width &&
               y0 + height <= img.height;
    }
};

/// Copies the ROI out of every slice and channel.
inline Image crop(const Image& img, const Roi& roi) {
    if (!roi.fits(img))
        throw ShapeError("roi (" + std::to_string(roi.x0) + "," + std::to_string(roi.y0) + "," +
                         std::to_string(roi.width) + "," + std::to_string(roi.height) + ") outside " +
                         std::to_string(img.width) + "x" + std::to_string(img.height) + " image");
    Image out(roi.width, roi.height, img.channels, img.slices);
    out.source_max = img.source_max;
    out.name = img.name;
    for (int s = 0; s < img.slices; ++s)
        for (int c = 0; c < img.channels; ++c)
            for (int y = 0; y < roi.height; ++y) {
                const float* src = &img.data[img.index(roi.x0, roi.y0 + y, c, s)];
                float* dst = &out.data[out.index(0, y, c, s)];
                std::copy(src, src + roi.width, dst);
            }
    return out;
}

inline std::vector<Image> split_slices(const Image& img) {
    std::vector<Image> out;
    out.reserve(img.slices);
    for (int s = 0; s < img.slices; ++s) {
        Image slice(img.width, img.height, img.channels, 1);
        slice.source_max = img.source_max;
        slice.name = img.name;
        auto first = img.data.begin() + static_cast<std::ptrdiff_t>(img.slice_size() * s);
        std::copy(first, first + static_cast<std::ptrdiff_t>(img.slice_size()), slice.data.begin());
        out.push_back(std::move(slice));
    }
    return out;
}

/// Concatenates images (each possibly multi-slice) along the slice axis.
inline Image stack_slices(std::span<const Image> parts) {
    if (parts.empty()) throw ShapeError("stack_slices: empty list");
    const Image& first = parts.front();
    int total = 0;
    for (const Image& p : parts) {
        if (p.width != first.width || p.height != first.height || p.channels != first.channels)
            throw ShapeError("stack_slices: shape mismatch " + first.shape_string() + " vs " + p.shape_string());
        if (p.source_max != first.source_max)
            throw ShapeError("stack_slices: source_max mismatch " + std::to_string(first.source_max) + " vs " +
                             std::to_string(p.source_max));
        total += p.slices;
    }
    Image out(first.width, first.height, first.channels, total);
    out.source_max = first.source_max;
    out.name = first.name;
    auto dst = out.data.begin();
    for (const Image& p : parts) dst = std::copy(p.data.begin(), p.data.end(), dst);
    return out;
}

inline float min_value(const Image& img) {
    float m = img.data.empty() ? 0.0f : img.data.front();
    for (float v : img.data) m = v < m ? v : m;
    return m;
}

inline float max_value(const Image& img) {
    float m = img.data.empty() ? 0.0f : img.data.front();
    for (float v : img.data) m = v > m ? v : m;
    return m;
}

}  // namespace n2n
