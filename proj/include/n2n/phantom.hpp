#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "n2n/error.hpp"
#include "n2n/image.hpp"
#include "n2n/rng.hpp"

namespace n2n {

/// Synthetic fluorescence-like scenes: dim smooth background plus bright
/// blobs, rectangles and thin filaments.
struct PhantomSpec {
    int count = 40;
    int size = 128;
    int channels = 1;
    std::uint64_t seed = 0;

    static constexpr float kMin = 0.05f;
    static constexpr float kMax = 0.95f;
};

namespace phantom_detail {

inline double coverage(double signed_dist) { return std::clamp(0.5 - signed_dist, 0.0, 1.0); }

inline void add_disk(std::vector<double>& p, int n, double cx, double cy, double r, double amp) {
    const int x0 = std::max(0, int(cx - r - 2)), x1 = std::min(n - 1, int(cx + r + 2));
    const int y0 = std::max(0, int(cy - r - 2)), y1 = std::min(n - 1, int(cy + r + 2));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double d = std::hypot(x - cx, y - cy) - r;
            p[static_cast<std::size_t>(y) * n + x] += amp * coverage(d);
        }
}

inline void add_rect(std::vector<double>& p, int n, int x0, int y0, int w, int h, double amp) {
    for (int y = std::max(0, y0); y < std::min(n, y0 + h); ++y)
        for (int x = std::max(0, x0); x < std::min(n, x0 + w); ++x) p[static_cast<std::size_t>(y) * n + x] += amp;
}

inline void add_line(std::vector<double>& p, int n, double ax, double ay, double bx, double by, double half_width,
                     double amp) {
    const double dx = bx - ax, dy = by - ay, len2 = std::max(dx * dx + dy * dy, 1e-9);
    const int x0 = std::max(0, int(std::min(ax, bx) - half_width - 2)), x1 = std::min(n - 1, int(std::max(ax, bx) + half_width + 2));
    const int y0 = std::max(0, int(std::min(ay, by) - half_width - 2)), y1 = std::min(n - 1, int(std::max(ay, by) + half_width + 2));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double t = std::clamp(((x - ax) * dx + (y - ay) * dy) / len2, 0.0, 1.0);
            const double d = std::hypot(x - (ax + t * dx), y - (ay + t * dy)) - half_width;
            p[static_cast<std::size_t>(y) * n + x] += amp * coverage(d);
        }
}

inline void add_background(std::vector<double>& p, int n, Rng& rng) {
    const double level = 0.06 + 0.08 * rng.uniform();
    const double a1 = 0.03 + 0.05 * rng.uniform(), a2 = 0.02 + 0.03 * rng.uniform();
    const double f1x = 0.5 + 1.5 * rng.uniform(), f1y = 0.5 + 1.5 * rng.uniform();
    const double f2x = 1.0 + 2.0 * rng.uniform(), f2y = 1.0 + 2.0 * rng.uniform();
    const double ph1 = 2 * std::numbers::pi * rng.uniform(), ph2 = 2 * std::numbers::pi * rng.uniform();
    const double k = 2 * std::numbers::pi / n;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
            p[static_cast<std::size_t>(y) * n + x] += level + a1 * (0.5 + 0.5 * std::sin(k * (f1x * x + f1y * y) + ph1)) +
                                                      a2 * (0.5 + 0.5 * std::sin(k * (f2x * x - f2y * y) + ph2));
}

enum Kinds : unsigned { kDisks = 1, kRects = 2, kLines = 4 };

inline void add_shapes(std::vector<double>& p, int n, Rng& rng, unsigned kinds) {
    auto uni = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
    if (kinds & kDisks) {
        const int count = 3 + static_cast<int>(rng.below(8));
        for (int i = 0; i < count; ++i)
            add_disk(p, n, uni(0, n), uni(0, n), uni(2.0, n / 10.0), uni(0.2, 0.6));
    }
    if (kinds & kRects) {
        const int count = 1 + static_cast<int>(rng.below(4));
        for (int i = 0; i < count; ++i) {
            const int w = 4 + static_cast<int>(rng.below(n / 4)), h = 4 + static_cast<int>(rng.below(n / 4));
            add_rect(p, n, static_cast<int>(rng.below(n)) - w / 2, static_cast<int>(rng.below(n)) - h / 2, w, h,
                     uni(0.1, 0.4));
        }
    }
    if (kinds & kLines) {
        const int count = 3 + static_cast<int>(rng.below(8));
        for (int i = 0; i < count; ++i)
            add_line(p, n, uni(0, n), uni(0, n), uni(0, n), uni(0, n), uni(0.5, 1.5), uni(0.15, 0.5));
    }
}

}  // namespace phantom_detail

/// Deterministic corpus: image i depends only on (seed, i). Gray images mix
/// every shape kind; color images carry filaments in channel 0, blobs and
/// rectangles in channel 1 and large blobs in channel 2 over independent
/// backgrounds. Values are clamped into [0.05, 0.95].
inline std::vector<Image> make_phantoms(const PhantomSpec& spec) {
    if (spec.count < 0 || spec.size < 1) throw ParamError("phantom count must be >= 0 and size >= 1");
    if (spec.channels != 1 && spec.channels != 3) throw ParamError("phantom channels must be 1 or 3");
    using namespace phantom_detail;
    std::vector<Image> out;
    out.reserve(spec.count);
    const int n = spec.size;
    for (int i = 0; i < spec.count; ++i) {
        Rng rng(derive_seed(spec.seed, {0x7068616eull, static_cast<std::uint64_t>(i)}));
        Image img(n, n, spec.channels);
        img.name = "phantom" + std::to_string(i);
        for (int c = 0; c < spec.channels; ++c) {
            std::vector<double> plane(static_cast<std::size_t>(n) * n, 0.0);
            add_background(plane, n, rng);
            const unsigned kinds = spec.channels == 1 ? (kDisks | kRects | kLines)
                                   : c == 0          ? unsigned(kLines)
                                   : c == 1          ? (kDisks | kRects)
                                                     : unsigned(kDisks);
            add_shapes(plane, n, rng, kinds);
            auto dst = img.plane(c);
            for (std::size_t k = 0; k < plane.size(); ++k)
                dst[k] = std::clamp(static_cast<float>(plane[k]), PhantomSpec::kMin, PhantomSpec::kMax);
        }
        out.push_back(std::move(img));
    }
    return out;
}

}  // namespace n2n
