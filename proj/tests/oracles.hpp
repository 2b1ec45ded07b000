#pragma once

// Slow, obviously-correct reference implementations used only by tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "n2n/image.hpp"
#include "n2n/layers.hpp"
#include "n2n/nlm.hpp"
#include "n2n/rng.hpp"
#include "n2n/tensor.hpp"

namespace n2n::oracle {

/// Six nested loops over (o, i, j, c, u, v), zero outside the image.
inline Tensor<double> naive_conv(const Tensor<double>& x, const ConvParams<double>& p) {
    Tensor<double> out(p.out_c, x.height, x.width);
    for (int o = 0; o < p.out_c; ++o)
        for (int i = 0; i < x.height; ++i)
            for (int j = 0; j < x.width; ++j) {
                double s = p.bias[o];
                for (int c = 0; c < p.in_c; ++c)
                    for (int u = 0; u < 3; ++u)
                        for (int v = 0; v < 3; ++v) {
                            const int y = i + u - 1, xx = j + v - 1;
                            if (y < 0 || y >= x.height || xx < 0 || xx >= x.width) continue;
                            s += p.weight[((o * p.in_c + c) * 3 + u) * 3 + v] * x.at(c, y, xx);
                        }
                out.at(o, i, j) = s;
            }
    return out;
}

/// Quadruple loop over (pixel, candidate) with clamped patch reads; same
/// weight formula and accumulation order as the production filter.
inline Image brute_nlm(const Image& img, const NlmParams& p) {
    Image out = img;
    const int w = img.width, h = img.height, C = img.channels, r = p.patch_radius, sr = p.search_radius;
    const double inv_count = 1.0 / (static_cast<double>(C) * (2 * r + 1) * (2 * r + 1));
    const double inv_h2 = 1.0 / (p.h * p.h);
    const double offset = 2.0 * p.sigma * p.sigma;
    auto px = [&](int x, int y, int c, int s) {
        return static_cast<double>(img.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1), c, s));
    };
    for (int s = 0; s < img.slices; ++s)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                std::vector<double> acc(C, 0.0);
                double wsum = 0.0;
                for (int jy = y - sr; jy <= y + sr; ++jy)
                    for (int jx = x - sr; jx <= x + sr; ++jx) {
                        if (jx < 0 || jy < 0 || jx >= w || jy >= h) continue;
                        double d2 = 0.0;
                        for (int py = -r; py <= r; ++py)
                            for (int qx = -r; qx <= r; ++qx)
                                for (int c = 0; c < C; ++c) {
                                    const double d = px(x + qx, y + py, c, s) - px(jx + qx, jy + py, c, s);
                                    d2 += d * d;
                                }
                        d2 *= inv_count;
                        const double wt = std::exp(-std::max(d2 - offset, 0.0) * inv_h2);
                        wsum += wt;
                        for (int c = 0; c < C; ++c) acc[c] += wt * px(jx, jy, c, s);
                    }
                for (int c = 0; c < C; ++c) out.at(x, y, c, s) = static_cast<float>(acc[c] / wsum);
            }
    return out;
}

/// Central difference of f around `value`, restoring it afterwards.
inline double central_difference(double& value, double eps, const std::function<double()>& f) {
    const double saved = value;
    value = saved + eps;
    const double plus = f();
    value = saved - eps;
    const double minus = f();
    value = saved;
    return (plus - minus) / (2.0 * eps);
}

inline double rel_error(double analytic, double numeric, double floor = 1e-6) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

inline Tensor<double> random_tensor(int c, int h, int w, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<double> t(c, h, w);
    for (double& v : t.data) v = lo + (hi - lo) * rng.uniform();
    return t;
}

inline Image random_image(int w, int h, int c, Rng& rng, int s = 1) {
    Image img(w, h, c, s);
    for (float& v : img.data) v = static_cast<float>(rng.uniform());
    return img;
}

}  // namespace n2n::oracle
