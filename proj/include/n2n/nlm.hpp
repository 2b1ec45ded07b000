#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "n2n/error.hpp"
#include "n2n/image.hpp"
#include "n2n/parallel.hpp"

namespace n2n {

struct NlmParams {
    double h = 0.08;         ///< filtering strength, normalized units
    int patch_radius = 1;    ///< patch is (2r+1)^2
    int search_radius = 5;   ///< search window is (2s+1)^2, clipped at borders
    double sigma = 0.0;      ///< optional noise offset: w = exp(-max(d2 - 2 sigma^2, 0) / h^2)

    void validate() const {
        if (!(h > 0.0) || !std::isfinite(h)) throw ParamError("nlm h must be > 0");
        if (patch_radius < 0 || search_radius < 0) throw ParamError("nlm radii must be >= 0");
        if (!(sigma >= 0.0)) throw ParamError("nlm sigma must be >= 0");
    }
};

/// Exact non-local means on each slice.
///
/// All channels share one weight: the patch distance d2 is the mean squared
/// difference over patch pixels and channels, accumulated row by row, then
/// column, then channel. Patches read outside the image replicate the edge.
/// Candidates are visited in scan order of the (clipped) search window and
/// the centre pixel is included with d2 = 0. Every sum is in double; rows may
/// run on different threads without changing any output bit.
inline Image nlm_denoise(const Image& img, const NlmParams& p) {
    p.validate();
    const int w = img.width, h = img.height, C = img.channels;
    const int r = p.patch_radius, sr = p.search_radius;
    const int pw = w + 2 * r, ph = h + 2 * r;
    const double inv_h2 = 1.0 / (p.h * p.h);
    const double offset = 2.0 * p.sigma * p.sigma;
    const double inv_count = 1.0 / (static_cast<double>(C) * (2 * r + 1) * (2 * r + 1));

    Image out = img;
    std::vector<double> padded(static_cast<std::size_t>(pw) * ph * C);
    for (int s = 0; s < img.slices; ++s) {
        // Interleaved (y, x, c) copy with replicated borders.
        for (int y = 0; y < ph; ++y)
            for (int x = 0; x < pw; ++x) {
                const int sx = std::clamp(x - r, 0, w - 1), sy = std::clamp(y - r, 0, h - 1);
                for (int c = 0; c < C; ++c)
                    padded[(static_cast<std::size_t>(y) * pw + x) * C + c] = img.at(sx, sy, c, s);
            }
        auto px = [&](int x, int y) { return &padded[(static_cast<std::size_t>(y + r) * pw + (x + r)) * C]; };

        parallel_for_blocks(h, [&](int row_begin, int row_end) {
            std::vector<double> acc(C);
            for (int y = row_begin; y < row_end; ++y)
                for (int x = 0; x < w; ++x) {
                    std::fill(acc.begin(), acc.end(), 0.0);
                    double wsum = 0.0;
                    const int y0 = std::max(0, y - sr), y1 = std::min(h - 1, y + sr);
                    const int x0 = std::max(0, x - sr), x1 = std::min(w - 1, x + sr);
                    for (int jy = y0; jy <= y1; ++jy)
                        for (int jx = x0; jx <= x1; ++jx) {
                            double d2 = 0.0;
                            for (int py = -r; py <= r; ++py) {
                                const double* a = px(x - r, y + py);
                                const double* b = px(jx - r, jy + py);
                                for (int k = 0; k < (2 * r + 1) * C; ++k) {
                                    const double d = a[k] - b[k];
                                    d2 += d * d;
                                }
                            }
                            d2 *= inv_count;
                            const double wt = std::exp(-std::max(d2 - offset, 0.0) * inv_h2);
                            wsum += wt;
                            const double* v = px(jx, jy);
                            for (int c = 0; c < C; ++c) acc[c] += wt * v[c];
                        }
                    for (int c = 0; c < C; ++c) out.at(x, y, c, s) = static_cast<float>(acc[c] / wsum);
                }
        });
    }
    return out;
}

}  // namespace n2n
