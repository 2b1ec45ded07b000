#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "n2n/error.hpp"
#include "n2n/image.hpp"

namespace n2n {

/// ROF model: minimize TV(u) + (lambda / 2) * ||u - f||^2.
struct TvParams {
    double lambda = 12.0;
    int max_iters = 200;
    double tol = 1e-4;
    double tau = 0.25;

    void validate() const {
        if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ParamError("tv lambda must be > 0");
        if (max_iters < 1) throw ParamError("tv max_iters must be >= 1");
        if (!(tol >= 0.0)) throw ParamError("tv tol must be >= 0");
        if (!(tau > 0.0 && tau <= 0.25)) throw ParamError("tv tau must lie in (0, 0.25]");
    }
};

/// State reported after each dual iteration of one plane.
struct TvIterate {
    int plane = 0;
    int iteration = 0;        ///< 1-based
    double max_dual_update = 0.0;
    double max_dual_norm = 0.0;
    double energy = 0.0;        ///< ROF energy of u
    std::span<const double> u;  ///< current primal estimate, row-major
};

using TvObserver = std::function<void(const TvIterate&)>;

/// Isotropic TV with forward differences (zero across the last row/column,
/// i.e. replicate boundary) plus the quadratic fidelity term.
template <class T>
double tv_energy_plane(std::span<const T> u, std::span<const T> f, int w, int h, double lambda) {
    double tv = 0.0, fid = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const double dx = x + 1 < w ? double(u[i + 1]) - double(u[i]) : 0.0;
            const double dy = y + 1 < h ? double(u[i + w]) - double(u[i]) : 0.0;
            tv += std::sqrt(dx * dx + dy * dy);
            const double r = double(u[i]) - double(f[i]);
            fid += r * r;
        }
    return tv + 0.5 * lambda * fid;
}

/// Sum of the per-plane energies over all channels and slices.
inline double tv_energy(const Image& u, const Image& f, double lambda) {
    require_same_shape(u, f, "tv_energy");
    double e = 0.0;
    for (int s = 0; s < u.slices; ++s)
        for (int c = 0; c < u.channels; ++c)
            e += tv_energy_plane<float>(u.plane(c, s), f.plane(c, s), u.width, u.height, lambda);
    return e;
}

namespace tv_detail {

// div = -grad^T for the forward-difference gradient above.
inline void divergence(const std::vector<double>& px, const std::vector<double>& py, int w, int h,
                       std::vector<double>& div) {
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            double d = 0.0;
            if (x + 1 < w) d += px[i];
            if (x > 0) d -= px[i - 1];
            if (y + 1 < h) d += py[i];
            if (y > 0) d -= py[i - w];
            div[i] = d;
        }
}

}  // namespace tv_detail

/// Chambolle's dual projection on a single plane, in double precision.
///
/// The dual iterates p are updated by the plain projection step. The primal
/// candidate f - div(p) / lambda of a dual method can rise in energy on rough
/// inputs, so the estimate kept (and returned) is the lowest-energy candidate
/// seen so far. Its energy is therefore non-increasing across iterations and
/// never exceeds the energy of f itself.
inline std::vector<double> tv_denoise_plane(std::span<const float> f_in, int w, int h, const TvParams& p,
                                            int plane = 0, const TvObserver& observer = {}) {
    const std::size_t n = static_cast<std::size_t>(w) * h;
    const double theta = 1.0 / p.lambda;
    std::vector<double> f(f_in.begin(), f_in.end());
    std::vector<double> px(n, 0.0), py(n, 0.0), div(n, 0.0), v(n), cand(n), u(f);
    double best = tv_energy_plane<double>(u, f, w, h, p.lambda);

    for (int it = 1; it <= p.max_iters; ++it) {
        for (std::size_t i = 0; i < n; ++i) v[i] = div[i] - f[i] / theta;
        double max_update = 0.0, max_norm = 0.0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * w + x;
                const double gx = x + 1 < w ? v[i + 1] - v[i] : 0.0;
                const double gy = y + 1 < h ? v[i + w] - v[i] : 0.0;
                const double denom = 1.0 + p.tau * std::sqrt(gx * gx + gy * gy);
                const double nx = (px[i] + p.tau * gx) / denom;
                const double ny = (py[i] + p.tau * gy) / denom;
                max_update = std::max({max_update, std::abs(nx - px[i]), std::abs(ny - py[i])});
                px[i] = nx;
                py[i] = ny;
                max_norm = std::max(max_norm, std::sqrt(nx * nx + ny * ny));
            }
        assert(max_norm <= 1.0 + 1e-12);
        tv_detail::divergence(px, py, w, h, div);
        for (std::size_t i = 0; i < n; ++i) cand[i] = f[i] - theta * div[i];
        const double e = tv_energy_plane<double>(cand, f, w, h, p.lambda);
        if (e <= best) {
            best = e;
            u.swap(cand);
        }
        if (observer) observer(TvIterate{plane, it, max_update, max_norm, best, u});
        if (max_update < p.tol) break;
    }
    return u;
}

/// Denoises every channel of every slice independently.
inline Image tv_denoise(const Image& img, const TvParams& p, const TvObserver& observer = {}) {
    p.validate();
    Image out = img;
    int plane = 0;
    for (int s = 0; s < img.slices; ++s)
        for (int c = 0; c < img.channels; ++c, ++plane) {
            const auto u = tv_denoise_plane(img.plane(c, s), img.width, img.height, p, plane, observer);
            auto dst = out.plane(c, s);
            for (std::size_t i = 0; i < u.size(); ++i) dst[i] = static_cast<float>(u[i]);
        }
    return out;
}

}  // namespace n2n
