#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "n2n/error.hpp"
#include "n2n/image.hpp"
#include "n2n/rng.hpp"

namespace n2n {

/// Poisson-Gaussian corruption: noisy = Poisson(clean * peak) / peak + N(0, sigma^2).
struct NoiseParams {
    double peak = 200.0;   ///< expected photon count at full scale
    double sigma = 0.02;   ///< read-noise std-dev, normalized units
    std::uint64_t seed = 0;

    void validate() const {
        if (!(peak > 0.0) || !std::isfinite(peak)) throw ParamError("noise peak must be finite and > 0");
        if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ParamError("noise sigma must be finite and >= 0");
    }
};

/// Poisson draw. Knuth's product method below lambda = 30, rounded normal
/// approximation at and above it. The count is integral but returned as a
/// double so that very large peaks cannot overflow.
inline double sample_poisson(double lambda, Rng& rng) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw ParamError("poisson lambda must be finite and >= 0, got " + std::to_string(lambda));
    if (lambda == 0.0) return 0.0;
    if (lambda < 30.0) {
        const double limit = std::exp(-lambda);
        int k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= rng.uniform();
        } while (p > limit);
        return static_cast<double>(k - 1);
    }
    const double x = lambda + std::sqrt(lambda) * rng.normal();
    return std::round(x > 0.0 ? x : 0.0);
}

/// Corrupts every sample independently. Each slice draws from its own
/// stream seeded by (params.seed, slice index); within a slice draws follow
/// data order, one Poisson then one normal per sample. Output is not clamped.
inline Image corrupt(const Image& img, const NoiseParams& params) {
    params.validate();
    Image out = img;
    for (int s = 0; s < img.slices; ++s) {
        Rng rng(derive_seed(params.seed, {static_cast<std::uint64_t>(s)}));
        const std::size_t begin = img.slice_size() * s;
        for (std::size_t i = begin; i < begin + img.slice_size(); ++i) {
            const double count = sample_poisson(static_cast<double>(img.data[i]) * params.peak, rng);
            const double read = rng.normal();
            out.data[i] = static_cast<float>(count / params.peak + params.sigma * read);
        }
    }
    return out;
}

/// Pixel-wise mean of the first n images, accumulated in double.
inline Image average_stack(std::span<const Image> imgs, std::size_t n) {
    if (imgs.empty()) throw ShapeError("average_stack: empty list");
    if (n < 1 || n > imgs.size())
        throw ParamError("average_stack: n=" + std::to_string(n) + " outside [1, " + std::to_string(imgs.size()) + "]");
    for (std::size_t k = 1; k < n; ++k) require_same_shape(imgs[0], imgs[k], "average_stack");
    std::vector<double> acc(imgs[0].data.size(), 0.0);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += imgs[k].data[i];
    Image out = imgs[0];
    for (std::size_t i = 0; i < acc.size(); ++i) out.data[i] = static_cast<float>(acc[i] / static_cast<double>(n));
    return out;
}

inline double mse(const Image& a, const Image& b) {
    require_same_shape(a, b, "mse");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        sum += d * d;
    }
    return sum / static_cast<double>(a.data.size());
}

/// Decibel value, or the distinguished infinite value for a perfect match.
class PsnrValue {
public:
    static PsnrValue infinite() { return PsnrValue(std::numeric_limits<double>::infinity()); }
    static PsnrValue from_db(double db) { return PsnrValue(db); }

    bool is_infinite() const { return std::isinf(db_); }
    double db() const { return db_; }

    /// "inf" or fixed-point with the given number of decimals.
    std::string format(int decimals = 4) const {
        if (is_infinite()) return "inf";
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.*f", decimals, db_);
        return buf;
    }

    auto operator<=>(const PsnrValue&) const = default;

private:
    explicit PsnrValue(double db) : db_(db) {}
    double db_;
};

/// 10 log10(1 / MSE), peak taken as 1.0 in normalized units.
inline PsnrValue psnr(const Image& reference, const Image& test) {
    const double e = mse(reference, test);
    if (e == 0.0) return PsnrValue::infinite();
    return PsnrValue::from_db(10.0 * std::log10(1.0 / e));
}

}  // namespace n2n
