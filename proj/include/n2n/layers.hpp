#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "n2n/error.hpp"
#include "n2n/tensor.hpp"

namespace n2n {

/// One 3x3 convolution: weight is [out_c][in_c][3][3], bias is [out_c].
/// The same layout carries gradients and optimizer moments.
template <class T>
struct ConvParams {
    int out_c = 0;
    int in_c = 0;
    std::vector<T> weight;
    std::vector<T> bias;

    ConvParams() = default;
    ConvParams(int out, int in) : out_c(out), in_c(in), weight(static_cast<std::size_t>(out) * in * 9, T(0)), bias(out, T(0)) {}

    std::size_t kernel_size() const { return static_cast<std::size_t>(in_c) * 9; }

    template <class U>
    ConvParams<U> cast() const {
        ConvParams<U> out;
        out.out_c = out_c;
        out.in_c = in_c;
        out.weight.assign(weight.begin(), weight.end());
        out.bias.assign(bias.begin(), bias.end());
        return out;
    }
};

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapMat = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

}  // namespace detail

/// Unrolls 3x3 zero-padded neighbourhoods of rows [r0, r1): row
/// (c*9 + u*3 + v), column ((i - r0)*w + j) holds x(c, i+u-1, j+v-1), or 0
/// outside the image.
template <class T>
void im2col3x3(const Tensor<T>& x, int r0, int r1, std::vector<T>& col) {
    const int H = x.height, W = x.width;
    const std::size_t n = static_cast<std::size_t>(r1 - r0) * W;
    col.assign(static_cast<std::size_t>(x.channels) * 9 * n, T(0));
    for (int c = 0; c < x.channels; ++c)
        for (int u = 0; u < 3; ++u)
            for (int v = 0; v < 3; ++v) {
                T* row = &col[(static_cast<std::size_t>(c) * 9 + u * 3 + v) * n];
                const int dy = u - 1, dx = v - 1;
                const int j0 = dx < 0 ? 1 : 0, j1 = dx > 0 ? W - 1 : W;
                for (int i = r0; i < r1; ++i) {
                    const int si = i + dy;
                    if (si < 0 || si >= H) continue;
                    const T* src = &x.data[(static_cast<std::size_t>(c) * H + si) * W];
                    T* dst = row + static_cast<std::size_t>(i - r0) * W;
                    for (int j = j0; j < j1; ++j) dst[j] = src[j + dx];
                }
            }
}

template <class T>
void im2col3x3(const Tensor<T>& x, std::vector<T>& col) {
    im2col3x3(x, 0, x.height, col);
}

/// Adjoint of im2col3x3 for the same row band: scatters and sums overlaps.
template <class T>
void col2im3x3_add(const std::vector<T>& col, int r0, int r1, Tensor<T>& gx) {
    const int H = gx.height, W = gx.width;
    const std::size_t n = static_cast<std::size_t>(r1 - r0) * W;
    for (int c = 0; c < gx.channels; ++c)
        for (int u = 0; u < 3; ++u)
            for (int v = 0; v < 3; ++v) {
                const T* row = &col[(static_cast<std::size_t>(c) * 9 + u * 3 + v) * n];
                const int dy = u - 1, dx = v - 1;
                const int j0 = dx < 0 ? 1 : 0, j1 = dx > 0 ? W - 1 : W;
                for (int i = r0; i < r1; ++i) {
                    const int si = i + dy;
                    if (si < 0 || si >= H) continue;
                    T* dst = &gx.data[(static_cast<std::size_t>(c) * H + si) * W];
                    const T* src = row + static_cast<std::size_t>(i - r0) * W;
                    for (int j = j0; j < j1; ++j) dst[j + dx] += src[j];
                }
            }
}

template <class T>
void col2im3x3_add(const std::vector<T>& col, Tensor<T>& gx) {
    col2im3x3_add(col, 0, gx.height, gx);
}

namespace detail {

// Unrolled bands of about 128 KiB measured fastest for the U-Net shapes.
inline constexpr std::size_t kBandBytes = std::size_t(1) << 17;

inline int band_rows(std::size_t kernel_size, int width, std::size_t elem_bytes) {
    const std::size_t budget = kBandBytes / elem_bytes;
    const std::size_t rows = budget / (kernel_size * static_cast<std::size_t>(width));
    return static_cast<int>(std::max<std::size_t>(rows, 1));
}

template <class T>
using StridedMat = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <class T>
using ConstStridedMat = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

}  // namespace detail

namespace detail {

// out = kernel_matrix * unroll(x), band by band; kernel_matrix is rows x (x.channels * 9).
template <class T>
void conv_bands(const Tensor<T>& x, const T* kernel_matrix, int rows, Tensor<T>& out) {
    const auto P = static_cast<Eigen::Index>(x.plane_size());
    const std::size_t K = static_cast<std::size_t>(x.channels) * 9;
    const int band = band_rows(K, x.width, sizeof(T));
    ConstMapMat<T> w(kernel_matrix, rows, static_cast<Eigen::Index>(K));
    std::vector<T> col;
    for (int r0 = 0; r0 < x.height; r0 += band) {
        const int r1 = std::min(x.height, r0 + band);
        const auto n = static_cast<Eigen::Index>(r1 - r0) * x.width;
        im2col3x3(x, r0, r1, col);
        ConstMapMat<T> c(col.data(), static_cast<Eigen::Index>(K), n);
        StridedMat<T> o(out.data.data() + static_cast<std::ptrdiff_t>(r0) * x.width, rows, n, Eigen::OuterStride<>(P));
        o.noalias() = w * c;
    }
}

}  // namespace detail

/// out(o,i,j) = bias(o) + sum_{c,u,v} k(o,c,u,v) x(c, i+u-1, j+v-1), zero padding.
/// Computed band by band as kernel matrix times unrolled input.
template <class T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const ConvParams<T>& p) {
    if (x.channels != p.in_c)
        throw ShapeError("conv2d: input has " + std::to_string(x.channels) + " channels, kernel expects " +
                         std::to_string(p.in_c));
    Tensor<T> out(p.out_c, x.height, x.width);
    detail::conv_bands(x, p.weight.data(), p.out_c, out);
    const std::size_t P = x.plane_size();
    for (int oc = 0; oc < p.out_c; ++oc) {
        T* row = &out.data[static_cast<std::size_t>(oc) * P];
        for (std::size_t i = 0; i < P; ++i) row[i] += p.bias[oc];
    }
    return out;
}

template <class T>
struct ConvBackward {
    Tensor<T> grad_x;        ///< empty when not requested
    ConvParams<T> grad;      ///< kernel and bias gradients
};

/// Exact gradients of conv2d_forward with respect to input, kernel and bias.
///
/// grad_x is itself a zero-padded 3x3 convolution of grad_out with the
/// kernel transposed in (out, in) and rotated by 180 degrees.
template <class T>
ConvBackward<T> conv2d_backward(const Tensor<T>& x, const ConvParams<T>& p, const Tensor<T>& grad_out,
                                bool want_grad_x = true) {
    if (x.channels != p.in_c) throw ShapeError("conv2d_backward: input/kernel channel mismatch");
    if (grad_out.channels != p.out_c || grad_out.height != x.height || grad_out.width != x.width)
        throw ShapeError("conv2d_backward: grad_out " + grad_out.shape_string() + " does not match layer output " +
                         std::to_string(p.out_c) + "x" + std::to_string(x.height) + "x" + std::to_string(x.width));
    const auto P = static_cast<Eigen::Index>(x.plane_size());
    const auto K = static_cast<Eigen::Index>(p.kernel_size());
    const int band = detail::band_rows(p.kernel_size(), x.width, sizeof(T));

    ConvBackward<T> r;
    r.grad = ConvParams<T>(p.out_c, p.in_c);
    detail::MapMat<T> gw(r.grad.weight.data(), p.out_c, K);
    std::vector<T> col;
    for (int r0 = 0; r0 < x.height; r0 += band) {
        const int r1 = std::min(x.height, r0 + band);
        const auto n = static_cast<Eigen::Index>(r1 - r0) * x.width;
        im2col3x3(x, r0, r1, col);
        detail::ConstMapMat<T> c(col.data(), K, n);
        detail::ConstStridedMat<T> g(grad_out.data.data() + static_cast<std::ptrdiff_t>(r0) * x.width, p.out_c, n,
                                     Eigen::OuterStride<>(P));
        gw.noalias() += g * c.transpose();
    }
    for (int oc = 0; oc < p.out_c; ++oc) {
        T s = T(0);
        const T* row = &grad_out.data[static_cast<std::size_t>(oc) * P];
        for (Eigen::Index i = 0; i < P; ++i) s += row[i];
        r.grad.bias[oc] = s;
    }
    if (want_grad_x) {
        std::vector<T> flipped(p.weight.size());
        for (int o = 0; o < p.out_c; ++o)
            for (int c = 0; c < p.in_c; ++c)
                for (int t = 0; t < 9; ++t)
                    flipped[(static_cast<std::size_t>(c) * p.out_c + o) * 9 + (8 - t)] =
                        p.weight[(static_cast<std::size_t>(o) * p.in_c + c) * 9 + t];
        r.grad_x = Tensor<T>(p.in_c, x.height, x.width);
        detail::conv_bands(grad_out, flipped.data(), p.in_c, r.grad_x);
    }
    return r;
}

inline constexpr double kLeakySlope = 0.1;

template <class T>
Tensor<T> leaky_relu_forward(const Tensor<T>& x, T slope = T(kLeakySlope)) {
    Tensor<T> out = x;
    for (T& v : out.data) v = v > T(0) ? v : slope * v;
    return out;
}

/// x is the forward input; x == 0 takes the slope branch.
template <class T>
Tensor<T> leaky_relu_backward(const Tensor<T>& x, const Tensor<T>& grad, T slope = T(kLeakySlope)) {
    if (!x.same_shape(grad)) throw ShapeError("leaky_relu_backward: shape mismatch");
    Tensor<T> out = grad;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = x.data[i] > T(0) ? grad.data[i] : slope * grad.data[i];
    return out;
}

template <class T>
struct PoolResult {
    Tensor<T> out;
    std::vector<std::int32_t> argmax;  ///< flat input index per output element
};

/// 2x2 non-overlapping max. Ties resolve to the first element in row-major scan.
template <class T>
PoolResult<T> maxpool2_forward(const Tensor<T>& x) {
    if (x.height % 2 != 0 || x.width % 2 != 0)
        throw ShapeError("maxpool2: odd spatial size " + x.shape_string());
    PoolResult<T> r{Tensor<T>(x.channels, x.height / 2, x.width / 2), {}};
    r.argmax.resize(r.out.size());
    std::size_t k = 0;
    for (int c = 0; c < x.channels; ++c)
        for (int i = 0; i < r.out.height; ++i)
            for (int j = 0; j < r.out.width; ++j, ++k) {
                std::size_t best = (static_cast<std::size_t>(c) * x.height + 2 * i) * x.width + 2 * j;
                for (int di = 0; di < 2; ++di)
                    for (int dj = 0; dj < 2; ++dj) {
                        const std::size_t idx = (static_cast<std::size_t>(c) * x.height + 2 * i + di) * x.width + 2 * j + dj;
                        if (x.data[idx] > x.data[best]) best = idx;
                    }
                r.out.data[k] = x.data[best];
                r.argmax[k] = static_cast<std::int32_t>(best);
            }
    return r;
}

template <class T>
Tensor<T> maxpool2_backward(const Tensor<T>& grad_out, const std::vector<std::int32_t>& argmax, int in_h, int in_w) {
    if (argmax.size() != grad_out.size() || in_h != 2 * grad_out.height || in_w != 2 * grad_out.width)
        throw ShapeError("maxpool2_backward: routing table does not match gradient");
    Tensor<T> gx(grad_out.channels, in_h, in_w);
    for (std::size_t k = 0; k < grad_out.size(); ++k) gx.data[argmax[k]] += grad_out.data[k];
    return gx;
}

/// Nearest-neighbour 2x upsampling.
template <class T>
Tensor<T> upsample2_forward(const Tensor<T>& x) {
    Tensor<T> out(x.channels, 2 * x.height, 2 * x.width);
    for (int c = 0; c < x.channels; ++c)
        for (int i = 0; i < out.height; ++i)
            for (int j = 0; j < out.width; ++j) out.at(c, i, j) = x.at(c, i / 2, j / 2);
    return out;
}

template <class T>
Tensor<T> upsample2_backward(const Tensor<T>& grad) {
    if (grad.height % 2 != 0 || grad.width % 2 != 0) throw ShapeError("upsample2_backward: odd gradient shape");
    Tensor<T> gx(grad.channels, grad.height / 2, grad.width / 2);
    for (int c = 0; c < grad.channels; ++c)
        for (int i = 0; i < grad.height; ++i)
            for (int j = 0; j < grad.width; ++j) gx.at(c, i / 2, j / 2) += grad.at(c, i, j);
    return gx;
}

/// Stacks b's channels after a's.
template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.height != b.height || a.width != b.width)
        throw ShapeError("concat_channels: spatial mismatch " + a.shape_string() + " vs " + b.shape_string());
    Tensor<T> out(a.channels + b.channels, a.height, a.width);
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.size()));
    return out;
}

/// Inverse of concat_channels: first `first_channels` go to the first result.
template <class T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& x, int first_channels) {
    if (first_channels < 1 || first_channels >= x.channels)
        throw ShapeError("split_channels: cannot split " + std::to_string(x.channels) + " channels at " +
                         std::to_string(first_channels));
    Tensor<T> a(first_channels, x.height, x.width), b(x.channels - first_channels, x.height, x.width);
    std::copy(x.data.begin(), x.data.begin() + static_cast<std::ptrdiff_t>(a.size()), a.data.begin());
    std::copy(x.data.begin() + static_cast<std::ptrdiff_t>(a.size()), x.data.end(), b.data.begin());
    return {std::move(a), std::move(b)};
}

}  // namespace n2n
