#pragma once

#include <algorithm>

#include "n2n/image.hpp"
#include "n2n/tensor.hpp"
#include "n2n/unet.hpp"

namespace n2n {

inline int round_up(int v, int multiple) { return (v + multiple - 1) / multiple * multiple; }

/// Copies slice `s` into a tensor, replicating the last row/column out to
/// (h, w) when the target is larger than the image.
inline Tensor<float> slice_to_tensor(const Image& img, int s, int h, int w) {
    Tensor<float> t(img.channels, h, w);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) t.at(c, y, x) = img.at(std::min(x, img.width - 1), std::min(y, img.height - 1), c, s);
    return t;
}

/// Runs the network on each slice. Slices are padded by replication to the
/// next multiple of 2^depth and cropped back; output is not clamped.
inline Image denoise_cnn(const Image& img, const UNetModel& model) {
    if (img.channels != model.config.in_channels)
        throw ShapeError("denoise_cnn: image has " + std::to_string(img.channels) + " channels, model expects " +
                         std::to_string(model.config.in_channels));
    const int m = model.config.multiple();
    const int ph = round_up(img.height, m), pw = round_up(img.width, m);
    Image out = img;
    for (int s = 0; s < img.slices; ++s) {
        const Tensor<float> y = unet_forward(model, slice_to_tensor(img, s, ph, pw));
        for (int c = 0; c < img.channels; ++c)
            for (int yy = 0; yy < img.height; ++yy)
                for (int x = 0; x < img.width; ++x) out.at(x, yy, c, s) = y.at(c, yy, x);
    }
    return out;
}

}  // namespace n2n
