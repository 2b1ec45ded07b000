#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "n2n/error.hpp"
#include "n2n/layers.hpp"
#include "n2n/rng.hpp"
#include "n2n/tensor.hpp"

namespace n2n {

struct LayerSpec {
    std::string name;
    int out_c = 0;
    int in_c = 0;
};

/// Small U-Net without normalization layers. Level l has base * 2^l
/// channels; the bottleneck sits at level `depth`. Output channels equal
/// input channels.
struct UNetConfig {
    int in_channels = 1;
    int depth = 2;
    int base_channels = 16;
    static constexpr int kernel = 3;

    int out_channels() const { return in_channels; }
    int multiple() const { return 1 << depth; }
    int width_at(int level) const { return base_channels << level; }

    void validate() const {
        if (in_channels != 1 && in_channels != 3) throw ParamError("unet in_channels must be 1 or 3");
        if (depth < 1 || depth > 8) throw ParamError("unet depth must lie in [1, 8]");
        if (base_channels < 1 || (static_cast<long>(base_channels) << depth) > (1L << 16))
            throw ParamError("unet base_channels out of range");
    }

    /// Conv layers in execution order: encoder levels, bottleneck, decoder
    /// levels from deepest to shallowest, final projection.
    std::vector<LayerSpec> layer_specs() const {
        std::vector<LayerSpec> specs;
        for (int l = 0; l < depth; ++l) {
            const int in = l == 0 ? in_channels : width_at(l - 1);
            specs.push_back({"enc" + std::to_string(l) + ".conv1", width_at(l), in});
            specs.push_back({"enc" + std::to_string(l) + ".conv2", width_at(l), width_at(l)});
        }
        specs.push_back({"bottleneck.conv1", width_at(depth), width_at(depth - 1)});
        specs.push_back({"bottleneck.conv2", width_at(depth), width_at(depth)});
        for (int l = depth - 1; l >= 0; --l) {
            specs.push_back({"dec" + std::to_string(l) + ".conv1", width_at(l), width_at(l + 1) + width_at(l)});
            specs.push_back({"dec" + std::to_string(l) + ".conv2", width_at(l), width_at(l)});
        }
        specs.push_back({"final", out_channels(), width_at(0)});
        return specs;
    }

    bool operator==(const UNetConfig&) const = default;
};

template <class T>
using ParamList = std::vector<ConvParams<T>>;

template <class T>
ParamList<T> zero_params(const UNetConfig& cfg) {
    ParamList<T> out;
    for (const auto& s : cfg.layer_specs()) out.emplace_back(s.out_c, s.in_c);
    return out;
}

/// Adam first/second moments with the same layout as the parameters.
struct AdamState {
    ParamList<float> m;
    ParamList<float> v;
    std::uint64_t step = 0;
};

struct UNetModel {
    UNetConfig config;
    ParamList<float> layers;
    AdamState adam;

    explicit UNetModel(const UNetConfig& cfg = {}) : config(cfg) {
        cfg.validate();
        layers = zero_params<float>(cfg);
        adam.m = zero_params<float>(cfg);
        adam.v = zero_params<float>(cfg);
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.weight.size() + l.bias.size();
        return n;
    }
};

/// He-style uniform init: weights in [-b, b) with b = sqrt(6 / fan_in),
/// fan_in = in_c * 9, drawn layer by layer in storage order; biases zero.
inline UNetModel make_unet(const UNetConfig& cfg, std::uint64_t seed) {
    UNetModel model(cfg);
    Rng rng(derive_seed(seed, {0x756e6574ull}));
    for (auto& layer : model.layers) {
        const double bound = std::sqrt(6.0 / static_cast<double>(layer.kernel_size()));
        for (float& w : layer.weight) w = static_cast<float>(bound * (2.0 * rng.uniform() - 1.0));
    }
    return model;
}

/// Everything the backward pass needs from one forward pass.
template <class T>
struct UNetTape {
    int height = 0, width = 0;
    std::vector<Tensor<T>> inputs;      ///< conv inputs, by layer index
    std::vector<Tensor<T>> pre;         ///< conv outputs before activation
    std::vector<std::vector<std::int32_t>> argmax;
    std::vector<int> skip_channels;
};

namespace unet_detail {

template <class T>
Tensor<T> conv_act(const ParamList<T>& layers, std::size_t idx, const Tensor<T>& x, UNetTape<T>* tape, bool activate,
                   const std::vector<LayerSpec>& specs) {
    if (tape) tape->inputs[idx] = x;
    Tensor<T> z = conv2d_forward(x, layers[idx]);
    debug_check_finite(z, specs[idx].name.c_str());
    if (!activate) return z;
    Tensor<T> a = leaky_relu_forward(z);
    if (tape) tape->pre[idx] = std::move(z);
    return a;
}

}  // namespace unet_detail

template <class T>
void check_unet_input(const UNetConfig& cfg, const Tensor<T>& x) {
    if (x.channels != cfg.in_channels)
        throw ShapeError("unet: input has " + std::to_string(x.channels) + " channels, model expects " +
                         std::to_string(cfg.in_channels));
    if (x.height % cfg.multiple() != 0 || x.width % cfg.multiple() != 0)
        throw ShapeError("unet: input " + std::to_string(x.height) + "x" + std::to_string(x.width) +
                         " not divisible by " + std::to_string(cfg.multiple()));
}

/// Forward pass. When `tape` is non-null it is filled for unet_backward.
template <class T>
Tensor<T> unet_forward(const UNetConfig& cfg, const ParamList<T>& layers, const Tensor<T>& x, UNetTape<T>* tape = nullptr) {
    check_unet_input(cfg, x);
    const auto specs = cfg.layer_specs();
    if (layers.size() != specs.size()) throw ShapeError("unet: parameter list does not match config");
    if (tape) {
        tape->height = x.height;
        tape->width = x.width;
        tape->inputs.assign(specs.size(), {});
        tape->pre.assign(specs.size(), {});
        tape->argmax.assign(cfg.depth, {});
        tape->skip_channels.assign(cfg.depth, 0);
    }
    using unet_detail::conv_act;
    std::vector<Tensor<T>> skips;
    Tensor<T> h = x;
    std::size_t idx = 0;
    for (int l = 0; l < cfg.depth; ++l) {
        h = conv_act(layers, idx++, h, tape, true, specs);
        h = conv_act(layers, idx++, h, tape, true, specs);
        auto pooled = maxpool2_forward(h);
        if (tape) {
            tape->argmax[l] = std::move(pooled.argmax);
            tape->skip_channels[l] = h.channels;
        }
        skips.push_back(std::move(h));
        h = std::move(pooled.out);
    }
    h = conv_act(layers, idx++, h, tape, true, specs);
    h = conv_act(layers, idx++, h, tape, true, specs);
    for (int l = cfg.depth - 1; l >= 0; --l) {
        h = concat_channels(upsample2_forward(h), skips[l]);
        h = conv_act(layers, idx++, h, tape, true, specs);
        h = conv_act(layers, idx++, h, tape, true, specs);
    }
    return conv_act(layers, idx, h, tape, false, specs);
}

/// Parameter gradients for the forward pass recorded in `tape`.
template <class T>
ParamList<T> unet_backward(const UNetConfig& cfg, const ParamList<T>& layers, const UNetTape<T>& tape,
                           const Tensor<T>& grad_out) {
    const auto specs = cfg.layer_specs();
    if (tape.inputs.size() != specs.size()) throw ShapeError("unet_backward: tape does not belong to this model");
    if (grad_out.channels != cfg.out_channels() || grad_out.height != tape.height || grad_out.width != tape.width)
        throw ShapeError("unet_backward: gradient shape " + grad_out.shape_string() + " does not match output");
    ParamList<T> grads(specs.size());
    const int h = tape.height, w = tape.width;

    auto back = [&](std::size_t idx, Tensor<T> g, bool activated, bool want_x) {
        if (activated) g = leaky_relu_backward(tape.pre[idx], g);
        auto r = conv2d_backward(tape.inputs[idx], layers[idx], g, want_x);
        grads[idx] = std::move(r.grad);
        return std::move(r.grad_x);
    };

    std::size_t idx = specs.size() - 1;
    Tensor<T> g = back(idx--, grad_out, false, true);
    std::vector<Tensor<T>> skip_grads(cfg.depth);
    for (int l = 0; l < cfg.depth; ++l) {
        g = back(idx--, std::move(g), true, true);
        g = back(idx--, std::move(g), true, true);
        auto [g_up, g_skip] = split_channels(g, g.channels - tape.skip_channels[l]);
        skip_grads[l] = std::move(g_skip);
        g = upsample2_backward(g_up);
    }
    g = back(idx--, std::move(g), true, true);
    g = back(idx--, std::move(g), true, true);
    for (int l = cfg.depth - 1; l >= 0; --l) {
        const int lh = h >> l, lw = w >> l;
        g = maxpool2_backward(g, tape.argmax[l], lh, lw);
        for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += skip_grads[l].data[i];
        g = back(idx--, std::move(g), true, true);
        g = back(idx, std::move(g), true, l != 0);
        if (l != 0) --idx;
    }
    return grads;
}

inline Tensor<float> unet_forward(const UNetModel& model, const Tensor<float>& x) {
    return unet_forward(model.config, model.layers, x);
}

}  // namespace n2n
