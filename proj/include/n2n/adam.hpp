#pragma once

#include <cmath>
#include <cstdint>
#include <span>

#include "n2n/error.hpp"
#include "n2n/unet.hpp"

namespace n2n {

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected Adam update of one parameter block; `step` is the
/// 1-based step number after incrementing.
inline void adam_update(std::span<float> param, std::span<const float> grad, std::span<float> m, std::span<float> v,
                        std::uint64_t step, const AdamOptions& o) {
    if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size())
        throw ShapeError("adam: gradient/moment size does not match parameter block");
    const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        const double mi = o.beta1 * m[i] + (1.0 - o.beta1) * g;
        const double vi = o.beta2 * v[i] + (1.0 - o.beta2) * g * g;
        m[i] = static_cast<float>(mi);
        v[i] = static_cast<float>(vi);
        param[i] = static_cast<float>(param[i] - o.lr * (mi / bc1) / (std::sqrt(vi / bc2) + o.eps));
    }
}

/// One optimizer step over the whole model; increments the step counter once.
inline void adam_step(UNetModel& model, const ParamList<float>& grads, const AdamOptions& o = {}) {
    if (grads.size() != model.layers.size()) throw ShapeError("adam_step: gradient list has wrong layer count");
    const auto specs = model.config.layer_specs();
    for (std::size_t i = 0; i < grads.size(); ++i)
        if (grads[i].weight.size() != model.layers[i].weight.size() || grads[i].bias.size() != model.layers[i].bias.size())
            throw ShapeError("adam_step: gradient shape mismatch at layer " + specs[i].name);
    const std::uint64_t step = ++model.adam.step;
    for (std::size_t i = 0; i < grads.size(); ++i) {
        auto& p = model.layers[i];
        adam_update(p.weight, grads[i].weight, model.adam.m[i].weight, model.adam.v[i].weight, step, o);
        adam_update(p.bias, grads[i].bias, model.adam.m[i].bias, model.adam.v[i].bias, step, o);
    }
}

}  // namespace n2n
