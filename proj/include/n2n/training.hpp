#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "n2n/adam.hpp"
#include "n2n/cnn_denoise.hpp"
#include "n2n/error.hpp"
#include "n2n/image.hpp"
#include "n2n/noise.hpp"
#include "n2n/tensor.hpp"
#include "n2n/unet.hpp"

namespace n2n {

struct NoisyPair {
    Image input;
    Image target;
};

/// Seed of corruption `frame` of the given role. Role 0 is the network
/// input, role 1 the Noise2Noise target.
inline std::uint64_t pair_seed(std::uint64_t seed, std::uint64_t image_id, std::uint64_t k, std::uint64_t role,
                               std::uint64_t frame = 0) {
    return derive_seed(seed, {image_id, k, role, frame});
}

/// Two independent noisy observations of one clean field of view. With
/// level > 1 each side is the mean of `level` independent frames.
inline NoisyPair make_pair(const Image& clean, const NoiseParams& noise, std::uint64_t image_id, std::uint64_t k,
                           int level = 1) {
    if (level < 1) throw ParamError("make_pair: level must be >= 1");
    auto side = [&](std::uint64_t role) {
        if (level == 1) return corrupt(clean, {noise.peak, noise.sigma, pair_seed(noise.seed, image_id, k, role)});
        std::vector<Image> frames;
        for (int f = 0; f < level; ++f)
            frames.push_back(corrupt(clean, {noise.peak, noise.sigma, pair_seed(noise.seed, image_id, k, role, f)}));
        return average_stack(frames, frames.size());
    };
    return {side(0), side(1)};
}

/// Frame i of a simulated acquisition of one field of view.
inline std::vector<Image> noisy_frames(const Image& clean, const NoiseParams& noise, int n) {
    std::vector<Image> frames;
    frames.reserve(n);
    for (int i = 0; i < n; ++i)
        frames.push_back(corrupt(clean, {noise.peak, noise.sigma, derive_seed(noise.seed, {0x6672616dull, std::uint64_t(i)})}));
    return frames;
}

/// Reference image built the way a microscopist would: the mean of n noisy
/// frames of the same field of view. Frame 0 is also the "noisy input".
inline Image make_clean_target_set(const Image& clean, const NoiseParams& noise, int n = 50) {
    if (n < 1) throw ParamError("make_clean_target_set: n must be >= 1");
    const auto frames = noisy_frames(clean, noise, n);
    return average_stack(frames, frames.size());
}

template <class T>
struct LossResult {
    double loss = 0.0;
    Tensor<T> grad;
};

/// loss = mean((pred - target)^2), grad = 2 (pred - target) / N.
template <class T>
LossResult<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
    if (!pred.same_shape(target))
        throw ShapeError("mse_loss: " + pred.shape_string() + " vs " + target.shape_string());
    LossResult<T> r{0.0, Tensor<T>(pred.channels, pred.height, pred.width)};
    const double n = static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = static_cast<double>(pred.data[i]) - static_cast<double>(target.data[i]);
        r.loss += d * d;
        r.grad.data[i] = static_cast<T>(2.0 * d / n);
    }
    r.loss /= n;
    return r;
}

struct TrainConfig {
    double lr = 1e-3;
    int batch_size = 8;
    int patch_size = 64;
    int steps = 2000;
    NoiseParams noise{};
    std::uint64_t seed = 0;
    int eval_every = 100;
    std::vector<int> ladder{1};    ///< averaging levels sampled per training pair
    double holdout_fraction = 0.2;

    void validate(const UNetConfig& model) const {
        noise.validate();
        if (!(lr > 0.0)) throw ParamError("train: lr must be > 0");
        if (batch_size < 1) throw ParamError("train: batch_size must be >= 1");
        if (steps < 1) throw ParamError("train: steps must be >= 1");
        if (eval_every < 1) throw ParamError("train: eval_every must be >= 1");
        if (patch_size < 1 || patch_size % model.multiple() != 0)
            throw ParamError("train: patch_size " + std::to_string(patch_size) + " not divisible by " +
                             std::to_string(model.multiple()));
        if (ladder.empty()) throw ParamError("train: ladder must not be empty");
        for (int l : ladder)
            if (l < 1) throw ParamError("train: ladder levels must be >= 1");
        if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) throw ParamError("train: holdout_fraction must lie in (0, 1)");
    }
};

struct TraceRecord {
    int step = 0;
    double train_loss = 0.0;
    double eval_psnr_db = 0.0;         ///< held-out, scored against the clean phantom
    double eval_psnr_target_db = 0.0;  ///< held-out, scored against a 50-frame average
};

struct TrainTrace {
    std::vector<TraceRecord> records;
    std::vector<std::uint64_t> batch_hashes;  ///< FNV-1a of each step's input batch
    double noisy_psnr_db = 0.0;               ///< identity map on the held-out set, vs clean
    double noisy_psnr_target_db = 0.0;

    /// "step,train_loss,eval_psnr_db", six decimals.
    void write_csv(std::ostream& os) const {
        os << "step,train_loss,eval_psnr_db\n";
        char buf[128];
        for (const auto& r : records) {
            std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f\n", r.step, r.train_loss, r.eval_psnr_db);
            os << buf;
        }
    }
};

/// Held-out evaluation material, fixed for the whole run.
struct EvalSet {
    std::vector<Image> clean;
    std::vector<Image> noisy;
    std::vector<Image> target;

    EvalSet() = default;
    EvalSet(std::span<const Image> images, const NoiseParams& noise, int target_frames = 50) {
        for (std::size_t j = 0; j < images.size(); ++j) {
            const NoiseParams eval_noise{noise.peak, noise.sigma, derive_seed(noise.seed, {0x6576616cull, j})};
            auto frames = noisy_frames(images[j], eval_noise, target_frames);
            clean.push_back(images[j]);
            noisy.push_back(frames.front());
            target.push_back(average_stack(frames, frames.size()));
        }
    }
};

struct EvalScores {
    double psnr_db = 0.0;
    double psnr_target_db = 0.0;
};

inline double mean_psnr(std::span<const Image> ref, std::span<const Image> test) {
    double sum = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) sum += psnr(ref[i], test[i]).db();
    return ref.empty() ? 0.0 : sum / static_cast<double>(ref.size());
}

/// Mean PSNR of the denoised held-out images. Leaves the model untouched.
inline EvalScores evaluate(const UNetModel& model, const EvalSet& set) {
    std::vector<Image> out;
    for (const auto& img : set.noisy) out.push_back(denoise_cnn(img, model));
    return {mean_psnr(set.clean, out), mean_psnr(set.target, out)};
}

inline std::uint64_t fnv1a(std::span<const float> data, std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = reinterpret_cast<const unsigned char*>(data.data());
    for (std::size_t i = 0; i < data.size_bytes(); ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

enum class TargetKind { noisy, clean };

using TrainProgress = std::function<void(const TraceRecord&)>;

namespace train_detail {

inline Tensor<float> to_tensor(const Image& img) {
    Tensor<float> t(img.channels, img.height, img.width);
    std::copy(img.data.begin(), img.data.end(), t.data.begin());
    return t;
}

inline TrainTrace run(UNetModel& model, std::span<const Image> corpus, const TrainConfig& cfg, TargetKind kind,
                      const TrainProgress& progress) {
    cfg.validate(model.config);
    if (corpus.empty()) throw ParamError("train: corpus is empty");
    const std::size_t n_eval = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(corpus.size() * cfg.holdout_fraction)));
    if (corpus.size() < n_eval + 1) throw ParamError("train: corpus needs at least 2 images for a held-out split");
    const std::size_t n_train = corpus.size() - n_eval;
    for (const auto& img : corpus) {
        if (img.channels != model.config.in_channels)
            throw ShapeError("train: corpus image " + img.name + " has " + std::to_string(img.channels) +
                             " channels, model expects " + std::to_string(model.config.in_channels));
        if (img.width < cfg.patch_size || img.height < cfg.patch_size)
            throw ShapeError("train: corpus image " + img.name + " smaller than patch size");
    }
    for (std::size_t i = n_train; i < corpus.size(); ++i)
        if (corpus[i].width % model.config.multiple() || corpus[i].height % model.config.multiple())
            throw ShapeError("train: held-out image " + corpus[i].name + " not divisible by " +
                             std::to_string(model.config.multiple()));

    const EvalSet eval(corpus.subspan(n_train), cfg.noise);
    TrainTrace trace;
    trace.noisy_psnr_db = mean_psnr(eval.clean, eval.noisy);
    trace.noisy_psnr_target_db = mean_psnr(eval.target, eval.noisy);

    const AdamOptions adam{cfg.lr};
    const int P = cfg.patch_size;
    double loss_sum = 0.0;
    int loss_count = 0;
    UNetTape<float> tape;
    for (int step = 1; step <= cfg.steps; ++step) {
        Rng rng(derive_seed(cfg.seed, {0x73746570ull, static_cast<std::uint64_t>(step)}));
        ParamList<float> grads = zero_params<float>(model.config);
        double batch_loss = 0.0;
        std::uint64_t hash = 0xcbf29ce484222325ull;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const std::uint32_t id = rng.below(static_cast<std::uint32_t>(n_train));
            const Image& src = corpus[id];
            const Roi roi{static_cast<int>(rng.below(static_cast<std::uint32_t>(src.width - P + 1))),
                          static_cast<int>(rng.below(static_cast<std::uint32_t>(src.height - P + 1))), P, P};
            const int level = cfg.ladder[rng.below(static_cast<std::uint32_t>(cfg.ladder.size()))];
            const std::uint64_t k = static_cast<std::uint64_t>(step) * cfg.batch_size + b;
            const Image clean = crop(src, roi);
            NoisyPair pair = make_pair(clean, cfg.noise, id, k, level);
            hash = fnv1a(pair.input.data, hash);

            const Tensor<float> x = to_tensor(pair.input);
            const Tensor<float> y = to_tensor(kind == TargetKind::noisy ? pair.target : clean);
            const Tensor<float> pred = unet_forward(model.config, model.layers, x, &tape);
            auto loss = mse_loss(pred, y);
            for (float& g : loss.grad.data) g /= static_cast<float>(cfg.batch_size);
            batch_loss += loss.loss;
            const auto g = unet_backward(model.config, model.layers, tape, loss.grad);
            for (std::size_t l = 0; l < g.size(); ++l) {
                for (std::size_t i = 0; i < g[l].weight.size(); ++i) grads[l].weight[i] += g[l].weight[i];
                for (std::size_t i = 0; i < g[l].bias.size(); ++i) grads[l].bias[i] += g[l].bias[i];
            }
        }
        batch_loss /= cfg.batch_size;
        if (!std::isfinite(batch_loss)) throw Error("train: non-finite loss at step " + std::to_string(step));
        trace.batch_hashes.push_back(hash);
        adam_step(model, grads, adam);
        for (const auto& l : model.layers)
            if (!all_finite(l.weight) || !all_finite(l.bias))
                throw Error("train: non-finite weights after step " + std::to_string(step));
        loss_sum += batch_loss;
        ++loss_count;

        if (step % cfg.eval_every == 0 || step == cfg.steps) {
            const EvalScores s = evaluate(model, eval);
            trace.records.push_back({step, loss_sum / loss_count, s.psnr_db, s.psnr_target_db});
            loss_sum = 0.0;
            loss_count = 0;
            if (progress) progress(trace.records.back());
        }
    }
    return trace;
}

}  // namespace train_detail

/// Noise2Noise training: input and target are independent corruptions of
/// the same random patch. The last holdout_fraction of the corpus is never
/// sampled and is used for evaluation against the clean images.
inline TrainTrace train(UNetModel& model, std::span<const Image> corpus, const TrainConfig& cfg,
                        const TrainProgress& progress = {}) {
    return train_detail::run(model, corpus, cfg, TargetKind::noisy, progress);
}

/// Same batch schedule and inputs as train(), but the target is the clean patch.
inline TrainTrace train_supervised(UNetModel& model, std::span<const Image> corpus, const TrainConfig& cfg,
                                   const TrainProgress& progress = {}) {
    return train_detail::run(model, corpus, cfg, TargetKind::clean, progress);
}

}  // namespace n2n
