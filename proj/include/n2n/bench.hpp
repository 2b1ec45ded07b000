#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <type_traits>
#include <utility>
#include <vector>

#include "n2n/cnn_denoise.hpp"
#include "n2n/error.hpp"
#include "n2n/image.hpp"
#include "n2n/image_io.hpp"
#include "n2n/nlm.hpp"
#include "n2n/noise.hpp"
#include "n2n/phantom.hpp"
#include "n2n/training.hpp"
#include "n2n/tv.hpp"
#include "n2n/unet.hpp"

namespace n2n {

enum class Method { noisy, avg2, avg4, avg8, avg16, tv, nlm, cnn };

inline const std::vector<Method>& all_methods() {
    static const std::vector<Method> m{Method::noisy, Method::avg2, Method::avg4, Method::avg8,
                                       Method::avg16, Method::tv,   Method::nlm,  Method::cnn};
    return m;
}

inline std::string method_name(Method m) {
    switch (m) {
        case Method::noisy: return "noisy";
        case Method::avg2: return "avg2";
        case Method::avg4: return "avg4";
        case Method::avg8: return "avg8";
        case Method::avg16: return "avg16";
        case Method::tv: return "tv";
        case Method::nlm: return "nlm";
        case Method::cnn: return "cnn";
    }
    return "?";
}

inline Method parse_method(const std::string& s) {
    for (Method m : all_methods())
        if (method_name(m) == s) return m;
    throw ParamError("unknown method '" + s + "' (expected noisy, avg2, avg4, avg8, avg16, tv, nlm or cnn)");
}

inline int averaging_count(Method m) {
    switch (m) {
        case Method::avg2: return 2;
        case Method::avg4: return 4;
        case Method::avg8: return 8;
        case Method::avg16: return 16;
        default: return 0;
    }
}

/// Wall time of exactly one call, monotonic clock, whole milliseconds.
template <class F>
auto time_call(F&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<std::invoke_result_t<F>>) {
        fn();
        return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
    } else {
        auto result = fn();
        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
        return std::pair<decltype(result), long long>(std::move(result), ms);
    }
}

struct BenchRow {
    std::string sample;
    Method method;
    PsnrValue psnr;
    long long time_ms;
};

struct BenchReport {
    std::vector<BenchRow> rows;

    /// sample,method,psnr_db,time_ms with 4-decimal PSNR, LF line endings.
    void write_csv(std::ostream& os) const {
        os << "sample,method,psnr_db,time_ms\n";
        for (const auto& r : rows)
            os << r.sample << ',' << method_name(r.method) << ',' << r.psnr.format(4) << ',' << r.time_ms << '\n';
    }

    std::string csv() const {
        std::ostringstream os;
        write_csv(os);
        return os.str();
    }

    std::optional<PsnrValue> find(const std::string& sample, Method m) const {
        for (const auto& r : rows)
            if (r.sample == sample && r.method == m) return r.psnr;
        return std::nullopt;
    }
};

/// Frames of one field of view; the reference is the mean of all of them
/// and frame 0 is the noisy input every method starts from.
struct BenchSample {
    std::string name;
    std::vector<Image> frames;
    Image target;
};

inline BenchSample make_bench_sample(std::string name, std::vector<Image> frames) {
    if (frames.empty()) throw ParamError("bench sample " + name + " has no frames");
    BenchSample s{std::move(name), std::move(frames), {}};
    s.target = average_stack(s.frames, s.frames.size());
    s.target.name = s.name;
    return s;
}

struct SyntheticCorpus {
    int gray = 2;
    int color = 2;
    int size = 256;
    int frames = 50;
};

/// Phantom scenes corrupted into `frames` noisy acquisitions each. Sample
/// content and noise derive from noise.seed only.
inline std::vector<BenchSample> synthetic_samples(const SyntheticCorpus& spec, const NoiseParams& noise) {
    std::vector<BenchSample> out;
    const auto gray = make_phantoms({spec.gray, spec.size, 1, derive_seed(noise.seed, {0x67726179ull})});
    const auto color = make_phantoms({spec.color, spec.size, 3, derive_seed(noise.seed, {0x636f6c72ull})});
    std::uint64_t id = 0;
    auto add = [&](const Image& clean, const std::string& name) {
        const NoiseParams n{noise.peak, noise.sigma, derive_seed(noise.seed, {0x62656e63ull, id++})};
        out.push_back(make_bench_sample(name, noisy_frames(clean, n, spec.frames)));
    };
    for (std::size_t i = 0; i < gray.size(); ++i) add(gray[i], "gray" + std::to_string(i));
    for (std::size_t i = 0; i < color.size(); ++i) add(color[i], "color" + std::to_string(i));
    return out;
}

/// Every .rt stack in `dir` (sorted by name) is one sample whose slices are
/// co-registered frames; at most `max_frames` are used.
inline std::vector<BenchSample> load_corpus_samples(const std::filesystem::path& dir, int max_frames = 50) {
    if (!std::filesystem::is_directory(dir)) throw IoError("corpus directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && io_detail::lower_extension(e.path()) == ".rt") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("no .rt stacks in " + dir.string());
    std::vector<BenchSample> out;
    for (const auto& f : files) {
        auto frames = split_slices(load_image(f));
        if (static_cast<int>(frames.size()) > max_frames) frames.resize(max_frames);
        out.push_back(make_bench_sample(f.stem().string(), std::move(frames)));
    }
    return out;
}

/// Horizontal strips [noisy | denoised | target] of the full frame and of
/// the ROI, separated by 2-pixel white gutters.
struct Montage {
    Image full;
    Image roi;
};

inline constexpr int kGutter = 2;

inline Image hstrip(const Image& a, const Image& b, const Image& c) {
    Image out(3 * a.width + 2 * kGutter, a.height, a.channels, 1, 1.0f);
    out.source_max = c.source_max;
    int x0 = 0;
    for (const Image* img : {&a, &b, &c}) {
        for (int ch = 0; ch < a.channels; ++ch)
            for (int y = 0; y < a.height; ++y)
                for (int x = 0; x < a.width; ++x) out.at(x0 + x, y, ch) = img->at(x, y, ch);
        x0 += a.width + kGutter;
    }
    return out;
}

inline Roi default_roi(const Image& img) {
    const int w = std::min(100, img.width), h = std::min(100, img.height);
    return {(img.width - w) / 2, (img.height - h) / 2, w, h};
}

inline Montage montage(const Image& noisy, const Image& denoised, const Image& target, const Roi& roi) {
    require_same_shape(noisy, denoised, "montage");
    require_same_shape(noisy, target, "montage");
    if (noisy.slices != 1) throw ShapeError("montage: expects single-slice images");
    return {hstrip(noisy, denoised, target), hstrip(crop(noisy, roi), crop(denoised, roi), crop(target, roi))};
}

inline std::string netpbm_extension(const Image& img) { return img.channels == 3 ? ".ppm" : ".pgm"; }

struct BenchOptions {
    std::vector<Method> methods = all_methods();
    TvParams tv{};
    NlmParams nlm{};
    std::vector<UNetModel> models;        ///< cnn picks the model whose in_channels match
    std::filesystem::path out_dir;        ///< empty: write nothing
    bool montages = true;
    std::optional<Roi> roi;
};

inline const UNetModel* model_for(const std::vector<UNetModel>& models, int channels) {
    for (const auto& m : models)
        if (m.config.in_channels == channels) return &m;
    return nullptr;
}

/// Runs every requested method on every sample and scores it against the
/// sample's frame average. Preconditions (weights, frame counts) are checked
/// for all samples before any processing starts.
inline BenchReport run_bench(const std::vector<BenchSample>& samples, const BenchOptions& opt) {
    if (opt.methods.empty()) throw ParamError("bench: no methods requested");
    opt.tv.validate();
    opt.nlm.validate();
    for (const auto& s : samples) {
        for (Method m : opt.methods) {
            if (m == Method::cnn && model_for(opt.models, s.frames.front().channels) == nullptr)
                throw ParamError("bench: method cnn needs weights for " + std::to_string(s.frames.front().channels) +
                                 "-channel images (sample " + s.name + ")");
            if (averaging_count(m) > static_cast<int>(s.frames.size()))
                throw ParamError("bench: " + method_name(m) + " needs " + std::to_string(averaging_count(m)) +
                                 " frames, sample " + s.name + " has " + std::to_string(s.frames.size()));
        }
    }
    if (!opt.out_dir.empty()) std::filesystem::create_directories(opt.out_dir);

    BenchReport report;
    for (const auto& s : samples) {
        const Image& noisy = s.frames.front();
        std::optional<Image> shown;
        for (Method m : opt.methods) {
            Image out;
            long long ms = 0;
            switch (m) {
                case Method::noisy: out = noisy; break;
                case Method::avg2:
                case Method::avg4:
                case Method::avg8:
                case Method::avg16:
                    std::tie(out, ms) = time_call([&] { return average_stack(s.frames, averaging_count(m)); });
                    break;
                case Method::tv: std::tie(out, ms) = time_call([&] { return tv_denoise(noisy, opt.tv); }); break;
                case Method::nlm: std::tie(out, ms) = time_call([&] { return nlm_denoise(noisy, opt.nlm); }); break;
                case Method::cnn: {
                    const UNetModel& model = *model_for(opt.models, noisy.channels);
                    std::tie(out, ms) = time_call([&] { return denoise_cnn(noisy, model); });
                    break;
                }
            }
            report.rows.push_back({s.name, m, psnr(s.target, out), ms});
            if (m == Method::cnn || (!shown && (m == Method::tv || m == Method::nlm))) shown = std::move(out);
        }
        if (!opt.out_dir.empty() && opt.montages && shown) {
            const Montage mt = montage(noisy, *shown, s.target, opt.roi.value_or(default_roi(noisy)));
            save_image(mt.full, opt.out_dir / (s.name + "_montage_full" + netpbm_extension(noisy)));
            save_image(mt.roi, opt.out_dir / (s.name + "_montage_roi" + netpbm_extension(noisy)));
        }
    }
    if (!opt.out_dir.empty()) {
        std::ofstream csv(opt.out_dir / "report.csv", std::ios::binary | std::ios::trunc);
        if (!csv) throw IoError("cannot write " + (opt.out_dir / "report.csv").string());
        report.write_csv(csv);
    }
    return report;
}

}  // namespace n2n
