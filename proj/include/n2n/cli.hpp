#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "n2n/bench.hpp"
#include "n2n/checkpoint.hpp"
#include "n2n/cnn_denoise.hpp"
#include "n2n/error.hpp"
#include "n2n/image_io.hpp"
#include "n2n/nlm.hpp"
#include "n2n/noise.hpp"
#include "n2n/phantom.hpp"
#include "n2n/training.hpp"
#include "n2n/tv.hpp"
#include "n2n/unet.hpp"

namespace n2n {

namespace cli_detail {

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) out.push_back(item);
    return out;
}

inline Roi parse_roi(const std::string& s) {
    const auto parts = split_list(s);
    if (parts.size() != 4) throw ParamError("--roi expects x,y,w,h");
    try {
        return {std::stoi(parts[0]), std::stoi(parts[1]), std::stoi(parts[2]), std::stoi(parts[3])};
    } catch (const std::exception&) {
        throw ParamError("--roi expects four integers x,y,w,h");
    }
}

struct GlobalFlags {
    std::uint64_t seed = 0;
    double peak = 200.0;
    double sigma = 0.02;

    NoiseParams noise() const { return {peak, sigma, seed}; }
};

}  // namespace cli_detail

/// Entry point of the `n2n` tool. Returns 0 on success, 1 when processing
/// fails and 2 on a usage error.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    using namespace cli_detail;
    CLI::App app{"Noise2Noise denoising toolkit for fluorescence-style images", "n2n"};
    app.require_subcommand(1);
    GlobalFlags g;
    app.add_option("--seed", g.seed, "RNG seed for noise, phantoms and training")->capture_default_str();
    app.add_option("--peak", g.peak, "Expected photon count at full scale")->capture_default_str();
    app.add_option("--sigma", g.sigma, "Gaussian read-noise std-dev (normalized units)")->capture_default_str();

    // noise
    auto* noise_cmd = app.add_subcommand("noise", "Corrupt an image with Poisson-Gaussian noise");
    std::string noise_in, noise_out;
    int noise_frames = 1;
    noise_cmd->add_option("input", noise_in)->required();
    noise_cmd->add_option("output", noise_out)->required();
    noise_cmd->add_option("--frames", noise_frames, "Write a stack of independent frames (.rt output)")
        ->check(CLI::PositiveNumber);

    // avg
    auto* avg_cmd = app.add_subcommand("avg", "Average the first N frames of one or more images/stacks");
    std::vector<std::string> avg_in;
    std::string avg_out;
    int avg_n = 0;
    avg_cmd->add_option("inputs", avg_in)->required();
    avg_cmd->add_option("-o,--output", avg_out)->required();
    avg_cmd->add_option("-n,--count", avg_n, "Frames to average (default: all)");

    // psnr
    auto* psnr_cmd = app.add_subcommand("psnr", "PSNR of TEST against REFERENCE (peak 1.0)");
    std::string psnr_ref, psnr_test;
    psnr_cmd->add_option("reference", psnr_ref)->required();
    psnr_cmd->add_option("test", psnr_test)->required();

    // denoise
    auto* den_cmd = app.add_subcommand("denoise", "Denoise one image");
    std::string den_method, den_in, den_out, den_weights;
    TvParams tv;
    NlmParams nlm;
    den_cmd->add_option("--method", den_method)->required()->check(CLI::IsMember({"tv", "nlm", "cnn"}));
    den_cmd->add_option("--weights", den_weights, "Checkpoint (.n2nw) for --method cnn");
    den_cmd->add_option("input", den_in)->required();
    den_cmd->add_option("output", den_out)->required();

    auto add_classical = [&](CLI::App* cmd) {
        cmd->add_option("--tv-lambda", tv.lambda)->capture_default_str();
        cmd->add_option("--tv-iters", tv.max_iters)->capture_default_str();
        cmd->add_option("--tv-tol", tv.tol)->capture_default_str();
        cmd->add_option("--nlm-h", nlm.h)->capture_default_str();
        cmd->add_option("--nlm-patch", nlm.patch_radius)->capture_default_str();
        cmd->add_option("--nlm-search", nlm.search_radius)->capture_default_str();
    };
    add_classical(den_cmd);

    // train
    auto* train_cmd = app.add_subcommand("train", "Train a U-Net on synthetic phantoms");
    TrainConfig tc;
    PhantomSpec ps;
    UNetConfig uc;
    std::string train_out, train_trace, ladder = "1";
    bool supervised = false;
    std::uint64_t init_seed = 1;
    train_cmd->add_option("-o,--out", train_out, "Checkpoint to write (.n2nw)")->required();
    train_cmd->add_option("--trace", train_trace, "Write the training trace as CSV");
    train_cmd->add_option("--steps", tc.steps)->capture_default_str();
    train_cmd->add_option("--lr", tc.lr)->capture_default_str();
    train_cmd->add_option("--batch", tc.batch_size)->capture_default_str();
    train_cmd->add_option("--patch", tc.patch_size)->capture_default_str();
    train_cmd->add_option("--eval-every", tc.eval_every)->capture_default_str();
    train_cmd->add_option("--ladder", ladder, "Averaging levels mixed into training pairs, e.g. 1,2,4,8,16")
        ->capture_default_str();
    train_cmd->add_option("--count", ps.count, "Phantom corpus size")->capture_default_str();
    train_cmd->add_option("--size", ps.size, "Phantom edge length")->capture_default_str();
    train_cmd->add_option("--channels", uc.in_channels)->check(CLI::IsMember({1, 3}))->capture_default_str();
    train_cmd->add_option("--depth", uc.depth)->capture_default_str();
    train_cmd->add_option("--base", uc.base_channels)->capture_default_str();
    train_cmd->add_option("--init-seed", init_seed, "Weight initialization seed")->capture_default_str();
    train_cmd->add_flag("--supervised", supervised, "Use clean patches as targets");

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "Score denoisers against frame-averaged targets");
    bool synthetic = false;
    std::string corpus_dir, methods_arg, weights_arg, bench_out = "bench_out", roi_arg;
    SyntheticCorpus sc;
    bool no_montage = false;
    auto* syn_opt = bench_cmd->add_flag("--synthetic", synthetic, "Generate phantom samples");
    auto* corpus_opt = bench_cmd->add_option("--corpus", corpus_dir, "Directory of .rt frame stacks");
    syn_opt->excludes(corpus_opt);
    bench_cmd->add_option("--methods", methods_arg, "Comma list; default all (cnn only with --weights)");
    bench_cmd->add_option("--weights", weights_arg, "Comma list of checkpoints (one per channel count)");
    bench_cmd->add_option("--out", bench_out, "Output directory")->capture_default_str();
    bench_cmd->add_option("--gray", sc.gray, "Synthetic gray samples")->capture_default_str();
    bench_cmd->add_option("--color", sc.color, "Synthetic color samples")->capture_default_str();
    bench_cmd->add_option("--size", sc.size, "Synthetic sample edge length")->capture_default_str();
    bench_cmd->add_option("--target-frames", sc.frames, "Frames averaged into the target")->capture_default_str();
    bench_cmd->add_option("--roi", roi_arg, "Montage ROI x,y,w,h (default: centred 100x100)");
    bench_cmd->add_flag("--no-montage", no_montage);
    add_classical(bench_cmd);

    // montage
    auto* mont_cmd = app.add_subcommand("montage", "Write full-frame and ROI comparison strips");
    std::string m_noisy, m_den, m_target, m_prefix, m_roi;
    mont_cmd->add_option("noisy", m_noisy)->required();
    mont_cmd->add_option("denoised", m_den)->required();
    mont_cmd->add_option("target", m_target)->required();
    mont_cmd->add_option("-o,--out", m_prefix, "Output path prefix")->required();
    mont_cmd->add_option("--roi", m_roi, "ROI x,y,w,h (default: centred 100x100)");

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    if (argc <= 1) {
        err << app.help();
        return 2;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (*noise_cmd) {
            const Image img = load_image(noise_in);
            if (noise_frames == 1) {
                save_image(corrupt(img, g.noise()), noise_out);
            } else {
                save_image(stack_slices(noisy_frames(img, g.noise(), noise_frames)), noise_out);
            }
        } else if (*avg_cmd) {
            std::vector<Image> frames;
            for (const auto& path : avg_in)
                for (auto& s : split_slices(load_image(path))) frames.push_back(std::move(s));
            const std::size_t n = avg_n > 0 ? static_cast<std::size_t>(avg_n) : frames.size();
            save_image(average_stack(frames, n), avg_out);
        } else if (*psnr_cmd) {
            out << psnr(load_image(psnr_ref), load_image(psnr_test)).format(4) << "\n";
        } else if (*den_cmd) {
            std::optional<UNetModel> model;
            if (den_method == "cnn") {
                if (den_weights.empty()) throw ParamError("--method cnn requires --weights");
                model = load_weights(den_weights);
            }
            const Image img = load_image(den_in);
            auto [result, ms] = time_call([&] {
                if (den_method == "tv") return tv_denoise(img, tv);
                if (den_method == "nlm") return nlm_denoise(img, nlm);
                return denoise_cnn(img, *model);
            });
            save_image(result, den_out);
            out << "time_ms=" << ms << "\n";
        } else if (*train_cmd) {
            std::vector<int> levels;
            for (const auto& s : split_list(ladder)) levels.push_back(std::stoi(s));
            tc.ladder = levels;
            tc.seed = g.seed;
            tc.noise = {g.peak, g.sigma, derive_seed(g.seed, {0x6e6f6973ull})};
            ps.channels = uc.in_channels;
            ps.seed = g.seed;
            uc.validate();
            tc.validate(uc);
            const auto corpus = make_phantoms(ps);
            UNetModel model = make_unet(uc, init_seed);
            auto report = [&](const TraceRecord& r) {
                out << "step " << r.step << "  loss " << r.train_loss << "  eval_psnr " << r.eval_psnr_db << " dB\n"
                    << std::flush;
            };
            const TrainTrace trace = supervised ? train_supervised(model, corpus, tc, report) : train(model, corpus, tc, report);
            out << "noisy held-out psnr " << trace.noisy_psnr_db << " dB\n";
            save_weights(model, train_out);
            if (!train_trace.empty()) {
                std::ofstream f(train_trace, std::ios::binary | std::ios::trunc);
                if (!f) throw IoError("cannot write " + train_trace);
                trace.write_csv(f);
            }
        } else if (*bench_cmd) {
            if (!synthetic && corpus_dir.empty()) throw ParamError("bench needs --synthetic or --corpus DIR");
            BenchOptions opt;
            opt.tv = tv;
            opt.nlm = nlm;
            opt.out_dir = bench_out;
            opt.montages = !no_montage;
            if (!roi_arg.empty()) opt.roi = parse_roi(roi_arg);
            for (const auto& w : split_list(weights_arg)) opt.models.push_back(load_weights(w));
            if (!methods_arg.empty()) {
                opt.methods.clear();
                for (const auto& m : split_list(methods_arg)) opt.methods.push_back(parse_method(m));
            } else if (opt.models.empty()) {
                std::erase(opt.methods, Method::cnn);
            }
            const auto samples = synthetic ? synthetic_samples(sc, g.noise()) : load_corpus_samples(corpus_dir, sc.frames);
            const BenchReport report = run_bench(samples, opt);
            report.write_csv(out);
        } else if (*mont_cmd) {
            const Image noisy = load_image(m_noisy);
            const Montage mt = montage(noisy, load_image(m_den), load_image(m_target),
                                       m_roi.empty() ? default_roi(noisy) : parse_roi(m_roi));
            save_image(mt.full, m_prefix + "_full" + netpbm_extension(noisy));
            save_image(mt.roi, m_prefix + "_roi" + netpbm_extension(noisy));
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace n2n
