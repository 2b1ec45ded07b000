#include <gtest/gtest.h>

#include <filesystem>
#include <thread>

#include "n2n/bench.hpp"
#include "oracles.hpp"

using namespace n2n;
namespace fs = std::filesystem;

namespace {

std::vector<BenchSample> tiny_samples() { return synthetic_samples({1, 1, 32, 20}, {200.0, 0.02, 3}); }

}  // namespace

TEST(Method, NamesRoundTrip) {
    for (Method m : all_methods()) EXPECT_EQ(parse_method(method_name(m)), m);
    EXPECT_THROW(parse_method("bm3d"), ParamError);
    EXPECT_EQ(averaging_count(Method::avg16), 16);
    EXPECT_EQ(averaging_count(Method::tv), 0);
}

TEST(TimeCall, NoOpAndResult) {
    EXPECT_GE(time_call([] {}), 0);
    const auto [v, ms] = time_call([] { return 42; });
    EXPECT_EQ(v, 42);
    EXPECT_GE(ms, 0);
    EXPECT_GE(time_call([] { std::this_thread::sleep_for(std::chrono::milliseconds(20)); }), 19);
}

TEST(TimeCall, LargerImageTakesLonger) {
    const UNetModel model = make_unet({1, 2, 16}, 1);
    const long long small = time_call([&] { denoise_cnn(Image(64, 64), model); });
    const long long large = time_call([&] { denoise_cnn(Image(512, 512), model); });
    EXPECT_GT(large, small);
}

TEST(Montage, FullFrameGeometry) {
    const Image a(512, 512);
    const Montage m = montage(a, a, a, default_roi(a));
    EXPECT_EQ(m.full.width, 3 * 512 + 2 * 2);
    EXPECT_EQ(m.full.height, 512);
    EXPECT_EQ(m.roi.width, 304);
    EXPECT_EQ(m.roi.height, 100);
}

TEST(Montage, PanelsAndGutters) {
    Image a(4, 3), b(4, 3), c(4, 3);
    std::fill(a.data.begin(), a.data.end(), 0.1f);
    std::fill(b.data.begin(), b.data.end(), 0.2f);
    std::fill(c.data.begin(), c.data.end(), 0.3f);
    const Montage m = montage(a, b, c, {1, 1, 2, 2});
    for (int y = 0; y < 3; ++y) {
        EXPECT_EQ(m.full.at(0, y), 0.1f);
        EXPECT_EQ(m.full.at(4, y), 1.0f);
        EXPECT_EQ(m.full.at(5, y), 1.0f);
        EXPECT_EQ(m.full.at(6, y), 0.2f);
        EXPECT_EQ(m.full.at(12, y), 0.3f);
    }
    EXPECT_EQ(m.roi.width, 3 * 2 + 4);
}

TEST(Montage, DefaultRoiOnSmallImages) {
    const Roi r = default_roi(Image(64, 300));
    EXPECT_EQ(r.width, 64);
    EXPECT_EQ(r.height, 100);
    EXPECT_EQ(r.y0, 100);
}

TEST(Montage, Errors) {
    EXPECT_THROW(montage(Image(4, 4), Image(4, 5), Image(4, 4), {0, 0, 2, 2}), ShapeError);
    EXPECT_THROW(montage(Image(4, 4), Image(4, 4), Image(4, 4), {3, 3, 2, 2}), ShapeError);
}

TEST(Bench, SyntheticSamplesAreDeterministic) {
    const auto a = tiny_samples(), b = tiny_samples();
    ASSERT_EQ(a.size(), 2u);
    EXPECT_EQ(a[0].name, "gray0");
    EXPECT_EQ(a[1].name, "color0");
    EXPECT_EQ(a[1].frames.front().channels, 3);
    EXPECT_EQ(a[0].frames.size(), 20u);
    EXPECT_EQ(a[1].target.data, b[1].target.data);
    EXPECT_NE(synthetic_samples({1, 0, 32, 2}, {200.0, 0.02, 4})[0].frames[0].data, a[0].frames[0].data);
}

TEST(Bench, OneRowPerSampleAndMethod) {
    BenchOptions opt;
    opt.methods = {Method::avg8, Method::tv};
    const BenchReport r = run_bench(tiny_samples(), opt);
    ASSERT_EQ(r.rows.size(), 4u);
    EXPECT_EQ(r.rows[0].sample, "gray0");
    EXPECT_EQ(r.rows[0].method, Method::avg8);
    EXPECT_EQ(r.rows[3].method, Method::tv);
    for (const auto& row : r.rows) EXPECT_GE(row.time_ms, 0);
}

TEST(Bench, CnnWithoutWeightsFailsUpFront) {
    BenchOptions opt;
    opt.methods = {Method::noisy, Method::cnn};
    opt.out_dir = fs::temp_directory_path() / "n2n_bench_noweights";
    fs::remove_all(opt.out_dir);
    EXPECT_THROW(run_bench(tiny_samples(), opt), ParamError);
    EXPECT_FALSE(fs::exists(opt.out_dir));
    opt.models.push_back(make_unet({1, 1, 2}, 1));  // gray only
    EXPECT_THROW(run_bench(tiny_samples(), opt), ParamError);
}

TEST(Bench, TooFewFrames) {
    BenchOptions opt;
    opt.methods = {Method::avg16};
    EXPECT_THROW(run_bench(synthetic_samples({1, 0, 16, 8}, {}), opt), ParamError);
}

TEST(Bench, WritesReportAndMontages) {
    BenchOptions opt;
    opt.methods = {Method::noisy, Method::avg2, Method::nlm, Method::cnn};
    opt.models = {make_unet({1, 1, 2}, 1), make_unet({3, 1, 2}, 1)};
    opt.out_dir = fs::temp_directory_path() / "n2n_bench_out";
    fs::remove_all(opt.out_dir);
    const BenchReport r = run_bench(tiny_samples(), opt);
    EXPECT_TRUE(fs::exists(opt.out_dir / "gray0_montage_full.pgm"));
    EXPECT_TRUE(fs::exists(opt.out_dir / "gray0_montage_roi.pgm"));
    EXPECT_TRUE(fs::exists(opt.out_dir / "color0_montage_full.ppm"));
    const Image full = load_image(opt.out_dir / "color0_montage_full.ppm");
    EXPECT_EQ(full.width, 3 * 32 + 4);
    std::ifstream f(opt.out_dir / "report.csv", std::ios::binary);
    const std::string text((std::istreambuf_iterator<char>(f)), {});
    EXPECT_EQ(text, r.csv());
    EXPECT_EQ(text.rfind("sample,method,psnr_db,time_ms\n", 0), 0u);
    EXPECT_EQ(text.find('\r'), std::string::npos);
    fs::remove_all(opt.out_dir);
}

TEST(Bench, InfinitePsnrIsFormatted) {
    // with a single frame the target equals the noisy input
    const std::vector<BenchSample> one{make_bench_sample("s", {Image(8, 8)})};
    BenchOptions opt;
    opt.methods = {Method::noisy};
    EXPECT_EQ(run_bench(one, opt).csv(), "sample,method,psnr_db,time_ms\ns,noisy,inf,0\n");
}

TEST(Bench, CorpusDirectory) {
    const fs::path dir = fs::temp_directory_path() / "n2n_corpus";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto samples = tiny_samples();
    save_image(stack_slices(samples[1].frames), dir / "b_cells.rt");
    save_image(stack_slices(samples[0].frames), dir / "a_tissue.rt");
    const auto loaded = load_corpus_samples(dir, 10);
    ASSERT_EQ(loaded.size(), 2u);
    EXPECT_EQ(loaded[0].name, "a_tissue");
    EXPECT_EQ(loaded[0].frames.size(), 10u);
    EXPECT_EQ(loaded[0].frames[3].data, samples[0].frames[3].data);
    fs::remove_all(dir);
    EXPECT_THROW(load_corpus_samples(dir), IoError);
}
