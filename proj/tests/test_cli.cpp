#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "n2n/cli.hpp"
#include "oracles.hpp"

using namespace n2n;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult cli(std::vector<std::string> args) {
    args.insert(args.begin(), "n2n");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("n2n_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
        Rng rng(1);
        Image img = oracle::random_image(24, 20, 1, rng);
        save_image(img, path("a.pgm"));
    }
    void TearDown() override { fs::remove_all(dir_); }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

}  // namespace

TEST(Cli, NoArgsIsUsage) {
    const CliResult r = cli({});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST(Cli, UnknownFlagIsUsage) {
    EXPECT_EQ(cli({"psnr", "--bogus", "a", "b"}).code, 2);
    EXPECT_EQ(cli({"frobnicate"}).code, 2);
    EXPECT_EQ(cli({"denoise", "--method", "bm3d", "a", "b"}).code, 2);
}

TEST(Cli, Help) { EXPECT_EQ(cli({"--help"}).code, 0); }

TEST_F(CliTest, PsnrOfIdenticalImagesIsInf) {
    const CliResult r = cli({"psnr", path("a.pgm"), path("a.pgm")});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "inf\n");
}

TEST_F(CliTest, PsnrHandFixture) {
    Image ref(2, 1), test(2, 1);
    test.data = {10.0f / 255.0f, 0.0f};
    save_image(ref, path("r.pgm"));
    save_image(test, path("t.pgm"));
    EXPECT_EQ(cli({"psnr", path("r.pgm"), path("t.pgm")}).out, "31.1411\n");
}

TEST_F(CliTest, MissingInputIsProcessingError) {
    const CliResult r = cli({"psnr", path("nope.pgm"), path("a.pgm")});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(r.err.rfind("error: ", 0), 0u);
}

TEST_F(CliTest, NoiseAvgAndDenoise) {
    ASSERT_EQ(cli({"--seed", "3", "noise", path("a.pgm"), path("n.pgm")}).code, 0);
    ASSERT_EQ(cli({"noise", "--seed", "3", "--frames", "4", path("a.pgm"), path("stack.rt")}).code, 0);
    EXPECT_EQ(load_image(path("stack.rt")).slices, 4);
    ASSERT_EQ(cli({"avg", path("stack.rt"), "-n", "2", "-o", path("avg.rt")}).code, 0);
    EXPECT_EQ(load_image(path("avg.rt")).slices, 1);
    for (const char* m : {"tv", "nlm"}) {
        const CliResult r = cli({"denoise", "--method", m, path("n.pgm"), path(std::string(m) + ".pgm")});
        EXPECT_EQ(r.code, 0) << r.err;
        EXPECT_EQ(r.out.rfind("time_ms=", 0), 0u);
        EXPECT_TRUE(fs::exists(path(std::string(m) + ".pgm")));
    }
}

TEST_F(CliTest, SameSeedSameNoise) {
    cli({"--seed", "9", "noise", path("a.pgm"), path("x.pgm")});
    cli({"--seed", "9", "noise", path("a.pgm"), path("y.pgm")});
    EXPECT_EQ(cli({"psnr", path("x.pgm"), path("y.pgm")}).out, "inf\n");
}

TEST_F(CliTest, CnnDenoiseWithWeights) {
    save_weights(make_unet({1, 2, 4}, 1), path("w.n2nw"));
    const CliResult r = cli({"denoise", "--method", "cnn", "--weights", path("w.n2nw"), path("a.pgm"), path("c.pgm")});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.rfind("time_ms=", 0), 0u);
    EXPECT_EQ(load_image(path("c.pgm")).width, 24);
    EXPECT_EQ(cli({"denoise", "--method", "cnn", path("a.pgm"), path("c.pgm")}).code, 1);
}

TEST_F(CliTest, TrainWritesCheckpointAndTrace) {
    const CliResult r = cli({"--seed", "2", "train", "-o", path("m.n2nw"), "--trace", path("t.csv"), "--steps", "2",
                       "--batch", "1", "--patch", "16", "--count", "3", "--size", "16", "--base", "2", "--eval-every",
                       "1"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(load_weights(path("m.n2nw")).adam.step, 2u);
    std::ifstream f(path("t.csv"));
    std::string header, line;
    std::getline(f, header);
    EXPECT_EQ(header, "step,train_loss,eval_psnr_db");
    int rows = 0;
    while (std::getline(f, line)) ++rows;
    EXPECT_EQ(rows, 2);
}

TEST_F(CliTest, BenchMethodsFilter) {
    const CliResult r = cli({"--seed", "7", "bench", "--synthetic", "--methods", "avg8,tv", "--gray", "1", "--color", "1",
                       "--size", "32", "--target-frames", "10", "--out", path("b")});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream csv(r.out);
    std::string line;
    std::getline(csv, line);
    int rows = 0;
    while (std::getline(csv, line)) ++rows;
    EXPECT_EQ(rows, 4);
    EXPECT_TRUE(fs::exists(path("b/report.csv")));
    EXPECT_TRUE(fs::exists(path("b/gray0_montage_roi.pgm")));
}

TEST_F(CliTest, BenchNeedsSource) {
    EXPECT_EQ(cli({"bench", "--methods", "noisy"}).code, 1);
    EXPECT_EQ(cli({"bench", "--synthetic", "--methods", "cnn", "--size", "16"}).code, 1);
}

TEST_F(CliTest, MontageCommand) {
    ASSERT_EQ(cli({"montage", path("a.pgm"), path("a.pgm"), path("a.pgm"), "-o", path("m"), "--roi", "2,2,10,8"}).code, 0);
    const Image roi = load_image(path("m_roi.pgm"));
    EXPECT_EQ(roi.width, 34);
    EXPECT_EQ(roi.height, 8);
    EXPECT_EQ(load_image(path("m_full.pgm")).width, 76);
}
