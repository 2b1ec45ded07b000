#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "n2n/image_io.hpp"
#include "oracles.hpp"

using namespace n2n;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    TempDir() : path_(fs::temp_directory_path() / ("n2n_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
                                                    ::testing::UnitTest::GetInstance()->current_test_info()->name())) {
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

std::vector<unsigned char> bytes(const std::string& s) { return {s.begin(), s.end()}; }

std::vector<unsigned char> read_all(const fs::path& p) { return io_detail::read_file(p); }

template <class Fn>
std::size_t format_error_offset(Fn&& fn) {
    try {
        fn();
    } catch (const FormatError& e) {
        return e.offset();
    }
    ADD_FAILURE() << "expected FormatError";
    return 0;
}

}  // namespace

TEST(LoadImage, P5FullScaleIsOne) {
    auto b = bytes("P5\n1 1\n255\n");
    b.push_back(0xFF);
    const Image img = decode_image(b);
    EXPECT_EQ(img.width, 1);
    EXPECT_EQ(img.channels, 1);
    ASSERT_EQ(img.data.size(), 1u);
    EXPECT_EQ(img.data[0], 1.0f);
    EXPECT_EQ(img.source_max, 255);
}

TEST(LoadImage, P5ZeroIsZero) {
    auto b = bytes("P5\n1 1\n255\n");
    b.push_back(0x00);
    EXPECT_EQ(decode_image(b).data[0], 0.0f);
}

TEST(LoadImage, P2Ascii) {
    const Image img = decode_image(bytes("P2\n# comment line\n2 2\n255\n0 255\n255 0\n"));
    EXPECT_EQ(img.data, (std::vector<float>{0, 1, 1, 0}));
}

TEST(LoadImage, P6IsConvertedToPlanar) {
    // 2x1 pixels: (10,20,30) (40,50,60)
    auto b = bytes("P6 2 1 255\n");
    for (unsigned char v : {10, 20, 30, 40, 50, 60}) b.push_back(v);
    const Image img = decode_image(b);
    ASSERT_EQ(img.channels, 3);
    const std::vector<unsigned char> planar{10, 40, 20, 50, 30, 60};
    for (std::size_t i = 0; i < 6; ++i) EXPECT_FLOAT_EQ(img.data[i], planar[i] / 255.0f);
}

TEST(LoadImage, P3Ascii) {
    const Image img = decode_image(bytes("P3\n1 1\n255\n255 0 51\n"));
    ASSERT_EQ(img.channels, 3);
    EXPECT_FLOAT_EQ(img.data[0], 1.0f);
    EXPECT_FLOAT_EQ(img.data[1], 0.0f);
    EXPECT_FLOAT_EQ(img.data[2], 0.2f);
}

TEST(LoadImage, SixteenBitIsBigEndian) {
    auto b = bytes("P5\n2 1\n65535\n");
    for (unsigned char v : {0x01, 0x00, 0xFF, 0xFF}) b.push_back(v);
    const Image img = decode_image(b);
    EXPECT_EQ(img.source_max, 65535);
    EXPECT_FLOAT_EQ(img.data[0], 256.0f / 65535.0f);
    EXPECT_FLOAT_EQ(img.data[1], 1.0f);
}

TEST(LoadImage, ErrorsNameByteOffsets) {
    EXPECT_EQ(format_error_offset([] { decode_image(bytes("P5\n1 1\n1023\n")); }), 7u);
    EXPECT_EQ(format_error_offset([] { decode_image(bytes("P5\nx 1\n255\n")); }), 3u);
    auto trunc = bytes("P5\n2 2\n255\n");
    trunc.push_back(1);
    EXPECT_EQ(format_error_offset([&] { decode_image(trunc); }), trunc.size());
    EXPECT_THROW(decode_image(bytes("P7\n")), FormatError);
    EXPECT_THROW(decode_image(bytes("P2\n2 2\n255\n1 2 3")), FormatError);
    EXPECT_THROW(decode_image(bytes("P2\n1 1\n255\n300")), FormatError);
}

TEST(LoadImage, MissingFileIsIoError) { EXPECT_THROW(load_image("/nonexistent/dir/none.pgm"), IoError); }

TEST(SaveImage, QuantizationExamples) {
    TempDir dir;
    Image img(3, 1);
    img.data = {1.0f, -0.2f, 0.5f};
    save_image(img, dir / "a.pgm");
    const auto b = read_all(dir / "a.pgm");
    ASSERT_GE(b.size(), 3u);
    EXPECT_EQ(b[b.size() - 3], 0xFF);
    EXPECT_EQ(b[b.size() - 2], 0x00);
    EXPECT_EQ(b[b.size() - 1], 0x80);  // 127.5 rounds to even
}

TEST(SaveImage, HalfToEven) {
    EXPECT_EQ(io_detail::quantize(0.25f, 2), 0u);  // 0.5 rounds to even
    EXPECT_EQ(io_detail::quantize(0.75f, 2), 2u);  // 1.5 rounds to even
    EXPECT_EQ(io_detail::quantize(2.0f, 255), 255u);
    EXPECT_EQ(io_detail::quantize(0.5f, 65535), 32768u);  // 32767.5 -> 32768
}

TEST(SaveImage, MultiSliceNetpbmIsRejected) {
    TempDir dir;
    Image img(4, 4, 1, 2);
    try {
        save_image(img, dir / "stack.pgm");
        FAIL() << "expected error";
    } catch (const ShapeError& e) {
        EXPECT_NE(std::string(e.what()).find(".rt"), std::string::npos);
    }
}

TEST(SaveImage, UnknownExtension) {
    TempDir dir;
    EXPECT_THROW(save_image(Image(2, 2), dir / "x.tif"), IoError);
    EXPECT_THROW(save_image(Image(2, 2, 3), dir / "x.pgm"), ShapeError);
}

// load(save(img)) within half a quantization step, every format.
TEST(RoundTrip, WithinHalfStep) {
    TempDir dir;
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        Rng rng(seed);
        const int c = seed % 2 ? 3 : 1;
        Image img = oracle::random_image(5 + int(rng.below(20)), 3 + int(rng.below(20)), c, rng);
        img.source_max = seed % 3 == 0 ? 65535 : 255;
        const std::string name = "rt" + std::to_string(seed) + (c == 3 ? ".ppm" : ".pgm");
        save_image(img, dir / name);
        const Image back = load_image(dir / name);
        ASSERT_TRUE(back.same_shape(img));
        EXPECT_EQ(back.source_max, img.source_max);
        const double tol = 1.0 / (2.0 * img.source_max) + 1e-7;
        for (std::size_t i = 0; i < img.data.size(); ++i) ASSERT_NEAR(back.data[i], img.data[i], tol);
    }
}

TEST(RoundTrip, RawTensorIsBitExact) {
    TempDir dir;
    Rng rng(11);
    Image img = oracle::random_image(13, 7, 3, rng, 4);
    img.data[3] = -0.25f;  // out-of-range values survive
    img.data[4] = 1.75f;
    img.name = "stack \"quoted\" \xC3\xA9";
    img.source_max = 65535;
    save_image(img, dir / "s.rt");
    const Image back = load_image(dir / "s.rt");
    EXPECT_TRUE(back.same_shape(img));
    EXPECT_EQ(back.name, img.name);
    EXPECT_EQ(back.source_max, 65535);
    EXPECT_EQ(0, std::memcmp(back.data.data(), img.data.data(), img.data.size() * 4));
}

TEST(RawTensor, Layout) {
    Image img(1, 1);
    img.data = {1.0f};
    img.name = "a";
    const auto b = io_detail::encode_raw_tensor(img);
    ASSERT_GE(b.size(), 12u);
    EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "RTN1");
    const std::uint32_t len = io_detail::get_u32_le(b.data() + 4);
    const auto header = nlohmann::json::parse(b.begin() + 8, b.begin() + 8 + len);
    EXPECT_EQ(header.at("w"), 1);
    EXPECT_EQ(header.at("s"), 1);
    EXPECT_EQ(header.at("source_max"), 255);
    ASSERT_EQ(b.size(), 8 + len + 4u);
    // 1.0f little-endian
    EXPECT_EQ(b[8 + len + 3], 0x3F);
    EXPECT_EQ(b[8 + len + 2], 0x80);
}

TEST(RawTensor, TruncatedPayloadAndBadMagic) {
    Image img(3, 3);
    auto b = io_detail::encode_raw_tensor(img);
    b.pop_back();
    EXPECT_THROW(decode_image(b), FormatError);
    auto bad = io_detail::encode_raw_tensor(img);
    bad[3] = '2';
    EXPECT_THROW(io_detail::parse_raw_tensor(bad), FormatError);
    auto shortb = io_detail::encode_raw_tensor(img);
    shortb.resize(10);
    EXPECT_THROW(decode_image(shortb), FormatError);
}
