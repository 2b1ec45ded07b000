#pragma once

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "n2n/error.hpp"
#include "n2n/image.hpp"

namespace n2n {

namespace io_detail {

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed: " + path.string());
    return bytes;
}

inline void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

inline void put_u32_le(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFFu));
}

inline std::uint32_t get_u32_le(const unsigned char* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}

inline void put_f32_le(std::vector<unsigned char>& out, float v) { put_u32_le(out, std::bit_cast<std::uint32_t>(v)); }

inline float get_f32_le(const unsigned char* p) { return std::bit_cast<float>(get_u32_le(p)); }

/// Cursor over a netpbm header: whitespace and '#' comments between tokens.
class PnmScanner {
public:
    explicit PnmScanner(const std::vector<unsigned char>& bytes) : b_(bytes) {}

    std::size_t pos() const { return pos_; }
    void seek(std::size_t p) { pos_ = p; }

    void skip_space() {
        while (pos_ < b_.size()) {
            unsigned char ch = b_[pos_];
            if (ch == '#') {
                while (pos_ < b_.size() && b_[pos_] != '\n' && b_[pos_] != '\r') ++pos_;
            } else if (std::isspace(ch)) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    long read_uint(const char* what) {
        skip_space();
        std::size_t start = pos_;
        long v = 0;
        while (pos_ < b_.size() && b_[pos_] >= '0' && b_[pos_] <= '9') {
            v = v * 10 + (b_[pos_] - '0');
            if (v > 1L << 30) throw FormatError(std::string("value too large for ") + what, start);
            ++pos_;
        }
        if (pos_ == start) {
            if (pos_ >= b_.size()) throw FormatError(std::string("truncated payload, expected ") + what, start);
            throw FormatError(std::string("expected ") + what, start);
        }
        return v;
    }

private:
    const std::vector<unsigned char>& b_;
    std::size_t pos_ = 0;
};

inline Image parse_pnm(const std::vector<unsigned char>& bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P') throw FormatError("not a netpbm file", 0);
    const char kind = static_cast<char>(bytes[1]);
    if (kind != '2' && kind != '3' && kind != '5' && kind != '6')
        throw FormatError(std::string("unsupported netpbm magic P") + kind, 1);
    const bool ascii = kind == '2' || kind == '3';
    const int channels = (kind == '3' || kind == '6') ? 3 : 1;

    PnmScanner sc(bytes);
    sc.seek(2);
    const long w = sc.read_uint("width");
    const long h = sc.read_uint("height");
    const std::size_t maxval_at = (sc.skip_space(), sc.pos());
    const long maxval = sc.read_uint("maxval");
    if (w < 1 || h < 1) throw FormatError("zero image dimension", maxval_at);
    if (maxval != 255 && maxval != 65535)
        throw FormatError("unsupported maxval " + std::to_string(maxval) + " (need 255 or 65535)", maxval_at);

    Image img(static_cast<int>(w), static_cast<int>(h), channels, 1);
    img.source_max = static_cast<int>(maxval);
    const std::size_t npix = img.plane_size();
    const float scale = 1.0f / static_cast<float>(maxval);

    if (ascii) {
        for (std::size_t p = 0; p < npix; ++p)
            for (int c = 0; c < channels; ++c) {
                sc.skip_space();
                const std::size_t at = sc.pos();
                const long v = sc.read_uint("sample");
                if (v > maxval) throw FormatError("sample exceeds maxval", at);
                img.data[c * npix + p] = static_cast<float>(v) * scale;
            }
        return img;
    }

    // Exactly one whitespace byte separates maxval from the raster.
    std::size_t pos = sc.pos();
    if (pos >= bytes.size() || !std::isspace(bytes[pos]))
        throw FormatError("expected single whitespace before raster", pos);
    ++pos;
    const std::size_t bps = maxval > 255 ? 2 : 1;
    const std::size_t need = npix * channels * bps;
    if (bytes.size() - pos < need)
        throw FormatError("truncated payload: need " + std::to_string(need) + " bytes, have " +
                              std::to_string(bytes.size() - pos),
                          bytes.size());
    const unsigned char* raster = bytes.data() + pos;
    for (std::size_t p = 0; p < npix; ++p)
        for (int c = 0; c < channels; ++c) {
            const std::size_t k = p * channels + c;
            const unsigned v = bps == 2 ? (unsigned(raster[2 * k]) << 8) | raster[2 * k + 1] : raster[k];
            if (v > static_cast<unsigned>(maxval)) throw FormatError("sample exceeds maxval", pos + k * bps);
            img.data[c * npix + p] = static_cast<float>(v) * scale;
        }
    return img;
}

/// Clamp to [0,1], scale to the integer range and round half-to-even.
inline unsigned quantize(float v, int source_max) {
    double x = static_cast<double>(v);
    if (!(x > 0.0)) x = 0.0;  // also maps NaN to 0
    if (x > 1.0) x = 1.0;
    return static_cast<unsigned>(std::nearbyint(x * source_max));
}

inline std::vector<unsigned char> encode_pnm(const Image& img) {
    if (img.slices != 1)
        throw ShapeError("netpbm holds a single frame; save " + std::to_string(img.slices) +
                         "-slice stacks as raw-tensor (.rt)");
    std::string header = std::string(img.channels == 3 ? "P6" : "P5") + "\n" + std::to_string(img.width) + " " +
                         std::to_string(img.height) + "\n" + std::to_string(img.source_max) + "\n";
    std::vector<unsigned char> out(header.begin(), header.end());
    const std::size_t npix = img.plane_size();
    const bool wide = img.source_max > 255;
    out.reserve(out.size() + npix * img.channels * (wide ? 2 : 1));
    for (std::size_t p = 0; p < npix; ++p)
        for (int c = 0; c < img.channels; ++c) {
            const unsigned q = quantize(img.data[c * npix + p], img.source_max);
            if (wide) out.push_back(static_cast<unsigned char>(q >> 8));
            out.push_back(static_cast<unsigned char>(q & 0xFFu));
        }
    return out;
}

inline constexpr char kRawTensorMagic[4] = {'R', 'T', 'N', '1'};

inline std::vector<unsigned char> encode_raw_tensor(const Image& img) {
    nlohmann::json header = {{"w", img.width},
                             {"h", img.height},
                             {"c", img.channels},
                             {"s", img.slices},
                             {"source_max", img.source_max},
                             {"name", img.name}};
    const std::string text = header.dump();
    std::vector<unsigned char> out(kRawTensorMagic, kRawTensorMagic + 4);
    put_u32_le(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    out.reserve(out.size() + img.data.size() * 4);
    for (float v : img.data) put_f32_le(out, v);
    return out;
}

inline Image parse_raw_tensor(const std::vector<unsigned char>& bytes) {
    if (bytes.size() < 8) throw FormatError("truncated raw-tensor header", bytes.size());
    if (std::memcmp(bytes.data(), kRawTensorMagic, 4) != 0) throw FormatError("bad raw-tensor magic", 0);
    const std::uint32_t len = get_u32_le(bytes.data() + 4);
    if (bytes.size() - 8 < len) throw FormatError("truncated raw-tensor JSON header", bytes.size());
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + len);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed raw-tensor JSON header: ") + e.what(), 8);
    }
    Image img;
    try {
        img.width = header.at("w").get<int>();
        img.height = header.at("h").get<int>();
        img.channels = header.at("c").get<int>();
        img.slices = header.at("s").get<int>();
        img.source_max = header.at("source_max").get<int>();
        img.name = header.value("name", std::string{});
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("raw-tensor header field: ") + e.what(), 8);
    }
    if (img.width < 1 || img.height < 1 || img.slices < 1 || (img.channels != 1 && img.channels != 3))
        throw FormatError("invalid raw-tensor geometry " + img.shape_string(), 8);
    if (img.source_max != 255 && img.source_max != 65535)
        throw FormatError("unsupported source_max " + std::to_string(img.source_max), 8);
    const std::size_t start = 8 + len;
    const std::size_t n = img.sample_count();
    if (bytes.size() - start != n * 4)
        throw FormatError("raw-tensor payload holds " + std::to_string(bytes.size() - start) + " bytes, expected " +
                              std::to_string(n * 4),
                          bytes.size() < start + n * 4 ? bytes.size() : start + n * 4);
    img.data.resize(n);
    for (std::size_t i = 0; i < n; ++i) img.data[i] = get_f32_le(bytes.data() + start + 4 * i);
    return img;
}

inline std::string lower_extension(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    for (char& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return ext;
}

}  // namespace io_detail

/// Decodes from memory; the format is sniffed from the magic bytes.
inline Image decode_image(const std::vector<unsigned char>& bytes) {
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), io_detail::kRawTensorMagic, 4) == 0)
        return io_detail::parse_raw_tensor(bytes);
    return io_detail::parse_pnm(bytes);
}

/// Loads netpbm (P2/P3/P5/P6, maxval 255 or 65535) or raw-tensor (.rt).
inline Image load_image(const std::filesystem::path& path) {
    Image img = decode_image(io_detail::read_file(path));
    if (img.name.empty()) img.name = path.stem().string();
    return img;
}

/// Writes by extension: .pgm/.ppm/.pnm as binary netpbm, .rt as raw tensor.
inline void save_image(const Image& img, const std::filesystem::path& path) {
    const std::string ext = io_detail::lower_extension(path);
    if (ext == ".rt") {
        io_detail::write_file(path, io_detail::encode_raw_tensor(img));
        return;
    }
    if (ext != ".pgm" && ext != ".ppm" && ext != ".pnm")
        throw IoError("unknown image extension '" + ext + "' (use .pgm, .ppm, .pnm or .rt)");
    if (ext == ".pgm" && img.channels != 1) throw ShapeError("cannot store a color image as .pgm; use .ppm");
    if (ext == ".ppm" && img.channels != 3) throw ShapeError("cannot store a gray image as .ppm; use .pgm");
    io_detail::write_file(path, io_detail::encode_pnm(img));
}

}  // namespace n2n
