#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "n2n/error.hpp"
#include "n2n/image_io.hpp"
#include "n2n/unet.hpp"

namespace n2n {

/// Checkpoint container (.n2nw):
///   "N2NW" | u32 version (=1) | u32 header length | JSON header | payload
/// Integers are little-endian. The header holds the config, the ordered
/// layer list with weight/bias shapes and the Adam step counter. The payload
/// is every layer's weight then bias, then the same sequence for Adam's
/// first moments, then for the second moments, all as little-endian f32.
inline constexpr char kCheckpointMagic[4] = {'N', '2', 'N', 'W'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::vector<unsigned char> encode_checkpoint(const UNetModel& model) {
    using nlohmann::json;
    const auto specs = model.config.layer_specs();
    json layers = json::array();
    for (const auto& s : specs)
        layers.push_back({{"name", s.name}, {"weight", {s.out_c, s.in_c, 3, 3}}, {"bias", {s.out_c}}});
    json header = {{"config",
                    {{"in_channels", model.config.in_channels},
                     {"depth", model.config.depth},
                     {"base_channels", model.config.base_channels},
                     {"kernel", UNetConfig::kernel}}},
                   {"layers", layers},
                   {"step", model.adam.step}};
    const std::string text = header.dump();

    std::vector<unsigned char> out(kCheckpointMagic, kCheckpointMagic + 4);
    io_detail::put_u32_le(out, kCheckpointVersion);
    io_detail::put_u32_le(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    out.reserve(out.size() + 12 * model.parameter_count());
    for (const ParamList<float>* block : {&model.layers, &model.adam.m, &model.adam.v})
        for (const auto& l : *block) {
            for (float f : l.weight) io_detail::put_f32_le(out, f);
            for (float f : l.bias) io_detail::put_f32_le(out, f);
        }
    return out;
}

inline std::string describe_layer(const std::string& name, int out_c, int in_c) {
    return name + " [" + std::to_string(out_c) + "," + std::to_string(in_c) + ",3,3]";
}

/// Decodes a checkpoint. When `expected` is given the stored config must
/// produce the same layer list, otherwise the first differing layer is named.
inline UNetModel decode_checkpoint(const std::vector<unsigned char>& bytes,
                                   const std::optional<UNetConfig>& expected = std::nullopt) {
    using nlohmann::json;
    if (bytes.size() < 12) throw FormatError("truncated checkpoint header", bytes.size());
    if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) throw FormatError("bad checkpoint magic", 0);
    const std::uint32_t version = io_detail::get_u32_le(bytes.data() + 4);
    if (version != kCheckpointVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);
    const std::uint32_t len = io_detail::get_u32_le(bytes.data() + 8);
    if (bytes.size() - 12 < len) throw FormatError("truncated checkpoint JSON header", bytes.size());

    json header;
    UNetConfig cfg;
    std::vector<LayerSpec> stored;
    std::uint64_t step = 0;
    try {
        header = json::parse(bytes.begin() + 12, bytes.begin() + 12 + len);
        const json& c = header.at("config");
        cfg.in_channels = c.at("in_channels").get<int>();
        cfg.depth = c.at("depth").get<int>();
        cfg.base_channels = c.at("base_channels").get<int>();
        if (c.value("kernel", 3) != UNetConfig::kernel) throw FormatError("checkpoint kernel must be 3", 12);
        for (const json& l : header.at("layers")) {
            const auto w = l.at("weight").get<std::vector<int>>();
            const auto b = l.at("bias").get<std::vector<int>>();
            if (w.size() != 4 || w[2] != 3 || w[3] != 3 || b.size() != 1 || b[0] != w[0])
                throw FormatError("inconsistent shapes for layer " + l.at("name").get<std::string>(), 12);
            stored.push_back({l.at("name").get<std::string>(), w[0], w[1]});
        }
        step = header.at("step").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed checkpoint header: ") + e.what(), 12);
    }
    try {
        cfg.validate();
    } catch (const ParamError& e) {
        throw FormatError(std::string("invalid checkpoint config: ") + e.what(), 12);
    }

    auto compare = [&](const std::vector<LayerSpec>& want, const char* against) {
        const std::size_t n = std::max(want.size(), stored.size());
        for (std::size_t i = 0; i < n; ++i) {
            if (i >= stored.size())
                throw ShapeError(std::string("checkpoint is missing layer ") + want[i].name + " required by " + against);
            if (i >= want.size())
                throw ShapeError("checkpoint has extra layer " + stored[i].name + " not in " + against);
            const auto& a = stored[i];
            const auto& b = want[i];
            if (a.name != b.name || a.out_c != b.out_c || a.in_c != b.in_c)
                throw ShapeError("layer " + std::to_string(i) + " mismatch: checkpoint has " +
                                 describe_layer(a.name, a.out_c, a.in_c) + ", " + against + " expects " +
                                 describe_layer(b.name, b.out_c, b.in_c));
        }
    };
    compare(cfg.layer_specs(), "its own config");
    if (expected) compare(expected->layer_specs(), "requested config");

    UNetModel model(cfg);
    model.adam.step = step;
    const std::size_t payload = 12 * model.parameter_count();
    std::size_t pos = 12 + len;
    if (bytes.size() - pos != payload)
        throw FormatError("checkpoint payload holds " + std::to_string(bytes.size() - pos) + " bytes, expected " +
                              std::to_string(payload),
                          std::min(bytes.size(), pos + payload));
    auto next = [&] {
        const float f = io_detail::get_f32_le(bytes.data() + pos);
        pos += 4;
        return f;
    };
    for (ParamList<float>* block : {&model.layers, &model.adam.m, &model.adam.v})
        for (auto& l : *block) {
            for (float& f : l.weight) f = next();
            for (float& f : l.bias) f = next();
        }
    return model;
}

inline void save_weights(const UNetModel& model, const std::filesystem::path& path) {
    io_detail::write_file(path, encode_checkpoint(model));
}

inline UNetModel load_weights(const std::filesystem::path& path, const std::optional<UNetConfig>& expected = std::nullopt) {
    return decode_checkpoint(io_detail::read_file(path), expected);
}

}  // namespace n2n
