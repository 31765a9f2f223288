// SPDX-License-Identifier: Apache-2.0
#include "stgat/model_io.hpp"

#include "stgat/checksum.hpp"
#include "stgat/errors.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>

namespace stgat {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'S', 'T', 'G', 'F'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFU));
    }
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFU));
    }
}

void put_f64(std::string& out, double v) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof(bits));
    put_u64(out, bits);
}

class Reader {
public:
    Reader(const unsigned char* data, std::size_t size) : data_(data), size_(size) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(data_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
        }
        pos_ += 4;
        return v;
    }

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(data_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
        }
        pos_ += 8;
        return v;
    }

    double f64() {
        std::uint64_t bits = u64();
        double v = 0.0;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }

    std::string bytes(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
        pos_ += n;
        return s;
    }

    std::size_t remaining() const { return size_ - pos_; }

private:
    void need(std::size_t n) {
        if (size_ - pos_ < n) {
            throw FormatError("load_model: file truncated");
        }
    }

    const unsigned char* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

json config_to_json(const ModelConfig& c) {
    return json{{"window_len", c.window_len},
                {"num_channels", c.num_channels},
                {"conv_out_channels", c.conv_out_channels},
                {"conv_kernel_size", c.conv_kernel_size},
                {"gat_out_dim", c.gat_out_dim},
                {"gat_heads", c.gat_heads},
                {"lstm_hidden", c.lstm_hidden},
                {"fc_hidden_dims", c.fc_hidden_dims},
                {"use_temporal_gat", c.use_temporal_gat},
                {"use_spatial_gat", c.use_spatial_gat},
                {"leaky_slope", c.leaky_slope},
                {"seed", c.seed}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    try {
        c.window_len = j.at("window_len").get<std::size_t>();
        c.num_channels = j.at("num_channels").get<std::size_t>();
        c.conv_out_channels = j.at("conv_out_channels").get<std::size_t>();
        c.conv_kernel_size = j.at("conv_kernel_size").get<std::size_t>();
        c.gat_out_dim = j.at("gat_out_dim").get<std::size_t>();
        c.gat_heads = j.at("gat_heads").get<std::size_t>();
        c.lstm_hidden = j.at("lstm_hidden").get<std::size_t>();
        c.fc_hidden_dims = j.at("fc_hidden_dims").get<std::vector<std::size_t>>();
        c.use_temporal_gat = j.at("use_temporal_gat").get<bool>();
        c.use_spatial_gat = j.at("use_spatial_gat").get<bool>();
        c.leaky_slope = j.at("leaky_slope").get<double>();
        c.seed = j.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("load_model: bad config in header: ") + e.what());
    }
    return c;
}

} // namespace

void save_model(const FusionModel& model, const std::optional<ScalerParams>& scaler,
                const std::filesystem::path& path) {
    auto params = const_cast<FusionModel&>(model).parameters();
    auto names = model.parameter_names();
    if (names.size() != params.size()) {
        throw ValueError("save_model: parameter name table out of sync");
    }

    json blob_dir = json::array();
    for (std::size_t i = 0; i < params.size(); ++i) {
        blob_dir.push_back(json{{"name", names[i]}, {"shape", params[i].shape()}});
    }
    std::size_t scaler_channels = scaler ? scaler->channel_min.size() : 0;
    json header{{"config", config_to_json(model.config())},
                {"blobs", blob_dir},
                {"scaler_channels", scaler_channels}};
    std::string header_text = header.dump();

    std::string buffer;
    buffer.append(kMagic, sizeof(kMagic));
    put_u32(buffer, kFormatVersion);
    put_u64(buffer, header_text.size());
    buffer += header_text;
    for (const Tensor& p : params) {
        for (double v : p.values()) {
            put_f64(buffer, v);
        }
    }
    if (scaler) {
        for (double v : scaler->channel_min) put_f64(buffer, v);
        for (double v : scaler->channel_max) put_f64(buffer, v);
        put_f64(buffer, scaler->target_min);
        put_f64(buffer, scaler->target_max);
    }
    std::uint32_t crc = crc32(
        std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(buffer.data()),
                                       buffer.size()));
    put_u32(buffer, crc);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("save_model: cannot open " + path.string() + " for writing");
    }
    out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    if (!out) {
        throw IoError("save_model: failed writing " + path.string());
    }
}

LoadedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("load_model: cannot open " + path.string());
    }
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < sizeof(kMagic) + 4 + 8 + 4) {
        throw FormatError("load_model: file truncated");
    }
    if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw FormatError("load_model: bad magic, not a model file");
    }
    std::uint32_t stored_crc = 0;
    for (int i = 0; i < 4; ++i) {
        stored_crc |= static_cast<std::uint32_t>(bytes[bytes.size() - 4 + static_cast<std::size_t>(i)])
                      << (8 * i);
    }
    std::uint32_t actual_crc =
        crc32(std::span<const unsigned char>(bytes.data(), bytes.size() - 4));
    if (stored_crc != actual_crc) {
        throw FormatError("load_model: checksum mismatch, file is corrupt");
    }

    Reader reader(bytes.data(), bytes.size() - 4);
    reader.bytes(sizeof(kMagic));
    std::uint32_t version = reader.u32();
    if (version != kFormatVersion) {
        throw FormatError("load_model: unsupported format version " + std::to_string(version));
    }
    std::uint64_t header_len = reader.u64();
    if (header_len > reader.remaining()) {
        throw FormatError("load_model: file truncated");
    }
    json header;
    try {
        header = json::parse(reader.bytes(header_len));
    } catch (const json::exception& e) {
        throw FormatError(std::string("load_model: bad header: ") + e.what());
    }

    ModelConfig config = config_from_json(header.at("config"));
    LoadedModel loaded;
    loaded.model = std::make_unique<FusionModel>(config);

    auto params = loaded.model->parameters();
    auto names = loaded.model->parameter_names();
    const json& blobs = header.at("blobs");
    if (!blobs.is_array() || blobs.size() != params.size()) {
        throw FormatError("load_model: blob directory does not match the architecture");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        std::string name = blobs[i].at("name").get<std::string>();
        Shape shape = blobs[i].at("shape").get<Shape>();
        if (name != names[i] || shape != params[i].shape()) {
            throw FormatError("load_model: blob '" + name + "' does not match parameter '" +
                              names[i] + "' " + shape_str(params[i].shape()));
        }
        auto dst = params[i].mutable_values();
        for (double& v : dst) {
            v = reader.f64();
        }
    }

    std::size_t scaler_channels = header.value("scaler_channels", std::size_t{0});
    if (scaler_channels > 0) {
        ScalerParams scaler;
        scaler.channel_min.resize(scaler_channels);
        scaler.channel_max.resize(scaler_channels);
        for (double& v : scaler.channel_min) v = reader.f64();
        for (double& v : scaler.channel_max) v = reader.f64();
        scaler.target_min = reader.f64();
        scaler.target_max = reader.f64();
        loaded.scaler = std::move(scaler);
    }
    if (reader.remaining() != 0) {
        throw FormatError("load_model: trailing bytes after parameter blobs");
    }
    return loaded;
}

} // namespace stgat
