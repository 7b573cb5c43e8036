#include "wavedenoise/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace wdn::model {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_bytes(std::vector<std::uint8_t>& out, const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::span<const std::uint8_t> take(std::size_t n) {
        if (n > bytes_.size() - pos_) throw CheckpointError("corrupt checkpoint: unexpected end of file");
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    std::uint32_t u32() {
        auto s = take(4);
        return static_cast<std::uint32_t>(s[0]) | (static_cast<std::uint32_t>(s[1]) << 8) |
               (static_cast<std::uint32_t>(s[2]) << 16) | (static_cast<std::uint32_t>(s[3]) << 24);
    }
    std::string str() {
        const auto n = u32();
        auto s = take(n);
        return {reinterpret_cast<const char*>(s.data()), s.size()};
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const WavenetModel& model) {
    std::vector<std::uint8_t> out;
    put_bytes(out, "WDNZ", 4);
    put_u32(out, kCheckpointVersion);
    const std::string cfg = nlohmann::json(model.config).dump();
    put_u32(out, static_cast<std::uint32_t>(cfg.size()));
    put_bytes(out, cfg.data(), cfg.size());
    for (const auto& [name, t] : model.named_parameters()) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        put_bytes(out, name.data(), name.size());
        put_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (auto d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
        put_bytes(out, t.data().data(), t.numel() * sizeof(double));
    }
    return out;
}

WavenetModel deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
    Reader in(bytes);
    const auto magic = in.take(4);
    if (std::memcmp(magic.data(), "WDNZ", 4) != 0) throw CheckpointError("corrupt checkpoint: bad magic");
    const auto version = in.u32();
    if (version != kCheckpointVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));

    ModelConfig config;
    try {
        config = nlohmann::json::parse(in.str()).get<ModelConfig>();
        config.validate();
    } catch (const CheckpointError&) {
        throw;
    } catch (const std::exception& e) {
        throw CheckpointError(std::string("corrupt checkpoint: bad config header: ") + e.what());
    }

    WavenetModel model = build_model(config, 0);
    for (auto& [name, t] : model.named_parameters()) {
        const std::string got = in.str();
        if (got != name) throw CheckpointError("checkpoint config mismatch: expected parameter " + name + ", found " + got);
        const auto rank = in.u32();
        ad::Shape shape(rank);
        for (auto& d : shape) d = in.u32();
        if (shape != t.shape()) throw CheckpointError("checkpoint config mismatch: shape of " + name + " disagrees with header");
        const auto raw = in.take(t.numel() * sizeof(double));
        std::memcpy(t.data().data(), raw.data(), raw.size());
    }
    if (!in.done()) throw CheckpointError("corrupt checkpoint: trailing bytes");
    return model;
}

void save_checkpoint(const WavenetModel& model, const std::filesystem::path& path) {
    const auto bytes = serialize_checkpoint(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("write failed for " + path.string());
}

WavenetModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes);
}

}  // namespace wdn::model
