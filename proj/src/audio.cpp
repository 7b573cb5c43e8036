#include "wavedenoise/audio.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace wdn::dsp {

namespace {

std::uint32_t read_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
    out.insert(out.end(), tag, tag + 4);
}

}  // namespace

std::int16_t to_pcm16(double v, bool* clipped) {
    double scaled = std::nearbyint(v * 32768.0);
    bool clip = false;
    if (scaled > 32767.0) {
        scaled = 32767.0;
        clip = v > 1.0;
    } else if (scaled < -32768.0) {
        scaled = -32768.0;
        clip = true;
    }
    if (clipped) *clipped = clip;
    return static_cast<std::int16_t>(scaled);
}

AudioBuffer decode_wav(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw WavError("not a wav file");

    bool have_fmt = false;
    std::uint16_t channels = 0, bits = 0;
    std::uint32_t rate = 0;
    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const std::uint8_t* chunk = bytes.data() + pos;
        const std::uint32_t len = read_u32(chunk + 4);
        const std::size_t body = pos + 8;
        if (body + len > bytes.size()) throw WavError("truncated chunk in wav file");

        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (len < 16) throw WavError("malformed fmt chunk");
            const std::uint16_t tag = read_u16(bytes.data() + body);
            channels = read_u16(bytes.data() + body + 2);
            rate = read_u32(bytes.data() + body + 4);
            bits = read_u16(bytes.data() + body + 14);
            if (tag != 1) throw WavError("unsupported format tag " + std::to_string(tag) + " (PCM only)");
            if (bits != 16) throw WavError("unsupported bit depth " + std::to_string(bits));
            if (channels != 1) throw WavError("unsupported channel count " + std::to_string(channels));
            if (rate != static_cast<std::uint32_t>(kSampleRate))
                throw WavError("unsupported sample rate " + std::to_string(rate) + " (expected 16000)");
            have_fmt = true;
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            if (!have_fmt) throw WavError("data chunk before fmt chunk");
            AudioBuffer out;
            out.sample_rate = static_cast<int>(rate);
            out.samples.resize(len / 2);
            for (std::size_t i = 0; i < out.samples.size(); ++i) {
                const auto code = static_cast<std::int16_t>(read_u16(bytes.data() + body + 2 * i));
                out.samples[i] = from_pcm16(code);
            }
            return out;
        }
        // Chunks are word aligned.
        pos = body + len + (len & 1u);
    }
    throw WavError(have_fmt ? "wav file has no data chunk" : "not a wav file: missing fmt chunk");
}

AudioBuffer read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw WavError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_wav(bytes);
    } catch (const WavError& e) {
        throw WavError(path.string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_wav(const AudioBuffer& buffer, std::size_t* clipped) {
    if (buffer.sample_rate <= 0) throw WavError("invalid sample rate");
    const auto data_len = static_cast<std::uint32_t>(buffer.samples.size() * 2);
    std::vector<std::uint8_t> out;
    out.reserve(44 + data_len);
    put_tag(out, "RIFF");
    put_u32(out, 36 + data_len);
    put_tag(out, "WAVE");
    put_tag(out, "fmt ");
    put_u32(out, 16);
    put_u16(out, 1);
    put_u16(out, 1);
    put_u32(out, static_cast<std::uint32_t>(buffer.sample_rate));
    put_u32(out, static_cast<std::uint32_t>(buffer.sample_rate) * 2);
    put_u16(out, 2);
    put_u16(out, 16);
    put_tag(out, "data");
    put_u32(out, data_len);

    std::size_t n_clipped = 0;
    for (double v : buffer.samples) {
        bool c = false;
        put_u16(out, static_cast<std::uint16_t>(to_pcm16(v, &c)));
        n_clipped += c;
    }
    if (clipped) *clipped = n_clipped;
    return out;
}

std::size_t write_wav(const AudioBuffer& buffer, const std::filesystem::path& path) {
    std::size_t clipped = 0;
    const auto bytes = encode_wav(buffer, &clipped);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw WavError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw WavError("write failed for " + path.string());
    return clipped;
}

}  // namespace wdn::dsp
