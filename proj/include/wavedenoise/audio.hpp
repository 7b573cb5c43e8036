#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

namespace wdn::dsp {

inline constexpr int kSampleRate = 16000;

/// Mono waveform normalized to full scale [-1, 1].
struct AudioBuffer {
    std::vector<double> samples;
    int sample_rate = kSampleRate;

    std::size_t size() const { return samples.size(); }
    bool operator==(const AudioBuffer&) const = default;
};

class WavError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Reads a RIFF/WAVE file holding 16-bit PCM, mono, 16 kHz. Unknown chunks
/// are skipped. Anything else is rejected rather than converted.
AudioBuffer read_wav(const std::filesystem::path& path);

/// Decodes an in-memory WAV image; same rules as read_wav.
AudioBuffer decode_wav(std::span<const std::uint8_t> bytes);

/// Writes 16-bit PCM. Samples outside [-1, 1] are hard-clipped; the return
/// value is the number of clipped samples.
std::size_t write_wav(const AudioBuffer& buffer, const std::filesystem::path& path);

std::vector<std::uint8_t> encode_wav(const AudioBuffer& buffer, std::size_t* clipped = nullptr);

/// Full-scale double to PCM code: round-to-nearest with clipping to
/// [-32768, 32767].
std::int16_t to_pcm16(double v, bool* clipped = nullptr);
inline double from_pcm16(std::int16_t v) { return static_cast<double>(v) / 32768.0; }

}  // namespace wdn::dsp
