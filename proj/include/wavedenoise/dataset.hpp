#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "wavedenoise/audio.hpp"
#include "wavedenoise/random.hpp"
#include "wavedenoise/wavenet.hpp"

namespace wdn::data {

enum class Split { Train, Test };

std::string to_string(Split s);
Split parse_split(const std::string& s);

struct ManifestRow {
    std::string speech_path;
    std::string noise_path;
    double snr_db = 0.0;
    std::uint32_t speaker_id = 0;
    Split split = Split::Train;

    bool operator==(const ManifestRow&) const = default;
};

struct Manifest {
    int sample_rate = dsp::kSampleRate;
    std::uint64_t seed = 0;
    std::vector<double> snr_list;
    std::vector<ManifestRow> rows;

    bool operator==(const Manifest&) const = default;
};

/// Manifest file: JSON lines, header object first, then one object per row.
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);
std::string format_manifest(const Manifest& manifest);
Manifest read_manifest(const std::filesystem::path& path);
Manifest parse_manifest(const std::string& text);

double compute_rms(std::span<const double> x);

struct Mixture {
    dsp::AudioBuffer mixture;       // m = s + g * b
    dsp::AudioBuffer scaled_noise;  // g * b, cropped to the speech length
    double gain = 1.0;
};

/// Scales a speech-length crop of `noise` (starting at noise_offset) so that
/// 20 log10(rms(s) / rms(g b)) == snr_db, and adds it to the speech.
Mixture mix_at_snr(const dsp::AudioBuffer& speech, const dsp::AudioBuffer& noise, double snr_db,
                   std::size_t noise_offset = 0);
/// Same, with the crop offset drawn uniformly from rng.
Mixture mix_at_snr(const dsp::AudioBuffer& speech, const dsp::AudioBuffer& noise, double snr_db, Rng& rng);

/// Speaker key of a file: its stem up to the first '_' (Voice Bank style
/// "p226_001.wav" -> "p226").
std::string speaker_key(const std::filesystem::path& file);

/// Pairs every speech file with one noise file (among those at least as long)
/// and one SNR, drawn uniformly with the given seed. An empty speaker_map
/// assigns ids 1, 2, ... to speaker keys in sorted order; keys missing from a
/// non-empty map get id 0.
Manifest build_manifest(const std::filesystem::path& speech_dir, const std::filesystem::path& noise_dir,
                        const std::vector<double>& snr_list, Split split,
                        const std::map<std::string, std::uint32_t>& speaker_map, std::uint64_t seed);

struct Fragment {
    std::vector<double> input;           // input_length(config, tf) samples of the mixture
    std::vector<double> target_speech;   // tf samples aligned with the model's output
    std::vector<double> target_mixture;  // tf samples of the mixture at the same alignment
};

/// Cuts window [offset, offset + input_length) out of aligned clips; samples
/// past the clip end read as zero. Clips shorter than the window are centred
/// in it with zeros on both sides (offset is then ignored).
Fragment extract_fragment(std::span<const double> mixture, std::span<const double> speech, std::size_t offset,
                          const model::ModelConfig& config, std::size_t target_field);

/// Thread-safe cache of decoded WAV files keyed by path.
class AudioCache {
public:
    std::shared_ptr<const dsp::AudioBuffer> get(const std::string& path);

private:
    std::mutex mutex_;
    std::unordered_map<std::string, std::shared_ptr<const dsp::AudioBuffer>> files_;
};

}  // namespace wdn::data
