#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "wavedenoise/audio.hpp"

namespace wdn::dsp {

enum class Window { Hann };

/// One-sided short-time spectrum, row-major [num_frames x bins].
struct SpectralFrames {
    std::vector<std::complex<double>> data;
    std::size_t num_frames = 0;
    std::size_t frame_len = 0;
    std::size_t hop = 0;
    std::size_t fft_len = 0;
    Window window = Window::Hann;
    int sample_rate = kSampleRate;
    /// Number of samples the analysis covered; istft reproduces this length.
    std::size_t signal_len = 0;

    std::size_t bins() const { return fft_len / 2 + 1; }
    std::complex<double>* frame(std::size_t l) { return data.data() + l * bins(); }
    const std::complex<double>* frame(std::size_t l) const { return data.data() + l * bins(); }
};

/// Periodic Hann window; overlap-adds to exactly 1 at hop = len / 2.
std::vector<double> hann_window(std::size_t len);

/// Frame l covers samples [l*hop, l*hop + frame_len). Trailing samples that
/// do not fill a whole frame are not analysed.
SpectralFrames stft(const AudioBuffer& buffer, std::size_t frame_len = 512, std::size_t hop = 256,
                    Window window = Window::Hann);

/// Overlap-add synthesis. Only hann analysis with hop = frame_len / 2 is
/// accepted; samples covered by two frames are reconstructed exactly.
AudioBuffer istft(const SpectralFrames& frames);

}  // namespace wdn::dsp
