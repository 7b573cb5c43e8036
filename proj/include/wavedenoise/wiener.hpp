#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "wavedenoise/audio.hpp"
#include "wavedenoise/stft.hpp"

namespace wdn::wiener {

struct WienerConfig {
    std::size_t frame_len = 512;
    std::size_t hop = 256;
    double alpha = 0.98;
    std::size_t n_init_frames = 6;
    double gain_floor = 0.05623413251903491;  // -25 dB

    void validate() const;
};

/// Mean |X_k|^2 over the first n_init frames.
std::vector<double> estimate_noise_psd(const dsp::SpectralFrames& frames, std::size_t n_init);

struct SnrEstimate {
    std::vector<double> xi;     // a priori SNR
    std::vector<double> gamma;  // a posteriori SNR
};

/// Decision-directed a priori SNR:
///   gamma_k = |X_k|^2 / lambda_k
///   xi_k    = alpha * prev_clean_power_k / lambda_k + (1 - alpha) * max(gamma_k - 1, 0)
/// lambda is floored at 1e-12.
SnrEstimate decision_directed_step(std::span<const double> prev_clean_power, std::span<const double> current_power,
                                   std::span<const double> noise_psd, double alpha);

/// G_k = max(xi_k / (1 + xi_k), gain_floor)
std::vector<double> wiener_gain(std::span<const double> xi, double gain_floor);

struct WienerTrace {
    std::vector<std::vector<double>> gains;  // per frame, per bin
};

/// STFT -> frozen noise PSD from the leading frames -> decision-directed
/// Wiener gain per frame (phase untouched) -> ISTFT. Output length equals
/// input length. `trace`, when given, receives every applied gain.
dsp::AudioBuffer wiener_denoise(const dsp::AudioBuffer& noisy, const WienerConfig& config = {},
                                WienerTrace* trace = nullptr);

}  // namespace wdn::wiener
