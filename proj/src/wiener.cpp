#include "wavedenoise/wiener.hpp"

#include <algorithm>
#include <stdexcept>

namespace wdn::wiener {

void WienerConfig::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("wiener: alpha must be in [0, 1]");
    if (!(gain_floor > 0.0 && gain_floor <= 1.0)) throw std::invalid_argument("wiener: gain_floor must be in (0, 1]");
    if (n_init_frames == 0) throw std::invalid_argument("wiener: n_init_frames must be at least 1");
    if (hop * 2 != frame_len) throw std::invalid_argument("wiener: hop must be frame_len / 2");
}

std::vector<double> estimate_noise_psd(const dsp::SpectralFrames& frames, std::size_t n_init) {
    if (n_init == 0 || frames.num_frames < n_init)
        throw std::invalid_argument("estimate_noise_psd: need at least " + std::to_string(n_init) + " frames, have " +
                                    std::to_string(frames.num_frames));
    const std::size_t bins = frames.bins();
    std::vector<double> psd(bins, 0.0);
    for (std::size_t l = 0; l < n_init; ++l) {
        const auto* X = frames.frame(l);
        for (std::size_t k = 0; k < bins; ++k) psd[k] += std::norm(X[k]);
    }
    for (auto& v : psd) v /= static_cast<double>(n_init);
    return psd;
}

SnrEstimate decision_directed_step(std::span<const double> prev_clean_power, std::span<const double> current_power,
                                   std::span<const double> noise_psd, double alpha) {
    const std::size_t n = current_power.size();
    if (prev_clean_power.size() != n || noise_psd.size() != n)
        throw std::invalid_argument("decision_directed_step: length mismatch");
    SnrEstimate out;
    out.xi.resize(n);
    out.gamma.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double lambda = std::max(noise_psd[k], 1e-12);
        out.gamma[k] = current_power[k] / lambda;
        out.xi[k] = alpha * prev_clean_power[k] / lambda + (1.0 - alpha) * std::max(out.gamma[k] - 1.0, 0.0);
    }
    return out;
}

std::vector<double> wiener_gain(std::span<const double> xi, double gain_floor) {
    std::vector<double> g(xi.size());
    for (std::size_t k = 0; k < xi.size(); ++k) {
        if (xi[k] < 0.0) throw std::invalid_argument("wiener_gain: negative a priori SNR");
        g[k] = std::max(xi[k] / (1.0 + xi[k]), gain_floor);
    }
    return g;
}

dsp::AudioBuffer wiener_denoise(const dsp::AudioBuffer& noisy, const WienerConfig& config, WienerTrace* trace) {
    config.validate();
    const std::size_t n = noisy.size();
    if (n < config.n_init_frames * config.hop + config.frame_len)
        throw std::invalid_argument("wiener_denoise: input too short for " + std::to_string(config.n_init_frames) +
                                    " noise-estimation frames");

    // One hop of leading zeros and enough trailing zeros that every input
    // sample is covered by two frames.
    const std::size_t hop = config.hop, N = config.frame_len;
    const std::size_t frames_needed = (n + hop + hop - 1) / hop + 1;
    dsp::AudioBuffer padded;
    padded.sample_rate = noisy.sample_rate;
    padded.samples.assign((frames_needed - 1) * hop + N, 0.0);
    std::copy(noisy.samples.begin(), noisy.samples.end(), padded.samples.begin() + static_cast<std::ptrdiff_t>(hop));

    dsp::SpectralFrames spec = dsp::stft(padded, N, hop);
    const std::size_t bins = spec.bins();
    const auto psd = estimate_noise_psd(spec, config.n_init_frames);

    std::vector<double> prev_clean(bins, 0.0), power(bins);
    if (trace) trace->gains.clear();
    for (std::size_t l = 0; l < spec.num_frames; ++l) {
        auto* X = spec.frame(l);
        for (std::size_t k = 0; k < bins; ++k) power[k] = std::norm(X[k]);
        const auto est = decision_directed_step(prev_clean, power, psd, config.alpha);
        const auto gain = wiener_gain(est.xi, config.gain_floor);
        for (std::size_t k = 0; k < bins; ++k) {
            X[k] *= gain[k];
            prev_clean[k] = std::norm(X[k]);
        }
        if (trace) trace->gains.push_back(gain);
    }

    const dsp::AudioBuffer full = dsp::istft(spec);
    dsp::AudioBuffer out;
    out.sample_rate = noisy.sample_rate;
    out.samples.assign(full.samples.begin() + static_cast<std::ptrdiff_t>(hop),
                       full.samples.begin() + static_cast<std::ptrdiff_t>(hop + n));
    return out;
}

}  // namespace wdn::wiener
