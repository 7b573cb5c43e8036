#include "wavedenoise/stft.hpp"

#include <fftw3.h>

#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace wdn::dsp {

namespace {

// FFTW planning is not thread-safe; execution with new-array calls is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct PlanDeleter {
    void operator()(fftw_plan_s* p) const {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(p);
    }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

}  // namespace

std::vector<double> hann_window(std::size_t len) {
    std::vector<double> w(len);
    for (std::size_t n = 0; n < len; ++n)
        w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(len));
    return w;
}

SpectralFrames stft(const AudioBuffer& buffer, std::size_t frame_len, std::size_t hop, Window window) {
    if (!is_power_of_two(frame_len)) throw std::invalid_argument("frame_len must be a power of two");
    if (hop == 0 || hop > frame_len) throw std::invalid_argument("hop must be in [1, frame_len]");
    if (buffer.size() < frame_len) throw std::invalid_argument("buffer shorter than frame_len");

    SpectralFrames out;
    out.frame_len = frame_len;
    out.hop = hop;
    out.fft_len = frame_len;
    out.window = window;
    out.sample_rate = buffer.sample_rate;
    out.signal_len = buffer.size();
    out.num_frames = (buffer.size() - frame_len) / hop + 1;
    const std::size_t bins = out.bins();
    out.data.assign(out.num_frames * bins, {0.0, 0.0});

    const auto win = hann_window(frame_len);
    std::unique_ptr<double, FftwFree> in(fftw_alloc_real(frame_len));
    std::unique_ptr<fftw_complex, FftwFree> spec(fftw_alloc_complex(bins));
    Plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan.reset(fftw_plan_dft_r2c_1d(static_cast<int>(frame_len), in.get(), spec.get(), FFTW_ESTIMATE));
    }
    for (std::size_t l = 0; l < out.num_frames; ++l) {
        const double* seg = buffer.samples.data() + l * hop;
        for (std::size_t n = 0; n < frame_len; ++n) in.get()[n] = seg[n] * win[n];
        fftw_execute(plan.get());
        auto* dst = out.frame(l);
        for (std::size_t k = 0; k < bins; ++k) dst[k] = {spec.get()[k][0], spec.get()[k][1]};
    }
    return out;
}

AudioBuffer istft(const SpectralFrames& frames) {
    if (frames.window != Window::Hann || frames.fft_len != frames.frame_len || frames.hop * 2 != frames.frame_len)
        throw std::invalid_argument("istft requires hann window with hop = frame_len / 2 (COLA)");
    if (frames.data.size() != frames.num_frames * frames.bins())
        throw std::invalid_argument("spectral frame matrix has inconsistent size");

    const std::size_t n = frames.fft_len;
    const std::size_t bins = frames.bins();
    const std::size_t covered = frames.num_frames == 0 ? 0 : (frames.num_frames - 1) * frames.hop + n;
    AudioBuffer out;
    out.sample_rate = frames.sample_rate;
    out.samples.assign(std::max(frames.signal_len, covered), 0.0);
    if (frames.num_frames == 0) return out;

    std::unique_ptr<fftw_complex, FftwFree> spec(fftw_alloc_complex(bins));
    std::unique_ptr<double, FftwFree> time(fftw_alloc_real(n));
    Plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan.reset(fftw_plan_dft_c2r_1d(static_cast<int>(n), spec.get(), time.get(), FFTW_ESTIMATE));
    }
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t l = 0; l < frames.num_frames; ++l) {
        const auto* src = frames.frame(l);
        for (std::size_t k = 0; k < bins; ++k) {
            spec.get()[k][0] = src[k].real();
            spec.get()[k][1] = src[k].imag();
        }
        // c2r destroys its input; it is refilled every frame.
        fftw_execute(plan.get());
        double* dst = out.samples.data() + l * frames.hop;
        for (std::size_t i = 0; i < n; ++i) dst[i] += time.get()[i] * scale;
    }
    out.samples.resize(frames.signal_len);
    return out;
}

}  // namespace wdn::dsp
