#pragma once

// Raw dilated 1-D convolution kernels over row-major [channels x time]
// buffers. Every output element is accumulated as
//   bias[o], then ascending input channel, then ascending tap
// regardless of threading or of which time window is being computed, so a
// sample's value never depends on how the signal was cut into windows.

#include <cstddef>

#include "wavedenoise/parallel.hpp"

namespace wdn::kernels {

struct ConvShape {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel_len = 0;
    std::size_t dilation = 1;

    std::size_t span() const { return (kernel_len - 1) * dilation; }
};

/// out[o][t] = bias[o] + sum_{i,k} w[o][i][k] * x[i][t + k*dilation], for
/// t in [0, in_len - span).
template <typename T>
void conv1d_valid(const T* x, std::size_t in_len, const T* w, const T* bias, const ConvShape& s, T* out) {
    const std::size_t out_len = in_len - s.span();
    const std::size_t work = s.in_channels * s.kernel_len * out_len;
    parallel_for(s.out_channels, work >= 1u << 16 ? 1 : s.out_channels + 1, [&](std::size_t o0, std::size_t o1) {
        for (std::size_t o = o0; o < o1; ++o) {
            T* y = out + o * out_len;
            const T b = bias ? bias[o] : T(0);
            for (std::size_t t = 0; t < out_len; ++t) y[t] = b;
            const T* wo = w + o * s.in_channels * s.kernel_len;
            for (std::size_t i = 0; i < s.in_channels; ++i) {
                const T* xi = x + i * in_len;
                for (std::size_t k = 0; k < s.kernel_len; ++k) {
                    const T wk = wo[i * s.kernel_len + k];
                    const T* xs = xi + k * s.dilation;
                    for (std::size_t t = 0; t < out_len; ++t) y[t] += wk * xs[t];
                }
            }
        }
    });
}

/// gx[i][t + k*d] += sum_o w[o][i][k] * gy[o][t]
template <typename T>
void conv1d_valid_grad_input(const T* gy, std::size_t in_len, const T* w, const ConvShape& s, T* gx) {
    const std::size_t out_len = in_len - s.span();
    const std::size_t work = s.out_channels * s.kernel_len * out_len;
    parallel_for(s.in_channels, work >= 1u << 16 ? 1 : s.in_channels + 1, [&](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i) {
            T* gxi = gx + i * in_len;
            for (std::size_t o = 0; o < s.out_channels; ++o) {
                const T* gyo = gy + o * out_len;
                const T* wo = w + (o * s.in_channels + i) * s.kernel_len;
                for (std::size_t k = 0; k < s.kernel_len; ++k) {
                    const T wk = wo[k];
                    T* dst = gxi + k * s.dilation;
                    for (std::size_t t = 0; t < out_len; ++t) dst[t] += wk * gyo[t];
                }
            }
        }
    });
}

/// gw[o][i][k] += sum_t gy[o][t] * x[i][t + k*d];  gb[o] += sum_t gy[o][t]
template <typename T>
void conv1d_valid_grad_params(const T* gy, const T* x, std::size_t in_len, const ConvShape& s, T* gw, T* gb) {
    const std::size_t out_len = in_len - s.span();
    const std::size_t work = s.in_channels * s.kernel_len * out_len;
    parallel_for(s.out_channels, work >= 1u << 16 ? 1 : s.out_channels + 1, [&](std::size_t o0, std::size_t o1) {
        for (std::size_t o = o0; o < o1; ++o) {
            const T* gyo = gy + o * out_len;
            if (gb) {
                T acc = 0;
                for (std::size_t t = 0; t < out_len; ++t) acc += gyo[t];
                gb[o] += acc;
            }
            for (std::size_t i = 0; i < s.in_channels; ++i) {
                const T* xi = x + i * in_len;
                for (std::size_t k = 0; k < s.kernel_len; ++k) {
                    const T* xs = xi + k * s.dilation;
                    T acc = 0;
                    for (std::size_t t = 0; t < out_len; ++t) acc += gyo[t] * xs[t];
                    gw[(o * s.in_channels + i) * s.kernel_len + k] += acc;
                }
            }
        }
    });
}

}  // namespace wdn::kernels
