#include "wavedenoise/mulaw.hpp"

#include <cmath>
#include <stdexcept>

namespace wdn::dsp {

double mu_law_compand(double x, double mu) {
    if (!(mu > 0.0)) throw std::invalid_argument("mu must be positive");
    if (!(std::abs(x) <= 1.0)) throw std::invalid_argument("mu-law input outside [-1, 1]");
    const double mag = std::log1p(mu * std::abs(x)) / std::log1p(mu);
    return std::copysign(mag, x);
}

double mu_law_expand(double y, double mu) {
    if (!(mu > 0.0)) throw std::invalid_argument("mu must be positive");
    if (!(std::abs(y) <= 1.0)) throw std::invalid_argument("mu-law code outside [-1, 1]");
    const double mag = std::expm1(std::abs(y) * std::log1p(mu)) / mu;
    return std::copysign(mag, y);
}

std::uint8_t quantize_8bit(double y) {
    const double cell = std::floor((y + 1.0) * 128.0);
    if (cell < 0.0) return 0;
    if (cell > 255.0) return 255;
    return static_cast<std::uint8_t>(cell);
}

double dequantize_8bit(std::uint8_t code) {
    return (static_cast<double>(code) + 0.5) / 128.0 - 1.0;
}

}  // namespace wdn::dsp
