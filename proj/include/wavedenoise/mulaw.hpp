#pragma once

#include <cstdint>

namespace wdn::dsp {

/// sign(x) * ln(1 + mu|x|) / ln(1 + mu), for |x| <= 1 and mu > 0.
double mu_law_compand(double x, double mu = 255.0);

/// Exact inverse of mu_law_compand: sign(y) * ((1 + mu)^|y| - 1) / mu.
double mu_law_expand(double y, double mu = 255.0);

/// Uniform 8-bit midrise quantizer on [-1, 1]: code = floor((y + 1) / 2 * 256),
/// clamped to [0, 255].
std::uint8_t quantize_8bit(double y);

/// Center of the quantization cell for `code`.
double dequantize_8bit(std::uint8_t code);

}  // namespace wdn::dsp
