#pragma once

// Checkpoint layout (all integers little-endian):
//   "WDNZ"                      magic
//   u32 version                 currently 1
//   u32 n, n bytes              model config as key-sorted JSON text
//   per parameter, in WavenetModel::named_parameters() order:
//     u32 n, n bytes            name (UTF-8)
//     u32 rank, rank x u32      shape
//     numel x f64               values

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "wavedenoise/wavenet.hpp"

namespace wdn::model {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> serialize_checkpoint(const WavenetModel& model);
WavenetModel deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const WavenetModel& model, const std::filesystem::path& path);
WavenetModel load_checkpoint(const std::filesystem::path& path);

}  // namespace wdn::model
