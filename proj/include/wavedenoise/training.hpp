#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wavedenoise/adam.hpp"
#include "wavedenoise/dataset.hpp"
#include "wavedenoise/wavenet.hpp"

namespace wdn::train {

/// mean_j |target_j - est_j|
double l1_loss(std::span<const double> est, std::span<const double> target);

/// mean |s - s_hat| + mean |b - b_hat| with b = m - s and b_hat = m - s_hat.
/// Because b_hat is a parameterless function of s_hat this equals
/// 2 * l1_loss(s_hat, s) up to rounding.
double energy_conserving_loss(std::span<const double> est_speech, std::span<const double> target_speech,
                              std::span<const double> mixture);

ad::Tensor l1_loss(const ad::Tensor& est, std::span<const double> target);
ad::Tensor energy_conserving_loss(const ad::Tensor& est_speech, std::span<const double> target_speech,
                                  std::span<const double> mixture);

enum class LossKind { EnergyConserving, L1 };

struct TrainConfig {
    LossKind loss = LossKind::EnergyConserving;
    double noise_only_prob = 0.0;
    double condition_zero_prob = 1.0 / 29.0;
    std::size_t batch_size = 4;
    std::size_t steps = 1000;
    std::uint64_t seed = 0;
    ad::AdamHyper adam;
    std::size_t checkpoint_every = 0;  // 0: final checkpoint only

    void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct TrainingExample {
    std::vector<double> input;
    std::vector<double> target_speech;
    std::vector<double> target_mixture;
    model::ConditionCode condition;
};

/// Draws one example: a training row, then noise-only / condition-zeroing
/// coin flips, then either a raw noise fragment (noise-only) or a mixture
/// crop and window offset, all from `rng`.
TrainingExample sample_training_example(const data::Manifest& manifest, data::AudioCache& cache,
                                        const TrainConfig& config, const model::ModelConfig& model_config, Rng& rng);

struct TrainPaths {
    std::filesystem::path checkpoint;  // final checkpoint; periodic ones get a ".step<N>" suffix
    std::filesystem::path loss_trace;  // CSV "step,loss"; empty to skip
};

struct TrainResult {
    std::filesystem::path checkpoint;
    std::vector<double> losses;
};

/// Runs config.steps optimizer steps on `model` in place. Example b of step s
/// uses RNG stream (seed, s * batch_size + b), so results do not depend on
/// thread count. With empty paths nothing is written.
TrainResult train(model::WavenetModel& model, const data::Manifest& manifest, const TrainConfig& config,
                  const TrainPaths& paths = {});

}  // namespace wdn::train
