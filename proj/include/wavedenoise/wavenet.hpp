#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "wavedenoise/audio.hpp"
#include "wavedenoise/autodiff.hpp"

namespace wdn::model {

enum class PaddingMode {
    Symmetric,  // non-causal: the predicted sample sits at the centre of its context
    Causal,     // ablation: context only reaches into the past
};

struct ModelConfig {
    std::size_t stacks = 3;
    std::vector<std::size_t> dilations_per_stack = {1, 2, 4, 8, 16, 32, 64, 128, 256, 512};
    std::size_t residual_channels = 128;
    std::size_t skip_channels = 128;
    std::size_t filter_len = 3;
    std::pair<std::size_t, std::size_t> final_channels = {2048, 256};
    std::size_t final_filter_len = 3;
    std::size_t target_field = 1601;
    std::size_t condition_bits = 5;
    PaddingMode padding = PaddingMode::Symmetric;

    /// Throws std::invalid_argument describing the first violated constraint.
    void validate() const;
    std::size_t num_layers() const { return stacks * dilations_per_stack.size(); }

    bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, ModelConfig& c);

/// Dilated-stack context: 1 + (filter_len - 1) * sum of every dilation.
std::size_t receptive_field(const ModelConfig& config);

/// Fragment length that yields `target_field` outputs: rf + tf - 1.
std::size_t input_length(const ModelConfig& config, std::size_t target_field);
inline std::size_t input_length(const ModelConfig& config) { return input_length(config, config.target_field); }

/// Offset of the first predicted sample inside a fragment: (rf - 1) / 2 for
/// the symmetric model, rf - 1 for the causal ablation.
std::size_t target_offset(const ModelConfig& config);

/// Binary speaker code, least significant bit first. Id 0 is "any speaker".
struct ConditionCode {
    std::uint32_t speaker_id = 0;
    std::vector<double> bits;

    static ConditionCode encode(std::uint32_t speaker_id, std::size_t condition_bits);
};

struct ResidualLayer {
    std::size_t dilation = 1;
    ad::ConvParams filter;
    ad::ConvParams gate;
    ad::ConvParams residual;  // 1x1 after the gate; feeds the residual sum and the skip conv
    ad::ConvParams skip;
    ad::Tensor cond_filter;  // [residual_channels x condition_bits]
    ad::Tensor cond_gate;
};

/// Parameter handles. Copying a model aliases its tensors; use clone() for
/// an independent copy.
struct WavenetModel {
    ModelConfig config;
    ad::ConvParams input;
    std::vector<ResidualLayer> layers;
    ad::ConvParams final_a;
    ad::ConvParams final_b;
    ad::ConvParams output;

    /// Fixed order used by the optimizer and the checkpoint format:
    /// input.{weight,bias}; layers.<n>.{filter,gate,residual,skip}.{weight,bias},
    /// layers.<n>.cond_{filter,gate}; final_a, final_b, output .{weight,bias}.
    std::vector<std::pair<std::string, ad::Tensor>> named_parameters() const;
    std::vector<ad::Tensor> parameters() const;
    WavenetModel clone() const;
    void zero_grad();
};

WavenetModel build_model(const ModelConfig& config, std::uint64_t seed);
std::size_t param_count(const WavenetModel& model);

/// Analytic parameter count for a config, without allocating the model.
std::size_t param_count(const ModelConfig& config);

/// Differentiable forward pass over a [1 x L] fragment; returns [1 x (L - rf + 1)].
ad::Tensor forward(const WavenetModel& model, const ad::Tensor& fragment, const ConditionCode& condition);

enum class DenoiseMode { Batched, OneShot };
enum class Precision { Float64, Float32 };

/// Tape-free evaluation of the model. Computes any sub-range of the outputs
/// a single forward over the whole padded signal would produce, exactly.
template <typename T>
class InferenceEngine {
public:
    InferenceEngine(const WavenetModel& model, const ConditionCode& condition);

    /// Outputs [out_begin, out_end) of a forward over `signal` (which must be
    /// at least rf long).
    std::vector<T> run(const std::vector<T>& signal, std::size_t out_begin, std::size_t out_end) const;

    const ModelConfig& config() const { return config_; }

private:
    struct Conv {
        std::vector<T> weight;
        std::vector<T> bias;
        std::size_t in = 0, out = 0, k = 0;
    };
    struct Layer {
        std::size_t dilation;
        Conv filter, gate, residual, skip;
        std::vector<T> cond_filter, cond_gate;
    };

    static Conv convert(const ad::ConvParams& p);

    ModelConfig config_;
    std::size_t rf_;
    Conv input_;
    std::vector<Layer> layers_;
    Conv final_a_, final_b_, output_;
};

extern template class InferenceEngine<double>;
extern template class InferenceEngine<float>;

/// Full-signal denoising. The input is zero-padded so the output is aligned
/// 1:1 with it. Both modes produce bit-identical results.
dsp::AudioBuffer denoise(const WavenetModel& model, const dsp::AudioBuffer& noisy, const ConditionCode& condition,
                         DenoiseMode mode = DenoiseMode::Batched, Precision precision = Precision::Float64);

}  // namespace wdn::model
