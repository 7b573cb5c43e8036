#include <gtest/gtest.h>

#include <cmath>

#include "support/synth.hpp"
#include "wavedenoise/checkpoint.hpp"
#include "wavedenoise/wavenet.hpp"

using namespace wdn;
using namespace wdn::model;

namespace {

ad::Tensor signal_tensor(const std::vector<double>& v, bool requires_grad = false) {
    return ad::Tensor::from({1, v.size()}, v, requires_grad);
}

std::vector<double> tape_outputs(const WavenetModel& m, const std::vector<double>& x, const ConditionCode& c) {
    const auto y = forward(m, signal_tensor(x), c);
    return {y.data().begin(), y.data().end()};
}

/// Zero-pads the way denoise does and runs one tape forward over everything.
std::vector<double> tape_denoise(const WavenetModel& m, const std::vector<double>& x, const ConditionCode& c) {
    const std::size_t rf = receptive_field(m.config), left = target_offset(m.config);
    std::vector<double> padded(left, 0.0);
    padded.insert(padded.end(), x.begin(), x.end());
    padded.resize(x.size() + rf - 1, 0.0);
    return tape_outputs(m, padded, c);
}

}  // namespace

TEST(Arithmetic, DefaultConfig) {
    const ModelConfig c;
    EXPECT_EQ(c.num_layers(), 30u);
    EXPECT_EQ(receptive_field(c), 6139u);
    EXPECT_EQ(input_length(c, 1601), 7739u);
    EXPECT_EQ(input_length(c, 1), 6139u);
    EXPECT_EQ(target_offset(c), 3069u);
    // Tallied by hand: input conv, 30 x (2 dilated 3x1 + residual + skip + 2 condition
    // matrices), two 3x1 head convs and the output 1x1.
    const std::size_t per_layer = 2 * (128 * 128 * 3 + 128) + 2 * (128 * 128 + 128) + 2 * 128 * 5;
    const std::size_t expected = (128 * 3 + 128) + 30 * per_layer + (128 * 3 * 2048 + 2048) + (2048 * 3 * 256 + 256) + 257;
    EXPECT_EQ(param_count(c), expected);
    EXPECT_GE(param_count(c), 6'250'000u);
    EXPECT_LE(param_count(c), 6'350'000u);
}

TEST(Arithmetic, GeneralFormulas) {
    ModelConfig c = wdn::testing::toy_config();
    EXPECT_EQ(receptive_field(c), 15u);
    c.padding = PaddingMode::Causal;
    EXPECT_EQ(target_offset(c), 14u);
    c.filter_len = 5;
    c.padding = PaddingMode::Symmetric;
    EXPECT_EQ(receptive_field(c), 29u);
}

TEST(Config, ValidationAndJson) {
    ModelConfig c = wdn::testing::toy_config();
    EXPECT_NO_THROW(c.validate());
    nlohmann::json j = c;
    EXPECT_EQ(j.get<ModelConfig>(), c);
    auto bad = c;
    bad.filter_len = 2;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = c;
    bad.target_field = 0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = c;
    bad.dilations_per_stack.clear();
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    j["bogus"] = 1;
    EXPECT_ANY_THROW(j.get<ModelConfig>());
    nlohmann::json partial = {{"target_field", 64}};
    EXPECT_EQ(partial.get<ModelConfig>().target_field, 64u);
    EXPECT_EQ(partial.get<ModelConfig>().residual_channels, 128u);
}

TEST(ConditionCode, BinaryLsbFirst) {
    const auto c = ConditionCode::encode(6, 5);
    EXPECT_EQ(c.bits, (std::vector<double>{0, 1, 1, 0, 0}));
    EXPECT_EQ(ConditionCode::encode(0, 5).bits, std::vector<double>(5, 0.0));
    EXPECT_EQ(ConditionCode::encode(31, 5).bits, std::vector<double>(5, 1.0));
    EXPECT_THROW(ConditionCode::encode(32, 5), std::invalid_argument);
}

TEST(Model, ParameterShapesAndCount) {
    const auto cfg = wdn::testing::toy_config();
    const auto m = build_model(cfg, 1);
    EXPECT_EQ(param_count(m), param_count(cfg));
    const auto named = m.named_parameters();
    EXPECT_EQ(named.front().first, "input.weight");
    EXPECT_EQ(named.back().first, "output.bias");
    EXPECT_EQ(m.input.weight.shape(), (ad::Shape{8, 1, 3}));
    EXPECT_EQ(m.layers[2].filter.weight.shape(), (ad::Shape{8, 8, 3}));
    EXPECT_EQ(m.layers[2].dilation, 4u);
    EXPECT_EQ(m.layers[0].cond_filter.shape(), (ad::Shape{8, 5}));
    EXPECT_EQ(m.final_a.weight.shape(), (ad::Shape{16, 8, 3}));
    EXPECT_EQ(m.output.weight.shape(), (ad::Shape{1, 8, 1}));
}

TEST(Model, SeedDeterminesInitAndCloneIsIndependent) {
    const auto cfg = wdn::testing::toy_config();
    const auto a = build_model(cfg, 7), b = build_model(cfg, 7), c = build_model(cfg, 8);
    EXPECT_EQ(serialize_checkpoint(a), serialize_checkpoint(b));
    EXPECT_NE(serialize_checkpoint(a), serialize_checkpoint(c));
    auto d = a.clone();
    d.output.bias.data()[0] += 1.0;
    EXPECT_NE(d.output.bias.data()[0], a.output.bias.data()[0]);
}

TEST(Forward, OutputLengthIsLMinusRfPlusOne) {
    const auto cfg = wdn::testing::toy_config();
    const auto m = build_model(cfg, 2);
    Rng rng(1);
    for (std::size_t tf : {1, 8, 33}) {
        const auto x = wdn::testing::random_vector(input_length(cfg, tf), rng);
        EXPECT_EQ(tape_outputs(m, x, ConditionCode::encode(1, 5)).size(), tf);
    }
    EXPECT_THROW(forward(m, signal_tensor(std::vector<double>(14, 0.0)), ConditionCode::encode(0, 5)),
                 std::invalid_argument);
}

TEST(Forward, CausalOutputLengthMatchesToo) {
    auto cfg = wdn::testing::toy_config();
    cfg.padding = PaddingMode::Causal;
    const auto m = build_model(cfg, 2);
    Rng rng(1);
    EXPECT_EQ(tape_outputs(m, wdn::testing::random_vector(input_length(cfg, 8), rng), ConditionCode::encode(0, 5)).size(), 8u);
}

TEST(Inference, EngineMatchesTapeForward) {
    for (auto mode : {PaddingMode::Symmetric, PaddingMode::Causal}) {
        auto cfg = wdn::testing::toy_config();
        cfg.padding = mode;
        const auto m = build_model(cfg, 3);
        const auto cond = ConditionCode::encode(5, 5);
        Rng rng(2);
        const auto x = wdn::testing::random_vector(200, rng);
        const auto ref = tape_outputs(m, x, cond);
        const InferenceEngine<double> engine(m, cond);
        EXPECT_EQ(engine.run(x, 0, ref.size()), ref);
        // Any sub-range is the corresponding slice of the full pass.
        for (auto [b, e] : {std::pair<std::size_t, std::size_t>{0, 1}, {17, 40}, {ref.size() - 3, ref.size()}}) {
            const auto part = engine.run(x, b, e);
            ASSERT_EQ(part.size(), e - b);
            for (std::size_t i = 0; i < part.size(); ++i) EXPECT_EQ(part[i], ref[b + i]);
        }
    }
}

TEST(Denoise, AlignedLengthAndBitIdenticalModes) {
    auto cfg = wdn::testing::toy_config(8, 64);
    const auto m = build_model(cfg, 4);
    Rng rng(3);
    for (std::size_t n : {0, 1, 5, 63, 64, 65, 1000}) {
        dsp::AudioBuffer x{wdn::testing::random_vector(n, rng), 16000};
        const auto b = denoise(m, x, ConditionCode{{}, std::vector<double>(5, 0.0)}, DenoiseMode::Batched);
        const auto o = denoise(m, x, ConditionCode{{}, std::vector<double>(5, 0.0)}, DenoiseMode::OneShot);
        EXPECT_EQ(b.size(), n);
        EXPECT_EQ(b.samples, o.samples);
    }
}

TEST(Denoise, EqualsSinglePassOverPaddedSignal) {
    for (auto mode : {PaddingMode::Symmetric, PaddingMode::Causal}) {
        auto cfg = wdn::testing::toy_config(8, 16);
        cfg.padding = mode;
        const auto m = build_model(cfg, 5);
        const auto cond = ConditionCode::encode(3, 5);
        Rng rng(4);
        const auto x = wdn::testing::random_vector(300, rng);
        EXPECT_EQ(denoise(m, dsp::AudioBuffer{x, 16000}, cond).samples, tape_denoise(m, x, cond));
    }
}

TEST(Denoise, TargetFieldDoesNotChangeOutput) {
    auto cfg = wdn::testing::toy_config(8, 1);
    const auto base = build_model(cfg, 6);
    Rng rng(5);
    dsp::AudioBuffer x{wdn::testing::random_vector(777, rng), 16000};
    const auto cond = ConditionCode::encode(0, 5);
    const auto ref = denoise(base, x, cond).samples;
    for (std::size_t tf : {2, 7, 64, 1000}) {
        auto m = base;
        m.config.target_field = tf;
        EXPECT_EQ(denoise(m, x, cond).samples, ref) << "tf " << tf;
    }
}

TEST(Denoise, Float32TracksFloat64) {
    const auto m = build_model(wdn::testing::toy_config(8, 32), 7);
    Rng rng(6);
    dsp::AudioBuffer x{wdn::testing::random_vector(500, rng, -0.5, 0.5), 16000};
    const auto cond = ConditionCode::encode(2, 5);
    const auto d = denoise(m, x, cond, DenoiseMode::Batched, Precision::Float64);
    const auto f = denoise(m, x, cond, DenoiseMode::Batched, Precision::Float32);
    const auto f1 = denoise(m, x, cond, DenoiseMode::OneShot, Precision::Float32);
    EXPECT_EQ(f.samples, f1.samples);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(f.samples[i], d.samples[i], 1e-4);
}

TEST(Dependency, SymmetricSpanAndNonCausality) {
    const auto cfg = wdn::testing::toy_config(8, 16);
    const auto m = build_model(cfg, 8);
    const auto cond = ConditionCode::encode(1, 5);
    Rng rng(7);
    const auto x = wdn::testing::random_vector(120, rng);
    const auto y = denoise(m, dsp::AudioBuffer{x, 16000}, cond).samples;
    const std::size_t t = 60;
    // Dilated stack (rf - 1) / 2 = 7 each side, plus one tap from the input
    // conv and two from the head convs.
    const std::size_t reach = (receptive_field(cfg) - 1) / 2 + 3;
    auto perturbed = [&](std::size_t pos) {
        auto z = x;
        z[pos] += 0.5;
        return denoise(m, dsp::AudioBuffer{z, 16000}, cond).samples[t];
    };
    EXPECT_NE(perturbed(t + 1), y[t]);
    EXPECT_NE(perturbed(t + reach), y[t]);
    EXPECT_NE(perturbed(t - reach), y[t]);
    EXPECT_EQ(perturbed(t + reach + 1), y[t]);
    EXPECT_EQ(perturbed(t - reach - 1), y[t]);
}

TEST(Dependency, CausalAblationIgnoresFuture) {
    auto cfg = wdn::testing::toy_config(8, 16);
    cfg.padding = PaddingMode::Causal;
    const auto m = build_model(cfg, 9);
    const auto cond = ConditionCode::encode(1, 5);
    Rng rng(8);
    const auto x = wdn::testing::random_vector(120, rng);
    const auto y = denoise(m, dsp::AudioBuffer{x, 16000}, cond).samples;
    auto z = x;
    z[70] += 0.5;
    const auto yz = denoise(m, dsp::AudioBuffer{z, 16000}, cond).samples;
    for (std::size_t i = 0; i < 70; ++i) EXPECT_EQ(yz[i], y[i]);
    EXPECT_NE(yz[70], y[70]);
}

TEST(Dependency, ShiftEquivariantAwayFromEdges) {
    const auto m = build_model(wdn::testing::toy_config(8, 16), 10);
    const auto cond = ConditionCode::encode(0, 5);
    Rng rng(9);
    const auto x = wdn::testing::random_vector(200, rng);
    std::vector<double> shifted(5, 0.0);
    shifted.insert(shifted.end(), x.begin(), x.end());
    const auto y = denoise(m, dsp::AudioBuffer{x, 16000}, cond).samples;
    const auto ys = denoise(m, dsp::AudioBuffer{shifted, 16000}, cond).samples;
    for (std::size_t t = 20; t < 180; ++t) EXPECT_EQ(ys[t + 5], y[t]);
}

TEST(Conditioning, SpeakerIdChangesOutputAndZeroCodeIsBiasFree) {
    const auto m = build_model(wdn::testing::toy_config(8, 16), 11);
    Rng rng(10);
    dsp::AudioBuffer x{wdn::testing::random_vector(100, rng), 16000};
    const auto y0 = denoise(m, x, ConditionCode::encode(0, 5)).samples;
    const auto y3 = denoise(m, x, ConditionCode::encode(3, 5)).samples;
    EXPECT_NE(y0, y3);
    // Zeroing the condition matrices must not change the id-0 output.
    auto stripped = m.clone();
    for (auto& l : stripped.layers) {
        for (double& v : l.cond_filter.data()) v = 0.0;
        for (double& v : l.cond_gate.data()) v = 0.0;
    }
    EXPECT_EQ(denoise(stripped, x, ConditionCode::encode(0, 5)).samples, y0);
    EXPECT_THROW(denoise(m, x, ConditionCode::encode(1, 4)), std::invalid_argument);
}

TEST(Checkpoint, RoundTripIsExact) {
    wdn::testing::ScratchDir dir("ckpt");
    const auto m = build_model(wdn::testing::toy_config(), 12);
    save_checkpoint(m, dir / "m.wdnz");
    const auto back = load_checkpoint(dir / "m.wdnz");
    EXPECT_EQ(back.config, m.config);
    const auto a = m.named_parameters(), b = back.named_parameters();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].first, b[i].first);
        EXPECT_EQ(a[i].second.shape(), b[i].second.shape());
        EXPECT_TRUE(std::equal(a[i].second.data().begin(), a[i].second.data().end(), b[i].second.data().begin()));
    }
    EXPECT_EQ(serialize_checkpoint(back), serialize_checkpoint(m));
}

TEST(Checkpoint, CorruptionDetected) {
    const auto bytes = serialize_checkpoint(build_model(wdn::testing::toy_config(), 13));
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_THROW(deserialize_checkpoint(bad_magic), CheckpointError);
    const std::vector<std::uint8_t> truncated(bytes.begin(), bytes.end() - 9);
    EXPECT_THROW(deserialize_checkpoint(truncated), CheckpointError);
    auto trailing = bytes;
    trailing.push_back(0);
    EXPECT_THROW(deserialize_checkpoint(trailing), CheckpointError);
    auto bad_version = bytes;
    bad_version[4] = 9;
    EXPECT_THROW(deserialize_checkpoint(bad_version), CheckpointError);
    EXPECT_THROW(load_checkpoint("/nonexistent/x.wdnz"), CheckpointError);
}
