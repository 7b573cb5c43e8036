#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "support/synth.hpp"
#include "wavedenoise/dataset.hpp"

using namespace wdn;
using namespace wdn::data;

TEST(Rms, KnownValues) {
    EXPECT_EQ(compute_rms(std::vector<double>{1, 1, 1, 1}), 1.0);
    EXPECT_EQ(compute_rms(std::vector<double>{1, -1}), 1.0);
    EXPECT_NEAR(compute_rms(std::vector<double>{3, 4}), 3.53553390593273762, 1e-15);
    EXPECT_THROW(compute_rms(std::vector<double>{}), std::invalid_argument);
}

TEST(Mix, GainForEqualRmsInputs) {
    dsp::AudioBuffer s{{1, -1, 1, -1}, 16000}, b{{-1, 1, 1, -1}, 16000};
    EXPECT_DOUBLE_EQ(mix_at_snr(s, b, 0.0).gain, 1.0);
    EXPECT_NEAR(mix_at_snr(s, b, 20.0).gain, 0.1, 1e-15);
}

TEST(Mix, AchievedSnrAndIdentity) {
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        const auto s = wdn::testing::harmonic_surrogate(2000, rng);
        const auto b = wdn::testing::white_noise(3000, rng);
        const double snr = rng.uniform(-5.0, 20.0);
        const auto mix = mix_at_snr(s, b, snr, rng);
        ASSERT_EQ(mix.mixture.size(), s.size());
        const double achieved = 20.0 * std::log10(compute_rms(s.samples) / compute_rms(mix.scaled_noise.samples));
        EXPECT_NEAR(achieved, snr, 1e-9 * std::max(1.0, std::abs(snr)));
        for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(mix.mixture.samples[i], s.samples[i] + mix.scaled_noise.samples[i]);
    }
}

TEST(Mix, OffsetSelectsCrop) {
    dsp::AudioBuffer s{{0.5, 0.5}, 16000}, b{{1, 2, 3, 4}, 16000};
    const auto mix = mix_at_snr(s, b, 0.0, 2);
    const double g = mix.gain;
    EXPECT_EQ(mix.scaled_noise.samples, (std::vector<double>{g * 3, g * 4}));
    EXPECT_THROW(mix_at_snr(s, b, 0.0, 3), std::invalid_argument);
}

TEST(Mix, Errors) {
    dsp::AudioBuffer s{{0.5, 0.5}, 16000}, silent{{0, 0}, 16000}, shorter{{1}, 16000};
    EXPECT_THROW(mix_at_snr(silent, s, 0.0), std::invalid_argument);
    EXPECT_THROW(mix_at_snr(s, silent, 0.0), std::invalid_argument);
    EXPECT_THROW(mix_at_snr(s, shorter, 0.0), std::invalid_argument);
    dsp::AudioBuffer other_rate{{1, 1}, 8000};
    EXPECT_THROW(mix_at_snr(s, other_rate, 0.0), std::invalid_argument);
}

TEST(Manifest, SingleFile) {
    wdn::testing::ScratchDir dir("m1");
    wdn::testing::write_surrogate_corpus(dir.path(), 1, 1, 100, 1);
    const auto m = build_manifest(dir / "speech", dir / "noise", {0.0}, Split::Train, {}, 3);
    ASSERT_EQ(m.rows.size(), 1u);
    EXPECT_EQ(m.rows[0].snr_db, 0.0);
    EXPECT_EQ(m.rows[0].speaker_id, 1u);
    EXPECT_EQ(m.rows[0].split, Split::Train);
}

TEST(Manifest, DeterministicAndRoundTrips) {
    wdn::testing::ScratchDir dir("m2");
    wdn::testing::write_surrogate_corpus(dir.path(), 10, 3, 100, 2);
    const auto a = build_manifest(dir / "speech", dir / "noise", {2.5, 7.5}, Split::Test, {}, 9);
    const auto b = build_manifest(dir / "speech", dir / "noise", {2.5, 7.5}, Split::Test, {}, 9);
    EXPECT_EQ(a, b);
    EXPECT_EQ(format_manifest(a), format_manifest(b));
    const auto c = build_manifest(dir / "speech", dir / "noise", {2.5, 7.5}, Split::Test, {}, 10);
    EXPECT_NE(format_manifest(a), format_manifest(c));
    write_manifest(a, dir / "m.jsonl");
    EXPECT_EQ(read_manifest(dir / "m.jsonl"), a);
    EXPECT_EQ(parse_manifest(format_manifest(a)), a);
}

TEST(Manifest, SpeakerIds) {
    wdn::testing::ScratchDir dir("m3");
    wdn::testing::write_surrogate_corpus(dir.path(), 6, 1, 100, 3, 3);
    EXPECT_EQ(speaker_key("/a/b/p226_001.wav"), "p226");
    EXPECT_EQ(speaker_key("noseparator.wav"), "noseparator");
    const auto m = build_manifest(dir / "speech", dir / "noise", {0.0}, Split::Train, {}, 1);
    for (const auto& r : m.rows) EXPECT_EQ("spk" + std::to_string(r.speaker_id), speaker_key(r.speech_path));
    const auto mapped = build_manifest(dir / "speech", dir / "noise", {0.0}, Split::Train, {{"spk2", 17}}, 1);
    for (const auto& r : mapped.rows) EXPECT_EQ(r.speaker_id, speaker_key(r.speech_path) == "spk2" ? 17u : 0u);
}

TEST(Manifest, SnrFrequenciesAreUniform) {
    wdn::testing::ScratchDir dir("m4");
    wdn::testing::write_surrogate_corpus(dir.path(), 1000, 2, 32, 4);
    const std::vector<double> snrs = {0.0, 5.0, 10.0, 15.0};
    const auto m = build_manifest(dir / "speech", dir / "noise", snrs, Split::Train, {}, 21);
    ASSERT_EQ(m.rows.size(), 1000u);
    std::map<double, int> counts;
    for (const auto& r : m.rows) ++counts[r.snr_db];
    const double sd = std::sqrt(1000.0 * 0.25 * 0.75);
    for (double s : snrs) EXPECT_LE(std::abs(counts[s] - 250.0), 3.0 * sd) << "snr " << s;
}

TEST(Manifest, NoiseMustCoverSpeech) {
    wdn::testing::ScratchDir dir("m5");
    std::filesystem::create_directories(dir / "speech");
    std::filesystem::create_directories(dir / "noise");
    Rng rng(1);
    dsp::write_wav(wdn::testing::harmonic_surrogate(400, rng), dir / "speech" / "a_1.wav");
    dsp::write_wav(wdn::testing::white_noise(100, rng), dir / "noise" / "short.wav");
    EXPECT_THROW(build_manifest(dir / "speech", dir / "noise", {0.0}, Split::Train, {}, 1), std::invalid_argument);
    dsp::write_wav(wdn::testing::white_noise(400, rng), dir / "noise" / "long.wav");
    const auto m = build_manifest(dir / "speech", dir / "noise", {0.0}, Split::Train, {}, 1);
    EXPECT_NE(m.rows[0].noise_path.find("long.wav"), std::string::npos);
}

TEST(Manifest, Errors) {
    wdn::testing::ScratchDir dir("m6");
    std::filesystem::create_directories(dir / "empty");
    wdn::testing::write_surrogate_corpus(dir.path(), 1, 1, 100, 1);
    EXPECT_THROW(build_manifest(dir / "empty", dir / "noise", {0.0}, Split::Train, {}, 1), std::invalid_argument);
    EXPECT_THROW(build_manifest(dir / "missing", dir / "noise", {0.0}, Split::Train, {}, 1), std::invalid_argument);
    EXPECT_THROW(build_manifest(dir / "speech", dir / "noise", {}, Split::Train, {}, 1), std::invalid_argument);
    EXPECT_THROW(parse_manifest("{\"speech\":\"x\"}\n"), std::runtime_error);
    EXPECT_THROW(parse_manifest("not json\n"), std::runtime_error);
    EXPECT_THROW(parse_split("dev"), std::invalid_argument);
}

TEST(Fragment, ExactLengthClip) {
    const auto cfg = wdn::testing::toy_config(8, 8);
    const std::size_t L = model::input_length(cfg, 8);
    std::vector<double> mix(L), speech(L);
    for (std::size_t i = 0; i < L; ++i) {
        mix[i] = static_cast<double>(i);
        speech[i] = -static_cast<double>(i);
    }
    const auto f = extract_fragment(mix, speech, 0, cfg, 8);
    EXPECT_EQ(f.input, mix);
    const std::size_t c = model::target_offset(cfg);
    EXPECT_EQ(f.target_speech, std::vector<double>(speech.begin() + c, speech.begin() + c + 8));
    EXPECT_EQ(f.target_mixture, std::vector<double>(mix.begin() + c, mix.begin() + c + 8));
}

TEST(Fragment, ShortClipCentredAndAligned) {
    const auto cfg = wdn::testing::toy_config(8, 8);
    const std::size_t L = model::input_length(cfg, 8);
    Rng rng(2);
    const auto mix = wdn::testing::random_vector(10, rng), speech = wdn::testing::random_vector(10, rng);
    const auto f = extract_fragment(mix, speech, 0, cfg, 8);
    ASSERT_EQ(f.input.size(), L);
    const std::size_t lead = (L - 10) / 2;
    for (std::size_t i = 0; i < L; ++i) {
        const bool inside = i >= lead && i < lead + 10;
        EXPECT_EQ(f.input[i], inside ? mix[i - lead] : 0.0);
    }
    const std::size_t c = model::target_offset(cfg);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(f.target_mixture[i], f.input[c + i]);
}

TEST(Fragment, RandomOffsetsSliceExactly) {
    for (auto mode : {model::PaddingMode::Symmetric, model::PaddingMode::Causal}) {
        auto cfg = wdn::testing::toy_config(8, 16);
        cfg.padding = mode;
        Rng rng(3);
        const auto mix = wdn::testing::random_vector(500, rng), speech = wdn::testing::random_vector(500, rng);
        const std::size_t L = model::input_length(cfg, 16), c = model::target_offset(cfg);
        for (int trial = 0; trial < 100; ++trial) {
            const std::size_t off = rng.index(500);
            const auto f = extract_fragment(mix, speech, off, cfg, 16);
            ASSERT_EQ(f.input.size(), L);
            for (std::size_t i = 0; i < L; ++i) EXPECT_EQ(f.input[i], off + i < 500 ? mix[off + i] : 0.0);
            for (std::size_t i = 0; i < 16; ++i) {
                EXPECT_EQ(f.target_mixture[i], f.input[c + i]);
                EXPECT_EQ(f.target_speech[i], off + c + i < 500 ? speech[off + c + i] : 0.0);
            }
        }
    }
}

TEST(Cache, ReturnsSharedDecodedBuffer) {
    wdn::testing::ScratchDir dir("cache");
    wdn::testing::write_surrogate_corpus(dir.path(), 1, 1, 50, 1);
    AudioCache cache;
    const auto path = (dir / "noise" / "noise_000.wav").string();
    const auto a = cache.get(path), b = cache.get(path);
    EXPECT_EQ(a.get(), b.get());
    EXPECT_EQ(a->size(), 100u);
    EXPECT_THROW(cache.get((dir / "nope.wav").string()), dsp::WavError);
}
