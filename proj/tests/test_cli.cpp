#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "support/cli.hpp"
#include "support/synth.hpp"
#include "wavedenoise/audio.hpp"

using namespace wdn;
using wdn::testing::run_cli;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

const char* kToyConfig = R"({
  "model": {"stacks": 1, "dilations_per_stack": [1, 2, 4], "residual_channels": 4, "skip_channels": 4,
            "final_channels": [8, 4], "target_field": 32},
  "train": {"batch_size": 2, "steps": 3, "noise_only_prob": 0.1}
})";

}  // namespace

TEST(Cli, InspectDefaults) {
    const auto r = run_cli("inspect --json");
    ASSERT_EQ(r.exit_code, 0) << r.out;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["receptive_field"], 6139);
    EXPECT_EQ(j["input_length"], 7739);
    EXPECT_EQ(j["param_count"], 6348289);
    EXPECT_EQ(j["residual_layers"], 30);
    const auto plain = run_cli("inspect --tf 1");
    EXPECT_NE(plain.out.find("input_length: 6139"), std::string::npos) << plain.out;
}

TEST(Cli, ParseErrorsExitWithOne) {
    EXPECT_EQ(run_cli("").exit_code, 1);
    EXPECT_EQ(run_cli("frobnicate").exit_code, 1);
    EXPECT_EQ(run_cli("denoise --in /nonexistent.wav --out x.wav --model y").exit_code, 1);
    EXPECT_EQ(run_cli("--help").exit_code, 0);
}

TEST(Cli, RuntimeErrorsExitWithTwo) {
    wdn::testing::ScratchDir dir("clierr");
    write_text(dir / "bad.json", R"({"model": {"filter_len": 2}})");
    const auto r = run_cli("inspect --config " + (dir / "bad.json").string());
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_NE(r.out.find("error:"), std::string::npos);
    write_text(dir / "stereo.wav", "RIFF");
    EXPECT_EQ(run_cli("wiener --in " + (dir / "stereo.wav").string() + " --out " + (dir / "o.wav").string()).exit_code, 2);
}

TEST(Cli, MixTrainDenoiseEvalPipeline) {
    wdn::testing::ScratchDir dir("cli");
    wdn::testing::write_surrogate_corpus(dir.path(), 4, 2, 6000, 3);
    write_text(dir / "cfg.json", kToyConfig);
    const auto speech = (dir / "speech").string(), noise = (dir / "noise").string();

    const auto mix = [&](const std::string& out) {
        return run_cli("mix --speech-dir " + speech + " --noise-dir " + noise + " --snrs 0,5,10,15 --seed 4 --out " + out);
    };
    ASSERT_EQ(mix((dir / "m1.jsonl").string()).exit_code, 0);
    ASSERT_EQ(mix((dir / "m2.jsonl").string()).exit_code, 0);
    EXPECT_EQ(slurp(dir / "m1.jsonl"), slurp(dir / "m2.jsonl"));

    const auto train = [&](const std::string& out) {
        return run_cli("train --manifest " + (dir / "m1.jsonl").string() + " --config " + (dir / "cfg.json").string() +
                       " --seed 9 --out " + out);
    };
    const auto t1 = train((dir / "a.wdnz").string());
    ASSERT_EQ(t1.exit_code, 0) << t1.out;
    ASSERT_EQ(train((dir / "b.wdnz").string()).exit_code, 0);
    EXPECT_EQ(slurp(dir / "a.wdnz"), slurp(dir / "b.wdnz"));
    EXPECT_TRUE(std::filesystem::exists(dir / "a.wdnz.loss.csv"));

    const auto noisy = (dir / "speech" / "spk1_0000.wav").string();
    for (const char* mode : {"batched", "one-shot"}) {
        const auto out = (dir / (std::string(mode) + ".wav")).string();
        const auto r = run_cli("denoise --model " + (dir / "a.wdnz").string() + " --in " + noisy + " --out " + out +
                               " --mode " + mode + " --speaker 1");
        ASSERT_EQ(r.exit_code, 0) << r.out;
        EXPECT_EQ(dsp::read_wav(out).size(), dsp::read_wav(noisy).size());
    }
    EXPECT_EQ(slurp(dir / "batched.wav"), slurp(dir / "one-shot.wav"));
    ASSERT_EQ(run_cli("denoise --model " + (dir / "a.wdnz").string() + " --in " + noisy + " --out " +
                      (dir / "f32.wav").string() + " --precision 32")
                  .exit_code,
              0);

    const auto w = run_cli("wiener --in " + noisy + " --out " + (dir / "w.wav").string() + " --alpha 0.95");
    ASSERT_EQ(w.exit_code, 0) << w.out;
    EXPECT_EQ(dsp::read_wav(dir / "w.wav").size(), dsp::read_wav(noisy).size());

    ASSERT_EQ(run_cli("mix --speech-dir " + speech + " --noise-dir " + noise + " --snrs 2.5,7.5 --split test --out " +
                      (dir / "test.jsonl").string())
                  .exit_code,
              0);
    const auto e = run_cli("eval --manifest " + (dir / "test.jsonl").string() + " --model " + (dir / "a.wdnz").string() +
                           " --out " + (dir / "report.csv").string());
    ASSERT_EQ(e.exit_code, 0) << e.out;
    const auto report = slurp(dir / "report.csv");
    EXPECT_EQ(report.rfind("clip_id,system,snr_db,", 0), 0u);
    for (const char* sys : {",noisy,", ",wiener,", ",wavenet,"}) EXPECT_NE(report.find(sys), std::string::npos) << sys;
}

TEST(Cli, MixExportWritesMixtures) {
    wdn::testing::ScratchDir dir("cliexp");
    wdn::testing::write_surrogate_corpus(dir.path(), 2, 1, 1000, 5);
    const auto r = run_cli("mix --speech-dir " + (dir / "speech").string() + " --noise-dir " + (dir / "noise").string() +
                           " --snrs 5 --out " + (dir / "m.jsonl").string() + " --export-dir " + (dir / "mixed").string());
    ASSERT_EQ(r.exit_code, 0) << r.out;
    EXPECT_TRUE(std::filesystem::exists(dir / "mixed" / "spk1_0000.wav"));
    EXPECT_TRUE(std::filesystem::exists(dir / "mixed" / "spk2_0001.wav"));
}
