// wavedenoise: dataset mixing, training, denoising, Wiener baseline,
// evaluation and architecture inspection.

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "wavedenoise/audio.hpp"
#include "wavedenoise/checkpoint.hpp"
#include "wavedenoise/dataset.hpp"
#include "wavedenoise/metrics.hpp"
#include "wavedenoise/parallel.hpp"
#include "wavedenoise/training.hpp"
#include "wavedenoise/wavenet.hpp"
#include "wavedenoise/wiener.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return json::parse(in);
}

/// A config file either holds {"model": {...}, "train": {...}} or a bare
/// model config object.
void load_config(const std::string& path, wdn::model::ModelConfig& model, wdn::train::TrainConfig* train) {
    if (path.empty()) return;
    const json j = read_json(path);
    if (j.contains("model") || j.contains("train")) {
        for (const auto& [key, value] : j.items())
            if (key != "model" && key != "train") throw std::invalid_argument("unknown config section \"" + key + "\"");
        if (j.contains("model")) model = j.at("model").get<wdn::model::ModelConfig>();
        if (train && j.contains("train")) *train = j.at("train").get<wdn::train::TrainConfig>();
    } else {
        model = j.get<wdn::model::ModelConfig>();
    }
    model.validate();
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        std::size_t used = 0;
        out.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument("bad number \"" + item + "\"");
    }
    if (out.empty()) throw std::invalid_argument("empty list");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Raw-waveform speech denoising toolkit"};
    app.require_subcommand(1);
    std::size_t threads = 0;
    app.add_option("--threads", threads, "Worker thread cap (falls back to WAVEDENOISE_THREADS)");

    // inspect
    auto* inspect = app.add_subcommand("inspect", "Print receptive field, input length and parameter count");
    std::string inspect_config;
    std::size_t inspect_tf = 0;
    inspect->add_option("--config", inspect_config, "Model config JSON (defaults otherwise)")->check(CLI::ExistingFile);
    inspect->add_option("--tf", inspect_tf, "Target field (defaults to the config's)");
    bool inspect_json = false;
    inspect->add_flag("--json", inspect_json, "Emit JSON");

    // mix
    auto* mix = app.add_subcommand("mix", "Build a mixing manifest from speech and noise directories");
    std::string speech_dir, noise_dir, snrs, split = "train", mix_out, speaker_map_path, export_dir;
    std::uint64_t mix_seed = 0;
    mix->add_option("--speech-dir", speech_dir, "Directory of clean 16 kHz mono speech WAVs")->required()->check(CLI::ExistingDirectory);
    mix->add_option("--noise-dir", noise_dir, "Directory of 16 kHz mono noise WAVs")->required()->check(CLI::ExistingDirectory);
    mix->add_option("--snrs", snrs, "Comma-separated SNRs in dB")->required();
    mix->add_option("--split", split, "train or test")->check(CLI::IsMember({"train", "test"}));
    mix->add_option("--seed", mix_seed, "Seed");
    mix->add_option("--out", mix_out, "Manifest output (.jsonl)")->required();
    mix->add_option("--speaker-map", speaker_map_path, "JSON object mapping speaker key to id")->check(CLI::ExistingFile);
    mix->add_option("--export-dir", export_dir, "Also write mixtures as WAV files here");

    // train
    auto* train = app.add_subcommand("train", "Train a model on a manifest");
    std::string manifest_path, train_config, train_out = "model.wdnz", loss_trace, init_ckpt;
    std::size_t steps = 0;
    std::uint64_t train_seed = 0;
    train->add_option("--manifest", manifest_path, "Manifest (.jsonl)")->required()->check(CLI::ExistingFile);
    train->add_option("--config", train_config, "Config JSON with \"model\" and \"train\" sections")->check(CLI::ExistingFile);
    auto* steps_opt = train->add_option("--steps", steps, "Optimizer steps")->check(CLI::PositiveNumber);
    auto* seed_opt = train->add_option("--seed", train_seed, "Seed for initialization and sampling");
    train->add_option("--out", train_out, "Checkpoint path");
    train->add_option("--loss-trace", loss_trace, "CSV loss trace path (default: <out>.loss.csv)");
    train->add_option("--init", init_ckpt, "Resume from this checkpoint instead of a fresh model")->check(CLI::ExistingFile);

    // denoise
    auto* den = app.add_subcommand("denoise", "Denoise a WAV file with a trained model");
    std::string model_path, in_path, out_path, mode = "batched";
    std::uint32_t speaker = 0;
    int precision = 64;
    den->add_option("--model", model_path, "Checkpoint")->required()->check(CLI::ExistingFile);
    den->add_option("--in", in_path, "Noisy input WAV")->required()->check(CLI::ExistingFile);
    den->add_option("--out", out_path, "Output WAV")->required();
    den->add_option("--mode", mode, "batched or one-shot")->check(CLI::IsMember({"batched", "one-shot"}));
    den->add_option("--speaker", speaker, "Speaker condition id (0 = any speaker)");
    den->add_option("--precision", precision, "Inference precision in bits")->check(CLI::IsMember({32, 64}));

    // wiener
    auto* wie = app.add_subcommand("wiener", "Denoise a WAV file with the Wiener baseline");
    std::string w_in, w_out;
    wdn::wiener::WienerConfig wcfg;
    double floor_db = -25.0;
    wie->add_option("--in", w_in, "Noisy input WAV")->required()->check(CLI::ExistingFile);
    wie->add_option("--out", w_out, "Output WAV")->required();
    wie->add_option("--alpha", wcfg.alpha, "Decision-directed smoothing")->check(CLI::Range(0.0, 1.0));
    wie->add_option("--floor-db", floor_db, "Gain floor in dB")->check(CLI::Range(-200.0, 0.0));
    wie->add_option("--init-frames", wcfg.n_init_frames, "Leading frames used for the noise estimate")->check(CLI::PositiveNumber);

    // eval
    auto* ev = app.add_subcommand("eval", "Score systems on the test rows of a manifest");
    std::string eval_manifest, eval_model, eval_out;
    bool no_wiener = false;
    ev->add_option("--manifest", eval_manifest, "Manifest (.jsonl)")->required()->check(CLI::ExistingFile);
    ev->add_option("--model", eval_model, "Checkpoint to evaluate")->check(CLI::ExistingFile);
    ev->add_option("--out", eval_out, "Report CSV")->required();
    ev->add_flag("--no-wiener", no_wiener, "Skip the Wiener baseline");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (threads > 0) wdn::set_thread_count(threads);

        if (*inspect) {
            wdn::model::ModelConfig cfg;
            load_config(inspect_config, cfg, nullptr);
            const std::size_t tf = inspect_tf ? inspect_tf : cfg.target_field;
            const json j{{"receptive_field", wdn::model::receptive_field(cfg)},
                         {"target_field", tf},
                         {"input_length", wdn::model::input_length(cfg, tf)},
                         {"residual_layers", cfg.num_layers()},
                         {"param_count", wdn::model::param_count(cfg)}};
            if (inspect_json) {
                std::cout << j.dump(2) << '\n';
            } else {
                for (const auto& [k, v] : j.items()) std::cout << k << ": " << v << '\n';
            }
        } else if (*mix) {
            std::map<std::string, std::uint32_t> speaker_map;
            if (!speaker_map_path.empty()) speaker_map = read_json(speaker_map_path).get<std::map<std::string, std::uint32_t>>();
            const auto m = wdn::data::build_manifest(speech_dir, noise_dir, parse_list(snrs), wdn::data::parse_split(split),
                                                     speaker_map, mix_seed);
            wdn::data::write_manifest(m, mix_out);
            std::cerr << "wrote " << m.rows.size() << " rows to " << mix_out << '\n';
            if (!export_dir.empty()) {
                fs::create_directories(export_dir);
                std::size_t clipped = 0;
                for (std::size_t i = 0; i < m.rows.size(); ++i) {
                    const auto& r = m.rows[i];
                    wdn::Rng rng = wdn::Rng::stream(m.seed, i);
                    const auto mixed = wdn::data::mix_at_snr(wdn::dsp::read_wav(r.speech_path),
                                                             wdn::dsp::read_wav(r.noise_path), r.snr_db, rng);
                    clipped += wdn::dsp::write_wav(mixed.mixture, fs::path(export_dir) / fs::path(r.speech_path).filename());
                }
                std::cerr << "exported mixtures; " << clipped << " samples clipped\n";
            }
        } else if (*train) {
            wdn::model::ModelConfig mcfg;
            wdn::train::TrainConfig tcfg;
            load_config(train_config, mcfg, &tcfg);
            if (*steps_opt) tcfg.steps = steps;
            if (*seed_opt) tcfg.seed = train_seed;
            tcfg.validate();
            const auto manifest = wdn::data::read_manifest(manifest_path);
            wdn::model::WavenetModel model =
                init_ckpt.empty() ? wdn::model::build_model(mcfg, tcfg.seed) : wdn::model::load_checkpoint(init_ckpt);
            wdn::train::TrainPaths paths{train_out, loss_trace.empty() ? train_out + ".loss.csv" : loss_trace};
            const auto result = wdn::train::train(model, manifest, tcfg, paths);
            std::cerr << "trained " << result.losses.size() << " steps, final loss " << result.losses.back()
                      << "; checkpoint " << result.checkpoint.string() << '\n';
        } else if (*den) {
            const auto model = wdn::model::load_checkpoint(model_path);
            const auto noisy = wdn::dsp::read_wav(in_path);
            const auto code = wdn::model::ConditionCode::encode(speaker, model.config.condition_bits);
            const auto out = wdn::model::denoise(
                model, noisy, code, mode == "one-shot" ? wdn::model::DenoiseMode::OneShot : wdn::model::DenoiseMode::Batched,
                precision == 32 ? wdn::model::Precision::Float32 : wdn::model::Precision::Float64);
            const auto clipped = wdn::dsp::write_wav(out, out_path);
            if (clipped) std::cerr << "warning: " << clipped << " samples clipped\n";
        } else if (*wie) {
            wcfg.gain_floor = std::pow(10.0, floor_db / 20.0);
            const auto out = wdn::wiener::wiener_denoise(wdn::dsp::read_wav(w_in), wcfg);
            const auto clipped = wdn::dsp::write_wav(out, w_out);
            if (clipped) std::cerr << "warning: " << clipped << " samples clipped\n";
        } else if (*ev) {
            const auto manifest = wdn::data::read_manifest(eval_manifest);
            std::vector<wdn::metrics::System> systems;
            systems.push_back({"noisy", [](const wdn::dsp::AudioBuffer& x) { return x; }});
            if (!no_wiener)
                systems.push_back({"wiener", [](const wdn::dsp::AudioBuffer& x) { return wdn::wiener::wiener_denoise(x); }});
            if (!eval_model.empty()) {
                auto model = std::make_shared<wdn::model::WavenetModel>(wdn::model::load_checkpoint(eval_model));
                const auto code = wdn::model::ConditionCode::encode(0, model->config.condition_bits);
                systems.push_back({"wavenet", [model, code](const wdn::dsp::AudioBuffer& x) {
                                       return wdn::model::denoise(*model, x, code);
                                   }});
            }
            const auto report = wdn::metrics::evaluate(systems, manifest);
            wdn::metrics::write_report(report, eval_out);
            for (const auto& g : report.aggregates)
                std::cout << g.system << " @ " << g.snr_db << " dB: si_sdr " << g.si_sdr_db << " (" << std::showpos
                          << g.si_sdr_improvement_db << std::noshowpos << "), seg_snr " << g.seg_snr_db << " ("
                          << std::showpos << g.seg_snr_improvement_db << std::noshowpos << ")\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
