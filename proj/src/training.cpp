#include "wavedenoise/training.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "wavedenoise/checkpoint.hpp"
#include "wavedenoise/parallel.hpp"

namespace wdn::train {

namespace {

void require_equal(std::size_t a, std::size_t b, const char* what) {
    if (a != b) throw std::invalid_argument(std::string(what) + ": length mismatch");
    if (a == 0) throw std::invalid_argument(std::string(what) + ": empty input");
}

}  // namespace

double l1_loss(std::span<const double> est, std::span<const double> target) {
    require_equal(est.size(), target.size(), "l1_loss");
    double acc = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i) acc += std::abs(target[i] - est[i]);
    return acc / static_cast<double>(est.size());
}

double energy_conserving_loss(std::span<const double> est_speech, std::span<const double> target_speech,
                              std::span<const double> mixture) {
    require_equal(est_speech.size(), target_speech.size(), "energy_conserving_loss");
    require_equal(est_speech.size(), mixture.size(), "energy_conserving_loss");
    double speech_term = 0.0, noise_term = 0.0;
    for (std::size_t i = 0; i < est_speech.size(); ++i) {
        speech_term += std::abs(target_speech[i] - est_speech[i]);
        const double b = mixture[i] - target_speech[i];
        const double b_hat = mixture[i] - est_speech[i];
        noise_term += std::abs(b - b_hat);
    }
    const double n = static_cast<double>(est_speech.size());
    return speech_term / n + noise_term / n;
}

ad::Tensor l1_loss(const ad::Tensor& est, std::span<const double> target) { return ad::mean_abs_error(est, target); }

ad::Tensor energy_conserving_loss(const ad::Tensor& est_speech, std::span<const double> target_speech,
                                  std::span<const double> mixture) {
    require_equal(est_speech.numel(), target_speech.size(), "energy_conserving_loss");
    require_equal(est_speech.numel(), mixture.size(), "energy_conserving_loss");
    std::vector<double> noise(mixture.size());
    for (std::size_t i = 0; i < noise.size(); ++i) noise[i] = mixture[i] - target_speech[i];
    const ad::Tensor noise_est = ad::const_minus(mixture, est_speech);
    return ad::add(ad::mean_abs_error(est_speech, target_speech), ad::mean_abs_error(noise_est, noise));
}

// ---- config -----------------------------------------------------------------------

void TrainConfig::validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("invalid train config: " + m); };
    if (!(noise_only_prob >= 0.0 && noise_only_prob <= 1.0)) fail("noise_only_prob must be in [0, 1]");
    if (!(condition_zero_prob >= 0.0 && condition_zero_prob <= 1.0)) fail("condition_zero_prob must be in [0, 1]");
    if (batch_size == 0) fail("batch_size must be positive");
    if (steps == 0) fail("steps must be at least 1");
    if (!(adam.lr >= 0.0)) fail("lr must be non-negative");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"loss", c.loss == LossKind::L1 ? "l1" : "energy_conserving"},
                       {"noise_only_prob", c.noise_only_prob},
                       {"condition_zero_prob", c.condition_zero_prob},
                       {"batch_size", c.batch_size},
                       {"steps", c.steps},
                       {"seed", c.seed},
                       {"lr", c.adam.lr},
                       {"beta1", c.adam.beta1},
                       {"beta2", c.adam.beta2},
                       {"eps", c.adam.eps},
                       {"checkpoint_every", c.checkpoint_every}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    if (!j.is_object()) throw std::invalid_argument("train config must be a JSON object");
    for (const auto& [key, v] : j.items()) {
        if (key == "loss") {
            const auto s = v.get<std::string>();
            if (s == "l1") c.loss = LossKind::L1;
            else if (s == "energy_conserving") c.loss = LossKind::EnergyConserving;
            else throw std::invalid_argument("loss must be \"energy_conserving\" or \"l1\"");
        } else if (key == "noise_only_prob") c.noise_only_prob = v.get<double>();
        else if (key == "condition_zero_prob") c.condition_zero_prob = v.get<double>();
        else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
        else if (key == "steps") c.steps = v.get<std::size_t>();
        else if (key == "seed") c.seed = v.get<std::uint64_t>();
        else if (key == "lr") c.adam.lr = v.get<double>();
        else if (key == "beta1") c.adam.beta1 = v.get<double>();
        else if (key == "beta2") c.adam.beta2 = v.get<double>();
        else if (key == "eps") c.adam.eps = v.get<double>();
        else if (key == "checkpoint_every") c.checkpoint_every = v.get<std::size_t>();
        else throw std::invalid_argument("unknown train config key \"" + key + "\"");
    }
}

// ---- sampling -------------------------------------------------------------------------

TrainingExample sample_training_example(const data::Manifest& manifest, data::AudioCache& cache,
                                        const TrainConfig& config, const model::ModelConfig& model_config, Rng& rng) {
    std::vector<const data::ManifestRow*> rows;
    for (const auto& r : manifest.rows)
        if (r.split == data::Split::Train) rows.push_back(&r);
    if (rows.empty()) throw std::invalid_argument("manifest has no training rows");

    const data::ManifestRow& row = *rows[rng.index(rows.size())];
    const bool noise_only = rng.bernoulli(config.noise_only_prob);
    const bool zero_condition = rng.bernoulli(config.condition_zero_prob);

    const std::size_t tf = model_config.target_field;
    const std::size_t L = model::input_length(model_config, tf);
    const auto noise = cache.get(row.noise_path);

    data::Fragment f;
    if (noise_only) {
        // A raw fragment of the row's noise file; no speech and no SNR scaling.
        const std::size_t n = noise->size();
        const std::size_t offset = n > L ? rng.index(n - L + 1) : 0;
        const std::vector<double> silence(n, 0.0);
        f = data::extract_fragment(noise->samples, silence, offset, model_config, tf);
    } else {
        const auto speech = cache.get(row.speech_path);
        const data::Mixture mix = data::mix_at_snr(*speech, *noise, row.snr_db, rng);
        const std::size_t n = speech->size();
        const std::size_t offset = n > L ? rng.index(n - L + 1) : 0;
        f = data::extract_fragment(mix.mixture.samples, speech->samples, offset, model_config, tf);
    }

    TrainingExample ex;
    ex.input = std::move(f.input);
    ex.target_speech = std::move(f.target_speech);
    ex.target_mixture = std::move(f.target_mixture);
    ex.condition = model::ConditionCode::encode(zero_condition ? 0 : row.speaker_id, model_config.condition_bits);
    return ex;
}

// ---- loop ----------------------------------------------------------------------------------

TrainResult train(model::WavenetModel& model, const data::Manifest& manifest, const TrainConfig& config,
                  const TrainPaths& paths) {
    config.validate();
    model.config.validate();

    std::ofstream trace;
    if (!paths.loss_trace.empty()) {
        trace.open(paths.loss_trace, std::ios::trunc);
        if (!trace) throw std::runtime_error("cannot write loss trace " + paths.loss_trace.string());
        trace << "step,loss\n";
        trace.precision(17);
    }

    data::AudioCache cache;
    std::vector<ad::Tensor> params = model.parameters();
    ad::AdamState adam = ad::AdamState::init(params, config.adam);
    TrainResult result;
    result.checkpoint = paths.checkpoint;

    const std::size_t B = config.batch_size;
    std::vector<TrainingExample> batch(B);
    for (std::size_t step = 0; step < config.steps; ++step) {
        parallel_for(B, 1, [&](std::size_t b0, std::size_t b1) {
            for (std::size_t b = b0; b < b1; ++b) {
                Rng rng = Rng::stream(config.seed, step * B + b);
                batch[b] = sample_training_example(manifest, cache, config, model.config, rng);
            }
        });

        model.zero_grad();
        ad::Tensor total;
        for (const auto& ex : batch) {
            const ad::Tensor input = ad::Tensor::from({1, ex.input.size()}, ex.input);
            const ad::Tensor est = model::forward(model, input, ex.condition);
            const ad::Tensor loss = config.loss == LossKind::L1
                                        ? l1_loss(est, ex.target_speech)
                                        : energy_conserving_loss(est, ex.target_speech, ex.target_mixture);
            total = total.defined() ? ad::add(total, loss) : loss;
        }
        total = ad::scale(total, 1.0 / static_cast<double>(B));
        ad::backward(total);
        ad::adam_step(params, adam);

        const double loss = total.item();
        result.losses.push_back(loss);
        if (trace) trace << step + 1 << ',' << loss << '\n';
        if (!paths.checkpoint.empty() && config.checkpoint_every > 0 && (step + 1) % config.checkpoint_every == 0 &&
            step + 1 < config.steps) {
            auto periodic = paths.checkpoint;
            periodic += ".step" + std::to_string(step + 1);
            model::save_checkpoint(model, periodic);
        }
    }
    if (!paths.checkpoint.empty()) model::save_checkpoint(model, paths.checkpoint);
    return result;
}

}  // namespace wdn::train
