#include "wavedenoise/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace wdn::data {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Split s) { return s == Split::Train ? "train" : "test"; }

Split parse_split(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "test") return Split::Test;
    throw std::invalid_argument("split must be \"train\" or \"test\", got \"" + s + "\"");
}

// ---- manifest file -------------------------------------------------------------

std::string format_manifest(const Manifest& m) {
    std::ostringstream out;
    out << json{{"type", "header"}, {"sample_rate", m.sample_rate}, {"seed", m.seed}, {"snr_list", m.snr_list}}.dump()
        << '\n';
    for (const auto& r : m.rows)
        out << json{{"speech", r.speech_path},
                    {"noise", r.noise_path},
                    {"snr_db", r.snr_db},
                    {"speaker_id", r.speaker_id},
                    {"split", to_string(r.split)}}
                   .dump()
            << '\n';
    return out.str();
}

void write_manifest(const Manifest& manifest, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write manifest " + path.string());
    out << format_manifest(manifest);
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

Manifest parse_manifest(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    Manifest m;
    bool have_header = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json j = json::parse(line);
            if (!have_header) {
                if (j.value("type", "") != "header") throw std::invalid_argument("first line must be the header");
                m.sample_rate = j.at("sample_rate").get<int>();
                m.seed = j.at("seed").get<std::uint64_t>();
                m.snr_list = j.value("snr_list", std::vector<double>{});
                have_header = true;
                continue;
            }
            ManifestRow r;
            r.speech_path = j.at("speech").get<std::string>();
            r.noise_path = j.at("noise").get<std::string>();
            r.snr_db = j.at("snr_db").get<double>();
            r.speaker_id = j.at("speaker_id").get<std::uint32_t>();
            r.split = parse_split(j.at("split").get<std::string>());
            m.rows.push_back(std::move(r));
        } catch (const std::exception& e) {
            throw std::runtime_error("manifest line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!have_header) throw std::runtime_error("manifest has no header line");
    if (m.sample_rate != dsp::kSampleRate) throw std::runtime_error("manifest sample_rate must be 16000");
    if (!m.snr_list.empty())
        for (const auto& r : m.rows)
            if (std::find(m.snr_list.begin(), m.snr_list.end(), r.snr_db) == m.snr_list.end())
                throw std::runtime_error("manifest row snr " + std::to_string(r.snr_db) + " is not in the declared list");
    return m;
}

Manifest read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_manifest(buf.str());
}

// ---- mixing ------------------------------------------------------------------------

double compute_rms(std::span<const double> x) {
    if (x.empty()) throw std::invalid_argument("compute_rms: empty input");
    double acc = 0.0;
    for (double v : x) acc += v * v;
    return std::sqrt(acc / static_cast<double>(x.size()));
}

Mixture mix_at_snr(const dsp::AudioBuffer& speech, const dsp::AudioBuffer& noise, double snr_db,
                   std::size_t noise_offset) {
    if (speech.sample_rate != noise.sample_rate) throw std::invalid_argument("mix_at_snr: sample rates differ");
    if (speech.size() == 0) throw std::invalid_argument("mix_at_snr: empty speech");
    if (noise_offset + speech.size() > noise.size())
        throw std::invalid_argument("mix_at_snr: noise shorter than speech at offset " + std::to_string(noise_offset));
    std::span<const double> crop(noise.samples.data() + noise_offset, speech.size());
    const double rs = compute_rms(speech.samples);
    const double rn = compute_rms(crop);
    if (rs == 0.0) throw std::invalid_argument("mix_at_snr: silent speech, SNR undefined");
    if (rn == 0.0) throw std::invalid_argument("mix_at_snr: silent noise, SNR undefined");

    Mixture out;
    out.gain = rs / (rn * std::pow(10.0, snr_db / 20.0));
    out.mixture.sample_rate = out.scaled_noise.sample_rate = speech.sample_rate;
    out.scaled_noise.samples.resize(speech.size());
    out.mixture.samples.resize(speech.size());
    for (std::size_t i = 0; i < speech.size(); ++i) {
        out.scaled_noise.samples[i] = out.gain * crop[i];
        out.mixture.samples[i] = speech.samples[i] + out.scaled_noise.samples[i];
    }
    return out;
}

Mixture mix_at_snr(const dsp::AudioBuffer& speech, const dsp::AudioBuffer& noise, double snr_db, Rng& rng) {
    if (noise.size() < speech.size()) throw std::invalid_argument("mix_at_snr: noise shorter than speech");
    const std::size_t offset = rng.index(noise.size() - speech.size() + 1);
    return mix_at_snr(speech, noise, snr_db, offset);
}

// ---- manifest construction --------------------------------------------------------------

std::string speaker_key(const fs::path& file) {
    const std::string stem = file.stem().string();
    return stem.substr(0, stem.find('_'));
}

namespace {

std::vector<fs::path> list_wavs(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw std::invalid_argument("not a directory: " + dir.string());
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        auto ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".wav") out.push_back(e.path());
    }
    if (out.empty()) throw std::invalid_argument("no .wav files in " + dir.string());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

Manifest build_manifest(const fs::path& speech_dir, const fs::path& noise_dir, const std::vector<double>& snr_list,
                        Split split, const std::map<std::string, std::uint32_t>& speaker_map, std::uint64_t seed) {
    if (snr_list.empty()) throw std::invalid_argument("build_manifest: empty SNR list");
    const auto speech_files = list_wavs(speech_dir);
    const auto noise_files = list_wavs(noise_dir);

    std::vector<std::size_t> noise_len;
    for (const auto& p : noise_files) noise_len.push_back(dsp::read_wav(p).size());

    std::map<std::string, std::uint32_t> ids = speaker_map;
    if (ids.empty()) {
        std::set<std::string> keys;
        for (const auto& p : speech_files) keys.insert(speaker_key(p));
        std::uint32_t next = 1;
        for (const auto& k : keys) ids[k] = next++;
    }

    Manifest m;
    m.seed = seed;
    m.snr_list = snr_list;
    Rng rng(seed);
    for (const auto& sp : speech_files) {
        const std::size_t len = dsp::read_wav(sp).size();
        std::vector<std::size_t> eligible;
        for (std::size_t i = 0; i < noise_files.size(); ++i)
            if (noise_len[i] >= len) eligible.push_back(i);
        if (eligible.empty()) throw std::invalid_argument("no noise file is as long as " + sp.string());

        ManifestRow row;
        row.speech_path = sp.string();
        row.noise_path = noise_files[eligible[rng.index(eligible.size())]].string();
        row.snr_db = snr_list[rng.index(snr_list.size())];
        const auto it = ids.find(speaker_key(sp));
        row.speaker_id = it == ids.end() ? 0 : it->second;
        row.split = split;
        m.rows.push_back(std::move(row));
    }
    return m;
}

// ---- fragments ----------------------------------------------------------------------------

Fragment extract_fragment(std::span<const double> mixture, std::span<const double> speech, std::size_t offset,
                          const model::ModelConfig& config, std::size_t target_field) {
    if (mixture.size() != speech.size()) throw std::invalid_argument("extract_fragment: clips are not aligned");
    const std::size_t L = model::input_length(config, target_field);
    const std::size_t n = mixture.size();

    // Window position p reads clip sample p + shift.
    std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(offset);
    if (n < L) shift = -static_cast<std::ptrdiff_t>((L - n) / 2);
    auto at = [&](std::span<const double> clip, std::size_t p) {
        const std::ptrdiff_t i = static_cast<std::ptrdiff_t>(p) + shift;
        return i >= 0 && i < static_cast<std::ptrdiff_t>(n) ? clip[static_cast<std::size_t>(i)] : 0.0;
    };

    Fragment f;
    f.input.resize(L);
    for (std::size_t p = 0; p < L; ++p) f.input[p] = at(mixture, p);
    const std::size_t t0 = model::target_offset(config);
    f.target_speech.resize(target_field);
    f.target_mixture.resize(target_field);
    for (std::size_t j = 0; j < target_field; ++j) {
        f.target_speech[j] = at(speech, t0 + j);
        f.target_mixture[j] = f.input[t0 + j];
    }
    return f;
}

std::shared_ptr<const dsp::AudioBuffer> AudioCache::get(const std::string& path) {
    {
        std::lock_guard lock(mutex_);
        if (auto it = files_.find(path); it != files_.end()) return it->second;
    }
    auto buf = std::make_shared<const dsp::AudioBuffer>(dsp::read_wav(path));
    std::lock_guard lock(mutex_);
    return files_.emplace(path, std::move(buf)).first->second;
}

}  // namespace wdn::data
