#include "wavedenoise/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace wdn::metrics {

namespace {

double clamp_db(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

}  // namespace

double si_sdr(std::span<const double> est, std::span<const double> ref) {
    if (est.size() != ref.size()) throw std::invalid_argument("si_sdr: length mismatch");
    const double ref_energy = dot(ref, ref);
    if (ref_energy == 0.0) throw std::invalid_argument("si_sdr: zero reference");
    const double alpha = dot(est, ref) / ref_energy;
    double target = 0.0, err = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const double t = alpha * ref[i];
        const double e = est[i] - t;
        target += t * t;
        err += e * e;
    }
    if (target == 0.0) return -kSiSdrCap;
    if (err == 0.0) return kSiSdrCap;
    return clamp_db(10.0 * std::log10(target / err), -kSiSdrCap, kSiSdrCap);
}

double seg_snr(std::span<const double> est, std::span<const double> ref, const SegSnrOptions& opt) {
    if (est.size() != ref.size()) throw std::invalid_argument("seg_snr: length mismatch");
    if (opt.frame == 0 || ref.size() < opt.frame) throw std::invalid_argument("seg_snr: signal shorter than one frame");
    const std::size_t frames = ref.size() / opt.frame;
    double acc = 0.0;
    std::size_t used = 0;
    for (std::size_t f = 0; f < frames; ++f) {
        double sig = 0.0, noise = 0.0;
        for (std::size_t i = f * opt.frame; i < (f + 1) * opt.frame; ++i) {
            sig += ref[i] * ref[i];
            const double d = ref[i] - est[i];
            noise += d * d;
        }
        if (sig == 0.0) continue;
        const double db = noise == 0.0 ? opt.ceil_db : 10.0 * std::log10(sig / noise);
        acc += clamp_db(db, opt.floor_db, opt.ceil_db);
        ++used;
    }
    if (used == 0) throw std::invalid_argument("seg_snr: every reference frame is silent");
    return acc / static_cast<double>(used);
}

std::vector<EvalAggregate> aggregate(const std::vector<EvalRow>& rows) {
    std::map<std::pair<std::string, double>, EvalAggregate> groups;
    for (const auto& r : rows) {
        auto& g = groups[{r.system, r.snr_db}];
        g.system = r.system;
        g.snr_db = r.snr_db;
        g.clips += 1;
        g.si_sdr_db += r.si_sdr_db;
        g.seg_snr_db += r.seg_snr_db;
        g.si_sdr_improvement_db += r.si_sdr_improvement_db;
        g.seg_snr_improvement_db += r.seg_snr_improvement_db;
    }
    std::vector<EvalAggregate> out;
    for (auto& [key, g] : groups) {
        const double n = static_cast<double>(g.clips);
        g.si_sdr_db /= n;
        g.seg_snr_db /= n;
        g.si_sdr_improvement_db /= n;
        g.seg_snr_improvement_db /= n;
        out.push_back(g);
    }
    return out;
}

EvalReport evaluate(const std::vector<System>& systems, const data::Manifest& manifest) {
    data::AudioCache cache;
    EvalReport report;
    for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
        const auto& row = manifest.rows[i];
        if (row.split != data::Split::Test) continue;
        const auto speech = cache.get(row.speech_path);
        const auto noise = cache.get(row.noise_path);
        Rng rng = Rng::stream(manifest.seed, i);
        const auto mix = data::mix_at_snr(*speech, *noise, row.snr_db, rng);

        const double noisy_si = si_sdr(mix.mixture.samples, speech->samples);
        const double noisy_seg = seg_snr(mix.mixture.samples, speech->samples);
        const std::string clip = std::filesystem::path(row.speech_path).stem().string();
        for (const auto& sys : systems) {
            const dsp::AudioBuffer out = sys.run(mix.mixture);
            if (out.size() != speech->size())
                throw std::runtime_error("system " + sys.id + " changed the clip length of " + clip);
            EvalRow r;
            r.clip_id = clip;
            r.system = sys.id;
            r.snr_db = row.snr_db;
            r.si_sdr_db = si_sdr(out.samples, speech->samples);
            r.seg_snr_db = seg_snr(out.samples, speech->samples);
            r.si_sdr_improvement_db = r.si_sdr_db - noisy_si;
            r.seg_snr_improvement_db = r.seg_snr_db - noisy_seg;
            report.rows.push_back(std::move(r));
        }
    }
    report.aggregates = aggregate(report.rows);
    return report;
}

std::string format_report(const EvalReport& report) {
    std::ostringstream out;
    out.precision(17);
    out << "clip_id,system,snr_db,si_sdr_db,seg_snr_db,si_sdr_improvement_db,seg_snr_improvement_db\n";
    for (const auto& r : report.rows)
        out << r.clip_id << ',' << r.system << ',' << r.snr_db << ',' << r.si_sdr_db << ',' << r.seg_snr_db << ','
            << r.si_sdr_improvement_db << ',' << r.seg_snr_improvement_db << '\n';
    out << "# aggregate,system,snr_db,clips,si_sdr_db,seg_snr_db,si_sdr_improvement_db,seg_snr_improvement_db\n";
    for (const auto& g : report.aggregates)
        out << "# aggregate," << g.system << ',' << g.snr_db << ',' << g.clips << ',' << g.si_sdr_db << ','
            << g.seg_snr_db << ',' << g.si_sdr_improvement_db << ',' << g.seg_snr_improvement_db << '\n';
    return out.str();
}

void write_report(const EvalReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write report " + path.string());
    out << format_report(report);
}

}  // namespace wdn::metrics
