#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "wavedenoise/audio.hpp"
#include "wavedenoise/dataset.hpp"

namespace wdn::metrics {

inline constexpr double kSiSdrCap = 100.0;

/// Scale-invariant SDR in dB, clamped to +-100.
double si_sdr(std::span<const double> est, std::span<const double> ref);

struct SegSnrOptions {
    std::size_t frame = 256;
    double floor_db = -10.0;
    double ceil_db = 35.0;
};

/// Mean over non-overlapping frames of the clamped per-frame SNR; frames
/// whose reference is silent are skipped.
double seg_snr(std::span<const double> est, std::span<const double> ref, const SegSnrOptions& opt = {});

struct EvalRow {
    std::string clip_id;
    std::string system;
    double snr_db = 0.0;
    double si_sdr_db = 0.0;
    double seg_snr_db = 0.0;
    double si_sdr_improvement_db = 0.0;
    double seg_snr_improvement_db = 0.0;
};

struct EvalAggregate {
    std::string system;
    double snr_db = 0.0;
    std::size_t clips = 0;
    double si_sdr_db = 0.0;
    double seg_snr_db = 0.0;
    double si_sdr_improvement_db = 0.0;
    double seg_snr_improvement_db = 0.0;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    std::vector<EvalAggregate> aggregates;  // ordered by (system, snr)
};

using DenoiseFn = std::function<dsp::AudioBuffer(const dsp::AudioBuffer&)>;

struct System {
    std::string id;
    DenoiseFn run;
};

/// Mixes every test row of the manifest (noise crop drawn from stream
/// (manifest.seed, row index)), runs each system on the mixture and scores it
/// against the clean speech. Rows are labelled by the speech file stem.
EvalReport evaluate(const std::vector<System>& systems, const data::Manifest& manifest);

/// Means of the rows grouped by (system, snr).
std::vector<EvalAggregate> aggregate(const std::vector<EvalRow>& rows);

/// CSV with header
///   clip_id,system,snr_db,si_sdr_db,seg_snr_db,si_sdr_improvement_db,seg_snr_improvement_db
/// followed by one "# aggregate,<system>,<snr>,<clips>,<means...>" line per group.
std::string format_report(const EvalReport& report);
void write_report(const EvalReport& report, const std::filesystem::path& path);

}  // namespace wdn::metrics
