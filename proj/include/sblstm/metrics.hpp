#pragma once

#include <optional>
#include <string>
#include <vector>

namespace sblstm {

// Objective quality measures. All take a reference and an estimate of equal
// length; silent references make a metric undefined rather than infinite.

// Scale-invariant SDR in dB, capped at +100 (perfect reconstruction).
std::optional<double> si_sdr(const std::vector<double>& reference,
                             const std::vector<double>& estimate);

// Plain SNR in dB, same conventions.
std::optional<double> snr(const std::vector<double>& reference,
                          const std::vector<double>& estimate);

// Mean of per-frame SNRs over non-overlapping frames, each clamped to
// [floor_db, ceil_db]; frames with silent reference are skipped. Undefined
// when every frame is skipped.
std::optional<double> seg_snr(const std::vector<double>& reference,
                              const std::vector<double>& estimate,
                              int frame_len = 256, double floor_db = -10.0,
                              double ceil_db = 35.0);

struct ClipMetrics {
  std::string id;
  std::optional<double> si_sdr_db;
  std::optional<double> snr_db;
  std::optional<double> seg_snr_db;
};

struct MetricReport {
  std::vector<ClipMetrics> clips;
  std::vector<std::string> missing;  // ids without an enhanced file
  double mean_si_sdr = 0.0;
  double mean_snr = 0.0;
  double mean_seg_snr = 0.0;
  int defined_clips = 0;
};

// Scores enhanced_dir/<id>.wav against mix_dir/<id>_target.wav for every
// manifest entry. The enhanced stream is shifted earlier by shift_samples
// (the engine's in-file delay) before comparison. Missing files are
// collected, not fatal.
MetricReport evaluate_corpus(const std::string& manifest_path,
                             const std::string& mix_dir,
                             const std::string& enhanced_dir, int shift_samples);

void write_report_csv(const std::string& path, const MetricReport& report);

}  // namespace sblstm
