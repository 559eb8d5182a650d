#include "sblstm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "sblstm/datagen.hpp"
#include "sblstm/wav.hpp"

namespace sblstm {

namespace {

constexpr double kCapDb = 100.0;

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double ratio_db(double num, double den) {
  if (den <= 0.0) return kCapDb;
  return std::min(kCapDb, 10.0 * std::log10(num / den));
}

}  // namespace

std::optional<double> si_sdr(const std::vector<double>& reference,
                             const std::vector<double>& estimate) {
  if (reference.size() != estimate.size())
    throw std::invalid_argument("si_sdr: length mismatch");
  if (reference.empty()) throw std::invalid_argument("si_sdr: empty input");
  const double rr = dot(reference, reference);
  if (rr <= 0.0) return std::nullopt;
  const double a = dot(estimate, reference) / rr;
  double en = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double e = estimate[i] - a * reference[i];
    en += e * e;
  }
  return ratio_db(a * a * rr, en);
}

std::optional<double> snr(const std::vector<double>& reference,
                          const std::vector<double>& estimate) {
  if (reference.size() != estimate.size())
    throw std::invalid_argument("snr: length mismatch");
  if (reference.empty()) throw std::invalid_argument("snr: empty input");
  const double rr = dot(reference, reference);
  if (rr <= 0.0) return std::nullopt;
  double en = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double e = estimate[i] - reference[i];
    en += e * e;
  }
  return ratio_db(rr, en);
}

std::optional<double> seg_snr(const std::vector<double>& reference,
                              const std::vector<double>& estimate, int frame_len,
                              double floor_db, double ceil_db) {
  if (reference.size() != estimate.size())
    throw std::invalid_argument("seg_snr: length mismatch");
  if (frame_len < 1) throw std::invalid_argument("seg_snr: bad frame length");
  double acc = 0.0;
  int frames = 0;
  for (std::size_t start = 0; start + frame_len <= reference.size();
       start += frame_len) {
    double rr = 0.0, en = 0.0;
    for (int i = 0; i < frame_len; ++i) {
      const double r = reference[start + i];
      const double e = estimate[start + i] - r;
      rr += r * r;
      en += e * e;
    }
    if (rr <= 0.0) continue;
    acc += std::clamp(ratio_db(rr, en), floor_db, ceil_db);
    ++frames;
  }
  if (frames == 0) return std::nullopt;
  return acc / frames;
}

MetricReport evaluate_corpus(const std::string& manifest_path,
                             const std::string& mix_dir,
                             const std::string& enhanced_dir, int shift_samples) {
  if (shift_samples < 0) throw std::invalid_argument("shift must be >= 0");
  const std::vector<MixSpec> specs = read_manifest(manifest_path);
  MetricReport rep;
  double s1 = 0.0, s2 = 0.0, s3 = 0.0;
  for (const auto& spec : specs) {
    const std::string enh_path = enhanced_dir + "/" + spec.id + ".wav";
    if (!std::filesystem::exists(enh_path)) {
      rep.missing.push_back(spec.id);
      continue;
    }
    const WavData ref = read_wav(mix_dir + "/" + spec.id + "_target.wav");
    const WavData enh = read_wav(enh_path);
    if (enh.samples.size() <= static_cast<std::size_t>(shift_samples)) {
      rep.missing.push_back(spec.id);
      continue;
    }
    const std::size_t usable =
        std::min(ref.samples.size(), enh.samples.size() - shift_samples);
    std::vector<double> r(ref.samples.begin(), ref.samples.begin() + usable);
    std::vector<double> e(enh.samples.begin() + shift_samples,
                          enh.samples.begin() + shift_samples + usable);
    ClipMetrics cm;
    cm.id = spec.id;
    cm.si_sdr_db = si_sdr(r, e);
    cm.snr_db = snr(r, e);
    cm.seg_snr_db = seg_snr(r, e);
    if (cm.si_sdr_db && cm.snr_db) {
      s1 += *cm.si_sdr_db;
      s2 += *cm.snr_db;
      s3 += cm.seg_snr_db.value_or(0.0);
      ++rep.defined_clips;
    }
    rep.clips.push_back(std::move(cm));
  }
  if (rep.defined_clips > 0) {
    rep.mean_si_sdr = s1 / rep.defined_clips;
    rep.mean_snr = s2 / rep.defined_clips;
    rep.mean_seg_snr = s3 / rep.defined_clips;
  }
  return rep;
}

void write_report_csv(const std::string& path, const MetricReport& report) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open report for writing: " + path);
  f << "clip,si_sdr_db,snr_db,seg_snr_db\n";
  auto cell = [](const std::optional<double>& v) {
    if (!v) return std::string("nan");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", *v);
    return std::string(buf);
  };
  for (const auto& c : report.clips)
    f << c.id << ',' << cell(c.si_sdr_db) << ',' << cell(c.snr_db) << ','
      << cell(c.seg_snr_db) << '\n';
  if (!f) throw std::runtime_error("short write: " + path);
}

}  // namespace sblstm
