#pragma once

#include <complex>
#include <deque>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sblstm/features.hpp"
#include "sblstm/model_store.hpp"
#include "sblstm/net.hpp"
#include "sblstm/stft.hpp"
#include "sblstm/wav.hpp"

namespace sblstm {

// Real-time enhancement. Audio is fed one hop at a time; every frequency
// band advances through the shared network as one column of a batch, the
// predicted masks are applied to spectra held back by tau frames, and
// overlap-add synthesis emits one enhanced hop per call once the pipeline
// is primed. State is strictly bounded: no buffer grows with stream length.

class StreamSession {
 public:
  // tau_override >= 0 replaces the delay the model was trained with.
  explicit StreamSession(const ModelBundle& model, int tau_override = -1);

  // Feed exactly hop samples. Returns the next enhanced hop, or nullopt
  // during the first fill_calls() calls while the pipeline fills.
  std::optional<std::vector<double>> process_frame(std::span<const double> chunk);

  int fill_calls() const { return tau_ + fft_size_ / hop_ - 1; }
  int tau() const { return tau_; }
  const StftConfig& stft_config() const { return cfg_; }
  // Frames currently held back for delayed masking (at most tau + 1).
  int delayed_frames() const { return static_cast<int>(delay_.size()); }

 private:
  StftConfig cfg_;
  CompressionConfig cirm_;
  int tau_ = 0;
  int fft_size_ = 0, hop_ = 0, bins_ = 0, neighbors_ = 0;
  double alpha_ = 0.0;

  std::vector<double> window_;
  std::vector<double> input_;  // last fft_size samples
  std::vector<std::complex<double>> bins_scratch_;
  std::vector<double> mags_;
  std::vector<NormState> norm_;
  std::deque<std::vector<std::complex<double>>> delay_;
  std::vector<std::complex<double>> masked_;
  OlaAccumulator ola_;

  NetParams<float> net_;
  BatchState<float> state_;
  StepWorkspace<float> ws_;
  Mat<float> x_, pred_;

  std::int64_t calls_ = 0;
  std::int64_t frame_index_ = 0;  // 1-based stft frame counter
};

struct EnhanceResult {
  std::size_t samples = 0;
  std::int64_t frames = 0;          // stft frames processed
  double mean_frame_ms = 0.0;
  double max_frame_ms = 0.0;
  int in_file_delay = 0;            // leading zeros kept in the output file
  int algorithmic_latency = 0;      // tau * hop + fft_size samples
};

// Enhances a whole file through the streaming path. The output keeps the
// tau * hop sample delay and matches the input length exactly; the fixed
// analysis latency (fft_size - hop samples) is trimmed.
EnhanceResult enhance_file(const ModelBundle& model, const std::string& in_path,
                           const std::string& out_path, int tau_override = -1,
                           WavFormat format = WavFormat::Float32);

// Batch replay of the same model: whole-signal transform, per-frequency
// sequence inference, delayed masking, inverse transform. Used to pin the
// streaming path; output is aligned like enhance_file output.
std::vector<double> offline_reference_enhance(const ModelBundle& model,
                                              const std::vector<double>& samples,
                                              int tau_override = -1);

// Raw 16-bit little-endian mono in, same format out. Emits silence while
// the pipeline fills, then one enhanced hop per input hop; the held-back
// tail is flushed after end of input. Returns samples written.
std::size_t enhance_stream(const ModelBundle& model, std::istream& in,
                           std::ostream& out, int tau_override = -1,
                           std::ostream* log = nullptr);

}  // namespace sblstm
