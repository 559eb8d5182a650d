#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace sblstm {

struct StftConfig {
  int fft_size = 512;
  int hop = 256;
  int sample_rate = 16000;

  int bins() const { return fft_size / 2 + 1; }
  void validate() const;  // throws std::invalid_argument on bad geometry
};

// Periodic Hann: w[n] = 0.5 - 0.5 cos(2 pi n / fft_size).
std::vector<double> analysis_window(int fft_size);

// Frame-major complex spectrogram: data[t * bins + k].
struct Spectrogram {
  int bins = 0;
  int frames = 0;
  std::vector<std::complex<double>> data;

  Spectrogram() = default;
  Spectrogram(int bins_, int frames_)
      : bins(bins_), frames(frames_),
        data(static_cast<std::size_t>(bins_) * frames_) {}

  std::complex<double>& at(int k, int t) {
    return data[static_cast<std::size_t>(t) * bins + k];
  }
  const std::complex<double>& at(int k, int t) const {
    return data[static_cast<std::size_t>(t) * bins + k];
  }
};

// Frames the signal without padding: frame t (1-based) covers samples
// [(t-1)*hop, (t-1)*hop + fft_size). A trailing partial frame is dropped.
int stft_frame_count(std::size_t n_samples, const StftConfig& cfg);

// Window + transform one frame of cfg.fft_size samples. Shared by the batch
// transform and the streaming engine so both produce identical bins.
void stft_single_frame(const double* frame, const StftConfig& cfg,
                       const std::vector<double>& window,
                       std::complex<double>* bins);

Spectrogram stft(const std::vector<double>& samples, const StftConfig& cfg);

// Weighted overlap-add synthesis state. Frames go in in order; after each
// add_frame the oldest hop of fully-accumulated output can be emitted.
// Positions where the summed squared window falls below 1e-8 emit zero.
class OlaAccumulator {
 public:
  explicit OlaAccumulator(const StftConfig& cfg);

  void add_frame(const std::complex<double>* bins);

  // Normalized oldest hop; advances the accumulator.
  std::vector<double> emit_hop();

  // Remaining fft_size - hop samples after the last frame.
  std::vector<double> drain();

 private:
  StftConfig cfg_;
  std::vector<double> window_;
  std::vector<double> acc_;
  std::vector<double> wsq_;
  std::vector<double> frame_;
};

// Inverse transform. Output length is (frames - 1) * hop + fft_size.
std::vector<double> istft(const Spectrogram& spec, const StftConfig& cfg);

}  // namespace sblstm
