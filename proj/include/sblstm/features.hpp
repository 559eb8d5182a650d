#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sblstm/cirm.hpp"
#include "sblstm/stft.hpp"

namespace sblstm {

// Per-frequency subband features. Each frequency k is modelled on its own
// from the magnitudes of the 2N+1 bins centred on k, so one network serves
// every band and the training set grows by a factor of K.

struct FeatureConfig {
  int neighbors = 15;  // N bins to each side
  int bins = 257;      // K, must match the STFT
  int seq_len = 192;   // T frames per training sample
  int tau = 2;         // output delay in frames

  int input_dim() const { return 2 * neighbors + 1; }
  int overlap() const { return seq_len / 2; }
  void validate() const;
};

// Mirror out-of-range bin indices back into [0, K-1]: -j maps to j,
// K-1+j maps to K-1-j.
int mirror_index(int idx, int bins);

// [m(k), m(k-1)..m(k-N), m(k+1)..m(k+N)] from one frame of K magnitudes.
std::vector<double> subband_vector(const std::vector<double>& frame_mags, int k,
                                   int neighbors);

// Offline normalization: divide every entry of a T x D window by the mean
// of the centre-bin magnitudes over the window (floored at 1e-12).
// `rows` is row-major T x D with the centre magnitude in column 0.
void normalize_window(std::vector<double>& rows, int seq_len, int dim);

// Streaming substitute for the offline mean: exponential running mean with
// alpha = (L-1)/(L+1). The first update seeds the state with the magnitude.
struct NormState {
  double mu = 0.0;
  bool seeded = false;

  void update(double mag, double alpha) {
    if (!seeded) {
      mu = mag;
      seeded = true;
    } else {
      mu = alpha * mu + (1.0 - alpha) * mag;
    }
  }
};

double running_mean_alpha(int horizon_frames);

// One training sample: a T-frame window at one frequency.
struct TrainingSample {
  std::int32_t freq = 0;
  std::vector<float> input;    // T x D row-major, normalized magnitudes
  std::vector<float> target;   // T x 2, compressed mask, delayed by tau
  std::vector<std::uint8_t> loss_mask;  // T; 0 for the first tau steps
};

// Cuts half-overlapped T-frame windows out of a clip and emits one sample
// per (window, frequency) pair. Windows start at multiples of T/2; a
// trailing stretch shorter than T/2 past the last full window is dropped,
// giving 2*floor(frames/T) - 1 windows. Requires frames >= seq_len.
std::vector<TrainingSample> make_training_samples(const Spectrogram& noisy,
                                                  const Spectrogram& clean,
                                                  const FeatureConfig& fcfg,
                                                  const CompressionConfig& ccfg);

// Flat binary shard of training samples. All integers little-endian.
struct SampleSet {
  std::int32_t bins = 0;
  std::int32_t neighbors = 0;
  std::int32_t seq_len = 0;
  std::int32_t tau = 0;

  std::vector<std::int32_t> freq;        // one per sample
  std::vector<float> inputs;             // size * T * D
  std::vector<float> targets;            // size * T * 2
  std::vector<std::uint8_t> loss_masks;  // size * T

  int input_dim() const { return 2 * neighbors + 1; }
  std::size_t size() const { return freq.size(); }
  void append(const TrainingSample& s);
};

void write_shard(const std::string& path, const SampleSet& set);
SampleSet read_shard(const std::string& path);
// Concatenates several shards; headers must agree.
SampleSet read_shards(const std::vector<std::string>& paths);

}  // namespace sblstm
