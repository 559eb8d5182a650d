#include "sblstm/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sblstm {

namespace {
constexpr double kMeanFloor = 1e-12;
constexpr char kShardMagic[5] = {'S', 'B', 'D', 'S', '1'};

void put_i32(std::ofstream& f, std::int32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  f.write(reinterpret_cast<const char*>(b), 4);
}

std::int32_t get_i32(std::ifstream& f, const std::string& path) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  if (!f) throw std::runtime_error("truncated shard: " + path);
  return static_cast<std::int32_t>(static_cast<std::uint32_t>(b[0]) |
                                   (static_cast<std::uint32_t>(b[1]) << 8) |
                                   (static_cast<std::uint32_t>(b[2]) << 16) |
                                   (static_cast<std::uint32_t>(b[3]) << 24));
}

}  // namespace

void FeatureConfig::validate() const {
  if (neighbors < 0) throw std::invalid_argument("neighbors must be >= 0");
  if (bins < 1) throw std::invalid_argument("bins must be >= 1");
  if (neighbors >= bins)
    throw std::invalid_argument("neighbors must be smaller than the bin count");
  if (seq_len < 2 || seq_len % 2 != 0)
    throw std::invalid_argument("seq_len must be even and >= 2");
  if (tau < 0 || tau >= seq_len)
    throw std::invalid_argument("tau must be in [0, seq_len)");
}

int mirror_index(int idx, int bins) {
  if (bins == 1) return 0;
  const int period = 2 * (bins - 1);
  idx = ((idx % period) + period) % period;
  return idx < bins ? idx : period - idx;
}

std::vector<double> subband_vector(const std::vector<double>& frame_mags, int k,
                                   int neighbors) {
  const int bins = static_cast<int>(frame_mags.size());
  if (k < 0 || k >= bins) throw std::invalid_argument("frequency index out of range");
  std::vector<double> out(2 * neighbors + 1);
  out[0] = frame_mags[k];
  for (int j = 1; j <= neighbors; ++j) out[j] = frame_mags[mirror_index(k - j, bins)];
  for (int j = 1; j <= neighbors; ++j)
    out[neighbors + j] = frame_mags[mirror_index(k + j, bins)];
  return out;
}

void normalize_window(std::vector<double>& rows, int seq_len, int dim) {
  if (rows.size() != static_cast<std::size_t>(seq_len) * dim)
    throw std::invalid_argument("normalize_window: size mismatch");
  double mean = 0.0;
  for (int t = 0; t < seq_len; ++t) mean += rows[static_cast<std::size_t>(t) * dim];
  mean /= seq_len;
  const double g = 1.0 / std::max(mean, kMeanFloor);
  for (double& v : rows) v *= g;
}

double running_mean_alpha(int horizon_frames) {
  if (horizon_frames < 2) throw std::invalid_argument("horizon must be >= 2");
  return (horizon_frames - 1.0) / (horizon_frames + 1.0);
}

std::vector<TrainingSample> make_training_samples(const Spectrogram& noisy,
                                                  const Spectrogram& clean,
                                                  const FeatureConfig& fcfg,
                                                  const CompressionConfig& ccfg) {
  fcfg.validate();
  if (noisy.bins != clean.bins || noisy.frames != clean.frames)
    throw std::invalid_argument("noisy and clean spectrograms differ in shape");
  if (noisy.bins != fcfg.bins)
    throw std::invalid_argument("spectrogram bin count does not match feature config");
  const int T = fcfg.seq_len;
  if (noisy.frames < T)
    throw std::invalid_argument("clip too short: need at least seq_len frames");

  const int K = fcfg.bins;
  const int N = fcfg.neighbors;
  const int D = fcfg.input_dim();
  const int n_windows = 2 * (noisy.frames / T) - 1;
  const int half = fcfg.overlap();
  const double clip_bound = ccfg.k_max - 1e-4 * ccfg.k_max;

  // magnitudes once per clip, frame-major like the spectrogram
  std::vector<double> mags(noisy.data.size());
  for (std::size_t i = 0; i < mags.size(); ++i) mags[i] = std::abs(noisy.data[i]);

  std::vector<TrainingSample> out;
  out.reserve(static_cast<std::size_t>(n_windows) * K);
  std::vector<double> frame_mags(K);
  std::vector<double> rows(static_cast<std::size_t>(T) * D);

  for (int w = 0; w < n_windows; ++w) {
    const int t0 = w * half;
    for (int k = 0; k < K; ++k) {
      TrainingSample s;
      s.freq = k;
      for (int i = 0; i < T; ++i) {
        const double* mrow = &mags[static_cast<std::size_t>(t0 + i) * K];
        frame_mags.assign(mrow, mrow + K);
        const std::vector<double> sb = subband_vector(frame_mags, k, N);
        std::copy(sb.begin(), sb.end(), rows.begin() + static_cast<std::size_t>(i) * D);
      }
      normalize_window(rows, T, D);
      s.input.resize(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i)
        s.input[i] = static_cast<float>(rows[i]);

      s.target.assign(static_cast<std::size_t>(T) * 2, 0.0f);
      s.loss_mask.assign(T, 0);
      for (int i = fcfg.tau; i < T; ++i) {
        const int src = t0 + i - fcfg.tau;
        const MaskValue m = raw_cirm(noisy.at(k, src), clean.at(k, src));
        const double cr = std::clamp(compress(m.re, ccfg), -clip_bound, clip_bound);
        const double ci = std::clamp(compress(m.im, ccfg), -clip_bound, clip_bound);
        s.target[static_cast<std::size_t>(i) * 2] = static_cast<float>(cr);
        s.target[static_cast<std::size_t>(i) * 2 + 1] = static_cast<float>(ci);
        s.loss_mask[i] = 1;
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

void SampleSet::append(const TrainingSample& s) {
  const std::size_t td = static_cast<std::size_t>(seq_len) * input_dim();
  if (s.input.size() != td || s.target.size() != static_cast<std::size_t>(seq_len) * 2 ||
      s.loss_mask.size() != static_cast<std::size_t>(seq_len))
    throw std::invalid_argument("sample shape does not match the set header");
  freq.push_back(s.freq);
  inputs.insert(inputs.end(), s.input.begin(), s.input.end());
  targets.insert(targets.end(), s.target.begin(), s.target.end());
  loss_masks.insert(loss_masks.end(), s.loss_mask.begin(), s.loss_mask.end());
}

void write_shard(const std::string& path, const SampleSet& set) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open shard for writing: " + path);
  f.write(kShardMagic, 5);
  put_i32(f, set.bins);
  put_i32(f, set.neighbors);
  put_i32(f, set.seq_len);
  put_i32(f, set.tau);
  put_i32(f, static_cast<std::int32_t>(set.size()));
  const std::size_t T = set.seq_len;
  const std::size_t D = set.input_dim();
  for (std::size_t i = 0; i < set.size(); ++i) {
    put_i32(f, set.freq[i]);
    f.write(reinterpret_cast<const char*>(&set.inputs[i * T * D]),
            static_cast<std::streamsize>(T * D * sizeof(float)));
    f.write(reinterpret_cast<const char*>(&set.targets[i * T * 2]),
            static_cast<std::streamsize>(T * 2 * sizeof(float)));
    f.write(reinterpret_cast<const char*>(&set.loss_masks[i * T]),
            static_cast<std::streamsize>(T));
  }
  if (!f) throw std::runtime_error("short write: " + path);
}

SampleSet read_shard(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open shard: " + path);
  char magic[5];
  f.read(magic, 5);
  if (!f || std::memcmp(magic, kShardMagic, 5) != 0)
    throw std::runtime_error("bad shard magic: " + path);
  SampleSet set;
  set.bins = get_i32(f, path);
  set.neighbors = get_i32(f, path);
  set.seq_len = get_i32(f, path);
  set.tau = get_i32(f, path);
  const std::int32_t count = get_i32(f, path);
  if (set.bins < 1 || set.neighbors < 0 || set.seq_len < 1 || set.tau < 0 || count < 0)
    throw std::runtime_error("bad shard header: " + path);
  const std::size_t T = set.seq_len;
  const std::size_t D = set.input_dim();
  set.freq.resize(count);
  set.inputs.resize(count * T * D);
  set.targets.resize(count * T * 2);
  set.loss_masks.resize(count * T);
  for (std::int32_t i = 0; i < count; ++i) {
    set.freq[i] = get_i32(f, path);
    f.read(reinterpret_cast<char*>(&set.inputs[i * T * D]),
           static_cast<std::streamsize>(T * D * sizeof(float)));
    f.read(reinterpret_cast<char*>(&set.targets[i * T * 2]),
           static_cast<std::streamsize>(T * 2 * sizeof(float)));
    f.read(reinterpret_cast<char*>(&set.loss_masks[i * T]),
           static_cast<std::streamsize>(T));
    if (!f) throw std::runtime_error("truncated shard: " + path);
  }
  return set;
}

SampleSet read_shards(const std::vector<std::string>& paths) {
  if (paths.empty()) throw std::invalid_argument("no shard files given");
  SampleSet all = read_shard(paths[0]);
  for (std::size_t i = 1; i < paths.size(); ++i) {
    SampleSet s = read_shard(paths[i]);
    if (s.bins != all.bins || s.neighbors != all.neighbors ||
        s.seq_len != all.seq_len || s.tau != all.tau)
      throw std::runtime_error("shard header mismatch: " + paths[i]);
    all.freq.insert(all.freq.end(), s.freq.begin(), s.freq.end());
    all.inputs.insert(all.inputs.end(), s.inputs.begin(), s.inputs.end());
    all.targets.insert(all.targets.end(), s.targets.begin(), s.targets.end());
    all.loss_masks.insert(all.loss_masks.end(), s.loss_masks.begin(),
                          s.loss_masks.end());
  }
  return all;
}

}  // namespace sblstm
