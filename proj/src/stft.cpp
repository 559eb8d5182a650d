#include "sblstm/stft.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "sblstm/fft.hpp"

namespace sblstm {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kWsqFloor = 1e-8;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }
}  // namespace

void StftConfig::validate() const {
  if (!is_pow2(fft_size))
    throw std::invalid_argument("fft_size must be a power of two, got " +
                                std::to_string(fft_size));
  if (hop <= 0 || hop > fft_size)
    throw std::invalid_argument("hop must be in [1, fft_size]");
  if (fft_size % hop != 0)
    throw std::invalid_argument("fft_size must be a multiple of hop");
  if (sample_rate <= 0) throw std::invalid_argument("sample_rate must be positive");
}

std::vector<double> analysis_window(int fft_size) {
  if (fft_size <= 0) throw std::invalid_argument("fft_size must be positive");
  std::vector<double> w(fft_size);
  for (int n = 0; n < fft_size; ++n)
    w[n] = 0.5 - 0.5 * std::cos(kTwoPi * n / fft_size);
  return w;
}

int stft_frame_count(std::size_t n_samples, const StftConfig& cfg) {
  if (n_samples < static_cast<std::size_t>(cfg.fft_size)) return 0;
  return static_cast<int>((n_samples - cfg.fft_size) / cfg.hop) + 1;
}

void stft_single_frame(const double* frame, const StftConfig& cfg,
                       const std::vector<double>& window,
                       std::complex<double>* bins) {
  std::vector<double> buf(cfg.fft_size);
  for (int n = 0; n < cfg.fft_size; ++n) buf[n] = frame[n] * window[n];
  real_fft(buf.data(), cfg.fft_size, bins);
}

Spectrogram stft(const std::vector<double>& samples, const StftConfig& cfg) {
  cfg.validate();
  const std::vector<double> window = analysis_window(cfg.fft_size);
  const int frames = stft_frame_count(samples.size(), cfg);
  Spectrogram spec(cfg.bins(), frames);
  for (int t = 0; t < frames; ++t)
    stft_single_frame(samples.data() + static_cast<std::size_t>(t) * cfg.hop, cfg,
                      window, &spec.at(0, t));
  return spec;
}

OlaAccumulator::OlaAccumulator(const StftConfig& cfg)
    : cfg_(cfg),
      window_(analysis_window(cfg.fft_size)),
      acc_(cfg.fft_size, 0.0),
      wsq_(cfg.fft_size, 0.0),
      frame_(cfg.fft_size, 0.0) {
  cfg.validate();
}

void OlaAccumulator::add_frame(const std::complex<double>* bins) {
  real_ifft(bins, cfg_.fft_size, frame_.data());
  for (int n = 0; n < cfg_.fft_size; ++n) {
    acc_[n] += window_[n] * frame_[n];
    wsq_[n] += window_[n] * window_[n];
  }
}

std::vector<double> OlaAccumulator::emit_hop() {
  std::vector<double> out(cfg_.hop);
  for (int n = 0; n < cfg_.hop; ++n)
    out[n] = wsq_[n] > kWsqFloor ? acc_[n] / wsq_[n] : 0.0;
  const int rest = cfg_.fft_size - cfg_.hop;
  for (int n = 0; n < rest; ++n) {
    acc_[n] = acc_[n + cfg_.hop];
    wsq_[n] = wsq_[n + cfg_.hop];
  }
  for (int n = rest; n < cfg_.fft_size; ++n) {
    acc_[n] = 0.0;
    wsq_[n] = 0.0;
  }
  return out;
}

std::vector<double> OlaAccumulator::drain() {
  const int rest = cfg_.fft_size - cfg_.hop;
  std::vector<double> out(rest);
  for (int n = 0; n < rest; ++n)
    out[n] = wsq_[n] > kWsqFloor ? acc_[n] / wsq_[n] : 0.0;
  return out;
}

std::vector<double> istft(const Spectrogram& spec, const StftConfig& cfg) {
  cfg.validate();
  if (spec.bins != cfg.bins())
    throw std::invalid_argument("spectrogram bin count does not match config");
  if (spec.frames == 0) return {};
  OlaAccumulator ola(cfg);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(spec.frames - 1) * cfg.hop + cfg.fft_size);
  for (int t = 0; t < spec.frames; ++t) {
    ola.add_frame(&spec.at(0, t));
    const std::vector<double> hop = ola.emit_hop();
    out.insert(out.end(), hop.begin(), hop.end());
  }
  const std::vector<double> tail = ola.drain();
  out.insert(out.end(), tail.begin(), tail.end());
  return out;
}

}  // namespace sblstm
