#include "sblstm/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "sblstm/cirm.hpp"

namespace sblstm {

namespace {
constexpr double kNormFloor = 1e-12;
constexpr int kRunningMeanHorizon = 192;
}  // namespace

StreamSession::StreamSession(const ModelBundle& model, int tau_override)
    : cfg_(model.stft),
      cirm_(model.cirm),
      tau_(tau_override >= 0 ? tau_override : model.feat.tau),
      fft_size_(model.stft.fft_size),
      hop_(model.stft.hop),
      bins_(model.feat.bins),
      neighbors_(model.feat.neighbors),
      alpha_(running_mean_alpha(kRunningMeanHorizon)),
      window_(analysis_window(model.stft.fft_size)),
      input_(model.stft.fft_size, 0.0),
      bins_scratch_(model.feat.bins),
      mags_(model.feat.bins),
      norm_(model.feat.bins),
      masked_(model.feat.bins),
      ola_(model.stft),
      net_(model.net),
      state_(model.net.cfg, model.feat.bins) {
  model.validate();
  x_.setZero(model.net.cfg.input_dim, bins_);
  pred_.setZero(model.net.cfg.output_dim, bins_);
}

std::optional<std::vector<double>> StreamSession::process_frame(
    std::span<const double> chunk) {
  if (chunk.size() != static_cast<std::size_t>(hop_))
    throw std::invalid_argument("process_frame expects exactly hop samples");

  std::memmove(input_.data(), input_.data() + hop_,
               sizeof(double) * (fft_size_ - hop_));
  std::copy(chunk.begin(), chunk.end(), input_.end() - hop_);
  ++calls_;
  if (calls_ < fft_size_ / hop_) return std::nullopt;  // window not yet full
  ++frame_index_;

  stft_single_frame(input_.data(), cfg_, window_, bins_scratch_.data());
  for (int k = 0; k < bins_; ++k) {
    mags_[k] = std::abs(bins_scratch_[k]);
    norm_[k].update(mags_[k], alpha_);
  }
  for (int k = 0; k < bins_; ++k) {
    const double inv = 1.0 / std::max(norm_[k].mu, kNormFloor);
    x_(0, k) = static_cast<float>(mags_[k] * inv);
    for (int j = 1; j <= neighbors_; ++j) {
      x_(j, k) = static_cast<float>(mags_[mirror_index(k - j, bins_)] * inv);
      x_(neighbors_ + j, k) =
          static_cast<float>(mags_[mirror_index(k + j, bins_)] * inv);
    }
  }

  net_step_batch<float>(net_, state_, x_, pred_, ws_);
  delay_.emplace_back(bins_scratch_);

  if (static_cast<int>(delay_.size()) <= tau_) return std::nullopt;

  const std::vector<std::complex<double>>& held = delay_.front();
  for (int k = 0; k < bins_; ++k)
    masked_[k] = apply_mask(held[k], static_cast<double>(pred_(0, k)),
                            static_cast<double>(pred_(1, k)), cirm_);
  delay_.pop_front();

  ola_.add_frame(masked_.data());
  return ola_.emit_hop();
}

EnhanceResult enhance_file(const ModelBundle& model, const std::string& in_path,
                           const std::string& out_path, int tau_override,
                           WavFormat format) {
  const WavData in = read_wav(in_path);
  if (in.samples.empty()) throw std::runtime_error("empty audio file: " + in_path);
  if (in.sample_rate != model.stft.sample_rate)
    throw std::runtime_error("sample rate " + std::to_string(in.sample_rate) +
                             " does not match the model rate " +
                             std::to_string(model.stft.sample_rate) + ": " + in_path);

  StreamSession session(model, tau_override);
  const int hop = model.stft.hop;
  const std::size_t len = in.samples.size();
  const std::size_t n_calls = (len + hop - 1) / hop;
  const int fill = session.fill_calls();

  std::vector<double> raw;
  raw.reserve((n_calls + fill) * hop);
  std::vector<double> chunk(hop, 0.0);

  EnhanceResult res;
  res.samples = len;
  res.in_file_delay = session.tau() * hop;
  res.algorithmic_latency = session.tau() * hop + model.stft.fft_size;

  double total_ms = 0.0;
  auto feed = [&](const double* data) {
    const auto t0 = std::chrono::steady_clock::now();
    auto out = session.process_frame(std::span<const double>(data, hop));
    const auto t1 = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    total_ms += ms;
    res.max_frame_ms = std::max(res.max_frame_ms, ms);
    if (out)
      raw.insert(raw.end(), out->begin(), out->end());
    else
      raw.insert(raw.end(), hop, 0.0);
  };

  for (std::size_t c = 0; c < n_calls; ++c) {
    const std::size_t start = c * hop;
    const std::size_t take = std::min<std::size_t>(hop, len - start);
    std::fill(chunk.begin(), chunk.end(), 0.0);
    std::copy(in.samples.begin() + start, in.samples.begin() + start + take,
              chunk.begin());
    feed(chunk.data());
  }
  std::fill(chunk.begin(), chunk.end(), 0.0);
  for (int c = 0; c < fill; ++c) feed(chunk.data());

  // total calls minus the ones that only filled the analysis window
  res.frames =
      static_cast<std::int64_t>(n_calls) + fill - (model.stft.fft_size / hop - 1);
  res.mean_frame_ms = total_ms / static_cast<double>(n_calls + fill);

  const std::size_t skip = static_cast<std::size_t>(model.stft.fft_size - hop);
  std::vector<double> out(raw.begin() + skip, raw.begin() + skip + len);
  write_wav(out_path, out, model.stft.sample_rate, format);
  return res;
}

std::vector<double> offline_reference_enhance(const ModelBundle& model,
                                              const std::vector<double>& samples,
                                              int tau_override) {
  model.validate();
  if (samples.empty()) throw std::invalid_argument("empty input");
  const int hop = model.stft.hop;
  const int fft = model.stft.fft_size;
  const int tau = tau_override >= 0 ? tau_override : model.feat.tau;
  const int K = model.feat.bins;
  const int N = model.feat.neighbors;
  const int D = model.net.cfg.input_dim;
  const std::size_t len = samples.size();
  const std::size_t n_calls = (len + hop - 1) / hop;
  const int fill = tau + fft / hop - 1;

  std::vector<double> padded = samples;
  padded.resize((n_calls + fill) * hop, 0.0);

  const Spectrogram spec = stft(padded, model.stft);
  const int frames = spec.frames;  // n_calls + tau

  // running-mean replay, then per-band feature sequences
  std::vector<double> mags(spec.data.size());
  for (std::size_t i = 0; i < mags.size(); ++i) mags[i] = std::abs(spec.data[i]);
  const double alpha = running_mean_alpha(kRunningMeanHorizon);

  Spectrogram masked(K, static_cast<int>(n_calls));
  std::vector<NormState> norm(K);

  // Features are built frame-major exactly as the session does it, and the
  // bands advance through the network as one batch per frame so the float
  // arithmetic matches the streaming path operation for operation. All
  // predictions are kept, which replaces the session's delay queue.
  BatchState<float> state(model.net.cfg, K);
  StepWorkspace<float> ws;
  Mat<float> x(D, K);
  std::vector<Mat<float>> preds(frames);
  for (int t = 0; t < frames; ++t) {
    const double* mrow = &mags[static_cast<std::size_t>(t) * K];
    for (int k = 0; k < K; ++k) norm[k].update(mrow[k], alpha);
    for (int k = 0; k < K; ++k) {
      const double inv = 1.0 / std::max(norm[k].mu, kNormFloor);
      x(0, k) = static_cast<float>(mrow[k] * inv);
      for (int j = 1; j <= N; ++j) {
        x(j, k) = static_cast<float>(mrow[mirror_index(k - j, K)] * inv);
        x(N + j, k) = static_cast<float>(mrow[mirror_index(k + j, K)] * inv);
      }
    }
    net_step_batch<float>(model.net, state, x, preds[t], ws);
  }

  // the prediction at frame t masks frame t - tau
  for (int t = 0; t < static_cast<int>(n_calls); ++t) {
    const int pt = t + tau;
    if (pt >= frames) throw std::logic_error("reference alignment out of range");
    const Mat<float>& pred = preds[pt];
    for (int k = 0; k < K; ++k)
      masked.at(k, t) =
          apply_mask(spec.at(k, t), static_cast<double>(pred(0, k)),
                     static_cast<double>(pred(1, k)), model.cirm);
  }

  const std::vector<double> synth = istft(masked, model.stft);
  std::vector<double> out(len, 0.0);
  const std::size_t delay = static_cast<std::size_t>(tau) * hop;
  for (std::size_t n = delay; n < len; ++n) out[n] = synth[n - delay];
  return out;
}

std::size_t enhance_stream(const ModelBundle& model, std::istream& in,
                           std::ostream& out, int tau_override, std::ostream* log) {
  StreamSession session(model, tau_override);
  const int hop = model.stft.hop;
  std::vector<char> bytes(static_cast<std::size_t>(hop) * 2);
  std::vector<double> chunk(hop);
  std::string obuf(static_cast<std::size_t>(hop) * 2, '\0');
  std::size_t written = 0;
  std::int64_t calls = 0;
  double total_ms = 0.0, max_ms = 0.0;

  auto emit = [&](const std::optional<std::vector<double>>& hop_out) {
    for (int i = 0; i < hop; ++i) {
      const double v = hop_out ? (*hop_out)[i] : 0.0;
      double scaled = std::round(v * 32768.0);
      if (scaled > 32767.0) scaled = 32767.0;
      if (scaled < -32768.0) scaled = -32768.0;
      const std::int16_t s = static_cast<std::int16_t>(scaled);
      obuf[2 * i] = static_cast<char>(s & 0xff);
      obuf[2 * i + 1] = static_cast<char>((s >> 8) & 0xff);
    }
    out.write(obuf.data(), static_cast<std::streamsize>(obuf.size()));
    written += hop;
  };

  auto feed = [&](const std::vector<double>& c) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = session.process_frame(c);
    const auto t1 = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    total_ms += ms;
    max_ms = std::max(max_ms, ms);
    ++calls;
    emit(r);
  };

  bool saw_input = false;
  while (in) {
    in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    const std::streamsize got = in.gcount();
    if (got <= 0) break;
    saw_input = true;
    const int n = static_cast<int>(got / 2);
    for (int i = 0; i < n; ++i) {
      const std::int16_t s = static_cast<std::int16_t>(
          static_cast<unsigned char>(bytes[2 * i]) |
          (static_cast<unsigned char>(bytes[2 * i + 1]) << 8));
      chunk[i] = s / 32768.0;
    }
    for (int i = n; i < hop; ++i) chunk[i] = 0.0;
    feed(chunk);
  }
  if (saw_input) {
    std::fill(chunk.begin(), chunk.end(), 0.0);
    for (int c = 0; c < session.fill_calls(); ++c) feed(chunk);
  }
  out.flush();
  if (log && calls > 0)
    *log << "frames " << calls << "  mean " << total_ms / calls << " ms  max "
         << max_ms << " ms  latency "
         << session.tau() * hop + model.stft.fft_size << " samples\n";
  return written;
}

}  // namespace sblstm
