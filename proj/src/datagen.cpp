#include "sblstm/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sblstm/fft.hpp"
#include "sblstm/rng.hpp"
#include "sblstm/wav.hpp"

namespace sblstm {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kSnrChoices[5] = {-5.0, 0.0, 5.0, 10.0, 15.0};
constexpr double kT60Choices[6] = {0.2, 0.3, 0.4, 0.5, 0.6, 0.8};

double mean_square(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return x.empty() ? 0.0 : acc / static_cast<double>(x.size());
}

void peak_normalize(std::vector<double>& x, double peak) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  if (m > 0.0) {
    const double g = peak / m;
    for (double& v : x) v *= g;
  }
}

std::vector<std::string> sorted_wavs(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> out;
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".wav")
      out.push_back(e.path().string());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw std::runtime_error("no wav files in " + dir);
  return out;
}

}  // namespace

MixResult mix_at_snr(const std::vector<double>& speech,
                     const std::vector<double>& noise, double snr_db,
                     std::uint64_t seed) {
  if (speech.empty()) throw std::invalid_argument("empty speech signal");

  MixResult r;
  r.speech = speech;
  if (std::isinf(snr_db) && snr_db > 0) {
    r.scaled_noise.assign(speech.size(), 0.0);
    r.mixture = speech;
    return r;
  }
  if (!std::isfinite(snr_db)) throw std::invalid_argument("snr_db must be finite or +inf");
  if (noise.empty()) throw std::invalid_argument("empty noise signal");

  Rng rng(seed);
  std::vector<double> fitted(speech.size());
  if (noise.size() >= speech.size()) {
    const std::size_t off =
        static_cast<std::size_t>(rng.below(noise.size() - speech.size() + 1));
    std::copy(noise.begin() + off, noise.begin() + off + speech.size(), fitted.begin());
  } else {
    std::size_t off = static_cast<std::size_t>(rng.below(noise.size()));
    for (std::size_t i = 0; i < speech.size(); ++i) {
      fitted[i] = noise[off];
      if (++off == noise.size()) off = 0;
    }
  }

  const double ps = mean_square(speech);
  const double pn = mean_square(fitted);
  if (ps <= 0.0) throw std::invalid_argument("speech signal has zero power");
  if (pn <= 0.0) throw std::invalid_argument("fitted noise has zero power");

  const double g = std::sqrt(ps / (pn * std::pow(10.0, snr_db / 10.0)));
  r.scaled_noise.resize(speech.size());
  r.mixture.resize(speech.size());
  for (std::size_t i = 0; i < speech.size(); ++i) {
    r.scaled_noise[i] = g * fitted[i];
    r.mixture[i] = speech[i] + r.scaled_noise[i];
  }
  return r;
}

std::vector<double> synth_rir(double t60_seconds, int sample_rate,
                              std::uint64_t seed) {
  if (t60_seconds <= 0.0) throw std::invalid_argument("t60 must be positive");
  if (sample_rate <= 0) throw std::invalid_argument("sample_rate must be positive");
  const std::size_t len =
      static_cast<std::size_t>(std::ceil(1.2 * t60_seconds * sample_rate));
  std::vector<double> taps(len, 0.0);
  taps[0] = 1.0;
  Rng rng(seed);
  for (std::size_t i = 1; i < len; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    // energy decays 60 dB at t60, so amplitude scales as 10^(-3 t / t60)
    taps[i] = rng.uniform(-1.0, 1.0) * std::pow(10.0, -3.0 * t / t60_seconds);
  }
  return taps;
}

double rir_t60_from_seed(std::uint64_t seed) {
  std::uint64_t s = seed;
  return kT60Choices[splitmix64(s) % 6];
}

std::vector<double> convolve(const std::vector<double>& signal,
                             const std::vector<double>& kernel) {
  if (signal.empty() || kernel.empty())
    throw std::invalid_argument("convolve needs non-empty inputs");
  const std::size_t n = signal.size(), m = kernel.size();

  if (m <= 32) {  // trivial kernels: direct form
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < std::min(m, i + 1); ++j)
        out[i] += kernel[j] * signal[i - j];
    return out;
  }

  // FFT overlap-add, truncated to the signal length
  std::size_t fft_n = 1;
  while (fft_n < 4 * m) fft_n <<= 1;
  const std::size_t block = fft_n - (m - 1);

  std::vector<std::complex<double>> kf(fft_n / 2 + 1);
  {
    std::vector<double> kbuf(fft_n, 0.0);
    std::copy(kernel.begin(), kernel.end(), kbuf.begin());
    real_fft(kbuf.data(), static_cast<int>(fft_n), kf.data());
  }

  std::vector<double> out(n, 0.0);
  std::vector<double> buf(fft_n);
  std::vector<std::complex<double>> xf(fft_n / 2 + 1);
  for (std::size_t start = 0; start < n; start += block) {
    const std::size_t take = std::min(block, n - start);
    std::fill(buf.begin(), buf.end(), 0.0);
    std::copy(signal.begin() + start, signal.begin() + start + take, buf.begin());
    real_fft(buf.data(), static_cast<int>(fft_n), xf.data());
    for (std::size_t k = 0; k < xf.size(); ++k) xf[k] *= kf[k];
    real_ifft(xf.data(), static_cast<int>(fft_n), buf.data());
    const std::size_t emit = std::min(fft_n, n - start);
    for (std::size_t i = 0; i < emit; ++i) out[start + i] += buf[i];
  }
  return out;
}

std::vector<MixSpec> build_manifest(const std::string& speech_dir,
                                    const std::string& noise_dir, double hours,
                                    double reverb_fraction, std::uint64_t seed) {
  if (hours <= 0.0) throw std::invalid_argument("hours must be positive");
  if (reverb_fraction < 0.0 || reverb_fraction > 1.0)
    throw std::invalid_argument("reverb_fraction must be in [0, 1]");
  const auto speech = sorted_wavs(speech_dir);
  const auto noise = sorted_wavs(noise_dir);

  std::vector<double> durations(speech.size());
  for (std::size_t i = 0; i < speech.size(); ++i) {
    const WavData w = read_wav(speech[i]);
    durations[i] = static_cast<double>(w.samples.size()) / w.sample_rate;
  }

  std::vector<MixSpec> specs;
  Rng rng(seed);
  double total = 0.0;
  const double want = hours * 3600.0;
  int reverberant = 0;
  while (total < want) {
    const std::size_t i = specs.size();
    MixSpec s;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "clip%05zu", i);
    s.id = buf;
    const std::size_t si = static_cast<std::size_t>(rng.below(speech.size()));
    s.speech_path = speech[si];
    s.noise_path = noise[static_cast<std::size_t>(rng.below(noise.size()))];
    s.snr_db = kSnrChoices[rng.below(5)];
    const std::uint64_t rir_candidate = rng.next_u64();
    // exact reverberant count by construction: one more whenever the running
    // floor of fraction * (i + 1) steps up
    const long long step_up =
        static_cast<long long>(std::floor(reverb_fraction * (i + 1) + 1e-9)) -
        static_cast<long long>(std::floor(reverb_fraction * i + 1e-9));
    if (step_up > 0) {
      s.rir_seed = rir_candidate;
      ++reverberant;
    }
    s.clip_seed = rng.next_u64();
    specs.push_back(std::move(s));
    total += durations[si];
  }
  (void)reverberant;
  return specs;
}

void write_manifest(const std::string& path, const std::vector<MixSpec>& specs) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open manifest for writing: " + path);
  for (const auto& s : specs) {
    f << s.speech_path << '\t' << s.noise_path << '\t';
    char snr[32];
    std::snprintf(snr, sizeof(snr), "%.6g", s.snr_db);
    f << snr << '\t';
    if (s.rir_seed)
      f << *s.rir_seed;
    else
      f << '-';
    f << '\t' << s.clip_seed << '\n';
  }
  if (!f) throw std::runtime_error("short write: " + path);
}

std::vector<MixSpec> read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open manifest: " + path);
  std::vector<MixSpec> specs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream is(line);
    MixSpec s;
    std::string rir, clip;
    if (!(std::getline(is, s.speech_path, '\t') &&
          std::getline(is, s.noise_path, '\t')))
      throw std::runtime_error("malformed manifest line " + std::to_string(lineno));
    std::string snr;
    if (!(std::getline(is, snr, '\t') && std::getline(is, rir, '\t') &&
          std::getline(is, clip)))
      throw std::runtime_error("malformed manifest line " + std::to_string(lineno));
    s.snr_db = std::stod(snr);
    if (rir != "-") s.rir_seed = std::stoull(rir);
    s.clip_seed = std::stoull(clip);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "clip%05zu", specs.size());
    s.id = buf;
    specs.push_back(std::move(s));
  }
  return specs;
}

void render_manifest(const std::vector<MixSpec>& specs, const std::string& out_dir,
                     int sample_rate) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  for (const auto& s : specs) {
    const WavData sp = read_wav(s.speech_path);
    const WavData nz = read_wav(s.noise_path);
    if (sp.sample_rate != sample_rate || nz.sample_rate != sample_rate)
      throw std::runtime_error("sample rate mismatch rendering " + s.id);
    std::vector<double> target = sp.samples;
    if (s.rir_seed) {
      const std::vector<double> rir =
          synth_rir(rir_t60_from_seed(*s.rir_seed), sample_rate, *s.rir_seed);
      target = convolve(target, rir);
      peak_normalize(target, 0.5);
    }
    const MixResult mix = mix_at_snr(target, nz.samples, s.snr_db, s.clip_seed);
    write_wav(out_dir + "/" + s.id + "_noisy.wav", mix.mixture, sample_rate);
    write_wav(out_dir + "/" + s.id + "_target.wav", target, sample_rate);
  }
}

std::vector<double> synth_speechlike(double seconds, int sample_rate,
                                     std::uint64_t seed) {
  if (seconds <= 0.0 || sample_rate <= 0)
    throw std::invalid_argument("bad speechlike generator arguments");
  const std::size_t total = static_cast<std::size_t>(seconds * sample_rate);
  std::vector<double> out(total, 0.0);
  Rng rng(seed);

  std::size_t pos = 0;
  while (pos < total) {
    // voiced stretch
    const double vdur = rng.uniform(0.25, 0.6);
    const std::size_t vlen =
        std::min(total - pos, static_cast<std::size_t>(vdur * sample_rate));
    const double f0_start = rng.uniform(90.0, 220.0);
    const double drift = rng.uniform(-0.5, 0.5);  // octaves per second
    // three formant-ish resonances shape the harmonic amplitudes
    const double ff[3] = {rng.uniform(300.0, 900.0), rng.uniform(900.0, 1800.0),
                          rng.uniform(1800.0, 3200.0)};
    const double fw[3] = {rng.uniform(120.0, 260.0), rng.uniform(150.0, 300.0),
                          rng.uniform(180.0, 360.0)};
    const double fa[3] = {1.0, rng.uniform(0.4, 0.9), rng.uniform(0.2, 0.6)};
    const double am_rate = rng.uniform(2.0, 6.0);
    const double am_depth = rng.uniform(0.1, 0.3);
    const int n_harm = 40;
    std::vector<double> phase(n_harm);
    for (auto& p : phase) p = rng.uniform(0.0, kTwoPi);
    std::vector<double> amp(n_harm, 0.0);

    const std::size_t ramp = static_cast<std::size_t>(0.02 * sample_rate);
    for (std::size_t n = 0; n < vlen; ++n) {
      const double t = static_cast<double>(n) / sample_rate;
      const double f0 = f0_start * std::pow(2.0, drift * t);
      if (n % 64 == 0) {  // refresh harmonic amplitudes at control rate
        for (int h = 0; h < n_harm; ++h) {
          const double fh = f0 * (h + 1);
          if (fh > 4000.0) {
            amp[h] = 0.0;
            continue;
          }
          double env = 0.05;
          for (int j = 0; j < 3; ++j) {
            const double d = (fh - ff[j]) / fw[j];
            env += fa[j] * std::exp(-0.5 * d * d);
          }
          amp[h] = env / (1.0 + 0.002 * fh);  // gentle tilt
        }
      }
      double v = 0.0;
      for (int h = 0; h < n_harm; ++h) {
        if (amp[h] == 0.0) continue;
        phase[h] += kTwoPi * f0 * (h + 1) / sample_rate;
        v += amp[h] * std::sin(phase[h]);
      }
      double g = 1.0 - am_depth + am_depth * std::sin(kTwoPi * am_rate * t);
      if (n < ramp) g *= static_cast<double>(n) / ramp;
      if (vlen - n < ramp) g *= static_cast<double>(vlen - n) / ramp;
      out[pos + n] = v * g;
    }
    pos += vlen;
    // pause
    const double sdur = rng.uniform(0.08, 0.35);
    pos = std::min(total, pos + static_cast<std::size_t>(sdur * sample_rate));
  }
  peak_normalize(out, 0.5);
  return out;
}

std::vector<double> synth_noise(double seconds, int sample_rate,
                                std::uint64_t seed) {
  if (seconds <= 0.0 || sample_rate <= 0)
    throw std::invalid_argument("bad noise generator arguments");
  const std::size_t total = static_cast<std::size_t>(seconds * sample_rate);
  std::vector<double> out(total);
  Rng rng(seed);
  const double pole = rng.uniform(0.5, 0.95);
  double y = 0.0;
  for (std::size_t i = 0; i < total; ++i) {
    y = pole * y + (1.0 - pole) * rng.normal();
    out[i] = y;
  }
  peak_normalize(out, 0.5);
  return out;
}

}  // namespace sblstm
