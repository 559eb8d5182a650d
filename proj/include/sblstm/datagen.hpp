#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sblstm {

// Deterministic corpus construction: seeded mixing at exact SNRs, synthetic
// room responses, and generators for speech-like and noise material so the
// whole pipeline can be exercised without shipping any audio.

struct MixResult {
  std::vector<double> mixture;
  std::vector<double> scaled_noise;
  std::vector<double> speech;  // unchanged reference
};

// Scales the noise so that 10*log10(Ps/Pn) is exactly snr_db, then adds.
// Noise shorter than the speech is tiled from a seeded offset; longer noise
// is cropped at a seeded offset. +inf snr returns the speech over silence.
// Throws when either signal has zero power.
MixResult mix_at_snr(const std::vector<double>& speech,
                     const std::vector<double>& noise, double snr_db,
                     std::uint64_t seed);

// Synthetic room impulse response: unit direct path, then seeded white
// noise under an exponential decay that loses 60 dB of energy at t60.
// Length is ceil(1.2 * t60 * rate) taps.
std::vector<double> synth_rir(double t60_seconds, int sample_rate,
                              std::uint64_t seed);

// t60 value implied by a manifest rir seed. Drawn from a small fixed grid so
// the seed alone reconstructs the response.
double rir_t60_from_seed(std::uint64_t seed);

// Full convolution truncated to the input length (FFT overlap-add inside).
std::vector<double> convolve(const std::vector<double>& signal,
                             const std::vector<double>& kernel);

struct MixSpec {
  std::string id;
  std::string speech_path;
  std::string noise_path;
  double snr_db = 0.0;
  std::optional<std::uint64_t> rir_seed;
  std::uint64_t clip_seed = 0;
};

// Pairs speech and noise files until the summed speech duration reaches
// `hours`. SNRs come from {-5, 0, 5, 10, 15} dB; an exact floor(fraction*n)
// of the entries get a room response. Fully determined by the seed and the
// sorted directory listings.
std::vector<MixSpec> build_manifest(const std::string& speech_dir,
                                    const std::string& noise_dir, double hours,
                                    double reverb_fraction, std::uint64_t seed);

void write_manifest(const std::string& path, const std::vector<MixSpec>& specs);
std::vector<MixSpec> read_manifest(const std::string& path);

// Renders <id>_noisy.wav and <id>_target.wav into out_dir. The target is
// the (possibly reverberant) speech the mask is computed against.
void render_manifest(const std::vector<MixSpec>& specs, const std::string& out_dir,
                     int sample_rate);

// Harmonic voiced stretches with wandering pitch and formant-shaped
// spectra, separated by silences; peak-normalized to 0.5.
std::vector<double> synth_speechlike(double seconds, int sample_rate,
                                     std::uint64_t seed);

// Stationary colored noise (seeded one-pole spectrum), peak 0.5.
std::vector<double> synth_noise(double seconds, int sample_rate,
                                std::uint64_t seed);

}  // namespace sblstm
