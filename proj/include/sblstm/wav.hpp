#pragma once

#include <string>
#include <vector>

namespace sblstm {

// Minimal mono WAV I/O. Readers accept PCM16 and IEEE float32; anything else
// is rejected with a descriptive error. Samples are normalized doubles
// (PCM16 scaled by 1/32768).

struct WavData {
  std::vector<double> samples;
  int sample_rate = 0;
};

enum class WavFormat { Pcm16, Float32 };

WavData read_wav(const std::string& path);

// Float32 is lossless for our pipeline and is the default; PCM16 writes
// clamp(round(x * 32768)) to [-32768, 32767].
void write_wav(const std::string& path, const std::vector<double>& samples,
               int sample_rate, WavFormat format = WavFormat::Float32);

}  // namespace sblstm
