#include "sblstm/wav.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sblstm {
namespace {

std::uint32_t rd_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t rd_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void wr_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void wr_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

WavData read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open wav file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw std::runtime_error("not a RIFF/WAVE file: " + path);

  int audio_format = 0, channels = 0, bits = 0, rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
    const std::uint32_t len = rd_u32(bytes.data() + pos + 4);
    pos += 8;
    if (pos + len > bytes.size())
      throw std::runtime_error("truncated chunk in wav file: " + path);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (len < 16) throw std::runtime_error("malformed fmt chunk: " + path);
      audio_format = rd_u16(bytes.data() + pos);
      channels = rd_u16(bytes.data() + pos + 2);
      rate = static_cast<int>(rd_u32(bytes.data() + pos + 4));
      bits = rd_u16(bytes.data() + pos + 14);
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = bytes.data() + pos;
      data_len = len;
    }
    pos += len + (len & 1);  // chunks are word aligned
  }
  if (!data) throw std::runtime_error("wav file has no data chunk: " + path);
  if (channels != 1)
    throw std::runtime_error("expected mono audio, got " + std::to_string(channels) +
                             " channels: " + path);

  WavData out;
  out.sample_rate = rate;
  if (audio_format == 1 && bits == 16) {
    const std::size_t n = data_len / 2;
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::int16_t s = static_cast<std::int16_t>(rd_u16(data + 2 * i));
      out.samples[i] = s / 32768.0;
    }
  } else if (audio_format == 3 && bits == 32) {
    const std::size_t n = data_len / 4;
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t u = rd_u32(data + 4 * i);
      float v;
      std::memcpy(&v, &u, 4);
      out.samples[i] = v;
    }
  } else {
    throw std::runtime_error("unsupported wav encoding (format " +
                             std::to_string(audio_format) + ", " + std::to_string(bits) +
                             " bit): " + path);
  }
  for (double v : out.samples)
    if (!std::isfinite(v)) throw std::runtime_error("non-finite sample in wav file: " + path);
  return out;
}

void write_wav(const std::string& path, const std::vector<double>& samples,
               int sample_rate, WavFormat format) {
  if (sample_rate <= 0) throw std::invalid_argument("sample_rate must be positive");
  const bool f32 = format == WavFormat::Float32;
  const std::uint32_t bytes_per = f32 ? 4 : 2;
  const std::uint32_t data_len = static_cast<std::uint32_t>(samples.size() * bytes_per);

  std::string out;
  out.reserve(44 + data_len);
  out.append("RIFF");
  wr_u32(out, 36 + data_len);
  out.append("WAVE");
  out.append("fmt ");
  wr_u32(out, 16);
  wr_u16(out, f32 ? 3 : 1);
  wr_u16(out, 1);
  wr_u32(out, static_cast<std::uint32_t>(sample_rate));
  wr_u32(out, static_cast<std::uint32_t>(sample_rate) * bytes_per);
  wr_u16(out, static_cast<std::uint16_t>(bytes_per));
  wr_u16(out, static_cast<std::uint16_t>(8 * bytes_per));
  out.append("data");
  wr_u32(out, data_len);
  if (f32) {
    for (double v : samples) {
      float x = static_cast<float>(v);
      std::uint32_t u;
      std::memcpy(&u, &x, 4);
      wr_u32(out, u);
    }
  } else {
    for (double v : samples) {
      double scaled = std::round(v * 32768.0);
      if (scaled > 32767.0) scaled = 32767.0;
      if (scaled < -32768.0) scaled = -32768.0;
      wr_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open file for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("short write: " + path);
}

}  // namespace sblstm
