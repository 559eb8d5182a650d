#include "sblstm/model_store.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace sblstm {

namespace {

constexpr char kMagic[7] = {'S', 'B', 'L', 'S', 'T', 'M', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f32(std::string& out, float v) {
  std::uint32_t u;
  std::memcpy(&u, &v, 4);
  put_u32(out, u);
}

struct Reader {
  const unsigned char* p;
  std::size_t n;
  std::size_t pos = 0;
  const std::string& path;

  void need(std::size_t k) const {
    if (pos + k > n) throw std::runtime_error("truncated model file: " + path);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = static_cast<std::uint32_t>(p[pos]) |
                      (static_cast<std::uint32_t>(p[pos + 1]) << 8) |
                      (static_cast<std::uint32_t>(p[pos + 2]) << 16) |
                      (static_cast<std::uint32_t>(p[pos + 3]) << 24);
    pos += 4;
    return v;
  }
  float f32() {
    std::uint32_t u = u32();
    float v;
    std::memcpy(&v, &u, 4);
    return v;
  }
  std::string str(std::size_t k) {
    need(k);
    std::string s(reinterpret_cast<const char*>(p + pos), k);
    pos += k;
    return s;
  }
};

// Payloads are row-major in the file; Eigen storage is column-major.
void append_tensor(std::string& out, const char* name, const float* data,
                   std::uint32_t rows, std::uint32_t cols, bool is_vector) {
  const std::string n(name);
  put_u32(out, static_cast<std::uint32_t>(n.size()));
  out.append(n);
  if (is_vector) {
    put_u32(out, 1);
    put_u32(out, rows);
    for (std::uint32_t i = 0; i < rows; ++i) put_f32(out, data[i]);
  } else {
    put_u32(out, 2);
    put_u32(out, rows);
    put_u32(out, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c)
        put_f32(out, data[static_cast<std::size_t>(c) * rows + r]);
  }
}

}  // namespace

void ModelBundle::validate() const {
  stft.validate();
  feat.validate();
  net.cfg.validate();
  if (feat.bins != stft.bins())
    throw std::invalid_argument("feature bin count does not match the transform");
  if (net.cfg.input_dim != feat.input_dim())
    throw std::invalid_argument("net input dim does not match the feature layout");
  if (net.cfg.output_dim != 2)
    throw std::invalid_argument("mask head must emit two components");
  if (net.cfg.tau != feat.tau)
    throw std::invalid_argument("net and feature delay disagree");
  if (cirm.k_max <= 0.0 || cirm.c <= 0.0)
    throw std::invalid_argument("compression constants must be positive");
  auto check = [](const char* name, Eigen::Index got, Eigen::Index want) {
    if (got != want)
      throw std::invalid_argument(std::string("tensor ") + name +
                                  " has inconsistent shape");
  };
  check("lstm1.w", net.l1.w.rows(), 4 * net.cfg.hidden1);
  check("lstm1.w", net.l1.w.cols(), net.cfg.input_dim);
  check("lstm1.u", net.l1.u.rows(), 4 * net.cfg.hidden1);
  check("lstm1.u", net.l1.u.cols(), net.cfg.hidden1);
  check("lstm1.b", net.l1.b.size(), 4 * net.cfg.hidden1);
  check("lstm2.w", net.l2.w.rows(), 4 * net.cfg.hidden2);
  check("lstm2.w", net.l2.w.cols(), net.cfg.hidden1);
  check("lstm2.u", net.l2.u.rows(), 4 * net.cfg.hidden2);
  check("lstm2.u", net.l2.u.cols(), net.cfg.hidden2);
  check("lstm2.b", net.l2.b.size(), 4 * net.cfg.hidden2);
  check("dense.w", net.dense_w.rows(), net.cfg.output_dim);
  check("dense.w", net.dense_w.cols(), net.cfg.hidden2);
  check("dense.b", net.dense_b.size(), net.cfg.output_dim);
}

ModelBundle make_default_bundle() {
  ModelBundle b;
  b.net = zero_net_params<float>(NetConfig{});
  b.validate();
  return b;
}

std::size_t save_model(const std::string& path, const ModelBundle& bundle) {
  bundle.validate();
  std::string out;
  out.append(kMagic, 7);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(bundle.stft.fft_size));
  put_u32(out, static_cast<std::uint32_t>(bundle.stft.hop));
  put_u32(out, static_cast<std::uint32_t>(bundle.stft.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(bundle.feat.bins));
  put_u32(out, static_cast<std::uint32_t>(bundle.feat.neighbors));
  put_u32(out, static_cast<std::uint32_t>(bundle.feat.seq_len));
  put_u32(out, static_cast<std::uint32_t>(bundle.feat.tau));
  put_u32(out, static_cast<std::uint32_t>(bundle.net.cfg.hidden1));
  put_u32(out, static_cast<std::uint32_t>(bundle.net.cfg.hidden2));
  put_u32(out, static_cast<std::uint32_t>(bundle.net.cfg.output_dim));
  put_f32(out, static_cast<float>(bundle.cirm.k_max));
  put_f32(out, static_cast<float>(bundle.cirm.c));

  put_u32(out, 8);
  const auto& n = bundle.net;
  append_tensor(out, "lstm1.w", n.l1.w.data(), static_cast<std::uint32_t>(n.l1.w.rows()),
                static_cast<std::uint32_t>(n.l1.w.cols()), false);
  append_tensor(out, "lstm1.u", n.l1.u.data(), static_cast<std::uint32_t>(n.l1.u.rows()),
                static_cast<std::uint32_t>(n.l1.u.cols()), false);
  append_tensor(out, "lstm1.b", n.l1.b.data(), static_cast<std::uint32_t>(n.l1.b.size()),
                1, true);
  append_tensor(out, "lstm2.w", n.l2.w.data(), static_cast<std::uint32_t>(n.l2.w.rows()),
                static_cast<std::uint32_t>(n.l2.w.cols()), false);
  append_tensor(out, "lstm2.u", n.l2.u.data(), static_cast<std::uint32_t>(n.l2.u.rows()),
                static_cast<std::uint32_t>(n.l2.u.cols()), false);
  append_tensor(out, "lstm2.b", n.l2.b.data(), static_cast<std::uint32_t>(n.l2.b.size()),
                1, true);
  append_tensor(out, "dense.w", n.dense_w.data(),
                static_cast<std::uint32_t>(n.dense_w.rows()),
                static_cast<std::uint32_t>(n.dense_w.cols()), false);
  append_tensor(out, "dense.b", n.dense_b.data(),
                static_cast<std::uint32_t>(n.dense_b.size()), 1, true);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open model file for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("short write: " + path);
  return out.size();
}

ModelBundle load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open model file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  Reader r{bytes.data(), bytes.size(), 0, path};

  r.need(7);
  if (std::memcmp(bytes.data(), kMagic, 7) != 0)
    throw std::runtime_error("bad model magic: " + path);
  r.pos = 7;
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw std::runtime_error("unsupported model version " + std::to_string(version) +
                             ": " + path);

  ModelBundle b;
  b.stft.fft_size = static_cast<int>(r.u32());
  b.stft.hop = static_cast<int>(r.u32());
  b.stft.sample_rate = static_cast<int>(r.u32());
  b.feat.bins = static_cast<int>(r.u32());
  b.feat.neighbors = static_cast<int>(r.u32());
  b.feat.seq_len = static_cast<int>(r.u32());
  b.feat.tau = static_cast<int>(r.u32());
  NetConfig nc;
  nc.hidden1 = static_cast<int>(r.u32());
  nc.hidden2 = static_cast<int>(r.u32());
  nc.output_dim = static_cast<int>(r.u32());
  nc.input_dim = 2 * b.feat.neighbors + 1;
  nc.tau = b.feat.tau;
  b.cirm.k_max = r.f32();
  b.cirm.c = r.f32();
  b.net = zero_net_params<float>(nc);

  const std::uint32_t n_tensors = r.u32();
  if (n_tensors != 8)
    throw std::runtime_error("expected 8 tensors, found " + std::to_string(n_tensors) +
                             ": " + path);

  std::vector<std::string> seen;
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const std::uint32_t name_len = r.u32();
    if (name_len > 256) throw std::runtime_error("implausible tensor name: " + path);
    const std::string name = r.str(name_len);
    for (const auto& s : seen)
      if (s == name) throw std::runtime_error("duplicate tensor " + name + ": " + path);
    seen.push_back(name);
    const std::uint32_t rank = r.u32();
    if (rank != 1 && rank != 2)
      throw std::runtime_error("tensor " + name + " has unsupported rank: " + path);
    std::uint32_t rows = r.u32();
    std::uint32_t cols = rank == 2 ? r.u32() : 1;

    float* dst = nullptr;
    Eigen::Index want_rows = 0, want_cols = 0;
    auto pick = [&](auto& m) {
      dst = m.data();
      want_rows = m.rows();
      want_cols = m.cols();
    };
    if (name == "lstm1.w") pick(b.net.l1.w);
    else if (name == "lstm1.u") pick(b.net.l1.u);
    else if (name == "lstm1.b") pick(b.net.l1.b);
    else if (name == "lstm2.w") pick(b.net.l2.w);
    else if (name == "lstm2.u") pick(b.net.l2.u);
    else if (name == "lstm2.b") pick(b.net.l2.b);
    else if (name == "dense.w") pick(b.net.dense_w);
    else if (name == "dense.b") pick(b.net.dense_b);
    else throw std::runtime_error("unknown tensor " + name + ": " + path);

    if (rows != static_cast<std::uint32_t>(want_rows) ||
        cols != static_cast<std::uint32_t>(want_cols))
      throw std::runtime_error("tensor " + name + " has shape " + std::to_string(rows) +
                               "x" + std::to_string(cols) + ", expected " +
                               std::to_string(want_rows) + "x" +
                               std::to_string(want_cols) + ": " + path);

    r.need(static_cast<std::size_t>(rows) * cols * 4);
    for (std::uint32_t row = 0; row < rows; ++row)
      for (std::uint32_t col = 0; col < cols; ++col)
        dst[static_cast<std::size_t>(col) * rows + row] = r.f32();
  }
  if (r.pos != bytes.size())
    throw std::runtime_error("trailing bytes after tensor table: " + path);

  b.validate();
  return b;
}

}  // namespace sblstm
