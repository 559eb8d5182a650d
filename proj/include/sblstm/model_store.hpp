#pragma once

#include <cstddef>
#include <string>

#include "sblstm/cirm.hpp"
#include "sblstm/features.hpp"
#include "sblstm/net.hpp"
#include "sblstm/stft.hpp"

namespace sblstm {

// Everything the enhancer needs in one place: transform geometry, feature
// layout, mask compression constants and the float32 weights.
struct ModelBundle {
  StftConfig stft;
  FeatureConfig feat;
  CompressionConfig cirm;
  NetParams<float> net;

  void validate() const;  // cross-checks the pieces against each other
};

ModelBundle make_default_bundle();

// Binary container, all integers little-endian:
//   magic "SBLSTM1", u32 version,
//   config block (u32 fft_size, hop, sample_rate, bins, neighbors, seq_len,
//                 tau, hidden1, hidden2, output_dim; f32 k_max, c),
//   u32 tensor count, then per tensor: u32 name length, name bytes,
//   u32 rank, u32 dims[rank], float32 payload in row-major order.
// Returns the number of bytes written.
std::size_t save_model(const std::string& path, const ModelBundle& bundle);

// Validates magic, version, config sanity and every tensor shape; errors
// name the offending tensor.
ModelBundle load_model(const std::string& path);

}  // namespace sblstm
