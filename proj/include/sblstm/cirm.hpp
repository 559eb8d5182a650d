#pragma once

#include <complex>

namespace sblstm {

// Complex ideal ratio mask: targets for training, inverse applied at
// enhancement time. The compression squashes the unbounded raw mask into
// (-k_max, k_max) so the network regresses a bounded quantity.

struct CompressionConfig {
  double k_max = 10.0;  // output range bound
  double c = 0.1;       // steepness
};

struct MaskValue {
  double re = 0.0;
  double im = 0.0;
};

// (clean * conj(noisy)) / |noisy|^2, componentwise. Returns (0, 0) when
// |noisy|^2 < eps^2 with eps = 1e-8.
MaskValue raw_cirm(std::complex<double> noisy, std::complex<double> clean);

// k_max * (1 - exp(-c m)) / (1 + exp(-c m)), evaluated as
// k_max * tanh(c m / 2) to stay finite for any m.
double compress(double m, const CompressionConfig& cfg);

// Inverse of compress. Inputs are clipped to [-k_max + d, k_max - d] with
// d = 1e-4 * k_max before the log, so the result is always finite.
double uncompress(double v, const CompressionConfig& cfg);

// Complex multiply of the uncompressed mask with a noisy bin.
std::complex<double> apply_mask(std::complex<double> noisy, double mask_re_c,
                                double mask_im_c, const CompressionConfig& cfg);

}  // namespace sblstm
