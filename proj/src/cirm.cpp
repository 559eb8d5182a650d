#include "sblstm/cirm.hpp"

#include <algorithm>
#include <cmath>

namespace sblstm {

namespace {
constexpr double kDenomEps = 1e-8;
}

MaskValue raw_cirm(std::complex<double> noisy, std::complex<double> clean) {
  const double xr = noisy.real(), xi = noisy.imag();
  const double sr = clean.real(), si = clean.imag();
  const double d = xr * xr + xi * xi;
  if (d < kDenomEps * kDenomEps) return {0.0, 0.0};
  return {(xr * sr + xi * si) / d, (xr * si - xi * sr) / d};
}

double compress(double m, const CompressionConfig& cfg) {
  return cfg.k_max * std::tanh(0.5 * cfg.c * m);
}

double uncompress(double v, const CompressionConfig& cfg) {
  const double bound = cfg.k_max - 1e-4 * cfg.k_max;
  const double x = std::clamp(v, -bound, bound);
  return -(1.0 / cfg.c) * std::log((cfg.k_max - x) / (cfg.k_max + x));
}

std::complex<double> apply_mask(std::complex<double> noisy, double mask_re_c,
                                double mask_im_c, const CompressionConfig& cfg) {
  const std::complex<double> m(uncompress(mask_re_c, cfg), uncompress(mask_im_c, cfg));
  return m * noisy;
}

}  // namespace sblstm
