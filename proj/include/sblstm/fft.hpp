#pragma once

#include <complex>
#include <vector>

namespace sblstm {

// Iterative radix-2 FFT, double precision. Sizes must be powers of two;
// frame sizes in this codebase always are. Inverse includes the 1/n scale.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse);

// Real-input forward transform: writes n/2 + 1 bins.
void real_fft(const double* in, int n, std::complex<double>* bins);

// Inverse of real_fft given n/2 + 1 bins of a conjugate-symmetric spectrum.
void real_ifft(const std::complex<double>* bins, int n, double* out);

}  // namespace sblstm
