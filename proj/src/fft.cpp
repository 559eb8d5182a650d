#include "sblstm/fft.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace sblstm {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Forward twiddles for each size, computed once.
const std::vector<std::complex<double>>& twiddles(int n) {
  static std::map<int, std::vector<std::complex<double>>> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) {
    std::vector<std::complex<double>> w(n / 2);
    for (int k = 0; k < n / 2; ++k)
      w[k] = std::polar(1.0, -kTwoPi * k / n);
    it = cache.emplace(n, std::move(w)).first;
  }
  return it->second;
}

}  // namespace

void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  const int n = static_cast<int>(a.size());
  if (n == 0) return;
  if (!is_pow2(n)) throw std::invalid_argument("fft size must be a power of two");
  if (n == 1) return;

  // bit-reversal permutation
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  const auto& w = twiddles(n);
  for (int len = 2; len <= n; len <<= 1) {
    const int step = n / len;
    for (int i = 0; i < n; i += len) {
      for (int k = 0; k < len / 2; ++k) {
        std::complex<double> tw = w[k * step];
        if (inverse) tw = std::conj(tw);
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * tw;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
  if (inverse) {
    const double inv = 1.0 / n;
    for (auto& x : a) x *= inv;
  }
}

void real_fft(const double* in, int n, std::complex<double>* bins) {
  std::vector<std::complex<double>> a(n);
  for (int i = 0; i < n; ++i) a[i] = {in[i], 0.0};
  fft_inplace(a, false);
  for (int k = 0; k <= n / 2; ++k) bins[k] = a[k];
}

void real_ifft(const std::complex<double>* bins, int n, double* out) {
  std::vector<std::complex<double>> a(n);
  a[0] = {bins[0].real(), 0.0};
  a[n / 2] = {bins[n / 2].real(), 0.0};
  for (int k = 1; k < n / 2; ++k) {
    a[k] = bins[k];
    a[n - k] = std::conj(bins[k]);
  }
  fft_inplace(a, true);
  for (int i = 0; i < n; ++i) out[i] = a[i].real();
}

}  // namespace sblstm
