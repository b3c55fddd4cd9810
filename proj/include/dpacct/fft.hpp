// Copyright 2026 The dpacct Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPACCT_FFT_HPP_
#define DPACCT_FFT_HPP_

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "dpacct/errors.hpp"

namespace dpacct {

// In-place iterative radix-2 FFT.  Twiddles are tabulated from long double
// trigonometry so repeated transforms stay reproducible to the last bit.
inline void fft_pow2(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n <= 1) return;
  if ((n & (n - 1)) != 0) {
    throw NumericalGuardError("fft_pow2: size must be a power of two");
  }

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  std::vector<std::complex<double>> root(n / 2);
  const long double two_pi = 6.283185307179586476925286766559005768L;
  const long double sign = inverse ? 1.0L : -1.0L;
  for (std::size_t k = 0; k < n / 2; ++k) {
    const long double ang = two_pi * static_cast<long double>(k) / n;
    root[k] = {static_cast<double>(cosl(ang)),
               static_cast<double>(sign * sinl(ang))};
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t stride = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> w = root[k * stride];
        const std::complex<double> u = a[start + k];
        const std::complex<double> v = a[start + k + len / 2] * w;
        a[start + k] = u + v;
        a[start + k + len / 2] = u - v;
      }
    }
  }
  if (inverse) {
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= inv;
  }
}

// Exact DFT of arbitrary length m via Bluestein's chirp transform.  The
// chirp phase pi*j^2/m is reduced modulo 2m in integer arithmetic before
// any trigonometry, so precision does not degrade with j.
//
// Forward: X_k = sum_j x_j e^{-2 pi i jk/m}.  inverse() divides by m.
class Dft {
 public:
  explicit Dft(std::size_t size) : m_(size) {
    if (m_ == 0) throw NumericalGuardError("Dft: empty transform");
    pow2_ = (m_ & (m_ - 1)) == 0;
    if (pow2_) return;

    big_ = 1;
    while (big_ < 2 * m_ - 1) big_ <<= 1;

    chirp_.resize(m_);
    const long double pi = 3.141592653589793238462643383279502884L;
    for (std::size_t j = 0; j < m_; ++j) {
      // j^2 mod 2m keeps the angle argument small and exact.
      const std::uint64_t r =
          (static_cast<std::uint64_t>(j) * j) % (2 * m_);
      const long double ang = pi * static_cast<long double>(r) / m_;
      chirp_[j] = {static_cast<double>(cosl(ang)),
                   static_cast<double>(-sinl(ang))};
    }
    filter_fft_.assign(big_, {0.0, 0.0});
    for (std::size_t j = 0; j < m_; ++j) {
      const std::complex<double> b = std::conj(chirp_[j]);
      filter_fft_[j] = b;
      if (j != 0) filter_fft_[big_ - j] = b;
    }
    fft_pow2(filter_fft_, false);
  }

  std::size_t size() const { return m_; }

  std::vector<std::complex<double>> forward(
      const std::vector<double>& input) const {
    std::vector<std::complex<double>> a(input.begin(), input.end());
    transform(a, false);
    return a;
  }

  // Inverse transform of a spectrum, keeping only real parts (the imaginary
  // parts of a convolved real PMF are pure roundoff).
  std::vector<double> inverse_real(std::vector<std::complex<double>> spec) const {
    transform(spec, true);
    std::vector<double> out(m_);
    const double inv = 1.0 / static_cast<double>(m_);
    for (std::size_t i = 0; i < m_; ++i) out[i] = spec[i].real() * inv;
    return out;
  }

  void transform(std::vector<std::complex<double>>& a, bool inverse) const {
    if (a.size() != m_) throw NumericalGuardError("Dft: size mismatch");
    if (pow2_) {
      fft_pow2(a, inverse);
      if (inverse) {  // fft_pow2 already divided; undo for unnormalized API
        for (auto& x : a) x *= static_cast<double>(m_);
      }
      return;
    }
    std::vector<std::complex<double>> work(big_, {0.0, 0.0});
    if (!inverse) {
      for (std::size_t j = 0; j < m_; ++j) work[j] = a[j] * chirp_[j];
    } else {
      for (std::size_t j = 0; j < m_; ++j) work[j] = a[j] * std::conj(chirp_[j]);
    }
    fft_pow2(work, false);
    if (!inverse) {
      for (std::size_t j = 0; j < big_; ++j) work[j] *= filter_fft_[j];
    } else {
      for (std::size_t j = 0; j < big_; ++j) work[j] *= std::conj(filter_fft_[j]);
    }
    fft_pow2(work, true);
    if (!inverse) {
      for (std::size_t k = 0; k < m_; ++k) a[k] = work[k] * chirp_[k];
    } else {
      for (std::size_t k = 0; k < m_; ++k) a[k] = work[k] * std::conj(chirp_[k]);
    }
  }

 private:
  std::size_t m_ = 0;
  std::size_t big_ = 0;
  bool pow2_ = false;
  std::vector<std::complex<double>> chirp_;
  std::vector<std::complex<double>> filter_fft_;
};

}  // namespace dpacct

#endif  // DPACCT_FFT_HPP_
