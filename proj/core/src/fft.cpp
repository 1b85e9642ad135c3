#include "coughkit/fft.hpp"

#include <bit>
#include <cmath>
#include <numbers>

#include "coughkit/error.hpp"

namespace coughkit::dsp {

RealDft::RealDft(std::size_t n) : n_(n), radix2_(std::has_single_bit(n)) {
  if (n == 0) throw Error(Errc::InvalidParams, "DFT size must be positive");
  const double step = -2.0 * std::numbers::pi / static_cast<double>(n);
  if (radix2_) {
    twiddles_.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) twiddles_[k] = std::polar(1.0, step * static_cast<double>(k));
    const int bits = std::countr_zero(n);
    bit_reverse_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (int b = 0; b < bits; ++b) r |= ((i >> b) & 1u) << (bits - 1 - b);
      bit_reverse_[i] = r;
    }
  } else {
    twiddles_.resize(n);
    for (std::size_t k = 0; k < n; ++k) twiddles_[k] = std::polar(1.0, step * static_cast<double>(k));
  }
}

void RealDft::transform(std::span<const double> frame, std::span<std::complex<double>> out) const {
  if (frame.size() != n_ || out.size() != bins()) {
    throw Error(Errc::InvalidParams, "DFT buffer size mismatch");
  }

  if (!radix2_) {
    for (std::size_t k = 0; k < out.size(); ++k) {
      std::complex<double> acc{};
      std::size_t idx = 0;
      for (std::size_t t = 0; t < n_; ++t) {
        acc += frame[t] * twiddles_[idx];
        idx += k;
        if (idx >= n_) idx -= n_;
      }
      out[k] = acc;
    }
    return;
  }

  std::vector<std::complex<double>> buf(n_);
  for (std::size_t i = 0; i < n_; ++i) buf[bit_reverse_[i]] = frame[i];
  for (std::size_t len = 2; len <= n_; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n_ / len;
    for (std::size_t start = 0; start < n_; start += len) {
      for (std::size_t j = 0; j < half; ++j) {
        const std::complex<double> t = twiddles_[j * stride] * buf[start + j + half];
        buf[start + j + half] = buf[start + j] - t;
        buf[start + j] += t;
      }
    }
  }
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = buf[k];
}

}  // namespace coughkit::dsp
