#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace coughkit::dsp {

/// Forward DFT of a real frame, returning bins 0..n/2. Power-of-two sizes
/// use an iterative radix-2 transform; other sizes fall back to a direct
/// sum over precomputed twiddles.
class RealDft {
 public:
  explicit RealDft(std::size_t n);

  std::size_t size() const noexcept { return n_; }
  std::size_t bins() const noexcept { return n_ / 2 + 1; }

  /// `frame.size()` must equal size(); `out.size()` must equal bins().
  void transform(std::span<const double> frame, std::span<std::complex<double>> out) const;

 private:
  std::size_t n_;
  bool radix2_;
  std::vector<std::complex<double>> twiddles_;
  std::vector<std::size_t> bit_reverse_;
};

}  // namespace coughkit::dsp
