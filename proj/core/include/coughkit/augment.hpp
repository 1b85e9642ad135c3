#pragma once

#include <cstddef>
#include <filesystem>
#include <utility>
#include <vector>

#include "coughkit/audio_io.hpp"
#include "coughkit/dsp.hpp"
#include "coughkit/matrix.hpp"
#include "coughkit/random.hpp"

namespace coughkit::augment {

enum class MaskFill { Mean, Zero };

struct AugmentConfig {
  double alpha = 0.5;
  int n_freq_masks = 2;
  int max_freq_width = 8;
  int n_time_masks = 2;
  double max_time_frac = 0.1;
  MaskFill fill = MaskFill::Mean;
  double snr_min_db = 0.0;
  double snr_max_db = 15.0;
  std::uint64_t seed = 0;

  /// Throws InvalidConfig (InvalidAlpha for alpha <= 0).
  void validate() const;
};

/// (negative, positive) class weights summing to 1.
struct SoftLabel {
  double negative = 1.0;
  double positive = 0.0;

  static SoftLabel one_hot(bool is_positive) noexcept {
    return is_positive ? SoftLabel{0.0, 1.0} : SoftLabel{1.0, 0.0};
  }
  friend bool operator==(const SoftLabel&, const SoftLabel&) = default;
};

/// Draw from Beta(alpha, alpha). InvalidAlpha unless alpha > 0.
double sample_mixup_lambda(double alpha, Rng& rng);

/// lambda * a + (1 - lambda) * b for both features and labels. Results are
/// clamped into [min(a, b), max(a, b)] so rounding never leaves the hull.
std::pair<Matrix, SoftLabel> mixup(const Matrix& xa, const Matrix& xb, const SoftLabel& ya, const SoftLabel& yb,
                                   double lambda);
std::vector<double> mixup(std::span<const double> xa, std::span<const double> xb, double lambda);
SoftLabel mixup(const SoftLabel& ya, const SoftLabel& yb, double lambda);

/// Cyclically repeats or crops rows so the matrix has `frames` rows.
Matrix fit_frames(const Matrix& m, std::size_t frames);

enum class Axis { Frequency, Time };

/// Contiguous band (Frequency) or frame (Time) range [start, start + width).
struct Mask {
  Axis axis = Axis::Frequency;
  std::size_t start = 0;
  std::size_t width = 0;
  friend bool operator==(const Mask&, const Mask&) = default;
};

/// Frequency widths ~ U{0..max_freq_width}; time widths ~
/// U{0..floor(max_time_frac * frames)}; starts uniform over valid offsets.
std::vector<Mask> draw_masks(std::size_t frames, std::size_t bands, const AugmentConfig& cfg, Rng& rng);

/// Overwrites masked cells with `fill`; every other cell is copied.
Matrix apply_masks(const Matrix& m, std::span<const Mask> masks, double fill);

struct SpecAugmentResult {
  dsp::LogMelSpectrogram spectrogram;
  std::vector<Mask> masks;
  double fill_value = 0.0;
};

SpecAugmentResult spec_augment(const dsp::LogMelSpectrogram& spec, const AugmentConfig& cfg, Rng& rng);

struct NoiseMix {
  audio::Waveform mixed;
  /// Gain applied to the noise excerpt.
  double gain = 0.0;
  /// Offset into the noise signal where the excerpt starts.
  std::size_t offset = 0;
  /// The scaled noise that was added, sample-aligned with the output.
  std::vector<float> added_noise;
};

/// Crops (random offset) or tiles `noise` to the clean length, scales it so
/// 10 log10(P_clean / P_noise) == snr_db with P the mean square, and adds it.
NoiseMix add_noise(const audio::Waveform& clean, const audio::Waveform& noise, double snr_db, Rng& rng);

/// SNR drawn uniformly from [cfg.snr_min_db, cfg.snr_max_db].
double sample_snr_db(const AugmentConfig& cfg, Rng& rng);

/// Noise recordings loaded from a directory of WAV files, kept in file-name
/// order so draws depend only on the rng.
class NoiseBank {
 public:
  NoiseBank() = default;
  explicit NoiseBank(std::vector<audio::Waveform> clips);
  static NoiseBank from_directory(const std::filesystem::path& dir, int sample_rate_hz);

  bool empty() const noexcept { return clips_.empty(); }
  std::size_t size() const noexcept { return clips_.size(); }
  const audio::Waveform& draw(Rng& rng) const;

 private:
  std::vector<audio::Waveform> clips_;
};

}  // namespace coughkit::augment
