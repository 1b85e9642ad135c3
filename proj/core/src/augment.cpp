#include "coughkit/augment.hpp"

#include <algorithm>
#include <cmath>

#include "coughkit/error.hpp"

namespace coughkit::augment {

void AugmentConfig::validate() const {
  if (!(alpha > 0.0)) throw Error(Errc::InvalidAlpha, "mixup alpha must be positive");
  if (n_freq_masks < 0 || n_time_masks < 0 || max_freq_width < 0) {
    throw Error(Errc::InvalidConfig, "mask counts and widths must be >= 0");
  }
  if (!(max_time_frac >= 0.0 && max_time_frac <= 1.0)) {
    throw Error(Errc::InvalidConfig, "max_time_frac must lie in [0, 1]");
  }
  if (!(snr_min_db <= snr_max_db)) throw Error(Errc::InvalidConfig, "snr_min_db must not exceed snr_max_db");
}

double sample_mixup_lambda(double alpha, Rng& rng) {
  if (!(alpha > 0.0)) throw Error(Errc::InvalidAlpha, "mixup alpha must be positive");
  std::gamma_distribution<double> gamma(alpha, 1.0);
  for (;;) {
    const double x = gamma(rng);
    const double y = gamma(rng);
    // Both draws can underflow to zero for very small alpha.
    if (x + y > 0.0) return std::clamp(x / (x + y), 0.0, 1.0);
  }
}

namespace {

double blend(double a, double b, double lambda) noexcept {
  const double v = lambda * a + (1.0 - lambda) * b;
  return std::clamp(v, std::min(a, b), std::max(a, b));
}

void check_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(Errc::InvalidParams, "lambda must lie in [0, 1]");
}

}  // namespace

std::vector<double> mixup(std::span<const double> xa, std::span<const double> xb, double lambda) {
  if (xa.size() != xb.size()) throw Error(Errc::ShapeMismatch, "mixup operands differ in size");
  check_lambda(lambda);
  if (lambda == 1.0) return {xa.begin(), xa.end()};
  if (lambda == 0.0) return {xb.begin(), xb.end()};
  std::vector<double> out(xa.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = blend(xa[i], xb[i], lambda);
  return out;
}

SoftLabel mixup(const SoftLabel& ya, const SoftLabel& yb, double lambda) {
  check_lambda(lambda);
  if (lambda == 1.0) return ya;
  if (lambda == 0.0) return yb;
  const double positive = blend(ya.positive, yb.positive, lambda);
  return {1.0 - positive, positive};
}

std::pair<Matrix, SoftLabel> mixup(const Matrix& xa, const Matrix& xb, const SoftLabel& ya, const SoftLabel& yb,
                                   double lambda) {
  if (!xa.same_shape(xb)) {
    throw Error(Errc::ShapeMismatch, std::to_string(xa.rows()) + "x" + std::to_string(xa.cols()) + " vs " +
                                         std::to_string(xb.rows()) + "x" + std::to_string(xb.cols()));
  }
  Matrix out(xa.rows(), xa.cols());
  out.data() = mixup(std::span<const double>(xa.data()), std::span<const double>(xb.data()), lambda);
  return {std::move(out), mixup(ya, yb, lambda)};
}

Matrix fit_frames(const Matrix& m, std::size_t frames) {
  if (m.rows() == 0) throw Error(Errc::EmptyInput, "cannot fit an empty matrix");
  Matrix out(frames, m.cols());
  for (std::size_t f = 0; f < frames; ++f) {
    const auto src = m.row(f % m.rows());
    std::copy(src.begin(), src.end(), out.row(f).begin());
  }
  return out;
}

std::vector<Mask> draw_masks(std::size_t frames, std::size_t bands, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  if (static_cast<std::size_t>(cfg.max_freq_width) > bands && cfg.n_freq_masks > 0) {
    throw Error(Errc::InvalidConfig, "max_freq_width exceeds the number of bands");
  }
  const auto max_time = static_cast<std::size_t>(std::floor(cfg.max_time_frac * static_cast<double>(frames)));
  auto uniform = [&rng](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };

  std::vector<Mask> masks;
  for (int i = 0; i < cfg.n_freq_masks; ++i) {
    const std::size_t width = uniform(0, static_cast<std::size_t>(cfg.max_freq_width));
    masks.push_back({Axis::Frequency, uniform(0, bands - width), width});
  }
  for (int i = 0; i < cfg.n_time_masks; ++i) {
    const std::size_t width = uniform(0, max_time);
    masks.push_back({Axis::Time, uniform(0, frames - width), width});
  }
  return masks;
}

Matrix apply_masks(const Matrix& m, std::span<const Mask> masks, double fill) {
  Matrix out = m;
  for (const Mask& mask : masks) {
    const std::size_t limit = mask.axis == Axis::Frequency ? m.cols() : m.rows();
    if (mask.start + mask.width > limit) throw Error(Errc::InvalidConfig, "mask exceeds matrix bounds");
    if (mask.axis == Axis::Frequency) {
      for (std::size_t f = 0; f < m.rows(); ++f) {
        for (std::size_t b = mask.start; b < mask.start + mask.width; ++b) out(f, b) = fill;
      }
    } else {
      for (std::size_t f = mask.start; f < mask.start + mask.width; ++f) {
        for (std::size_t b = 0; b < m.cols(); ++b) out(f, b) = fill;
      }
    }
  }
  return out;
}

SpecAugmentResult spec_augment(const dsp::LogMelSpectrogram& spec, const AugmentConfig& cfg, Rng& rng) {
  SpecAugmentResult result;
  result.masks = draw_masks(spec.frames(), spec.bands(), cfg, rng);
  if (cfg.fill == MaskFill::Mean && !spec.values.empty()) {
    double acc = 0.0;
    for (const double v : spec.values.data()) acc += v;
    result.fill_value = acc / static_cast<double>(spec.values.data().size());
  }
  result.spectrogram.ref_value = spec.ref_value;
  result.spectrogram.values = apply_masks(spec.values, result.masks, result.fill_value);
  return result;
}

NoiseMix add_noise(const audio::Waveform& clean, const audio::Waveform& noise, double snr_db, Rng& rng) {
  if (clean.sample_rate_hz != noise.sample_rate_hz) {
    throw Error(Errc::RateMismatch, std::to_string(clean.sample_rate_hz) + " Hz clean vs " +
                                        std::to_string(noise.sample_rate_hz) + " Hz noise");
  }
  const double clean_power = audio::mean_square(clean.samples);
  if (!(clean_power > 0.0)) throw Error(Errc::SilentInput, "clean signal is silent");
  if (!(audio::mean_square(noise.samples) > 0.0)) throw Error(Errc::SilentInput, "noise signal is silent");

  NoiseMix mix;
  const std::size_t len = clean.samples.size();
  const std::size_t noise_len = noise.samples.size();
  if (noise_len > len) mix.offset = std::uniform_int_distribution<std::size_t>(0, noise_len - len)(rng);

  std::vector<double> excerpt(len);
  for (std::size_t i = 0; i < len; ++i) excerpt[i] = noise.samples[(mix.offset + i) % noise_len];
  double noise_power = 0.0;
  for (const double v : excerpt) noise_power += v * v;
  noise_power /= static_cast<double>(len);
  if (!(noise_power > 0.0)) throw Error(Errc::SilentInput, "noise excerpt is silent");

  mix.gain = std::sqrt(clean_power / (noise_power * std::pow(10.0, snr_db / 10.0)));
  mix.mixed = clean;
  mix.added_noise.resize(len);
  for (std::size_t i = 0; i < len; ++i) {
    mix.added_noise[i] = static_cast<float>(mix.gain * excerpt[i]);
    mix.mixed.samples[i] = static_cast<float>(clean.samples[i] + mix.gain * excerpt[i]);
  }
  return mix;
}

double sample_snr_db(const AugmentConfig& cfg, Rng& rng) {
  if (cfg.snr_min_db == cfg.snr_max_db) return cfg.snr_min_db;
  return std::uniform_real_distribution<double>(cfg.snr_min_db, cfg.snr_max_db)(rng);
}

NoiseBank::NoiseBank(std::vector<audio::Waveform> clips) : clips_(std::move(clips)) {}

NoiseBank NoiseBank::from_directory(const std::filesystem::path& dir, int sample_rate_hz) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".wav") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<audio::Waveform> clips;
  for (const auto& file : files) {
    auto clip = audio::resample(audio::read_wav_file(file), sample_rate_hz);
    if (audio::mean_square(clip.samples) > 0.0) clips.push_back(std::move(clip));
  }
  return NoiseBank(std::move(clips));
}

const audio::Waveform& NoiseBank::draw(Rng& rng) const {
  if (clips_.empty()) throw Error(Errc::EmptyInput, "noise bank is empty");
  return clips_[std::uniform_int_distribution<std::size_t>(0, clips_.size() - 1)(rng)];
}

}  // namespace coughkit::augment
