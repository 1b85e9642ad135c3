#include <algorithm>
#include <cmath>

#include "coughkit/cough_detect.hpp"
#include "coughkit/dsp.hpp"
#include "coughkit/error.hpp"

namespace coughkit::detect {

namespace {

constexpr std::array<std::string_view, kFeatureCount> kNames = {
    "zcr",
    "rms",
    "crest_factor",
    "dominant_freq_hz",
    "spectral_centroid_hz",
    "spectral_rolloff85_hz",
    "spectral_bandwidth_hz",
    "spectral_flatness",
    "spectral_slope",
    "spectral_decrease",
    "spectral_skewness",
    "spectral_kurtosis",
    "mfcc_mean_1",
    "mfcc_mean_2",
    "mfcc_mean_3",
    "mfcc_mean_4",
    "mfcc_mean_5",
    "mfcc_mean_6",
};

enum Index : std::size_t {
  kZcr,
  kRms,
  kCrest,
  kDominant,
  kCentroid,
  kRolloff,
  kBandwidth,
  kFlatness,
  kSlope,
  kDecrease,
  kSkewness,
  kKurtosis,
  kMfcc1,
};

constexpr double kRolloffFraction = 0.85;
constexpr double kPowerEpsilon = 1e-20;
constexpr std::size_t kSpectralCount = kMfcc1 - kDominant;

// Spectral features of one frame, in feature order starting at kDominant.
// Returns false for a frame with no energy.
bool frame_features(std::span<const double> power, double bin_hz, std::array<double, kSpectralCount>& out) {
  const std::size_t bins = power.size();
  std::vector<double> mag(bins);
  double mag_sum = 0.0;
  double power_sum = 0.0;
  std::size_t peak = 0;
  for (std::size_t k = 0; k < bins; ++k) {
    mag[k] = std::sqrt(power[k]);
    mag_sum += mag[k];
    power_sum += power[k];
    if (power[k] > power[peak]) peak = k;
  }
  if (!(mag_sum > 0.0)) return false;

  double centroid = 0.0;
  for (std::size_t k = 0; k < bins; ++k) centroid += k * bin_hz * mag[k];
  centroid /= mag_sum;

  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (std::size_t k = 0; k < bins; ++k) {
    const double d = k * bin_hz - centroid;
    const double w = mag[k] / mag_sum;
    m2 += w * d * d;
    m3 += w * d * d * d;
    m4 += w * d * d * d * d;
  }
  const double bandwidth = std::sqrt(m2);
  const double skewness = bandwidth > 0.0 ? m3 / (m2 * bandwidth) : 0.0;
  const double kurtosis = bandwidth > 0.0 ? m4 / (m2 * m2) : 0.0;

  double rolloff = (bins - 1) * bin_hz;
  double cumulative = 0.0;
  for (std::size_t k = 0; k < bins; ++k) {
    cumulative += power[k];
    if (cumulative >= kRolloffFraction * power_sum) {
      rolloff = k * bin_hz;
      break;
    }
  }

  double log_sum = 0.0, lin_sum = 0.0;
  for (std::size_t k = 0; k < bins; ++k) {
    log_sum += std::log(power[k] + kPowerEpsilon);
    lin_sum += power[k] + kPowerEpsilon;
  }
  const double n = static_cast<double>(bins);
  const double flatness = std::clamp(std::exp(log_sum / n) / (lin_sum / n), 0.0, 1.0);

  double sf = 0.0, sff = 0.0, sfs = 0.0;
  for (std::size_t k = 0; k < bins; ++k) {
    const double f = k * bin_hz;
    sf += f;
    sff += f * f;
    sfs += f * mag[k];
  }
  const double denom = mag_sum * (n * sff - sf * sf);
  const double slope = denom != 0.0 ? (n * sfs - sf * mag_sum) / denom : 0.0;

  double decrease_num = 0.0, decrease_den = 0.0;
  for (std::size_t k = 1; k < bins; ++k) {
    decrease_num += (mag[k] - mag[0]) / static_cast<double>(k);
    decrease_den += mag[k];
  }
  const double decrease = decrease_den > 0.0 ? decrease_num / decrease_den : 0.0;

  out = {peak * bin_hz, centroid, rolloff, bandwidth, flatness, slope, decrease, skewness, kurtosis};
  return true;
}

}  // namespace

const std::array<std::string_view, kFeatureCount>& feature_names() noexcept { return kNames; }

std::optional<std::size_t> feature_index(std::string_view name) noexcept {
  const auto it = std::find(kNames.begin(), kNames.end(), name);
  if (it == kNames.end()) return std::nullopt;
  return static_cast<std::size_t>(it - kNames.begin());
}

double AcousticFeatureVector::at(std::string_view name) const {
  const auto idx = feature_index(name);
  if (!idx) throw Error(Errc::UnknownFeature, std::string(name));
  return values[*idx];
}

FeatureExtraction extract_detection_features(const audio::Waveform& w) {
  if (w.samples.size() < static_cast<std::size_t>(kDetectFrameLen)) {
    throw Error(Errc::EmptySignal, "need at least " + std::to_string(kDetectFrameLen) + " samples, got " +
                                       std::to_string(w.samples.size()));
  }

  FeatureExtraction result;
  auto& x = result.features;
  const double rms = audio::rms(w.samples);
  if (!(rms > 0.0)) {
    result.degenerate = true;
    return result;
  }

  const auto& s = w.samples;
  std::size_t crossings = 0;
  float peak = 0.0f;
  for (std::size_t i = 0; i < s.size(); ++i) {
    peak = std::max(peak, std::abs(s[i]));
    if (i > 0 && (s[i - 1] >= 0.0f) != (s[i] >= 0.0f)) ++crossings;
  }
  x[kZcr] = static_cast<double>(crossings) / static_cast<double>(s.size());
  x[kRms] = rms;
  x[kCrest] = peak / rms;

  const dsp::StftParams params{.n_fft = kDetectFrameLen, .hop = kDetectHop, .win_length = kDetectFrameLen, .power = 2};
  const auto spec = dsp::stft(w, params);
  const double bin_hz = static_cast<double>(w.sample_rate_hz) / kDetectFrameLen;
  std::array<double, kSpectralCount> sums{};
  std::size_t voiced = 0;
  for (std::size_t f = 0; f < spec.values.rows(); ++f) {
    std::array<double, kSpectralCount> frame{};
    if (!frame_features(spec.values.row(f), bin_hz, frame)) continue;
    for (std::size_t i = 0; i < kSpectralCount; ++i) sums[i] += frame[i];
    ++voiced;
  }
  if (voiced > 0) {
    for (std::size_t i = 0; i < kSpectralCount; ++i) x[kDominant + i] = sums[i] / static_cast<double>(voiced);
  }

  const auto cepstra = dsp::mfcc(w, 6, /*exclude_c0=*/true);
  for (std::size_t c = 0; c < 6; ++c) {
    double acc = 0.0;
    for (std::size_t f = 0; f < cepstra.rows(); ++f) acc += cepstra(f, c);
    x[kMfcc1 + c] = acc / static_cast<double>(cepstra.rows());
  }
  return result;
}

}  // namespace coughkit::detect
