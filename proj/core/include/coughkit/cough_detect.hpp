#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coughkit/audio_io.hpp"

namespace coughkit::detect {

inline constexpr std::size_t kFeatureCount = 18;

/// Feature order shared by the extractor and every model document.
///
///   0  zcr                    sign changes / length
///   1  rms                    sqrt(mean x^2)
///   2  crest_factor           max|x| / rms
///   3  dominant_freq_hz       frequency of the strongest power bin
///   4  spectral_centroid_hz   magnitude-weighted mean frequency
///   5  spectral_rolloff85_hz  lowest frequency holding 85% of the power
///   6  spectral_bandwidth_hz  magnitude-weighted std of frequency
///   7  spectral_flatness      geometric / arithmetic mean of power
///   8  spectral_slope         regression slope of magnitude on frequency,
///                             divided by total magnitude
///   9  spectral_decrease      sum_{k>=2} (S_k - S_1)/(k-1) / sum_{k>=2} S_k
///  10  spectral_skewness      third standardized moment of the magnitude
///  11  spectral_kurtosis      fourth standardized moment (not excess)
///  12..17 mfcc_mean_1..6      frame means of cepstral coefficients 1-6
///
/// 0-2 are computed over the whole signal, 3-11 per frame then averaged over
/// frames that carry energy, 12-17 from the canonical 64-band log-mel.
const std::array<std::string_view, kFeatureCount>& feature_names() noexcept;
std::optional<std::size_t> feature_index(std::string_view name) noexcept;

struct AcousticFeatureVector {
  std::array<double, kFeatureCount> values{};

  double operator[](std::size_t i) const noexcept { return values[i]; }
  double& operator[](std::size_t i) noexcept { return values[i]; }
  /// Throws UnknownFeature.
  double at(std::string_view name) const;

  friend bool operator==(const AcousticFeatureVector&, const AcousticFeatureVector&) = default;
};

struct FeatureExtraction {
  AcousticFeatureVector features;
  /// Zero-energy input; features hold the all-zero default vector.
  bool degenerate = false;
};

inline constexpr int kDetectFrameLen = 1024;
inline constexpr int kDetectHop = 512;

/// Expects a peak-normalized waveform of at least one analysis frame
/// (kDetectFrameLen samples); throws EmptySignal otherwise.
FeatureExtraction extract_detection_features(const audio::Waveform& w);

/// Internal node: x[feature] < threshold goes to `left`, otherwise `right`;
/// a non-finite feature value takes the default branch. Leaves have
/// feature == -1.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  bool default_left = true;
  double leaf = 0.0;

  bool is_leaf() const noexcept { return feature < 0; }

  static TreeNode make_leaf(double value) { return TreeNode{.leaf = value}; }
  static TreeNode make_split(int feature, double threshold, int left, int right, bool default_left = true) {
    return TreeNode{.feature = feature, .threshold = threshold, .left = left, .right = right,
                    .default_left = default_left};
  }
};

/// Node 0 is the root.
struct Tree {
  std::vector<TreeNode> nodes;
};

/// Immutable after construction; scoring is thread-safe.
class TreeEnsembleModel {
 public:
  TreeEnsembleModel() = default;
  /// Validates feature indices, child references, and acyclicity
  /// (SyntaxError / UnknownFeature / CyclicTree).
  TreeEnsembleModel(double base_score, std::vector<Tree> trees);

  double base_score() const noexcept { return base_score_; }
  const std::vector<Tree>& trees() const noexcept { return trees_; }

  /// base_score + sum of the leaf reached in each tree.
  double margin(const AcousticFeatureVector& x) const noexcept;

 private:
  double base_score_ = 0.0;
  std::vector<Tree> trees_;
};

/// Parses the JSON tree-dump format documented in docs/formats.md.
TreeEnsembleModel parse_model(std::string_view text);
TreeEnsembleModel load_model(const std::filesystem::path& path);
/// Serializes back to the same document format.
std::string dump_model(const TreeEnsembleModel& model);

struct DetectionResult {
  double probability = 0.5;
  std::string source_id;
};

double logistic(double z) noexcept;

/// logistic(base_score + sum_t leaf_t(x))
DetectionResult predict_cough_probability(const TreeEnsembleModel& model, const AcousticFeatureVector& x,
                                          std::string source_id = {});

/// Keeps items with probability >= tau, order preserved. InvalidThreshold
/// unless 0 <= tau <= 1.
std::vector<DetectionResult> filter_by_threshold(std::span<const DetectionResult> results, double tau);

/// Small hand-built ensemble shipped with the library: it scores
/// impulsive, decaying, broadband recordings as coughs.
std::string_view demo_model_json() noexcept;
const TreeEnsembleModel& demo_model();

}  // namespace coughkit::detect
