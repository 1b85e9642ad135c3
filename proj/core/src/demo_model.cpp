#include "coughkit/cough_detect.hpp"

namespace coughkit::detect {

namespace {

constexpr std::string_view kDemoModel = R"json({
  "base_score": 0.0,
  "feature_names": ["zcr", "rms", "crest_factor", "dominant_freq_hz", "spectral_centroid_hz",
                    "spectral_rolloff85_hz", "spectral_bandwidth_hz", "spectral_flatness", "spectral_slope",
                    "spectral_decrease", "spectral_skewness", "spectral_kurtosis", "mfcc_mean_1", "mfcc_mean_2",
                    "mfcc_mean_3", "mfcc_mean_4", "mfcc_mean_5", "mfcc_mean_6"],
  "trees": [
    {"nodes": [
      {"id": 0, "split": "crest_factor", "threshold": 6.0, "yes": 1, "no": 2},
      {"id": 1, "leaf": -3.0},
      {"id": 2, "split": "rms", "threshold": 0.01, "yes": 3, "no": 4},
      {"id": 3, "leaf": -2.0},
      {"id": 4, "leaf": 3.0}
    ]},
    {"nodes": [
      {"id": 0, "split": "spectral_flatness", "threshold": 0.05, "yes": 1, "no": 2},
      {"id": 1, "leaf": -2.0},
      {"id": 2, "split": "spectral_flatness", "threshold": 0.85, "yes": 3, "no": 4},
      {"id": 3, "leaf": 1.0},
      {"id": 4, "leaf": -1.5}
    ]},
    {"nodes": [
      {"id": 0, "split": "crest_factor", "threshold": 14.0, "yes": 1, "no": 2, "missing": 1},
      {"id": 1, "leaf": -0.8},
      {"id": 2, "leaf": 0.5}
    ]}
  ]
}
)json";

}  // namespace

std::string_view demo_model_json() noexcept { return kDemoModel; }

const TreeEnsembleModel& demo_model() {
  static const TreeEnsembleModel model = parse_model(kDemoModel);
  return model;
}

}  // namespace coughkit::detect
