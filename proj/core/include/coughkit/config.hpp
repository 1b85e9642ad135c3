#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "coughkit/augment.hpp"
#include "coughkit/manifest.hpp"
#include "coughkit/segmentation.hpp"
#include "coughkit/train_eval.hpp"

namespace coughkit::pipeline {

enum class Stage { Prepare, Detect, Segment, Featurize, Augment, Train, Eval };

std::string_view to_string(Stage s) noexcept;
/// InvalidConfig on an unknown name.
Stage parse_stage(std::string_view name);
/// All stages in default execution order.
const std::vector<Stage>& all_stages() noexcept;

struct PipelineConfig {
  std::filesystem::path manifest;
  std::filesystem::path out_dir = "out";
  std::optional<std::uint64_t> seed;
  /// Worker threads per stage; 0 picks the hardware concurrency.
  unsigned threads = 0;

  /// Enabled stages; order within this list is irrelevant.
  std::vector<Stage> stages = all_stages();
  /// Either {Detect, Segment} or {Segment, Detect}.
  std::vector<Stage> detect_segment_order = {Stage::Detect, Stage::Segment};

  double threshold = 0.9;
  /// Empty selects the built-in demo detector.
  std::filesystem::path detector_model;

  seg::SegmenterConfig segmenter;

  augment::AugmentConfig augment;
  int specaugment_copies = 1;
  int noise_copies = 0;
  std::filesystem::path noise_dir;

  train::TrainConfig train;
  double split_fraction = 0.85;
  /// Per-source label whitelist for training rows. A source absent from the
  /// map keeps every label.
  std::map<std::string, std::vector<RowLabel>> train_source_labels;

  bool enabled(Stage s) const;
  /// Stages to execute, in order.
  std::vector<Stage> execution_order() const;
  std::uint64_t require_seed() const;

  /// InvalidConfig on any out-of-range value or a missing seed.
  void validate() const;
  /// InvalidConfig if a referenced input path does not exist.
  void check_paths() const;
};

/// Ordered key/value settings as read from a file or the command line.
using Settings = std::vector<std::pair<std::string, std::string>>;

struct ConfigKey {
  std::string_view name;
  std::string_view help;
};

/// Every recognised key. Each has a matching `--name-with-dashes` CLI flag.
const std::vector<ConfigKey>& config_keys() noexcept;

/// Parses `key = value` lines; `#` starts a comment. InvalidConfig on
/// malformed lines or unknown keys.
Settings parse_settings(std::string_view text);
Settings read_settings(const std::filesystem::path& path);

/// Applies settings in order, later entries winning. InvalidConfig on an
/// unknown key or unparsable value.
void apply_settings(PipelineConfig& cfg, const Settings& settings);

/// Serializes every key in `config_keys()` order.
std::string to_settings_text(const PipelineConfig& cfg);

}  // namespace coughkit::pipeline
