#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coughkit/audio_io.hpp"
#include "coughkit/config.hpp"
#include "coughkit/dsp.hpp"
#include "coughkit/error.hpp"
#include "coughkit/manifest.hpp"
#include "coughkit/report.hpp"
#include "coughkit/train_eval.hpp"

namespace coughkit::pipeline {

/// All audio and feature reads made by the stages go through this
/// interface, so callers can observe or redirect them.
class DataSource {
 public:
  virtual ~DataSource() = default;
  virtual audio::Waveform load_audio(const Manifest& m, const ManifestRow& row) const = 0;
  virtual dsp::LogMelSpectrogram load_features(const Manifest& m, const ManifestRow& row) const = 0;
};

/// Reads `row.path` / `row.feature_path` resolved against the manifest.
class FileDataSource final : public DataSource {
 public:
  audio::Waveform load_audio(const Manifest& m, const ManifestRow& row) const override;
  dsp::LogMelSpectrogram load_features(const Manifest& m, const ManifestRow& row) const override;
};

const DataSource& file_data_source();

/// Copies `row` from manifest `from` to `to`, rewriting its relative paths.
ManifestRow rebase(const ManifestRow& row, const Manifest& from, const Manifest& to);

struct DetectOutput {
  /// Every input row with detection_prob set.
  Manifest scored;
  /// Rows with detection_prob >= threshold.
  Manifest kept;
};

struct SegmentOutput {
  Manifest segments;
  /// Columns: source,split,label,input_rows,rows_with_segments,segments.
  Table counts;
};

struct TrainOutput {
  train::TrainResult result;
  std::vector<std::string> train_ids;
};

struct EvalOutput {
  std::optional<train::MetricsReport> dev;
  std::optional<train::MetricsReport> test;
  /// Columns: metric,value.
  Table metrics;
};

struct RunOptions {
  /// Removes test rows before the first stage; used by sweeps.
  bool drop_test = false;
  /// Evaluates test rows when present.
  bool evaluate_test = true;
};

struct RunResult {
  Manifest manifest;
  /// Row count after each executed stage. Detect reports kept rows.
  std::vector<std::pair<Stage, std::size_t>> stage_rows;
  std::optional<std::size_t> detect_kept;
  std::size_t train_count = 0;
  std::size_t dev_count = 0;
  std::optional<train::Classifier> classifier;
  std::optional<train::MetricsReport> dev;
  std::optional<train::MetricsReport> test;
};

/// Stage runner. Each stage reads the given manifest, writes its artifacts
/// and output manifest under `config().out_dir`, and returns the manifest.
/// Items within a stage run in parallel with per-item seeds; outputs are
/// assembled in input order.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig cfg, const DataSource& data = file_data_source());

  const PipelineConfig& config() const noexcept { return cfg_; }
  void on_warning(std::function<void(std::string_view)> sink) { warn_ = std::move(sink); }

  /// Resamples to 16 kHz, peak-normalizes, writes prepared/<id>.wav, drops
  /// all-zero recordings, and splits unassigned labelled rows into
  /// train/devel by `split_fraction`, stratified by label and source.
  Manifest prepare(const Manifest& in) const;
  DetectOutput detect(const Manifest& in) const;
  /// One row per segment (segments/<id>_s<k>.wav); rows without segments
  /// are dropped.
  SegmentOutput segment(const Manifest& in) const;
  /// Writes features/<id>.lmel for every row.
  Manifest featurize(const Manifest& in) const;
  /// Appends SpecAugment and noise-mixed copies of training rows.
  Manifest augment(const Manifest& in) const;
  /// Trains on labelled train rows permitted by `train_source_labels`.
  /// Writes model/classifier.json and model/loss_history.csv.
  TrainOutput train(const Manifest& in) const;
  /// Scores devel (and optionally test) rows; writes metrics.csv and
  /// predictions.csv.
  EvalOutput evaluate(const Manifest& in, const train::Classifier& classifier, bool include_test) const;

  /// Runs the enabled stages in order. A failure is rethrown as
  /// StageFailure naming the stage.
  RunResult run(const Manifest& in, const RunOptions& options = {}) const;
  /// Reads `config().manifest` and runs.
  RunResult run(const RunOptions& options = {}) const;

 private:
  void warn(std::string_view msg) const;

  PipelineConfig cfg_;
  const DataSource& data_;
  std::function<void(std::string_view)> warn_;
};

/// Runs `fn`, rethrowing any failure as StageFailure naming `stage`.
template <typename Fn>
auto run_stage(Stage stage, Fn&& fn) -> decltype(fn());

std::string classifier_to_json(const train::Classifier& c);
train::Classifier classifier_from_json(std::string_view text);
void save_classifier(const std::filesystem::path& path, const train::Classifier& c);
train::Classifier load_classifier(const std::filesystem::path& path);

/// Metrics table with `<prefix>_` rows in fixed order.
void append_metrics(Table& table, std::string_view prefix, const train::MetricsReport& r, std::size_t count);

// ---------------------------------------------------------------------------
// Sweeps

enum class SweepDimension { Threshold, SplitRatio, Alpha, LearningRate, WeightDecay };

std::string_view to_string(SweepDimension d) noexcept;
/// InvalidConfig on an unknown name.
SweepDimension parse_dimension(std::string_view name);
std::vector<double> default_sweep_values(SweepDimension d);
/// InvalidConfig when `value` is illegal for `d`.
void validate_sweep_value(SweepDimension d, double value);
/// Column names of the sweep CSV for `d`.
std::vector<std::string> sweep_columns(SweepDimension d);

struct SweepCell {
  double value = 0.0;
  std::optional<std::size_t> data_count;
  std::optional<std::size_t> train_count;
  std::optional<std::size_t> dev_count;
  std::optional<double> ua;
  /// "ok" or "error: <message>".
  std::string status;
};

struct SweepResult {
  SweepDimension dimension;
  std::vector<SweepCell> cells;
  Table table;
};

/// One full run per value with everything else fixed, test rows removed.
/// Cell outputs go to <out_dir>/sweep/<dimension>/<k>/ and the table to
/// <out_dir>/sweep/<dimension>.csv. A failing cell is recorded and the
/// sweep continues.
SweepResult run_sweep(const PipelineConfig& base, SweepDimension d, std::span<const double> values,
                      const DataSource& data = file_data_source());

// ---------------------------------------------------------------------------

template <typename Fn>
auto run_stage(Stage stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw Error(Errc::StageFailure, "stage " + std::string(to_string(stage)) + ": " + e.what());
  }
}

}  // namespace coughkit::pipeline
