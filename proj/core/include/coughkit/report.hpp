#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coughkit/manifest.hpp"

namespace coughkit::pipeline {

/// A CSV-ready table.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_csv() const;
  void write(const std::filesystem::path& path) const;
};

/// Rows with a duration counted into [k*bin_s, (k+1)*bin_s) bins, from the
/// lowest to the highest occupied bin. Columns: bin_start_s,bin_end_s,count.
Table duration_histogram(const Manifest& m, double bin_s = 5.0);

/// Columns: source,label,count. Sorted by source then label.
Table class_counts(const Manifest& m);

/// Rows with detection_prob >= each threshold. Columns:
/// threshold,kept_count. Rows without a probability are never kept.
Table detection_counts(const Manifest& m, std::span<const double> thresholds);

/// Equal-width probability bins over [0, 1]; the last bin is closed.
/// Columns: bin_start,bin_end,count.
Table detection_histogram(const Manifest& m, int bins = 10);

struct SummaryLine {
  std::string augmentation;
  std::string feature;
  std::string classifier;
  std::optional<double> ua;
};

/// Fixed-width text table: Augmentation | Feature | Classifier | UA (%).
std::string summary_text(std::span<const SummaryLine> lines);

/// Writes duration_histogram.csv, class_counts.csv, detection_counts.csv,
/// and detection_histogram.csv into `dir`.
void write_report(const Manifest& m, const std::filesystem::path& dir);

}  // namespace coughkit::pipeline
