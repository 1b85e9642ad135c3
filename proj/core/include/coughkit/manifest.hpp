#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace coughkit::pipeline {

enum class RowLabel { Positive, Negative, Unknown };
enum class Split { Train, Devel, Test, Unassigned };

std::string_view to_string(RowLabel l) noexcept;
std::string_view to_string(Split s) noexcept;
RowLabel parse_label(std::string_view s);
Split parse_split(std::string_view s);

/// One recording, segment, or augmented copy. Optional columns are empty in
/// the CSV when unset.
struct ManifestRow {
  std::string id;
  /// Audio file, relative to the manifest's directory unless absolute.
  std::string path;
  RowLabel label = RowLabel::Unknown;
  std::string source;
  Split split = Split::Unassigned;
  std::optional<double> duration_s;
  std::string parent_id;
  std::optional<int> segment_index;
  std::optional<std::size_t> segment_start;
  std::optional<std::size_t> segment_end;
  std::string segment_method;
  std::optional<double> detection_prob;
  /// Log-mel file (LMEL), relative like `path`.
  std::string feature_path;
  /// Augmentation that produced this row ("specaugment", "noise"), or empty.
  std::string augmentation;

  friend bool operator==(const ManifestRow&, const ManifestRow&) = default;
};

/// Frozen column order of the manifest CSV.
const std::vector<std::string_view>& manifest_columns() noexcept;

/// Rows plus the directory relative paths resolve against.
class Manifest {
 public:
  Manifest() = default;
  explicit Manifest(std::filesystem::path base_dir) : base_dir_(std::move(base_dir)) {}

  const std::filesystem::path& base_dir() const noexcept { return base_dir_; }
  void set_base_dir(std::filesystem::path dir) { base_dir_ = std::move(dir); }

  const std::vector<ManifestRow>& rows() const noexcept { return rows_; }
  std::vector<ManifestRow>& rows() noexcept { return rows_; }
  std::size_t size() const noexcept { return rows_.size(); }
  bool empty() const noexcept { return rows_.empty(); }

  /// DuplicateId if the id is already present.
  void add(ManifestRow row);
  const ManifestRow* find(std::string_view id) const;

  std::filesystem::path resolve(const std::string& relative) const;
  /// Path as stored in this manifest: relative to base_dir when beneath it.
  std::string relativize(const std::filesystem::path& p) const;

  /// Throws FormatError (bad header, bad field) or DuplicateId.
  static Manifest read(const std::filesystem::path& csv);
  static Manifest parse(std::string_view text, std::filesystem::path base_dir);
  std::string to_csv() const;
  /// Writes the CSV; rows keep paths relative to the file's directory,
  /// which must equal base_dir.
  void write(const std::filesystem::path& csv) const;

 private:
  std::filesystem::path base_dir_;
  std::vector<ManifestRow> rows_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// RFC 4180 style field splitting (quoted fields may hold commas, quotes,
/// and newlines). Returns one vector per record.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);
std::string csv_escape(std::string_view field);
/// Shortest text that round-trips the double.
std::string format_double(double v);

}  // namespace coughkit::pipeline
