#include "coughkit/manifest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

#include "coughkit/error.hpp"

namespace coughkit::pipeline {

namespace {

const std::vector<std::string_view> kColumns = {
    "id",           "path",          "label",         "source",
    "split",        "duration_s",    "parent_id",     "segment_index",
    "segment_start", "segment_end",  "segment_method", "detection_prob",
    "feature_path", "augmentation",
};

template <typename T>
std::optional<T> parse_number(std::string_view s, std::string_view column, std::size_t line) {
  if (s.empty()) return std::nullopt;
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(Errc::FormatError, "record " + std::to_string(line) + ": bad " + std::string(column) + " \"" +
                                       std::string(s) + "\"");
  }
  return value;
}

template <typename T>
std::string optional_text(const std::optional<T>& v) {
  if (!v) return {};
  if constexpr (std::is_floating_point_v<T>) {
    return format_double(*v);
  } else {
    return std::to_string(*v);
  }
}

}  // namespace

std::string_view to_string(RowLabel l) noexcept {
  switch (l) {
    case RowLabel::Positive: return "positive";
    case RowLabel::Negative: return "negative";
    case RowLabel::Unknown: return "unknown";
  }
  return "unknown";
}

std::string_view to_string(Split s) noexcept {
  switch (s) {
    case Split::Train: return "train";
    case Split::Devel: return "devel";
    case Split::Test: return "test";
    case Split::Unassigned: return "unassigned";
  }
  return "unassigned";
}

RowLabel parse_label(std::string_view s) {
  if (s == "positive" || s == "1") return RowLabel::Positive;
  if (s == "negative" || s == "0") return RowLabel::Negative;
  if (s == "unknown" || s.empty()) return RowLabel::Unknown;
  throw Error(Errc::FormatError, "unknown label \"" + std::string(s) + "\"");
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "devel" || s == "dev") return Split::Devel;
  if (s == "test") return Split::Test;
  if (s == "unassigned" || s.empty()) return Split::Unassigned;
  throw Error(Errc::FormatError, "unknown split \"" + std::string(s) + "\"");
}

const std::vector<std::string_view>& manifest_columns() noexcept { return kColumns; }

void Manifest::add(ManifestRow row) {
  if (row.id.empty()) throw Error(Errc::FormatError, "empty row id");
  if (row.detection_prob && !(*row.detection_prob >= 0.0 && *row.detection_prob <= 1.0)) {
    throw Error(Errc::FormatError, "detection_prob of \"" + row.id + "\" outside [0, 1]");
  }
  if (!index_.emplace(row.id, rows_.size()).second) throw Error(Errc::DuplicateId, "\"" + row.id + "\"");
  rows_.push_back(std::move(row));
}

const ManifestRow* Manifest::find(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &rows_[it->second];
}

std::filesystem::path Manifest::resolve(const std::string& relative) const {
  const std::filesystem::path p(relative);
  return p.is_absolute() ? p : base_dir_ / p;
}

std::string Manifest::relativize(const std::filesystem::path& p) const {
  if (base_dir_.empty()) return p.generic_string();
  const auto rel = std::filesystem::proximate(p, base_dir_);
  const auto text = rel.generic_string();
  if (text.starts_with("..")) return std::filesystem::absolute(p).generic_string();
  return text;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
      field_started = false;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      record.push_back(std::move(field));
      field.clear();
      field_started = false;
      records.push_back(std::move(record));
      record.clear();
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw Error(Errc::FormatError, "unterminated quoted field");
  if (field_started || !record.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  return records;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (const char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

Manifest Manifest::parse(std::string_view text, std::filesystem::path base_dir) {
  const auto records = parse_csv(text);
  if (records.empty()) throw Error(Errc::FormatError, "manifest has no header");
  const auto& header = records.front();

  // Required columns: id, path. Others may be absent in hand-written inputs.
  std::vector<int> slot(kColumns.size(), -1);
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto it = std::find(kColumns.begin(), kColumns.end(), header[c]);
    if (it == kColumns.end()) throw Error(Errc::FormatError, "unknown manifest column \"" + header[c] + "\"");
    slot[static_cast<std::size_t>(it - kColumns.begin())] = static_cast<int>(c);
  }
  if (slot[0] < 0 || slot[1] < 0) throw Error(Errc::FormatError, "manifest needs id and path columns");

  Manifest m(std::move(base_dir));
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() == 1 && rec[0].empty()) continue;
    if (rec.size() != header.size()) {
      throw Error(Errc::FormatError, "record " + std::to_string(r) + " has " + std::to_string(rec.size()) +
                                         " fields, header has " + std::to_string(header.size()));
    }
    auto get = [&](std::size_t col) -> std::string_view {
      return slot[col] < 0 ? std::string_view{} : std::string_view(rec[static_cast<std::size_t>(slot[col])]);
    };
    ManifestRow row;
    row.id = get(0);
    row.path = get(1);
    row.label = parse_label(get(2));
    row.source = get(3);
    row.split = parse_split(get(4));
    row.duration_s = parse_number<double>(get(5), "duration_s", r);
    row.parent_id = get(6);
    row.segment_index = parse_number<int>(get(7), "segment_index", r);
    row.segment_start = parse_number<std::size_t>(get(8), "segment_start", r);
    row.segment_end = parse_number<std::size_t>(get(9), "segment_end", r);
    row.segment_method = get(10);
    row.detection_prob = parse_number<double>(get(11), "detection_prob", r);
    row.feature_path = get(12);
    row.augmentation = get(13);
    m.add(std::move(row));
  }
  return m;
}

Manifest Manifest::read(const std::filesystem::path& csv) {
  std::ifstream in(csv, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open manifest " + csv.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse(text, csv.parent_path());
}

std::string Manifest::to_csv() const {
  std::ostringstream out;
  for (std::size_t c = 0; c < kColumns.size(); ++c) out << (c ? "," : "") << kColumns[c];
  out << '\n';
  for (const auto& row : rows_) {
    const std::string fields[] = {
        row.id,
        row.path,
        std::string(to_string(row.label)),
        row.source,
        std::string(to_string(row.split)),
        optional_text(row.duration_s),
        row.parent_id,
        optional_text(row.segment_index),
        optional_text(row.segment_start),
        optional_text(row.segment_end),
        row.segment_method,
        optional_text(row.detection_prob),
        row.feature_path,
        row.augmentation,
    };
    for (std::size_t c = 0; c < std::size(fields); ++c) out << (c ? "," : "") << csv_escape(fields[c]);
    out << '\n';
  }
  return out.str();
}

void Manifest::write(const std::filesystem::path& csv) const {
  if (csv.has_parent_path()) std::filesystem::create_directories(csv.parent_path());
  std::ofstream out(csv, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write manifest " + csv.string());
  out << to_csv();
}

}  // namespace coughkit::pipeline
