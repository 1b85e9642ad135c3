#include "coughkit/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "coughkit/error.hpp"

namespace coughkit::pipeline {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string Table::to_csv() const {
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << csv_escape(fields[i]);
    out << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out.str();
}

void Table::write(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << to_csv();
}

Table duration_histogram(const Manifest& m, double bin_s) {
  if (!(bin_s > 0.0)) throw Error(Errc::InvalidParams, "bin width must be positive");
  Table t{{"bin_start_s", "bin_end_s", "count"}, {}};
  std::map<long long, std::size_t> counts;
  for (const auto& row : m.rows()) {
    if (row.duration_s) ++counts[static_cast<long long>(std::floor(*row.duration_s / bin_s))];
  }
  if (counts.empty()) return t;
  for (auto k = counts.begin()->first; k <= counts.rbegin()->first; ++k) {
    const auto it = counts.find(k);
    t.rows.push_back({fixed(static_cast<double>(k) * bin_s, 1), fixed(static_cast<double>(k + 1) * bin_s, 1),
                      std::to_string(it == counts.end() ? 0 : it->second)});
  }
  return t;
}

Table class_counts(const Manifest& m) {
  Table t{{"source", "label", "count"}, {}};
  std::map<std::pair<std::string, std::string>, std::size_t> counts;
  for (const auto& row : m.rows()) ++counts[{row.source, std::string(to_string(row.label))}];
  for (const auto& [key, n] : counts) t.rows.push_back({key.first, key.second, std::to_string(n)});
  return t;
}

Table detection_counts(const Manifest& m, std::span<const double> thresholds) {
  Table t{{"threshold", "kept_count"}, {}};
  for (const double tau : thresholds) {
    const auto kept = std::count_if(m.rows().begin(), m.rows().end(),
                                    [&](const ManifestRow& r) { return r.detection_prob && *r.detection_prob >= tau; });
    t.rows.push_back({fixed(tau, 2), std::to_string(kept)});
  }
  return t;
}

Table detection_histogram(const Manifest& m, int bins) {
  if (bins < 1) throw Error(Errc::InvalidParams, "bins must be >= 1");
  Table t{{"bin_start", "bin_end", "count"}, {}};
  std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
  for (const auto& row : m.rows()) {
    if (!row.detection_prob) continue;
    const auto k = std::min(bins - 1, static_cast<int>(std::floor(*row.detection_prob * bins)));
    ++counts[static_cast<std::size_t>(k)];
  }
  for (int k = 0; k < bins; ++k) {
    t.rows.push_back({fixed(static_cast<double>(k) / bins, 2), fixed(static_cast<double>(k + 1) / bins, 2),
                      std::to_string(counts[static_cast<std::size_t>(k)])});
  }
  return t;
}

std::string summary_text(std::span<const SummaryLine> lines) {
  const std::vector<std::string> header = {"Augmentation", "Feature", "Classifier", "UA (%)"};
  std::vector<std::vector<std::string>> cells;
  for (const auto& l : lines) {
    cells.push_back({l.augmentation, l.feature, l.classifier, l.ua ? fixed(*l.ua * 100.0, 2) : "-"});
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& r : cells) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream out;
  auto row = [&](const std::vector<std::string>& r) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      out << (c ? " | " : "") << r[c];
      if (c + 1 < r.size()) out << std::string(width[c] - r[c].size(), ' ');
    }
    out << '\n';
  };
  row(header);
  std::vector<std::string> rule;
  for (const auto w : width) rule.emplace_back(w, '-');
  row(rule);
  for (const auto& r : cells) row(r);
  return out.str();
}

void write_report(const Manifest& m, const std::filesystem::path& dir) {
  static constexpr double kThresholds[] = {0.6, 0.7, 0.8, 0.9};
  duration_histogram(m).write(dir / "duration_histogram.csv");
  class_counts(m).write(dir / "class_counts.csv");
  detection_counts(m, kThresholds).write(dir / "detection_counts.csv");
  detection_histogram(m).write(dir / "detection_histogram.csv");
}

}  // namespace coughkit::pipeline
