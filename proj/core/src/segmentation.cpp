#include "coughkit/segmentation.hpp"

#include <algorithm>
#include <cmath>

#include "coughkit/dsp.hpp"
#include "coughkit/error.hpp"

namespace coughkit::seg {

namespace {

struct Run {
  std::size_t first_frame;
  std::size_t end_frame;  // exclusive
};

std::size_t ms_to_samples(double ms, int rate) {
  return static_cast<std::size_t>(std::llround(ms * rate / 1000.0));
}

// Frame runs -> sample intervals, then merge, drop short, pad.
std::vector<SegmentBounds> finish(const audio::Waveform& w, const SegmenterConfig& cfg, const std::vector<Run>& runs,
                                  std::size_t frame_count) {
  const std::size_t len = w.samples.size();
  const auto hop = static_cast<std::size_t>(cfg.hop);
  const auto flen = static_cast<std::size_t>(cfg.frame_len);

  std::vector<std::pair<std::size_t, std::size_t>> spans;
  for (const Run& r : runs) {
    const std::size_t start = r.first_frame * hop;
    const std::size_t end = r.end_frame >= frame_count ? len : (r.end_frame - 1) * hop + flen;
    spans.emplace_back(start, std::min(end, len));
  }

  const std::size_t merge_gap = ms_to_samples(cfg.merge_gap_ms, w.sample_rate_hz);
  std::vector<std::pair<std::size_t, std::size_t>> merged;
  for (const auto& s : spans) {
    if (!merged.empty() && s.first < merged.back().second + merge_gap) {
      merged.back().second = std::max(merged.back().second, s.second);
    } else {
      merged.push_back(s);
    }
  }

  const std::size_t min_len = ms_to_samples(cfg.min_duration_ms, w.sample_rate_hz);
  std::erase_if(merged, [&](const auto& s) { return s.second - s.first < min_len; });

  const std::size_t pad = ms_to_samples(cfg.pad_ms, w.sample_rate_hz);
  std::vector<SegmentBounds> out;
  out.reserve(merged.size());
  for (std::size_t i = 0; i < merged.size(); ++i) {
    // Padding never crosses the midpoint of a neighbouring gap.
    const std::size_t room_before = i == 0 ? merged[i].first : (merged[i].first - merged[i - 1].second) / 2;
    const std::size_t room_after =
        i + 1 == merged.size() ? len - merged[i].second : (merged[i + 1].first - merged[i].second) / 2;
    SegmentBounds b;
    b.start_sample = merged[i].first - std::min(pad, room_before);
    b.end_sample = merged[i].second + std::min(pad, room_after);
    b.parent_id = w.source_id;
    b.index = static_cast<int>(i);
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace

std::string_view to_string(Method m) noexcept { return m == Method::Hysteresis ? "hysteresis" : "rms"; }

Method parse_method(std::string_view name) {
  if (name == "hysteresis") return Method::Hysteresis;
  if (name == "rms") return Method::Rms;
  throw Error(Errc::InvalidConfig, "unknown segmenter \"" + std::string(name) + "\"");
}

void SegmenterConfig::validate() const {
  if (frame_len < 1 || hop < 1) throw Error(Errc::InvalidConfig, "frame_len and hop must be >= 1");
  if (!(lower_ratio > 0.0) || !(upper_ratio >= lower_ratio)) {
    throw Error(Errc::InvalidConfig, "need upper_ratio >= lower_ratio > 0");
  }
  if (!(rms_threshold > 0.0)) throw Error(Errc::InvalidConfig, "rms_threshold must be positive");
  if (!(min_duration_ms >= 0.0) || !(merge_gap_ms >= 0.0) || !(pad_ms >= 0.0)) {
    throw Error(Errc::InvalidConfig, "durations must be >= 0");
  }
}

std::vector<SegmentBounds> segment_hysteresis(const audio::Waveform& w, const SegmenterConfig& cfg) {
  cfg.validate();
  const double global = audio::rms(w.samples);
  if (!(global > 0.0)) return {};
  const double upper = cfg.upper_ratio * global;
  const double lower = cfg.lower_ratio * global;
  const auto env = dsp::frame_rms(w.samples, cfg.frame_len, cfg.hop);

  std::vector<Run> runs;
  bool open = false;
  std::size_t first = 0;
  for (std::size_t f = 0; f < env.size(); ++f) {
    if (!open && env[f] >= upper) {
      open = true;
      first = f;
    } else if (open && env[f] < lower) {
      runs.push_back({first, f});
      open = false;
    }
  }
  if (open) runs.push_back({first, env.size()});
  return finish(w, cfg, runs, env.size());
}

std::vector<SegmentBounds> segment_rms(const audio::Waveform& w, const SegmenterConfig& cfg) {
  cfg.validate();
  const auto env = dsp::frame_rms(w.samples, cfg.frame_len, cfg.hop);
  std::vector<Run> runs;
  std::size_t f = 0;
  while (f < env.size()) {
    if (env[f] < cfg.rms_threshold) {
      ++f;
      continue;
    }
    const std::size_t first = f;
    while (f < env.size() && env[f] >= cfg.rms_threshold) ++f;
    runs.push_back({first, f});
  }
  return finish(w, cfg, runs, env.size());
}

std::vector<SegmentBounds> segment(const audio::Waveform& w, const SegmenterConfig& cfg) {
  return cfg.method == Method::Hysteresis ? segment_hysteresis(w, cfg) : segment_rms(w, cfg);
}

std::string segment_id(std::string_view parent_id, int index) {
  return std::string(parent_id) + "_s" + std::to_string(index);
}

audio::Waveform extract_segment(const audio::Waveform& w, const SegmentBounds& b) {
  if (b.start_sample >= b.end_sample || b.end_sample > w.samples.size()) {
    throw Error(Errc::OutOfRange, "segment [" + std::to_string(b.start_sample) + ", " +
                                      std::to_string(b.end_sample) + ") outside signal of " +
                                      std::to_string(w.samples.size()) + " samples");
  }
  audio::Waveform out;
  out.sample_rate_hz = w.sample_rate_hz;
  out.source_id = segment_id(b.parent_id.empty() ? w.source_id : b.parent_id, b.index);
  out.samples.assign(w.samples.begin() + static_cast<std::ptrdiff_t>(b.start_sample),
                     w.samples.begin() + static_cast<std::ptrdiff_t>(b.end_sample));
  return out;
}

}  // namespace coughkit::seg
