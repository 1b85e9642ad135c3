#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "coughkit/audio_io.hpp"

namespace coughkit::seg {

enum class Method { Hysteresis, Rms };

std::string_view to_string(Method m) noexcept;
/// "hysteresis" or "rms"; throws InvalidConfig otherwise.
Method parse_method(std::string_view name);

/// Sample interval [start, end) of one cough inside its parent recording.
struct SegmentBounds {
  std::size_t start_sample = 0;
  std::size_t end_sample = 0;
  std::string parent_id;
  int index = 0;

  std::size_t length() const noexcept { return end_sample - start_sample; }
  friend bool operator==(const SegmentBounds&, const SegmentBounds&) = default;
};

struct SegmenterConfig {
  Method method = Method::Hysteresis;
  int frame_len = 1024;
  int hop = 256;
  /// Hysteresis thresholds as multiples of the recording's global RMS.
  double upper_ratio = 2.0;
  double lower_ratio = 0.5;
  /// Absolute frame-RMS threshold for the single-threshold method.
  double rms_threshold = 0.09;
  double min_duration_ms = 200.0;
  double merge_gap_ms = 100.0;
  double pad_ms = 50.0;

  /// Throws InvalidConfig. Equal upper and lower ratios are accepted and
  /// give a single-threshold comparator.
  void validate() const;
};

/// Opens a segment at the first frame whose RMS reaches
/// upper_ratio * global RMS and closes it at the first later frame below
/// lower_ratio * global RMS. Thresholds scale with the input, so the
/// result is invariant to amplitude scaling.
std::vector<SegmentBounds> segment_hysteresis(const audio::Waveform& w, const SegmenterConfig& cfg);

/// Frames with RMS >= cfg.rms_threshold are cough frames; each maximal run
/// becomes a segment.
std::vector<SegmentBounds> segment_rms(const audio::Waveform& w, const SegmenterConfig& cfg);

/// Dispatches on cfg.method.
std::vector<SegmentBounds> segment(const audio::Waveform& w, const SegmenterConfig& cfg);

/// Sample-exact slice. The child's source_id is "<parent>_s<index>".
audio::Waveform extract_segment(const audio::Waveform& w, const SegmentBounds& b);

std::string segment_id(std::string_view parent_id, int index);

}  // namespace coughkit::seg
