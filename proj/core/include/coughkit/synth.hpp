#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "coughkit/audio_io.hpp"
#include "coughkit/manifest.hpp"

namespace coughkit::pipeline {

/// Parameters of the burst-train corpus. Each file is leading silence, then
/// bursts separated by gaps, then trailing silence, over a Gaussian noise
/// floor. A burst is filtered white noise under a fast-attack exponential
/// decay envelope; the one-pole filter coefficient carries the label
/// (negative: low-pass, positive: high-pass).
struct SynthSpec {
  int n_files = 200;
  int min_bursts = 2;
  int max_bursts = 4;
  double burst_min_ms = 250.0;
  double burst_max_ms = 450.0;
  double gap_min_ms = 300.0;
  double gap_max_ms = 900.0;
  double edge_min_ms = 300.0;
  double edge_max_ms = 800.0;
  double amp_min = 0.7;
  double amp_max = 1.0;
  double negative_pole_min = 0.5;
  double negative_pole_max = 0.8;
  double positive_pole_min = -0.6;
  double positive_pole_max = -0.2;
  double noise_floor = 0.003;
  double positive_fraction = 0.5;
  double test_fraction = 0.2;
  std::vector<std::string> sources = {"synth_a", "synth_b"};
  int sample_rate_hz = 16000;
  int noise_files = 3;
  double noise_duration_s = 4.0;
  std::uint64_t seed = 0;

  /// InvalidConfig on inconsistent ranges.
  void validate() const;
};

struct GroundTruthSegment {
  std::string file_id;
  int index = 0;
  std::size_t start_sample = 0;
  std::size_t end_sample = 0;
};

struct SynthFile {
  audio::Waveform waveform;
  RowLabel label = RowLabel::Unknown;
  std::string source;
  Split split = Split::Unassigned;
  std::vector<GroundTruthSegment> truth;
};

/// Generates file `index` of the corpus without touching the disk.
SynthFile synthesize_file(const SynthSpec& spec, int index);

struct SynthCorpus {
  Manifest manifest;
  std::vector<GroundTruthSegment> truth;
  std::filesystem::path manifest_path;
  std::filesystem::path noise_dir;
};

/// Writes audio/<id>.wav (PCM16), noise/noise_<k>.wav, manifest.csv, and
/// ground_truth.csv under `out_dir`.
SynthCorpus generate_synthetic_corpus(const SynthSpec& spec, const std::filesystem::path& out_dir);

std::vector<GroundTruthSegment> read_ground_truth(const std::filesystem::path& csv);

}  // namespace coughkit::pipeline
