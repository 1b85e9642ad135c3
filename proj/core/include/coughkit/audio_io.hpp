#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace coughkit::audio {

inline constexpr int kCanonicalRateHz = 16000;

/// Mono amplitude sequence. Samples are finite and, after peak_normalize,
/// nominally within [-1, 1].
struct Waveform {
  std::vector<float> samples;
  int sample_rate_hz = kCanonicalRateHz;
  std::string source_id;

  std::size_t size() const noexcept { return samples.size(); }
  double duration_s() const noexcept {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate_hz);
  }
};

enum class BitDepth { Pcm16, Float32 };

/// Decodes a RIFF/WAVE buffer holding 16-bit PCM (tag 1) or 32-bit IEEE
/// float (tag 3). Multi-channel input is averaged down to mono; PCM values
/// are scaled by 1/32768.
Waveform decode_wav(std::span<const std::uint8_t> bytes);

/// Canonical 44-byte header followed by the data chunk. The 16-bit path
/// clamps to [-1, 32767/32768] and rounds to nearest.
std::vector<std::uint8_t> encode_wav(const Waveform& w, BitDepth depth);

Waveform read_wav_file(const std::filesystem::path& path);
void write_wav_file(const std::filesystem::path& path, const Waveform& w, BitDepth depth);

/// Kaiser-windowed sinc resampler parameters. `half_taps` counts zero
/// crossings on each side at the lower of the two rates, so every phase
/// carries 2 * half_taps taps at that rate.
struct ResamplerParams {
  int half_taps = 32;
  double stopband_db = 90.0;
};

/// Band-limited polyphase resampling; the low-pass sits below the lower
/// Nyquist. Output length is round(len * target / source). Equal rates are
/// a pass-through.
Waveform resample(const Waveform& w, int target_rate_hz, const ResamplerParams& params = {});

struct NormalizeResult {
  Waveform waveform;
  /// Set when the input was all zeros and was returned unchanged.
  bool all_zero = false;
};

/// Divides by max(|x|) so the peak is exactly 1.
NormalizeResult peak_normalize(const Waveform& w);

double mean_square(std::span<const float> samples) noexcept;
double rms(std::span<const float> samples) noexcept;

}  // namespace coughkit::audio
