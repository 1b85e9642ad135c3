#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "coughkit/audio_io.hpp"
#include "coughkit/fft.hpp"
#include "coughkit/matrix.hpp"

namespace coughkit::dsp {

struct StftParams {
  int n_fft = 1024;
  int hop = 320;
  int win_length = 1024;
  int power = 2;  // 1 = magnitude, 2 = power
};

/// frames x (n_fft/2 + 1), nonnegative.
struct Spectrogram {
  Matrix values;
  int hop_samples = 0;
  int n_fft = 0;
  int power_exponent = 2;
};

/// Hann-windowed STFT with center alignment: the signal is reflect-padded by
/// n_fft/2 on each side, giving floor(len/hop) + 1 frames for even n_fft.
Spectrogram stft(std::span<const float> samples, const StftParams& params);
Spectrogram stft(const audio::Waveform& w, const StftParams& params);

/// m = 2595 log10(1 + f/700)
double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular filters with unit peaks, centers evenly spaced in mel between
/// fmin and fmax. No area normalization.
class MelFilterbank {
 public:
  MelFilterbank(int n_mels, double fmin_hz, double fmax_hz, int n_fft, int sample_rate_hz);

  int n_mels() const noexcept { return n_mels_; }
  int bins() const noexcept { return static_cast<int>(weights_.cols()); }
  double fmin_hz() const noexcept { return fmin_hz_; }
  double fmax_hz() const noexcept { return fmax_hz_; }

  /// n_mels x bins
  const Matrix& weights() const noexcept { return weights_; }
  const std::vector<double>& center_hz() const noexcept { return center_hz_; }

  /// frames x bins -> frames x n_mels
  Matrix apply(const Matrix& spectrum) const;

 private:
  int n_mels_;
  double fmin_hz_;
  double fmax_hz_;
  Matrix weights_;
  std::vector<double> center_hz_;
};

struct MelParams {
  StftParams stft{};
  int n_mels = 64;
  double fmin_hz = 0.0;
  double fmax_hz = 0.0;  // 0 selects the Nyquist rate of the input
};

/// frames x n_mels, values in dB.
struct LogMelSpectrogram {
  Matrix values;
  double ref_value = 1.0;

  std::size_t frames() const noexcept { return values.rows(); }
  std::size_t bands() const noexcept { return values.cols(); }
};

inline constexpr double kLogFloor = 1e-10;

/// Power mel spectrogram: filterbank applied to |STFT|^power. Holds the
/// filterbank and DFT plan, so one instance can serve many inputs of the
/// same sample rate from several threads.
class MelSpectrogramExtractor {
 public:
  MelSpectrogramExtractor(int sample_rate_hz, const MelParams& params = {});

  int sample_rate_hz() const noexcept { return sample_rate_hz_; }
  const MelParams& params() const noexcept { return params_; }
  const MelFilterbank& filterbank() const noexcept { return filterbank_; }

  Matrix mel(std::span<const float> samples) const;
  Matrix mel(const audio::Waveform& w) const;
  LogMelSpectrogram log_mel(const audio::Waveform& w) const;

 private:
  int sample_rate_hz_;
  MelParams params_;
  MelFilterbank filterbank_;
};

Matrix mel_spectrogram(const audio::Waveform& w, const MelParams& params = {});

/// 20 log10(max(S, amin) / ref), entrywise.
LogMelSpectrogram log_compress(const Matrix& mel, double ref = 1.0, double amin = kLogFloor);

LogMelSpectrogram log_mel_spectrogram(const audio::Waveform& w, const MelParams& params = {});

/// Orthonormal DCT-II of one vector.
std::vector<double> dct_ii(std::span<const double> x);

/// Per-frame orthonormal DCT-II of log-mel rows. With exclude_c0 the result
/// holds coefficients 1..n_coeffs, otherwise 0..n_coeffs-1.
Matrix mfcc_from_log_mel(const Matrix& log_mel, int n_coeffs, bool exclude_c0 = false);

Matrix mfcc(const audio::Waveform& w, int n_coeffs, bool exclude_c0 = false,
            const MelParams& params = {});

/// Root mean square per frame. Trailing samples that do not fill a frame are
/// dropped.
std::vector<double> frame_rms(std::span<const float> samples, int frame_len, int hop);

/// "LMEL" | u32 frames | u32 bands | frames*bands float32, little-endian.
std::vector<std::uint8_t> encode_log_mel(const LogMelSpectrogram& spec);
LogMelSpectrogram decode_log_mel(std::span<const std::uint8_t> bytes);
void write_log_mel(const std::filesystem::path& path, const LogMelSpectrogram& spec);
LogMelSpectrogram read_log_mel(const std::filesystem::path& path);

}  // namespace coughkit::dsp
