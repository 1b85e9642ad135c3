#include "coughkit/dsp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>

#include "coughkit/error.hpp"

namespace coughkit::dsp {

namespace {

void validate(const StftParams& p) {
  if (p.n_fft < 1 || p.win_length < 1 || p.win_length > p.n_fft || p.hop < 1) {
    throw Error(Errc::InvalidParams, "stft requires n_fft >= win_length >= 1 and hop >= 1");
  }
  if (p.power != 1 && p.power != 2) throw Error(Errc::InvalidParams, "power must be 1 or 2");
}

// Reflect index into [0, n) without repeating the edge sample.
std::size_t reflect(std::int64_t i, std::int64_t n) noexcept {
  if (n == 1) return 0;
  const std::int64_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < n ? i : period - i);
}

// Periodic Hann of win_length, centered inside n_fft.
std::vector<double> padded_hann(int n_fft, int win_length) {
  std::vector<double> window(static_cast<std::size_t>(n_fft), 0.0);
  const int offset = (n_fft - win_length) / 2;
  for (int i = 0; i < win_length; ++i) {
    window[static_cast<std::size_t>(offset + i)] =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / win_length);
  }
  return window;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::uint32_t get_u32(const std::uint8_t* p) noexcept {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

Spectrogram stft(std::span<const float> samples, const StftParams& params) {
  validate(params);
  if (samples.empty()) throw Error(Errc::InvalidParams, "stft of an empty signal");

  const auto n = static_cast<std::int64_t>(samples.size());
  const std::int64_t pad = params.n_fft / 2;
  const std::int64_t frames = 1 + (n + 2 * pad - params.n_fft) / params.hop;
  const RealDft dft(static_cast<std::size_t>(params.n_fft));
  const auto window = padded_hann(params.n_fft, params.win_length);

  Spectrogram out;
  out.values = Matrix(static_cast<std::size_t>(frames), dft.bins());
  out.hop_samples = params.hop;
  out.n_fft = params.n_fft;
  out.power_exponent = params.power;

  std::vector<double> frame(static_cast<std::size_t>(params.n_fft));
  std::vector<std::complex<double>> spectrum(dft.bins());
  for (std::int64_t f = 0; f < frames; ++f) {
    const std::int64_t start = f * params.hop - pad;
    for (std::int64_t t = 0; t < params.n_fft; ++t) {
      frame[static_cast<std::size_t>(t)] =
          window[static_cast<std::size_t>(t)] * samples[reflect(start + t, n)];
    }
    dft.transform(frame, spectrum);
    auto row = out.values.row(static_cast<std::size_t>(f));
    for (std::size_t k = 0; k < spectrum.size(); ++k) {
      const double power = std::norm(spectrum[k]);
      row[k] = params.power == 2 ? power : std::sqrt(power);
    }
  }
  return out;
}

Spectrogram stft(const audio::Waveform& w, const StftParams& params) { return stft(w.samples, params); }

double hz_to_mel(double hz) {
  if (hz < 0.0) throw Error(Errc::NegativeFrequency, "frequency must be >= 0");
  return 2595.0 * std::log10(1.0 + hz / 700.0);
}

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank::MelFilterbank(int n_mels, double fmin_hz, double fmax_hz, int n_fft, int sample_rate_hz)
    : n_mels_(n_mels), fmin_hz_(fmin_hz), fmax_hz_(fmax_hz) {
  if (n_mels < 1 || n_fft < 1 || sample_rate_hz < 1) {
    throw Error(Errc::InvalidParams, "n_mels, n_fft and sample rate must be positive");
  }
  if (!(fmin_hz >= 0.0 && fmin_hz < fmax_hz && fmax_hz <= sample_rate_hz / 2.0)) {
    throw Error(Errc::InvalidParams, "filterbank needs 0 <= fmin < fmax <= sr/2");
  }

  const std::size_t bins = static_cast<std::size_t>(n_fft / 2 + 1);
  const double mel_lo = hz_to_mel(fmin_hz);
  const double mel_hi = hz_to_mel(fmax_hz);
  std::vector<double> edges(static_cast<std::size_t>(n_mels + 2));
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(n_mels + 1));
  }

  weights_ = Matrix(static_cast<std::size_t>(n_mels), bins);
  center_hz_.assign(edges.begin() + 1, edges.end() - 1);
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[static_cast<std::size_t>(m)];
    const double mid = edges[static_cast<std::size_t>(m) + 1];
    const double hi = edges[static_cast<std::size_t>(m) + 2];
    bool any = false;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate_hz / n_fft;
      const double rising = (f - lo) / (mid - lo);
      const double falling = (hi - f) / (hi - mid);
      const double w = std::max(0.0, std::min(rising, falling));
      weights_(static_cast<std::size_t>(m), k) = w;
      any = any || w > 0.0;
    }
    if (!any) {
      throw Error(Errc::InvalidParams,
                  "mel filter " + std::to_string(m) + " covers no DFT bin; lower n_mels or raise n_fft");
    }
  }
}

Matrix MelFilterbank::apply(const Matrix& spectrum) const {
  if (spectrum.cols() != weights_.cols()) {
    throw Error(Errc::InvalidParams, "spectrum bin count does not match filterbank");
  }
  Matrix out(spectrum.rows(), static_cast<std::size_t>(n_mels_));
  for (std::size_t f = 0; f < spectrum.rows(); ++f) {
    const auto in = spectrum.row(f);
    for (std::size_t m = 0; m < out.cols(); ++m) {
      const auto w = weights_.row(m);
      double acc = 0.0;
      for (std::size_t k = 0; k < in.size(); ++k) acc += w[k] * in[k];
      out(f, m) = acc;
    }
  }
  return out;
}

namespace {

MelParams resolved(const MelParams& params, int sample_rate_hz) {
  MelParams p = params;
  if (p.fmax_hz <= 0.0) p.fmax_hz = sample_rate_hz / 2.0;
  return p;
}

}  // namespace

MelSpectrogramExtractor::MelSpectrogramExtractor(int sample_rate_hz, const MelParams& params)
    : sample_rate_hz_(sample_rate_hz),
      params_(resolved(params, sample_rate_hz)),
      filterbank_(params_.n_mels, params_.fmin_hz, params_.fmax_hz, params_.stft.n_fft, sample_rate_hz) {
  validate(params_.stft);
}

Matrix MelSpectrogramExtractor::mel(std::span<const float> samples) const {
  return filterbank_.apply(stft(samples, params_.stft).values);
}

Matrix MelSpectrogramExtractor::mel(const audio::Waveform& w) const {
  if (w.sample_rate_hz != sample_rate_hz_) {
    throw Error(Errc::InvalidParams, "extractor built for " + std::to_string(sample_rate_hz_) +
                                         " Hz, got " + std::to_string(w.sample_rate_hz) + " Hz");
  }
  return mel(std::span<const float>(w.samples));
}

LogMelSpectrogram MelSpectrogramExtractor::log_mel(const audio::Waveform& w) const {
  return log_compress(mel(w));
}

Matrix mel_spectrogram(const audio::Waveform& w, const MelParams& params) {
  return MelSpectrogramExtractor(w.sample_rate_hz, params).mel(w);
}

LogMelSpectrogram log_compress(const Matrix& mel, double ref, double amin) {
  if (!(ref > 0.0)) throw Error(Errc::InvalidRef, "reference value must be positive");
  LogMelSpectrogram out{Matrix(mel.rows(), mel.cols()), ref};
  const auto& in = mel.data();
  auto& dst = out.values.data();
  for (std::size_t i = 0; i < in.size(); ++i) dst[i] = 20.0 * std::log10(std::max(in[i], amin) / ref);
  return out;
}

LogMelSpectrogram log_mel_spectrogram(const audio::Waveform& w, const MelParams& params) {
  return log_compress(mel_spectrogram(w, params));
}

std::vector<double> dct_ii(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> out(n, 0.0);
  if (n == 0) return out;
  const double scale0 = std::sqrt(1.0 / static_cast<double>(n));
  const double scale = std::sqrt(2.0 / static_cast<double>(n));
  for (std::size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += x[i] * std::cos(std::numbers::pi * (static_cast<double>(i) + 0.5) * static_cast<double>(k) /
                             static_cast<double>(n));
    }
    out[k] = acc * (k == 0 ? scale0 : scale);
  }
  return out;
}

Matrix mfcc_from_log_mel(const Matrix& log_mel, int n_coeffs, bool exclude_c0) {
  const int first = exclude_c0 ? 1 : 0;
  if (n_coeffs < 1 || static_cast<std::size_t>(n_coeffs + first) > log_mel.cols()) {
    throw Error(Errc::InvalidParams, "n_coeffs must be in [1, n_mels" +
                                         std::string(exclude_c0 ? " - 1]" : "]"));
  }
  // Basis rows are shared across frames.
  const std::size_t bands = log_mel.cols();
  Matrix basis(static_cast<std::size_t>(n_coeffs), bands);
  for (int c = 0; c < n_coeffs; ++c) {
    const int k = c + first;
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(bands));
    for (std::size_t i = 0; i < bands; ++i) {
      basis(static_cast<std::size_t>(c), i) =
          scale * std::cos(std::numbers::pi * (static_cast<double>(i) + 0.5) * k / static_cast<double>(bands));
    }
  }
  Matrix out(log_mel.rows(), static_cast<std::size_t>(n_coeffs));
  for (std::size_t f = 0; f < log_mel.rows(); ++f) {
    const auto row = log_mel.row(f);
    for (std::size_t c = 0; c < out.cols(); ++c) {
      const auto b = basis.row(c);
      double acc = 0.0;
      for (std::size_t i = 0; i < bands; ++i) acc += b[i] * row[i];
      out(f, c) = acc;
    }
  }
  return out;
}

Matrix mfcc(const audio::Waveform& w, int n_coeffs, bool exclude_c0, const MelParams& params) {
  return mfcc_from_log_mel(log_mel_spectrogram(w, params).values, n_coeffs, exclude_c0);
}

std::vector<double> frame_rms(std::span<const float> samples, int frame_len, int hop) {
  if (frame_len < 1 || hop < 1) throw Error(Errc::InvalidParams, "frame_len and hop must be >= 1");
  std::vector<double> out;
  const auto len = samples.size();
  const auto flen = static_cast<std::size_t>(frame_len);
  if (len < flen) return out;
  out.reserve((len - flen) / static_cast<std::size_t>(hop) + 1);
  for (std::size_t start = 0; start + flen <= len; start += static_cast<std::size_t>(hop)) {
    double acc = 0.0;
    for (std::size_t i = start; i < start + flen; ++i) acc += static_cast<double>(samples[i]) * samples[i];
    out.push_back(std::sqrt(acc / static_cast<double>(flen)));
  }
  return out;
}

std::vector<std::uint8_t> encode_log_mel(const LogMelSpectrogram& spec) {
  std::vector<std::uint8_t> out = {'L', 'M', 'E', 'L'};
  out.reserve(12 + spec.values.data().size() * 4);
  put_u32(out, static_cast<std::uint32_t>(spec.frames()));
  put_u32(out, static_cast<std::uint32_t>(spec.bands()));
  for (const double v : spec.values.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

LogMelSpectrogram decode_log_mel(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "LMEL", 4) != 0) {
    throw Error(Errc::FormatError, "missing LMEL header");
  }
  const std::uint64_t frames = get_u32(bytes.data() + 4);
  const std::uint64_t bands = get_u32(bytes.data() + 8);
  if (bytes.size() != 12 + frames * bands * 4) {
    throw Error(Errc::FormatError, "LMEL payload size does not match header");
  }
  LogMelSpectrogram spec{Matrix(frames, bands), 1.0};
  auto& dst = spec.values.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::bit_cast<float>(get_u32(bytes.data() + 12 + 4 * i));
  return spec;
}

void write_log_mel(const std::filesystem::path& path, const LogMelSpectrogram& spec) {
  const auto bytes = encode_log_mel(spec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

LogMelSpectrogram read_log_mel(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_log_mel(bytes);
}

}  // namespace coughkit::dsp
