#include "coughkit/audio_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <optional>

#include "coughkit/error.hpp"

namespace coughkit::audio {

namespace {

constexpr std::uint16_t kTagPcm = 1;
constexpr std::uint16_t kTagFloat = 3;

std::uint16_t read_u16(const std::uint8_t* p) noexcept {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const std::uint8_t* p) noexcept {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

void put_tag(std::vector<std::uint8_t>& out, const char (&tag)[5]) {
  out.insert(out.end(), tag, tag + 4);
}

bool tag_is(const std::uint8_t* p, const char (&tag)[5]) noexcept {
  return std::memcmp(p, tag, 4) == 0;
}

struct Format {
  std::uint16_t tag = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits = 0;
};

Format parse_fmt(const std::uint8_t* p, std::uint32_t size) {
  if (size < 16) throw Error(Errc::MalformedContainer, "fmt chunk shorter than 16 bytes");
  Format f;
  f.tag = read_u16(p);
  f.channels = read_u16(p + 2);
  f.rate = read_u32(p + 4);
  f.block_align = read_u16(p + 12);
  f.bits = read_u16(p + 14);
  if (f.tag != kTagPcm && f.tag != kTagFloat) {
    throw Error(Errc::UnsupportedCodec, "format tag " + std::to_string(f.tag));
  }
  if ((f.tag == kTagPcm && f.bits != 16) || (f.tag == kTagFloat && f.bits != 32)) {
    throw Error(Errc::UnsupportedCodec, "format tag " + std::to_string(f.tag) + " with " +
                                           std::to_string(f.bits) + " bits per sample");
  }
  if (f.channels == 0) throw Error(Errc::MalformedContainer, "zero channels");
  if (f.rate == 0) throw Error(Errc::MalformedContainer, "zero sample rate");
  if (f.block_align != f.channels * (f.bits / 8)) {
    throw Error(Errc::MalformedContainer, "block align does not match channels * sample width");
  }
  return f;
}

}  // namespace

Waveform decode_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || !tag_is(bytes.data(), "RIFF") || !tag_is(bytes.data() + 8, "WAVE")) {
    throw Error(Errc::MalformedContainer, "missing RIFF/WAVE magic");
  }

  std::optional<Format> format;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* header = bytes.data() + pos;
    const std::uint32_t size = read_u32(header + 4);
    const std::size_t body = pos + 8;
    const std::size_t available = bytes.size() - body;

    if (tag_is(header, "fmt ")) {
      if (size > available) throw Error(Errc::MalformedContainer, "fmt chunk overruns file");
      format = parse_fmt(bytes.data() + body, size);
    } else if (tag_is(header, "data")) {
      if (!format) throw Error(Errc::MalformedContainer, "data chunk before fmt chunk");
      if (size % format->block_align != 0) {
        throw Error(Errc::MalformedContainer, "data size is not a whole number of frames");
      }
      if (size > available) {
        throw Error(Errc::TruncatedData, "data chunk declares " +
                                             std::to_string(size / format->block_align) +
                                             " frames but holds " +
                                             std::to_string(available / format->block_align));
      }

      const std::size_t frames = size / format->block_align;
      const std::size_t channels = format->channels;
      const std::uint8_t* src = bytes.data() + body;
      Waveform w;
      w.sample_rate_hz = static_cast<int>(format->rate);
      w.samples.resize(frames);
      for (std::size_t i = 0; i < frames; ++i) {
        double sum = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
          const std::uint8_t* s = src + (i * channels + c) * (format->bits / 8);
          if (format->tag == kTagPcm) {
            sum += static_cast<std::int16_t>(read_u16(s)) / 32768.0;
          } else {
            sum += std::bit_cast<float>(read_u32(s));
          }
        }
        w.samples[i] = channels == 1 ? static_cast<float>(sum)
                                     : static_cast<float>(sum / static_cast<double>(channels));
      }
      return w;
    } else if (size > available) {
      throw Error(Errc::MalformedContainer, "chunk overruns file");
    }
    pos = body + size + (size & 1u);
  }
  throw Error(Errc::MalformedContainer, format ? "no data chunk" : "no fmt chunk");
}

std::vector<std::uint8_t> encode_wav(const Waveform& w, BitDepth depth) {
  const bool pcm = depth == BitDepth::Pcm16;
  const std::uint16_t width = pcm ? 2 : 4;
  const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * width);

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, pcm ? kTagPcm : kTagFloat);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate_hz));
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate_hz) * width);
  put_u16(out, width);
  put_u16(out, static_cast<std::uint16_t>(width * 8));
  put_tag(out, "data");
  put_u32(out, data_bytes);

  for (const float s : w.samples) {
    if (pcm) {
      const double clamped = std::clamp(static_cast<double>(s), -1.0, 32767.0 / 32768.0);
      put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(clamped * 32768.0))));
    } else {
      put_u32(out, std::bit_cast<std::uint32_t>(s));
    }
  }
  return out;
}

Waveform read_wav_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  Waveform w = decode_wav(bytes);
  w.source_id = path.stem().string();
  return w;
}

void write_wav_file(const std::filesystem::path& path, const Waveform& w, BitDepth depth) {
  const auto bytes = encode_wav(w, depth);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::Io, "short write to " + path.string());
}

namespace {

double sinc(double x) noexcept {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

// Kaiser beta for a target stopband attenuation in dB.
double kaiser_beta(double attenuation_db) noexcept {
  if (attenuation_db > 50.0) return 0.1102 * (attenuation_db - 8.7);
  if (attenuation_db >= 21.0) {
    return 0.5842 * std::pow(attenuation_db - 21.0, 0.4) + 0.07886 * (attenuation_db - 21.0);
  }
  return 0.0;
}

class PolyphaseKernel {
 public:
  PolyphaseKernel(std::uint64_t up, std::uint64_t down, const ResamplerParams& params)
      : up_(up), params_(params) {
    scale_ = std::min(1.0, static_cast<double>(up) / static_cast<double>(down));
    // Transition band width in cycles per lower-rate sample for a Kaiser
    // design of length 2 * half_taps; the stopband starts at the lower Nyquist.
    const double transition =
        (params.stopband_db - 7.95) / (14.36 * 2.0 * static_cast<double>(params.half_taps));
    cutoff_ = 0.5 - 0.5 * transition;
    beta_ = kaiser_beta(params.stopband_db);
    i0_beta_ = std::cyl_bessel_i(0.0, beta_);
    reach_ = static_cast<std::int64_t>(std::ceil(params.half_taps / scale_));
    if (up_ <= 4096) {
      table_.resize(up_);
      for (std::uint64_t phase = 0; phase < up_; ++phase) table_[phase] = build(phase);
    }
  }

  std::int64_t reach() const noexcept { return reach_; }

  // Taps for input offsets j in [-reach, reach] relative to floor(position).
  std::vector<double> taps(std::uint64_t phase) const {
    return table_.empty() ? build(phase) : table_[phase];
  }

  const std::vector<double>& cached(std::uint64_t phase) const { return table_[phase]; }
  bool has_table() const noexcept { return !table_.empty(); }

 private:
  std::vector<double> build(std::uint64_t phase) const {
    const double frac = static_cast<double>(phase) / static_cast<double>(up_);
    std::vector<double> h(static_cast<std::size_t>(2 * reach_ + 1));
    double sum = 0.0;
    for (std::int64_t j = -reach_; j <= reach_; ++j) {
      const double u = (frac - static_cast<double>(j)) * scale_;  // lower-rate samples
      const double t = u / params_.half_taps;
      double value = 0.0;
      if (std::abs(t) < 1.0) {
        const double window = std::cyl_bessel_i(0.0, beta_ * std::sqrt(1.0 - t * t)) / i0_beta_;
        value = 2.0 * cutoff_ * sinc(2.0 * cutoff_ * u) * window;
      }
      h[static_cast<std::size_t>(j + reach_)] = value;
      sum += value;
    }
    for (double& v : h) v /= sum;
    return h;
  }

  std::uint64_t up_;
  ResamplerParams params_;
  double scale_ = 1.0;
  double cutoff_ = 0.5;
  double beta_ = 0.0;
  double i0_beta_ = 1.0;
  std::int64_t reach_ = 0;
  std::vector<std::vector<double>> table_;
};

}  // namespace

Waveform resample(const Waveform& w, int target_rate_hz, const ResamplerParams& params) {
  if (target_rate_hz <= 0) throw Error(Errc::InvalidParams, "target rate must be positive");
  if (w.sample_rate_hz <= 0) throw Error(Errc::InvalidParams, "source rate must be positive");
  if (params.half_taps < 1) throw Error(Errc::InvalidParams, "half_taps must be >= 1");
  if (target_rate_hz == w.sample_rate_hz) return w;

  const auto g = std::gcd(target_rate_hz, w.sample_rate_hz);
  const auto up = static_cast<std::uint64_t>(target_rate_hz / g);
  const auto down = static_cast<std::uint64_t>(w.sample_rate_hz / g);
  const std::uint64_t in_len = w.samples.size();
  const std::uint64_t out_len = (2 * in_len * up + down) / (2 * down);

  const PolyphaseKernel kernel(up, down, params);
  const std::int64_t reach = kernel.reach();

  Waveform out;
  out.sample_rate_hz = target_rate_hz;
  out.source_id = w.source_id;
  out.samples.resize(out_len);
  std::vector<double> scratch;
  for (std::uint64_t n = 0; n < out_len; ++n) {
    const std::uint64_t num = n * down;
    const auto base = static_cast<std::int64_t>(num / up);
    const std::uint64_t phase = num % up;
    const std::vector<double>* h = nullptr;
    if (kernel.has_table()) {
      h = &kernel.cached(phase);
    } else {
      scratch = kernel.taps(phase);
      h = &scratch;
    }
    double acc = 0.0;
    const std::int64_t lo = std::max<std::int64_t>(-reach, -base);
    const std::int64_t hi = std::min<std::int64_t>(reach, static_cast<std::int64_t>(in_len) - 1 - base);
    for (std::int64_t j = lo; j <= hi; ++j) {
      acc += (*h)[static_cast<std::size_t>(j + reach)] * w.samples[static_cast<std::size_t>(base + j)];
    }
    out.samples[n] = static_cast<float>(acc);
  }
  return out;
}

NormalizeResult peak_normalize(const Waveform& w) {
  float peak = 0.0f;
  for (const float s : w.samples) peak = std::max(peak, std::abs(s));
  if (peak == 0.0f) return {w, true};
  NormalizeResult result{w, false};
  for (float& s : result.waveform.samples) s /= peak;
  return result;
}

double mean_square(std::span<const float> samples) noexcept {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (const float s : samples) acc += static_cast<double>(s) * s;
  return acc / static_cast<double>(samples.size());
}

double rms(std::span<const float> samples) noexcept { return std::sqrt(mean_square(samples)); }

}  // namespace coughkit::audio
