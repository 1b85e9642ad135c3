#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "coughkit/dsp.hpp"
#include "coughkit/error.hpp"
#include "coughkit/fft.hpp"
#include "oracles.hpp"

using namespace coughkit;

namespace {

std::vector<float> noise(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> g(0.0f, 0.3f);
  std::vector<float> x(n);
  for (auto& v : x) v = g(rng);
  return x;
}

audio::Waveform tone(double hz, std::size_t n, int rate = 16000) {
  audio::Waveform w;
  w.sample_rate_hz = rate;
  for (std::size_t i = 0; i < n; ++i) {
    w.samples.push_back(static_cast<float>(0.5 * std::sin(2.0 * std::numbers::pi * hz * i / rate)));
  }
  return w;
}

}  // namespace

TEST(RealDft, MatchesDirectSumForOddAndPowerOfTwoSizes) {
  for (const std::size_t n : {1u, 2u, 7u, 12u, 64u, 100u}) {
    std::mt19937 rng(static_cast<unsigned>(n));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> x(n);
    for (auto& v : x) v = u(rng);
    dsp::RealDft dft(n);
    std::vector<std::complex<double>> y(dft.bins());
    dft.transform(x, y);
    const auto ref = oracle::dft_power(x);
    for (std::size_t k = 0; k < y.size(); ++k) EXPECT_NEAR(std::norm(y[k]), ref[k], 1e-9 * (1.0 + ref[k])) << n;
  }
}

TEST(Stft, FrameCountAndShape) {
  const auto x = noise(16000, 1);
  const auto s = dsp::stft(std::span<const float>(x), dsp::StftParams{});
  EXPECT_EQ(s.values.rows(), 1u + 16000u / 320u);
  EXPECT_EQ(s.values.cols(), 513u);
}

TEST(Stft, PowerMatchesDirectDftOracle) {
  const dsp::StftParams p{.n_fft = 256, .hop = 64, .win_length = 256, .power = 2};
  const auto x = noise(2000, 2);
  const auto s = dsp::stft(std::span<const float>(x), p);
  const auto ref = oracle::stft_power(x, 256, 64);
  ASSERT_EQ(s.values.rows(), ref.size());
  for (std::size_t f = 0; f < ref.size(); ++f) {
    for (std::size_t k = 0; k < ref[f].size(); ++k) {
      EXPECT_NEAR(s.values(f, k), ref[f][k], 1e-9 * (1.0 + ref[f][k]));
    }
  }
}

TEST(Stft, ShortSignalsUseReflectPadding) {
  const std::vector<float> x = {0.5f};
  const dsp::StftParams p{.n_fft = 8, .hop = 4, .win_length = 8, .power = 2};
  const auto s = dsp::stft(std::span<const float>(x), p);
  const auto ref = oracle::stft_power(x, 8, 4);
  ASSERT_EQ(s.values.rows(), ref.size());
  for (std::size_t k = 0; k < ref[0].size(); ++k) EXPECT_NEAR(s.values(0, k), ref[0][k], 1e-12);
}

TEST(Stft, MagnitudeIsSqrtOfPower) {
  const auto x = noise(3000, 3);
  auto p = dsp::StftParams{};
  const auto power = dsp::stft(std::span<const float>(x), p);
  p.power = 1;
  const auto mag = dsp::stft(std::span<const float>(x), p);
  for (std::size_t i = 0; i < power.values.data().size(); ++i) {
    EXPECT_NEAR(mag.values.data()[i], std::sqrt(power.values.data()[i]), 1e-12);
  }
}

TEST(Stft, RejectsInvalidParams) {
  const auto x = noise(100, 4);
  EXPECT_THROW(dsp::stft(std::span<const float>(x), dsp::StftParams{.n_fft = 0}), Error);
  EXPECT_THROW(dsp::stft(std::span<const float>(x), dsp::StftParams{.n_fft = 256, .hop = 0}), Error);
  EXPECT_THROW(dsp::stft(std::span<const float>(x), dsp::StftParams{.n_fft = 256, .hop = 64, .win_length = 512}),
               Error);
  EXPECT_THROW(dsp::stft(std::span<const float>(), dsp::StftParams{}), Error);
}

TEST(Stft, SinePeaksAtItsBin) {
  const auto w = tone(1000.0, 16000);
  const auto s = dsp::stft(w, dsp::StftParams{});
  const auto row = s.values.row(10);
  const auto peak = std::max_element(row.begin(), row.end()) - row.begin();
  EXPECT_EQ(peak, 64);  // 1000 Hz * 1024 / 16000
}

TEST(MelScale, KnownPointsAndRoundTrip) {
  EXPECT_NEAR(dsp::hz_to_mel(700.0), 781.17, 0.01);
  EXPECT_NEAR(dsp::hz_to_mel(8000.0), oracle::hz_to_mel(8000.0), 1e-9);
  EXPECT_EQ(dsp::hz_to_mel(0.0), 0.0);
  for (double hz = 0.0; hz <= 24000.0; hz += 137.5) {
    EXPECT_NEAR(dsp::mel_to_hz(dsp::hz_to_mel(hz)), hz, 1e-9);
  }
  try {
    dsp::hz_to_mel(-1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), Errc::NegativeFrequency);
  }
}

TEST(MelFilterbank, TrianglesAreEquallySpacedInMel) {
  const dsp::MelFilterbank fb(64, 0.0, 8000.0, 1024, 16000);
  ASSERT_EQ(fb.weights().rows(), 64u);
  ASSERT_EQ(fb.weights().cols(), 513u);
  const auto& c = fb.center_hz();
  const double step = oracle::hz_to_mel(8000.0) / 65.0;
  for (std::size_t m = 0; m < c.size(); ++m) EXPECT_NEAR(oracle::hz_to_mel(c[m]), step * (m + 1), 1e-9);
  for (std::size_t m = 0; m < 64; ++m) {
    const auto row = fb.weights().row(m);
    double peak = 0.0;
    for (const double w : row) {
      EXPECT_GE(w, 0.0);
      EXPECT_LE(w, 1.0 + 1e-12);
      peak = std::max(peak, w);
    }
    EXPECT_GT(peak, 0.0);
  }
}

TEST(MelFilterbank, WeightsFollowTriangleDefinition) {
  const dsp::MelFilterbank fb(10, 100.0, 4000.0, 512, 16000);
  std::vector<double> edges;
  const double lo = oracle::hz_to_mel(100.0), hi = oracle::hz_to_mel(4000.0);
  for (int i = 0; i < 12; ++i) {
    const double mel = lo + (hi - lo) * i / 11.0;
    edges.push_back(700.0 * (std::pow(10.0, mel / 2595.0) - 1.0));
  }
  for (std::size_t m = 0; m < 10; ++m) {
    for (std::size_t k = 0; k < 257; ++k) {
      const double f = k * 16000.0 / 512.0;
      double expect = 0.0;
      if (f > edges[m] && f <= edges[m + 1]) expect = (f - edges[m]) / (edges[m + 1] - edges[m]);
      if (f > edges[m + 1] && f < edges[m + 2]) expect = (edges[m + 2] - f) / (edges[m + 2] - edges[m + 1]);
      EXPECT_NEAR(fb.weights()(m, k), expect, 1e-9) << m << "," << k;
    }
  }
}

TEST(MelFilterbank, EmptyFilterIsRejected) {
  EXPECT_THROW(dsp::MelFilterbank(128, 0.0, 8000.0, 64, 16000), Error);
  EXPECT_THROW(dsp::MelFilterbank(10, 500.0, 400.0, 512, 16000), Error);
}

TEST(LogCompress, FixedPoints) {
  Matrix m(1, 4);
  m(0, 0) = 1.0;
  m(0, 1) = 100.0;
  m(0, 2) = 0.0;
  m(0, 3) = 1e-3;
  const auto out = dsp::log_compress(m);
  EXPECT_EQ(out.values(0, 0), 0.0);
  EXPECT_EQ(out.values(0, 1), 40.0);
  EXPECT_NEAR(out.values(0, 2), -200.0, 1e-9);
  EXPECT_NEAR(out.values(0, 3), -60.0, 1e-9);
  const auto rel = dsp::log_compress(m, 100.0);
  EXPECT_EQ(rel.values(0, 1), 0.0);
  EXPECT_EQ(rel.ref_value, 100.0);
  try {
    dsp::log_compress(m, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), Errc::InvalidRef);
  }
}

TEST(LogMel, ShapeMatchesDefaults) {
  const auto w = tone(440.0, 16000);
  const auto s = dsp::log_mel_spectrogram(w);
  EXPECT_EQ(s.frames(), 51u);
  EXPECT_EQ(s.bands(), 64u);
}

TEST(LogMel, ExtractorMatchesFreeFunction) {
  const auto w = tone(1234.0, 8000);
  const dsp::MelSpectrogramExtractor ex(16000);
  EXPECT_EQ(ex.log_mel(w).values, dsp::log_mel_spectrogram(w).values);
}

TEST(LogMel, MelIsFilterbankTimesPower) {
  const auto w = tone(700.0, 4000);
  const auto power = dsp::stft(w, dsp::StftParams{});
  const dsp::MelFilterbank fb(64, 0.0, 8000.0, 1024, 16000);
  const auto mel = dsp::mel_spectrogram(w);
  for (std::size_t f = 0; f < mel.rows(); f += 3) {
    for (std::size_t m = 0; m < 64; m += 5) {
      double acc = 0.0;
      for (std::size_t k = 0; k < 513; ++k) acc += fb.weights()(m, k) * power.values(f, k);
      EXPECT_NEAR(mel(f, m), acc, 1e-9 * (1.0 + acc));
    }
  }
}

TEST(Dct, MatchesDefiningSum) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-50.0, 10.0);
  for (const std::size_t n : {1u, 8u, 13u, 64u}) {
    std::vector<double> x(n);
    for (auto& v : x) v = u(rng);
    const auto got = dsp::dct_ii(x);
    const auto ref = oracle::dct_ii(x);
    for (std::size_t k = 0; k < n; ++k) EXPECT_NEAR(got[k], ref[k], 1e-9);
  }
}

TEST(Mfcc, IsDctOfLogMelRows) {
  const auto w = tone(300.0, 6000);
  const auto lm = dsp::log_mel_spectrogram(w);
  const auto c = dsp::mfcc(w, 13);
  const auto c_no0 = dsp::mfcc(w, 6, true);
  ASSERT_EQ(c.rows(), lm.frames());
  for (std::size_t f = 0; f < lm.frames(); f += 4) {
    const auto row = lm.values.row(f);
    const auto ref = oracle::dct_ii(std::vector<double>(row.begin(), row.end()));
    for (std::size_t k = 0; k < 13; ++k) EXPECT_NEAR(c(f, k), ref[k], 1e-8);
    for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(c_no0(f, k), ref[k + 1], 1e-8);
  }
  EXPECT_THROW(dsp::mfcc(w, 64, true), Error);
}

TEST(FrameRms, NoPaddingAndHop) {
  const std::vector<float> x = {1, 1, 1, 1, 2, 2, 2, 2};
  const auto r = dsp::frame_rms(x, 4, 2);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_DOUBLE_EQ(r[0], 1.0);
  EXPECT_DOUBLE_EQ(r[1], std::sqrt(2.5));
  EXPECT_DOUBLE_EQ(r[2], 2.0);
  EXPECT_TRUE(dsp::frame_rms(std::span<const float>(x).first(3), 4, 2).empty());
}

TEST(LogMelFile, RoundTripStoresFloat32) {
  dsp::LogMelSpectrogram s{Matrix(3, 4), 1.0};
  for (std::size_t i = 0; i < 12; ++i) s.values.data()[i] = -10.0 * i + 0.125;
  const auto back = dsp::decode_log_mel(dsp::encode_log_mel(s));
  EXPECT_EQ(back.values, s.values);

  const auto path = std::filesystem::temp_directory_path() / "coughkit_test.lmel";
  dsp::write_log_mel(path, s);
  EXPECT_EQ(dsp::read_log_mel(path).values, s.values);

  auto bytes = dsp::encode_log_mel(s);
  bytes.pop_back();
  EXPECT_THROW(dsp::decode_log_mel(bytes), Error);
  bytes[0] = 'X';
  EXPECT_THROW(dsp::decode_log_mel(bytes), Error);
}

TEST(Stft, ZeroSignalAndShortFrameCount) {
  const std::vector<float> z(4000, 0.0f);
  const auto s = dsp::stft(std::span<const float>(z), dsp::StftParams{});
  for (std::size_t f = 0; f < s.values.rows(); ++f) {
    for (std::size_t k = 0; k < s.values.cols(); ++k) EXPECT_EQ(s.values(f, k), 0.0);
  }
  const auto x = noise(3200, 2);
  EXPECT_EQ(dsp::stft(std::span<const float>(x), dsp::StftParams{}).values.rows(), 11u);
}

TEST(MelScale, NyquistAndInverse) {
  EXPECT_NEAR(dsp::hz_to_mel(8000.0), 2840.0, 0.05);
  EXPECT_NEAR(dsp::mel_to_hz(781.17), 700.0, 0.01);
}

TEST(LogMel, ToneLandsInNearestBand) {
  const auto lm = dsp::log_mel_spectrogram(tone(1000.0, 16000));
  std::vector<double> mean(lm.bands(), 0.0);
  for (std::size_t f = 0; f < lm.frames(); ++f) {
    for (std::size_t b = 0; b < lm.bands(); ++b) mean[b] += lm.values(f, b);
  }
  const auto got = static_cast<long>(std::max_element(mean.begin(), mean.end()) - mean.begin());
  // Centres sit at equal mel steps between 0 and 8 kHz.
  const double step = oracle::hz_to_mel(8000.0) / 65.0;
  long nearest = 0;
  double best = 1e300;
  for (long b = 0; b < 64; ++b) {
    const double d = std::abs(oracle::mel_to_hz(step * static_cast<double>(b + 1)) - 1000.0);
    if (d < best) best = d, nearest = b;
  }
  EXPECT_LE(std::abs(got - nearest), 1);
}

TEST(Dct, ConstantAndImpulseRows) {
  const std::vector<double> flat(16, -20.0);
  const auto c = dsp::dct_ii(flat);
  EXPECT_NEAR(c[0], -20.0 * 4.0, 1e-9);
  for (std::size_t k = 1; k < c.size(); ++k) EXPECT_NEAR(c[k], 0.0, 1e-9);

  const std::vector<double> impulse = {1.0, 0.0, 0.0, 0.0};
  const auto d = dsp::dct_ii(impulse);
  EXPECT_NEAR(d[0], 0.5, 1e-12);
  EXPECT_NEAR(d[1], 0.6532814824381883, 1e-12);
  EXPECT_NEAR(d[2], 0.5, 1e-12);
  EXPECT_NEAR(d[3], 0.2705980500730985, 1e-12);
}

TEST(FrameRms, ConstantZeroAndPair) {
  const std::vector<float> half(2048, 0.5f);
  for (const double r : dsp::frame_rms(half, 1024, 256)) EXPECT_NEAR(r, 0.5, 1e-12);
  const std::vector<float> zero(2048, 0.0f);
  for (const double r : dsp::frame_rms(zero, 1024, 256)) EXPECT_EQ(r, 0.0);
  const std::vector<float> pair = {3.0f, 4.0f};
  const auto r = dsp::frame_rms(pair, 2, 1);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_NEAR(r[0], 3.5355339, 1e-6);
}
