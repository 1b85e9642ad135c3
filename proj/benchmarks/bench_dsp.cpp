#include <benchmark/benchmark.h>

#include <random>

#include "coughkit/audio_io.hpp"
#include "coughkit/dsp.hpp"

using namespace coughkit;

namespace {

audio::Waveform noise(std::size_t n, int rate) {
  std::mt19937 rng(1);
  std::normal_distribution<float> g(0.0f, 0.3f);
  audio::Waveform w;
  w.sample_rate_hz = rate;
  w.samples.resize(n);
  for (auto& s : w.samples) s = g(rng);
  return w;
}

}  // namespace

static void BM_RealDft(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  dsp::RealDft dft(n);
  std::vector<double> x(n, 0.25);
  std::vector<std::complex<double>> y(dft.bins());
  for (auto _ : state) {
    dft.transform(x, y);
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_RealDft)->Arg(1024)->Arg(1000)->Arg(4096);

static void BM_Stft(benchmark::State& state) {
  const auto w = noise(static_cast<std::size_t>(state.range(0)) * 16000, 16000);
  for (auto _ : state) benchmark::DoNotOptimize(dsp::stft(w, dsp::StftParams{}));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(w.size()));
}
BENCHMARK(BM_Stft)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

static void BM_LogMel(benchmark::State& state) {
  const auto w = noise(static_cast<std::size_t>(state.range(0)) * 16000, 16000);
  const dsp::MelSpectrogramExtractor extractor(16000);
  for (auto _ : state) benchmark::DoNotOptimize(extractor.log_mel(w));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(w.size()));
}
BENCHMARK(BM_LogMel)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

static void BM_Mfcc(benchmark::State& state) {
  const auto w = noise(16000, 16000);
  for (auto _ : state) benchmark::DoNotOptimize(dsp::mfcc(w, 13));
}
BENCHMARK(BM_Mfcc)->Unit(benchmark::kMillisecond);

static void BM_Resample(benchmark::State& state) {
  const auto w = noise(static_cast<std::size_t>(state.range(0)), static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(audio::resample(w, 16000));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Resample)->Arg(44100)->Arg(48000)->Arg(8000)->Unit(benchmark::kMillisecond);

static void BM_WavDecode(benchmark::State& state) {
  const auto bytes = audio::encode_wav(noise(160000, 16000), audio::BitDepth::Pcm16);
  for (auto _ : state) benchmark::DoNotOptimize(audio::decode_wav(bytes));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(bytes.size()));
}
BENCHMARK(BM_WavDecode);
