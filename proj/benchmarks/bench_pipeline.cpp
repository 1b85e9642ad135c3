#include <benchmark/benchmark.h>

#include <random>

#include "coughkit/augment.hpp"
#include "coughkit/train_eval.hpp"

using namespace coughkit;

namespace {

Matrix random_log_mel(std::size_t frames, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-80.0, 0.0);
  Matrix m(frames, 64);
  for (auto& v : m.data()) v = u(rng);
  return m;
}

}  // namespace

static void BM_SpecAugment(benchmark::State& state) {
  std::mt19937_64 gen(1);
  const dsp::LogMelSpectrogram spec{random_log_mel(100, gen), 1.0};
  Rng rng(2);
  for (auto _ : state) benchmark::DoNotOptimize(augment::spec_augment(spec, augment::AugmentConfig{}, rng));
}
BENCHMARK(BM_SpecAugment);

static void BM_AddNoise(benchmark::State& state) {
  std::mt19937 gen(3);
  std::normal_distribution<float> g(0.0f, 0.2f);
  audio::Waveform clean, noise;
  clean.samples.resize(16000);
  noise.samples.resize(64000);
  for (auto& s : clean.samples) s = g(gen);
  for (auto& s : noise.samples) s = g(gen);
  Rng rng(4);
  for (auto _ : state) benchmark::DoNotOptimize(augment::add_noise(clean, noise, 7.5, rng));
}
BENCHMARK(BM_AddNoise);

static void BM_AdamWStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> p(n, 0.1), g(n, 0.01);
  train::AdamWState s(n);
  for (auto _ : state) {
    train::adamw_step(p, g, s, 0.001, 0.01);
    benchmark::DoNotOptimize(p.data());
  }
}
BENCHMARK(BM_AdamWStep)->Arg(386)->Arg(4098);

// One training epoch over spectrogram-level mixup, the default setting.
static void BM_TrainEpoch(benchmark::State& state) {
  std::mt19937_64 gen(5);
  std::vector<Matrix> specs;
  std::vector<train::Label> labels;
  for (int i = 0; i < state.range(0); ++i) {
    specs.push_back(random_log_mel(20 + static_cast<std::size_t>(i % 30), gen));
    labels.push_back(i % 2 ? train::Label::Positive : train::Label::Negative);
  }
  const train::SpectrogramTrainingSet set(std::move(specs), std::move(labels));
  train::TrainConfig cfg;
  cfg.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train::train(set, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainEpoch)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

