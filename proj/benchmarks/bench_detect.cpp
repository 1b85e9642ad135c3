#include <benchmark/benchmark.h>

#include <random>

#include "coughkit/cough_detect.hpp"
#include "coughkit/segmentation.hpp"
#include "coughkit/synth.hpp"

using namespace coughkit;

static void BM_DetectionFeatures(benchmark::State& state) {
  pipeline::SynthSpec spec;
  spec.seed = 1;
  const auto w = pipeline::synthesize_file(spec, 0).waveform;
  for (auto _ : state) benchmark::DoNotOptimize(detect::extract_detection_features(w));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(w.size()));
}
BENCHMARK(BM_DetectionFeatures)->Unit(benchmark::kMillisecond);

static void BM_DemoModelPredict(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 20.0);
  std::vector<detect::AcousticFeatureVector> xs(256);
  for (auto& x : xs) {
    for (auto& v : x.values) v = u(rng);
  }
  const auto& model = detect::demo_model();
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(detect::predict_cough_probability(model, xs[i++ & 255]));
}
BENCHMARK(BM_DemoModelPredict);

static void BM_ParseModel(benchmark::State& state) {
  const auto text = detect::demo_model_json();
  for (auto _ : state) benchmark::DoNotOptimize(detect::parse_model(text));
}
BENCHMARK(BM_ParseModel);

static void BM_Segment(benchmark::State& state) {
  pipeline::SynthSpec spec;
  spec.seed = 3;
  const auto w = audio::peak_normalize(pipeline::synthesize_file(spec, 0).waveform).waveform;
  seg::SegmenterConfig cfg;
  cfg.method = state.range(0) ? seg::Method::Rms : seg::Method::Hysteresis;
  for (auto _ : state) benchmark::DoNotOptimize(seg::segment(w, cfg));
}
BENCHMARK(BM_Segment)->Arg(0)->Arg(1);
