#include "coughkit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <random>

#include "coughkit/error.hpp"
#include "coughkit/random.hpp"

namespace coughkit::pipeline {

namespace {

std::size_t ms_to_samples(double ms, int rate) {
  return static_cast<std::size_t>(std::llround(ms * 1e-3 * rate));
}

std::string file_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "syn%04d", index);
  return buf;
}

}  // namespace

void SynthSpec::validate() const {
  auto ordered = [](double lo, double hi) { return lo >= 0.0 && lo <= hi; };
  const bool ok = n_files >= 0 && min_bursts >= 1 && min_bursts <= max_bursts &&
                  ordered(burst_min_ms, burst_max_ms) && burst_min_ms > 0.0 && ordered(gap_min_ms, gap_max_ms) &&
                  ordered(edge_min_ms, edge_max_ms) && ordered(amp_min, amp_max) && amp_min > 0.0 &&
                  negative_pole_min <= negative_pole_max && positive_pole_min <= positive_pole_max &&
                  std::abs(negative_pole_min) < 1.0 && std::abs(negative_pole_max) < 1.0 &&
                  std::abs(positive_pole_min) < 1.0 && std::abs(positive_pole_max) < 1.0 && noise_floor >= 0.0 &&
                  positive_fraction >= 0.0 && positive_fraction <= 1.0 && test_fraction >= 0.0 &&
                  test_fraction < 1.0 && !sources.empty() && sample_rate_hz > 0 && noise_files >= 0 &&
                  noise_duration_s > 0.0;
  if (!ok) throw Error(Errc::InvalidConfig, "inconsistent synthetic corpus parameters");
}

SynthFile synthesize_file(const SynthSpec& spec, int index) {
  const auto id = file_id(index);
  auto rng = make_rng(spec.seed, "synth/" + id);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
  const int rate = spec.sample_rate_hz;

  SynthFile file;
  file.label = u01(rng) < spec.positive_fraction ? RowLabel::Positive : RowLabel::Negative;
  file.source = spec.sources[static_cast<std::size_t>(index) % spec.sources.size()];
  file.split = u01(rng) < spec.test_fraction ? Split::Test : Split::Unassigned;

  const int bursts = std::uniform_int_distribution<int>(spec.min_bursts, spec.max_bursts)(rng);
  struct Burst {
    std::size_t start, length;
    double amp, pole;
  };
  std::vector<Burst> plan;
  std::size_t cursor = ms_to_samples(uniform(spec.edge_min_ms, spec.edge_max_ms), rate);
  const bool positive = file.label == RowLabel::Positive;
  for (int b = 0; b < bursts; ++b) {
    if (b > 0) cursor += ms_to_samples(uniform(spec.gap_min_ms, spec.gap_max_ms), rate);
    const auto length = ms_to_samples(uniform(spec.burst_min_ms, spec.burst_max_ms), rate);
    const double amp = uniform(spec.amp_min, spec.amp_max);
    const double pole = positive ? uniform(spec.positive_pole_min, spec.positive_pole_max)
                                 : uniform(spec.negative_pole_min, spec.negative_pole_max);
    plan.push_back({cursor, length, amp, pole});
    cursor += length;
  }
  const std::size_t total = cursor + ms_to_samples(uniform(spec.edge_min_ms, spec.edge_max_ms), rate);

  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> signal(total);
  for (auto& s : signal) s = spec.noise_floor * gauss(rng);

  const std::size_t attack = std::max<std::size_t>(1, ms_to_samples(5.0, rate));
  for (std::size_t b = 0; b < plan.size(); ++b) {
    const auto& burst = plan[b];
    // Unit-variance output of the one-pole filter y[n] = x[n] + a*y[n-1].
    const double norm = std::sqrt(1.0 - burst.pole * burst.pole);
    const double decay = 3.0 / static_cast<double>(burst.length);
    double y = 0.0;
    for (std::size_t n = 0; n < burst.length; ++n) {
      y = gauss(rng) + burst.pole * y;
      const double env = std::min(1.0, static_cast<double>(n + 1) / static_cast<double>(attack)) *
                         std::exp(-decay * static_cast<double>(n));
      signal[burst.start + n] += burst.amp * 0.25 * norm * y * env;
    }
    file.truth.push_back({id, static_cast<int>(b), burst.start, burst.start + burst.length});
  }

  double peak = 0.0;
  for (const auto s : signal) peak = std::max(peak, std::abs(s));
  const double scale = peak > 0.95 ? 0.95 / peak : 1.0;
  file.waveform.samples.resize(total);
  for (std::size_t n = 0; n < total; ++n) file.waveform.samples[n] = static_cast<float>(signal[n] * scale);
  file.waveform.sample_rate_hz = rate;
  file.waveform.source_id = id;
  return file;
}

SynthCorpus generate_synthetic_corpus(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "audio");
  fs::create_directories(out_dir / "noise");

  SynthCorpus corpus;
  corpus.manifest_path = out_dir / "manifest.csv";
  corpus.noise_dir = out_dir / "noise";
  corpus.manifest = Manifest(out_dir);
  for (int i = 0; i < spec.n_files; ++i) {
    auto file = synthesize_file(spec, i);
    const auto rel = "audio/" + file.waveform.source_id + ".wav";
    audio::write_wav_file(out_dir / rel, file.waveform, audio::BitDepth::Pcm16);
    ManifestRow row;
    row.id = file.waveform.source_id;
    row.path = rel;
    row.label = file.label;
    row.source = file.source;
    row.split = file.split;
    row.duration_s = file.waveform.duration_s();
    corpus.manifest.add(std::move(row));
    corpus.truth.insert(corpus.truth.end(), file.truth.begin(), file.truth.end());
  }
  corpus.manifest.write(corpus.manifest_path);

  for (int k = 0; k < spec.noise_files; ++k) {
    auto rng = make_rng(spec.seed, "synth/noise/" + std::to_string(k));
    std::normal_distribution<double> gauss(0.0, 1.0);
    // Noise colour varies per file: white, then increasingly low-passed.
    const double pole = 0.3 * k;
    const double norm = std::sqrt(1.0 - pole * pole);
    audio::Waveform w;
    w.sample_rate_hz = spec.sample_rate_hz;
    w.samples.resize(static_cast<std::size_t>(spec.noise_duration_s * spec.sample_rate_hz));
    double y = 0.0;
    for (auto& s : w.samples) {
      y = gauss(rng) + pole * y;
      s = static_cast<float>(std::clamp(0.1 * norm * y, -1.0, 1.0));
    }
    audio::write_wav_file(corpus.noise_dir / ("noise_" + std::to_string(k) + ".wav"), w, audio::BitDepth::Pcm16);
  }

  std::ofstream gt(out_dir / "ground_truth.csv", std::ios::binary);
  if (!gt) throw Error(Errc::Io, "cannot write ground truth");
  gt << "id,index,start_sample,end_sample\n";
  for (const auto& t : corpus.truth) gt << t.file_id << ',' << t.index << ',' << t.start_sample << ',' << t.end_sample << '\n';
  return corpus;
}

std::vector<GroundTruthSegment> read_ground_truth(const std::filesystem::path& csv) {
  std::ifstream in(csv, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + csv.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto records = parse_csv(text);
  std::vector<GroundTruthSegment> out;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != 4) throw Error(Errc::FormatError, "ground truth record " + std::to_string(r));
    try {
      out.push_back({rec[0], std::stoi(rec[1]), std::stoull(rec[2]), std::stoull(rec[3])});
    } catch (const std::logic_error&) {
      throw Error(Errc::FormatError, "ground truth record " + std::to_string(r));
    }
  }
  return out;
}

}  // namespace coughkit::pipeline
