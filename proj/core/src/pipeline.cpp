#include "coughkit/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <tuple>

#include "coughkit/augment.hpp"
#include "coughkit/cough_detect.hpp"
#include "coughkit/error.hpp"
#include "coughkit/parallel.hpp"
#include "coughkit/random.hpp"
#include "coughkit/segmentation.hpp"
#include "json_compat.hpp"

namespace coughkit::pipeline {

namespace fs = std::filesystem;

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << text;
}

std::optional<train::Label> to_train_label(RowLabel l) {
  switch (l) {
    case RowLabel::Positive: return train::Label::Positive;
    case RowLabel::Negative: return train::Label::Negative;
    case RowLabel::Unknown: return std::nullopt;
  }
  return std::nullopt;
}

std::string mixup_name(train::MixupLevel l) {
  switch (l) {
    case train::MixupLevel::None: return "none";
    case train::MixupLevel::Embedding: return "embedding";
    case train::MixupLevel::Spectrogram: return "spectrogram";
  }
  return "none";
}

Manifest empty_like(const PipelineConfig& cfg) { return Manifest(cfg.out_dir); }

}  // namespace

audio::Waveform FileDataSource::load_audio(const Manifest& m, const ManifestRow& row) const {
  auto w = audio::read_wav_file(m.resolve(row.path));
  w.source_id = row.id;
  return w;
}

dsp::LogMelSpectrogram FileDataSource::load_features(const Manifest& m, const ManifestRow& row) const {
  if (row.feature_path.empty()) throw Error(Errc::FormatError, "row \"" + row.id + "\" has no features");
  return dsp::read_log_mel(m.resolve(row.feature_path));
}

const DataSource& file_data_source() {
  static const FileDataSource source;
  return source;
}

ManifestRow rebase(const ManifestRow& row, const Manifest& from, const Manifest& to) {
  ManifestRow out = row;
  if (!row.path.empty()) out.path = to.relativize(from.resolve(row.path));
  if (!row.feature_path.empty()) out.feature_path = to.relativize(from.resolve(row.feature_path));
  return out;
}

Pipeline::Pipeline(PipelineConfig cfg, const DataSource& data) : cfg_(std::move(cfg)), data_(data) {
  cfg_.validate();
}

void Pipeline::warn(std::string_view msg) const {
  if (warn_) warn_(msg);
}

Manifest Pipeline::prepare(const Manifest& in) const {
  Manifest out = empty_like(cfg_);
  fs::create_directories(cfg_.out_dir / "prepared");

  const auto& rows = in.rows();
  std::vector<std::optional<ManifestRow>> results(rows.size());
  parallel_for(rows.size(), cfg_.threads, [&](std::size_t i) {
    const auto& row = rows[i];
    auto w = data_.load_audio(in, row);
    if (w.sample_rate_hz != audio::kCanonicalRateHz) w = audio::resample(w, audio::kCanonicalRateHz);
    auto normalized = audio::peak_normalize(w);
    if (normalized.all_zero || normalized.waveform.samples.empty()) return;
    const auto rel = "prepared/" + row.id + ".wav";
    audio::write_wav_file(cfg_.out_dir / rel, normalized.waveform, audio::BitDepth::Float32);
    ManifestRow r = row;
    r.path = rel;
    r.feature_path.clear();
    r.duration_s = normalized.waveform.duration_s();
    results[i] = std::move(r);
  });

  std::vector<train::SplitItem> pending;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!results[i]) {
      warn("prepare: dropped silent recording \"" + rows[i].id + "\"");
      continue;
    }
    const auto& r = *results[i];
    if (r.split == Split::Unassigned) {
      if (const auto label = to_train_label(r.label)) pending.push_back({r.id, *label, r.source});
    }
  }

  std::set<std::string> train_ids;
  std::set<std::string> dev_ids;
  if (!pending.empty()) {
    auto split = train::split_train_dev(pending, cfg_.split_fraction, derive_seed(cfg_.require_seed(), "split"));
    for (const auto& w : split.warnings) warn("prepare: " + w);
    train_ids.insert(split.train.begin(), split.train.end());
    dev_ids.insert(split.dev.begin(), split.dev.end());
  }
  for (auto& r : results) {
    if (!r) continue;
    if (train_ids.contains(r->id)) r->split = Split::Train;
    if (dev_ids.contains(r->id)) r->split = Split::Devel;
    out.add(std::move(*r));
  }
  out.write(cfg_.out_dir / "manifest_prepare.csv");
  return out;
}

DetectOutput Pipeline::detect(const Manifest& in) const {
  std::optional<detect::TreeEnsembleModel> loaded;
  if (!cfg_.detector_model.empty()) loaded = detect::load_model(cfg_.detector_model);
  const auto& model = loaded ? *loaded : detect::demo_model();

  const auto& rows = in.rows();
  std::vector<double> probs(rows.size(), 0.0);
  parallel_for(rows.size(), cfg_.threads, [&](std::size_t i) {
    const auto w = data_.load_audio(in, rows[i]);
    if (w.size() < static_cast<std::size_t>(detect::kDetectFrameLen)) return;
    const auto x = detect::extract_detection_features(w);
    if (x.degenerate) return;
    probs[i] = detect::predict_cough_probability(model, x.features, rows[i].id).probability;
  });

  DetectOutput out{empty_like(cfg_), empty_like(cfg_)};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto r = rebase(rows[i], in, out.scored);
    r.detection_prob = probs[i];
    if (probs[i] >= cfg_.threshold) out.kept.add(r);
    out.scored.add(std::move(r));
  }
  out.scored.write(cfg_.out_dir / "manifest_scored.csv");
  out.kept.write(cfg_.out_dir / "manifest_detect.csv");
  return out;
}

SegmentOutput Pipeline::segment(const Manifest& in) const {
  fs::create_directories(cfg_.out_dir / "segments");
  const auto& rows = in.rows();
  std::vector<std::vector<ManifestRow>> results(rows.size());
  parallel_for(rows.size(), cfg_.threads, [&](std::size_t i) {
    const auto& row = rows[i];
    const auto w = data_.load_audio(in, row);
    for (const auto& b : seg::segment(w, cfg_.segmenter)) {
      ManifestRow r = row;
      r.id = seg::segment_id(row.id, b.index);
      r.path = "segments/" + r.id + ".wav";
      r.feature_path.clear();
      r.parent_id = row.id;
      r.segment_index = b.index;
      r.segment_start = b.start_sample;
      r.segment_end = b.end_sample;
      r.segment_method = seg::to_string(cfg_.segmenter.method);
      const auto piece = seg::extract_segment(w, b);
      r.duration_s = piece.duration_s();
      audio::write_wav_file(cfg_.out_dir / r.path, piece, audio::BitDepth::Float32);
      results[i].push_back(std::move(r));
    }
  });

  SegmentOutput out{empty_like(cfg_), Table{{"source", "split", "label", "input_rows", "rows_with_segments", "segments"}, {}}};
  std::map<std::tuple<std::string, std::string, std::string>, std::array<std::size_t, 3>> counts;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto& c = counts[{rows[i].source, std::string(to_string(rows[i].split)), std::string(to_string(rows[i].label))}];
    ++c[0];
    if (!results[i].empty()) ++c[1];
    c[2] += results[i].size();
    for (auto& r : results[i]) out.segments.add(std::move(r));
  }
  for (const auto& [key, c] : counts) {
    out.counts.rows.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), std::to_string(c[0]),
                               std::to_string(c[1]), std::to_string(c[2])});
  }
  out.segments.write(cfg_.out_dir / "manifest_segment.csv");
  out.counts.write(cfg_.out_dir / "segment_counts.csv");
  return out;
}

Manifest Pipeline::featurize(const Manifest& in) const {
  fs::create_directories(cfg_.out_dir / "features");
  const auto& rows = in.rows();
  std::vector<std::string> paths(rows.size());
  parallel_for(rows.size(), cfg_.threads, [&](std::size_t i) {
    const auto w = data_.load_audio(in, rows[i]);
    const auto spec = dsp::log_mel_spectrogram(w);
    paths[i] = "features/" + rows[i].id + ".lmel";
    dsp::write_log_mel(cfg_.out_dir / paths[i], spec);
  });
  Manifest out = empty_like(cfg_);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto r = rebase(rows[i], in, out);
    r.feature_path = paths[i];
    out.add(std::move(r));
  }
  out.write(cfg_.out_dir / "manifest_featurize.csv");
  return out;
}

Manifest Pipeline::augment(const Manifest& in) const {
  fs::create_directories(cfg_.out_dir / "augmented");
  const auto seed = cfg_.require_seed();
  augment::NoiseBank noise;
  if (cfg_.noise_copies > 0) {
    noise = augment::NoiseBank::from_directory(cfg_.noise_dir, audio::kCanonicalRateHz);
    if (noise.empty()) throw Error(Errc::InvalidConfig, "noise_dir holds no WAV files");
  }

  const auto& rows = in.rows();
  std::vector<std::vector<ManifestRow>> extra(rows.size());
  parallel_for(rows.size(), cfg_.threads, [&](std::size_t i) {
    const auto& row = rows[i];
    if (row.split != Split::Train || !row.augmentation.empty()) return;
    auto copy_row = [&](const std::string& tag, int k) {
      ManifestRow r = rebase(row, in, Manifest(cfg_.out_dir));
      r.id = row.id + "_" + tag + std::to_string(k);
      r.parent_id = row.id;
      r.augmentation = tag == "sa" ? "specaugment" : "noise";
      r.feature_path = "augmented/" + r.id + ".lmel";
      return r;
    };
    if (cfg_.specaugment_copies > 0) {
      const auto spec = data_.load_features(in, row);
      for (int k = 0; k < cfg_.specaugment_copies; ++k) {
        auto r = copy_row("sa", k);
        auto rng = make_rng(seed, "specaugment/" + r.id);
        dsp::write_log_mel(cfg_.out_dir / r.feature_path, augment::spec_augment(spec, cfg_.augment, rng).spectrogram);
        extra[i].push_back(std::move(r));
      }
    }
    if (cfg_.noise_copies > 0) {
      const auto clean = data_.load_audio(in, row);
      for (int k = 0; k < cfg_.noise_copies; ++k) {
        auto r = copy_row("nz", k);
        auto rng = make_rng(seed, "noise/" + r.id);
        const auto& clip = noise.draw(rng);
        const auto mix = augment::add_noise(clean, clip, augment::sample_snr_db(cfg_.augment, rng), rng);
        dsp::write_log_mel(cfg_.out_dir / r.feature_path, dsp::log_mel_spectrogram(mix.mixed));
        extra[i].push_back(std::move(r));
      }
    }
  });

  Manifest out = empty_like(cfg_);
  for (const auto& row : rows) out.add(rebase(row, in, out));
  for (auto& group : extra) {
    for (auto& r : group) out.add(std::move(r));
  }
  out.write(cfg_.out_dir / "manifest_augment.csv");
  return out;
}

TrainOutput Pipeline::train(const Manifest& in) const {
  std::vector<const ManifestRow*> chosen;
  for (const auto& row : in.rows()) {
    if (row.split != Split::Train || !to_train_label(row.label)) continue;
    if (const auto it = cfg_.train_source_labels.find(row.source); it != cfg_.train_source_labels.end()) {
      if (std::find(it->second.begin(), it->second.end(), row.label) == it->second.end()) continue;
    }
    chosen.push_back(&row);
  }
  std::vector<Matrix> specs(chosen.size());
  parallel_for(chosen.size(), cfg_.threads,
               [&](std::size_t i) { specs[i] = data_.load_features(in, *chosen[i]).values; });

  TrainOutput out;
  std::vector<train::Label> labels;
  for (const auto* row : chosen) {
    labels.push_back(*to_train_label(row->label));
    out.train_ids.push_back(row->id);
  }
  auto tc = cfg_.train;
  tc.seed = derive_seed(cfg_.require_seed(), "train");
  const train::SpectrogramTrainingSet set(std::move(specs), std::move(labels));
  out.result = train::train(set, tc);

  save_classifier(cfg_.out_dir / "model" / "classifier.json", out.result.classifier);
  Table history{{"epoch", "loss"}, {}};
  for (std::size_t e = 0; e < out.result.loss_history.size(); ++e) {
    history.rows.push_back({std::to_string(e + 1), format_double(out.result.loss_history[e])});
  }
  history.write(cfg_.out_dir / "model" / "loss_history.csv");
  return out;
}

void append_metrics(Table& table, std::string_view prefix, const train::MetricsReport& r, std::size_t count) {
  const std::string p(prefix);
  table.rows.push_back({p + "_count", std::to_string(count)});
  table.rows.push_back({p + "_tp", std::to_string(r.tp)});
  table.rows.push_back({p + "_fp", std::to_string(r.fp)});
  table.rows.push_back({p + "_tn", std::to_string(r.tn)});
  table.rows.push_back({p + "_fn", std::to_string(r.fn)});
  table.rows.push_back({p + "_recall_positive", fixed(r.recall_positive, 6)});
  table.rows.push_back({p + "_recall_negative", fixed(r.recall_negative, 6)});
  table.rows.push_back({p + "_ua", fixed(r.unweighted_accuracy, 6)});
  table.rows.push_back({p + "_accuracy", fixed(r.accuracy, 6)});
}

EvalOutput Pipeline::evaluate(const Manifest& in, const train::Classifier& classifier, bool include_test) const {
  std::vector<const ManifestRow*> chosen;
  for (const auto& row : in.rows()) {
    if (!row.augmentation.empty() || !to_train_label(row.label)) continue;
    if (row.split == Split::Devel || (include_test && row.split == Split::Test)) chosen.push_back(&row);
  }
  std::vector<train::Activations> scores(chosen.size());
  parallel_for(chosen.size(), cfg_.threads, [&](std::size_t i) {
    scores[i] = classifier.scores(train::embed_pooled(data_.load_features(in, *chosen[i])));
  });

  EvalOutput out;
  out.metrics.header = {"metric", "value"};
  Table predictions{{"id", "split", "label", "predicted", "score_negative", "score_positive"}, {}};
  for (const Split split : {Split::Devel, Split::Test}) {
    std::vector<train::Label> preds;
    std::vector<train::Label> labels;
    for (std::size_t i = 0; i < chosen.size(); ++i) {
      if (chosen[i]->split != split) continue;
      const auto pred = train::argmax_label(scores[i]);
      preds.push_back(pred);
      labels.push_back(*to_train_label(chosen[i]->label));
      predictions.rows.push_back({chosen[i]->id, std::string(to_string(split)), std::string(to_string(chosen[i]->label)),
                                  pred == train::Label::Positive ? "positive" : "negative", fixed(scores[i][0], 6),
                                  fixed(scores[i][1], 6)});
    }
    if (labels.empty()) continue;
    const auto report = train::unweighted_accuracy(preds, labels);
    (split == Split::Devel ? out.dev : out.test) = report;
    append_metrics(out.metrics, split == Split::Devel ? "dev" : "test", report, labels.size());
  }
  out.metrics.write(cfg_.out_dir / "metrics.csv");
  predictions.write(cfg_.out_dir / "predictions.csv");
  return out;
}

RunResult Pipeline::run(const Manifest& in, const RunOptions& options) const {
  fs::create_directories(cfg_.out_dir);
  write_text(cfg_.out_dir / "config_used.txt", to_settings_text(cfg_));

  RunResult result;
  Manifest current(in.base_dir());
  for (const auto& row : in.rows()) {
    if (!(options.drop_test && row.split == Split::Test)) current.add(row);
  }

  for (const auto stage : cfg_.execution_order()) {
    switch (stage) {
      case Stage::Prepare:
        current = run_stage(stage, [&] { return prepare(current); });
        break;
      case Stage::Detect: {
        auto det = run_stage(stage, [&] { return detect(current); });
        write_report(det.scored, cfg_.out_dir / "report");
        current = std::move(det.kept);
        result.detect_kept = current.size();
        break;
      }
      case Stage::Segment:
        current = run_stage(stage, [&] { return segment(current).segments; });
        break;
      case Stage::Featurize:
        current = run_stage(stage, [&] { return featurize(current); });
        break;
      case Stage::Augment:
        current = run_stage(stage, [&] { return augment(current); });
        break;
      case Stage::Train: {
        auto trained = run_stage(stage, [&] { return train(current); });
        result.train_count = trained.train_ids.size();
        result.classifier = std::move(trained.result.classifier);
        break;
      }
      case Stage::Eval: {
        if (!result.classifier) {
          result.classifier = run_stage(stage, [&] { return load_classifier(cfg_.out_dir / "model" / "classifier.json"); });
        }
        auto eval = run_stage(stage, [&] { return evaluate(current, *result.classifier, options.evaluate_test); });
        result.dev = eval.dev;
        result.test = eval.test;
        break;
      }
    }
    result.stage_rows.emplace_back(stage, current.size());
  }

  for (const auto& row : current.rows()) {
    if (row.split == Split::Devel && row.augmentation.empty() && to_train_label(row.label)) ++result.dev_count;
  }

  Table rows{{"stage", "rows"}, {}};
  for (const auto& [stage, n] : result.stage_rows) rows.rows.push_back({std::string(to_string(stage)), std::to_string(n)});
  rows.write(cfg_.out_dir / "stage_rows.csv");

  if (cfg_.enabled(Stage::Eval)) {
    std::string augmentation = cfg_.enabled(Stage::Augment) && cfg_.specaugment_copies > 0 ? "SpecAugment" : "";
    if (cfg_.enabled(Stage::Augment) && cfg_.noise_copies > 0) augmentation += augmentation.empty() ? "Noise" : " + Noise";
    if (cfg_.train.mixup != train::MixupLevel::None) {
      augmentation += (augmentation.empty() ? "" : " + ") + std::string("Mixup(") + mixup_name(cfg_.train.mixup) +
                      ", alpha=" + fixed(cfg_.train.mixup_alpha, 2) + ")";
    }
    const std::vector<SummaryLine> lines = {
        {augmentation.empty() ? "None" : augmentation, "Log-mel 64 pooled", "Linear head (AdamW)",
         result.dev ? std::optional(result.dev->unweighted_accuracy) : std::nullopt},
    };
    std::string text = "Development set\n" + summary_text(lines);
    if (result.test) {
      const std::vector<SummaryLine> test_lines = {{lines[0].augmentation, lines[0].feature, lines[0].classifier,
                                                    result.test->unweighted_accuracy}};
      text += "\nTest set\n" + summary_text(test_lines);
    }
    write_text(cfg_.out_dir / "summary.txt", text);
  }
  result.manifest = std::move(current);
  return result;
}

RunResult Pipeline::run(const RunOptions& options) const {
  cfg_.check_paths();
  return run(Manifest::read(cfg_.manifest), options);
}

std::string classifier_to_json(const train::Classifier& c) {
  nlohmann::json j;
  j["dim"] = c.head.dim();
  j["mean"] = c.standardizer.mean;
  j["inv_std"] = c.standardizer.inv_std;
  j["params"] = std::vector<double>(c.head.params().begin(), c.head.params().end());
  return j.dump(2) + "\n";
}

train::Classifier classifier_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    train::Classifier c;
    const auto dim = j.at("dim").get<std::size_t>();
    c.standardizer.mean = j.at("mean").get<std::vector<double>>();
    c.standardizer.inv_std = j.at("inv_std").get<std::vector<double>>();
    const auto params = j.at("params").get<std::vector<double>>();
    if (c.standardizer.mean.size() != dim || c.standardizer.inv_std.size() != dim || params.size() != 2 * dim + 2) {
      throw Error(Errc::FormatError, "classifier dimensions disagree");
    }
    c.head = train::LinearHead(dim);
    std::copy(params.begin(), params.end(), c.head.params().begin());
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::FormatError, std::string("classifier: ") + e.what());
  }
}

void save_classifier(const fs::path& path, const train::Classifier& c) { write_text(path, classifier_to_json(c)); }

train::Classifier load_classifier(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return classifier_from_json(text);
}

}  // namespace coughkit::pipeline
