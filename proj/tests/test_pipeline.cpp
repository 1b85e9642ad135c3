#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include "coughkit/config.hpp"
#include "coughkit/error.hpp"
#include "coughkit/manifest.hpp"
#include "coughkit/pipeline.hpp"
#include "coughkit/report.hpp"
#include "coughkit/synth.hpp"

using namespace coughkit;
using namespace coughkit::pipeline;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename Fn>
Errc error_kind(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no exception";
  return Errc::Io;
}

// Records every row the stages read.
class TrackingSource final : public DataSource {
 public:
  audio::Waveform load_audio(const Manifest& m, const ManifestRow& row) const override {
    note(row);
    return file_data_source().load_audio(m, row);
  }
  dsp::LogMelSpectrogram load_features(const Manifest& m, const ManifestRow& row) const override {
    note(row);
    return file_data_source().load_features(m, row);
  }
  std::vector<ManifestRow> seen() const {
    std::lock_guard lock(mu_);
    return seen_;
  }
  void clear() {
    std::lock_guard lock(mu_);
    seen_.clear();
  }

 private:
  void note(const ManifestRow& row) const {
    std::lock_guard lock(mu_);
    seen_.push_back(row);
  }
  mutable std::mutex mu_;
  mutable std::vector<ManifestRow> seen_;
};

class PipelineTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "coughkit_pipeline_test";
    fs::remove_all(root_);
    SynthSpec spec;
    spec.n_files = 30;
    spec.seed = 3;
    corpus_ = new SynthCorpus(generate_synthetic_corpus(spec, root_ / "corpus"));
  }
  static void TearDownTestSuite() {
    delete corpus_;
    corpus_ = nullptr;
  }

  static PipelineConfig config(const std::string& out) {
    PipelineConfig cfg;
    cfg.manifest = corpus_->manifest_path;
    cfg.out_dir = root_ / out;
    cfg.seed = 11;
    cfg.threshold = 0.5;
    cfg.train.epochs = 5;
    cfg.threads = 2;
    return cfg;
  }

  static Manifest input() { return Manifest::read(corpus_->manifest_path); }

  static inline fs::path root_;
  static inline SynthCorpus* corpus_ = nullptr;
};

}  // namespace

TEST(ManifestCsv, RoundTripWithQuoting) {
  Manifest m("/data");
  ManifestRow a;
  a.id = "a";
  a.path = "audio/a,1.wav";
  a.label = RowLabel::Positive;
  a.source = "src \"x\"";
  a.split = Split::Train;
  a.duration_s = 2.087875;
  a.detection_prob = 0.25;
  m.add(a);
  ManifestRow b;
  b.id = "b";
  b.path = "b.wav";
  b.segment_index = 2;
  b.segment_start = 100;
  b.segment_end = 900;
  b.segment_method = "hysteresis";
  m.add(b);
  const auto text = m.to_csv();
  EXPECT_NE(text.find("\"audio/a,1.wav\""), std::string::npos);
  EXPECT_NE(text.find("2.087875"), std::string::npos);
  const auto back = Manifest::parse(text, "/data");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.rows()[0], a);
  EXPECT_EQ(back.rows()[1], b);
}

TEST(ManifestCsv, Errors) {
  EXPECT_EQ(error_kind([] { Manifest::parse("id,path,colour\na,b,red\n", "."); }), Errc::FormatError);
  EXPECT_EQ(error_kind([] { Manifest::parse("id,label\na,positive\n", "."); }), Errc::FormatError);
  EXPECT_EQ(error_kind([] { Manifest::parse("id,path,label\na,x.wav,maybe\n", "."); }), Errc::FormatError);
  EXPECT_EQ(error_kind([] { Manifest::parse("id,path\na,x.wav\na,y.wav\n", "."); }), Errc::DuplicateId);
  EXPECT_EQ(error_kind([] { Manifest::parse("id,path,detection_prob\na,x.wav,1.5\n", "."); }), Errc::FormatError);
  const auto m = Manifest::parse("path,id\nx.wav,a\n", "/base");
  EXPECT_EQ(m.rows()[0].label, RowLabel::Unknown);
  EXPECT_EQ(m.resolve("x.wav"), fs::path("/base/x.wav"));
  EXPECT_EQ(m.relativize("/base/sub/y.wav"), "sub/y.wav");
  EXPECT_EQ(m.relativize("/elsewhere/y.wav"), "/elsewhere/y.wav");
}

TEST(Config, LaterSettingsWinAndUnknownKeysFail) {
  PipelineConfig cfg;
  apply_settings(cfg, parse_settings("seed = 4\nthreshold = 0.7  # comment\n"));
  apply_settings(cfg, {{"threshold", "0.8"}});
  EXPECT_EQ(cfg.seed, 4u);
  EXPECT_DOUBLE_EQ(cfg.threshold, 0.8);
  EXPECT_EQ(error_kind([] { parse_settings("colour = red\n"); }), Errc::InvalidConfig);
  EXPECT_EQ(error_kind([] { parse_settings("just words\n"); }), Errc::InvalidConfig);
  EXPECT_EQ(error_kind([&] { apply_settings(cfg, {{"threshold", "high"}}); }), Errc::InvalidConfig);
}

TEST(Config, TextRoundTrip) {
  PipelineConfig cfg;
  apply_settings(cfg, parse_settings("seed = 9\nstages = prepare,detect,segment\nstage_order = segment,detect\n"
                                     "train_source_labels = a=positive;b=positive,negative\nmixup = embedding\n"));
  PipelineConfig back;
  apply_settings(back, parse_settings(to_settings_text(cfg)));
  EXPECT_EQ(to_settings_text(back), to_settings_text(cfg));
  const std::vector<Stage> order{Stage::Prepare, Stage::Segment, Stage::Detect};
  EXPECT_EQ(back.execution_order(), order);
  EXPECT_EQ(back.train_source_labels.at("b").size(), 2u);
}

TEST(Config, ValidationNeedsSeed) {
  PipelineConfig cfg;
  EXPECT_EQ(error_kind([&] { cfg.validate(); }), Errc::InvalidConfig);
  cfg.seed = 1;
  EXPECT_NO_THROW(cfg.validate());
  cfg.split_fraction = 1.0;
  EXPECT_EQ(error_kind([&] { cfg.validate(); }), Errc::InvalidConfig);
}

TEST(Report, DurationHistogram) {
  Manifest m(".");
  for (const auto& [id, d] : std::vector<std::pair<std::string, double>>{{"a", 5.0}, {"b", 9.0}}) {
    ManifestRow r;
    r.id = id;
    r.path = id + ".wav";
    r.duration_s = d;
    m.add(r);
  }
  EXPECT_EQ(duration_histogram(m).to_csv(), "bin_start_s,bin_end_s,count\n5.0,10.0,2\n");
  EXPECT_EQ(duration_histogram(Manifest(".")).to_csv(), "bin_start_s,bin_end_s,count\n");
}

TEST(Report, DetectionCounts) {
  Manifest m(".");
  for (const auto& [id, p] : std::vector<std::pair<std::string, double>>{{"a", 0.95}, {"b", 0.05}}) {
    ManifestRow r;
    r.id = id;
    r.path = id + ".wav";
    r.detection_prob = p;
    m.add(r);
  }
  const std::vector<double> th{0.6, 0.9};
  EXPECT_EQ(detection_counts(m, th).to_csv(), "threshold,kept_count\n0.60,1\n0.90,1\n");
  EXPECT_EQ(detection_counts(Manifest("."), th).to_csv(), "threshold,kept_count\n0.60,0\n0.90,0\n");
  const auto hist = detection_histogram(m);
  ASSERT_EQ(hist.rows.size(), 10u);
  EXPECT_EQ(hist.rows[0][2], "1");
  EXPECT_EQ(hist.rows[9][2], "1");
}

TEST(Report, SummaryText) {
  const std::vector<SummaryLine> lines{{"specaugment+mixup", "log-mel", "linear", 0.875}};
  const auto text = summary_text(lines);
  EXPECT_NE(text.find("UA (%)"), std::string::npos);
  EXPECT_NE(text.find("87.50"), std::string::npos);
}

TEST(Sweep, ColumnsAndValues) {
  EXPECT_EQ(sweep_columns(SweepDimension::Threshold),
            (std::vector<std::string>{"threshold", "data_count", "ua", "status"}));
  EXPECT_EQ(sweep_columns(SweepDimension::SplitRatio),
            (std::vector<std::string>{"split_ratio", "train_count", "dev_count", "ua", "status"}));
  EXPECT_EQ(parse_dimension("weight_decay"), SweepDimension::WeightDecay);
  EXPECT_EQ(error_kind([] { parse_dimension("momentum"); }), Errc::InvalidConfig);
  EXPECT_EQ(error_kind([] { validate_sweep_value(SweepDimension::Alpha, 0.0); }), Errc::InvalidConfig);
  EXPECT_EQ(default_sweep_values(SweepDimension::Threshold), (std::vector<double>{0.6, 0.7, 0.8, 0.9}));
}

TEST(ClassifierJson, RoundTrip) {
  train::Classifier c;
  c.standardizer = train::Standardizer::identity(2);
  c.standardizer.mean = {0.1, -3.0};
  c.head = train::LinearHead(2);
  for (std::size_t i = 0; i < 6; ++i) c.head.params()[i] = 0.1 * static_cast<double>(i) - 0.2;
  const auto back = classifier_from_json(classifier_to_json(c));
  EXPECT_EQ(back.standardizer.mean, c.standardizer.mean);
  EXPECT_EQ(back.standardizer.inv_std, c.standardizer.inv_std);
  EXPECT_TRUE(std::equal(back.head.params().begin(), back.head.params().end(), c.head.params().begin()));
  EXPECT_EQ(error_kind([] { classifier_from_json("{\"dim\": 2}"); }), Errc::FormatError);
}

TEST(RunStage, WrapsFailures) {
  try {
    run_stage(Stage::Segment, []() -> int { throw std::runtime_error("boom"); });
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), Errc::StageFailure);
    EXPECT_NE(std::string(e.what()).find("segment"), std::string::npos);
  }
}

TEST_F(PipelineTest, StagesAccountForRows) {
  Pipeline p(config("stages"));
  p.on_warning([](std::string_view) {});
  const auto prepared = p.prepare(input());
  EXPECT_EQ(prepared.size(), 30u);
  for (const auto& r : prepared.rows()) EXPECT_NE(r.split, Split::Unassigned);

  const auto det = p.detect(prepared);
  EXPECT_EQ(det.scored.size(), prepared.size());
  EXPECT_LE(det.kept.size(), prepared.size());
  for (const auto& r : det.kept.rows()) EXPECT_GE(*r.detection_prob, 0.5);

  const auto seg = p.segment(det.kept);
  std::size_t inputs = 0, segments = 0;
  const auto col = [&](const std::string& name) {
    return std::find(seg.counts.header.begin(), seg.counts.header.end(), name) - seg.counts.header.begin();
  };
  for (const auto& row : seg.counts.rows) {
    inputs += std::stoul(row[col("input_rows")]);
    segments += std::stoul(row[col("segments")]);
    EXPECT_LE(std::stoul(row[col("rows_with_segments")]), std::stoul(row[col("input_rows")]));
  }
  EXPECT_EQ(inputs, det.kept.size());
  EXPECT_EQ(segments, seg.segments.size());
  for (const auto& r : seg.segments.rows()) {
    const auto* parent = det.kept.find(r.parent_id);
    ASSERT_NE(parent, nullptr);
    EXPECT_EQ(r.split, parent->split);
    EXPECT_TRUE(fs::exists(seg.segments.resolve(r.path)));
  }

  const auto feats = p.featurize(seg.segments);
  const auto aug = p.augment(feats);
  std::size_t train_rows = 0;
  for (const auto& r : feats.rows()) train_rows += r.split == Split::Train;
  EXPECT_EQ(aug.size(), feats.size() + train_rows);
  for (const auto& r : aug.rows()) {
    if (!r.augmentation.empty()) EXPECT_EQ(feats.find(r.parent_id)->split, Split::Train);
  }
}

TEST_F(PipelineTest, RunIsDeterministicAcrossThreadCounts) {
  auto a = config("det_a");
  auto b = config("det_b");
  b.threads = 1;
  const auto ra = Pipeline(a).run();
  const auto rb = Pipeline(b).run();
  ASSERT_TRUE(ra.dev.has_value());
  const auto metrics = slurp(a.out_dir / "metrics.csv");
  EXPECT_FALSE(metrics.empty());
  EXPECT_EQ(metrics, slurp(b.out_dir / "metrics.csv"));
  EXPECT_EQ(slurp(a.out_dir / "model" / "classifier.json"), slurp(b.out_dir / "model" / "classifier.json"));
  EXPECT_EQ(slurp(a.out_dir / "manifest_augment.csv"), slurp(b.out_dir / "manifest_augment.csv"));
  EXPECT_TRUE(fs::exists(a.out_dir / "report" / "detection_counts.csv"));
  EXPECT_TRUE(fs::exists(a.out_dir / "summary.txt"));
}

TEST_F(PipelineTest, TrainingNeverReadsTestRows) {
  TrackingSource src;
  const auto cfg = config("isolation");
  Pipeline p(cfg, src);
  const auto feats = p.featurize(p.segment(p.detect(p.prepare(input())).kept).segments);
  const auto aug = p.augment(feats);
  bool has_test = false;
  for (const auto& r : aug.rows()) has_test = has_test || r.split == Split::Test;
  ASSERT_TRUE(has_test);

  src.clear();
  const auto trained = p.train(aug);
  for (const auto& r : src.seen()) EXPECT_EQ(r.split, Split::Train) << r.id;
  EXPECT_FALSE(src.seen().empty());

  src.clear();
  p.evaluate(aug, trained.result.classifier, false);
  for (const auto& r : src.seen()) EXPECT_EQ(r.split, Split::Devel) << r.id;
}

TEST_F(PipelineTest, SweepsNeverSeeTestRows) {
  TrackingSource src;
  auto cfg = config("sweep");
  const std::vector<double> values{0.6, 0.9, 0.999};
  const auto sweep = run_sweep(cfg, SweepDimension::Threshold, values, src);
  for (const auto& r : src.seen()) EXPECT_NE(r.split, Split::Test) << r.id;
  ASSERT_EQ(sweep.cells.size(), 3u);
  ASSERT_TRUE(sweep.cells[0].data_count && sweep.cells[1].data_count);
  EXPECT_LE(*sweep.cells[1].data_count, *sweep.cells[0].data_count);
  EXPECT_EQ(sweep.cells[1].status, "ok");
  // Nothing survives 0.999, so training fails; the cell records it and the
  // sweep still completes.
  EXPECT_EQ(sweep.cells[2].status.rfind("error: ", 0), 0u);
  EXPECT_FALSE(sweep.cells[2].ua);
  const auto csv = slurp(cfg.out_dir / "sweep" / "threshold.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "threshold,data_count,ua,status");
}

TEST_F(PipelineTest, SourceFilterRestrictsTraining) {
  auto cfg = config("filter");
  cfg.train_source_labels["synth_a"] = {RowLabel::Positive};
  Pipeline p(cfg);
  const auto feats = p.featurize(p.segment(p.detect(p.prepare(input())).kept).segments);
  const auto out = p.train(feats);
  for (const auto& id : out.train_ids) {
    const auto* r = feats.find(id);
    if (r->source == "synth_a") EXPECT_EQ(r->label, RowLabel::Positive);
  }
}

TEST_F(PipelineTest, FailuresNameTheStage) {
  auto cfg = config("broken");
  Manifest m(root_);
  ManifestRow r;
  r.id = "ghost";
  r.path = "no/such/file.wav";
  m.add(r);
  try {
    Pipeline(cfg).run(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), Errc::StageFailure);
    EXPECT_NE(std::string(e.what()).find("prepare"), std::string::npos);
  }
}

TEST_F(PipelineTest, AlphaSweepCoversDefaultGrid) {
  TrackingSource src;
  auto cfg = config("alpha");
  cfg.train.epochs = 2;
  const auto sweep = run_sweep(cfg, SweepDimension::Alpha, default_sweep_values(SweepDimension::Alpha), src);
  ASSERT_EQ(sweep.cells.size(), 10u);
  for (const auto& c : sweep.cells) {
    ASSERT_TRUE(c.ua) << c.status;
    EXPECT_GE(*c.ua, 0.0);
    EXPECT_LE(*c.ua, 1.0);
  }
  const auto csv = slurp(cfg.out_dir / "sweep" / "alpha.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 11);
}

TEST(Synth, FixedBurstCountAndReproducibleBytes) {
  SynthSpec spec;
  spec.n_files = 10;
  spec.min_bursts = spec.max_bursts = 3;
  spec.noise_files = 1;
  spec.seed = 9;
  const fs::path a = fs::temp_directory_path() / "coughkit_synth_a";
  const fs::path b = fs::temp_directory_path() / "coughkit_synth_b";
  fs::remove_all(a);
  fs::remove_all(b);
  const auto corpus = generate_synthetic_corpus(spec, a);
  generate_synthetic_corpus(spec, b);

  EXPECT_EQ(corpus.manifest.size(), 10u);
  std::map<std::string, int> per_file;
  for (const auto& t : read_ground_truth(a / "ground_truth.csv")) ++per_file[t.file_id];
  ASSERT_EQ(per_file.size(), 10u);
  for (const auto& [id, n] : per_file) EXPECT_EQ(n, 3) << id;

  for (const auto& entry : fs::directory_iterator(a / "audio")) {
    EXPECT_EQ(slurp(entry.path()), slurp(b / "audio" / entry.path().filename())) << entry.path();
  }
  EXPECT_EQ(slurp(a / "manifest.csv"), slurp(b / "manifest.csv"));
  fs::remove_all(a);
  fs::remove_all(b);
}
