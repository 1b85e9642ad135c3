// coughkit: command-line driver for the cough classification pipeline.
//
// Exit codes: 0 ok, 2 configuration error, 3 manifest or data error,
// 4 stage failure.

#include <algorithm>
#include <charconv>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "coughkit/config.hpp"
#include "coughkit/error.hpp"
#include "coughkit/manifest.hpp"
#include "coughkit/pipeline.hpp"
#include "coughkit/report.hpp"
#include "coughkit/synth.hpp"

namespace ck = coughkit;
namespace pl = coughkit::pipeline;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitStage = 4;

struct ExitError {
  int code;
  std::string message;
};

std::string flag_name(std::string_view key) {
  std::string out(key);
  std::replace(out.begin(), out.end(), '_', '-');
  return "--" + out;
}

/// Config file path plus one optional string per config key.
struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "key = value config file")->check(CLI::ExistingFile);
    for (const auto& key : pl::config_keys()) {
      cmd->add_option(flag_name(key.name), values[std::string(key.name)], std::string(key.help));
    }
  }

  pl::PipelineConfig build(const CLI::App* cmd) const {
    try {
      pl::PipelineConfig cfg;
      if (!config_file.empty()) pl::apply_settings(cfg, pl::read_settings(config_file));
      pl::Settings cli;
      for (const auto& key : pl::config_keys()) {
        const auto name = std::string(key.name);
        if (cmd->count(flag_name(key.name)) > 0) cli.emplace_back(name, values.at(name));
      }
      pl::apply_settings(cfg, cli);
      cfg.validate();
      return cfg;
    } catch (const ck::Error& e) {
      throw ExitError{kExitConfig, e.what()};
    }
  }
};

pl::Manifest read_manifest(const std::filesystem::path& path) {
  if (path.empty()) throw ExitError{kExitConfig, "no manifest given (--manifest)"};
  try {
    return pl::Manifest::read(path);
  } catch (const ck::Error& e) {
    throw ExitError{kExitData, e.what()};
  }
}

template <typename Fn>
auto stage(pl::Stage s, Fn&& fn) {
  try {
    return pl::run_stage(s, std::forward<Fn>(fn));
  } catch (const ck::Error& e) {
    throw ExitError{kExitStage, e.what()};
  }
}

pl::Pipeline make_pipeline(const pl::PipelineConfig& cfg) {
  try {
    pl::Pipeline p(cfg);
    p.on_warning([](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; });
    return p;
  } catch (const ck::Error& e) {
    throw ExitError{kExitConfig, e.what()};
  }
}

void print_metrics(const pl::RunResult& r) {
  if (r.dev) std::cout << "dev UA " << r.dev->unweighted_accuracy << '\n';
  if (r.test) std::cout << "test UA " << r.test->unweighted_accuracy << '\n';
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const auto item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || ptr != item.data() + item.size()) {
      throw ExitError{kExitConfig, "bad sweep value \"" + item + "\""};
    }
    out.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coughkit: cough detection, segmentation, augmentation and classification pipeline"};
  app.require_subcommand(1);

  std::map<std::string, ConfigFlags> flags;
  std::map<std::string, CLI::App*> cmds;
  auto add = [&](const std::string& name, const std::string& help) {
    auto* cmd = app.add_subcommand(name, help);
    flags[name].attach(cmd);
    cmds[name] = cmd;
    return cmd;
  };

  add("prepare", "resample, normalize and split the input manifest");
  add("detect", "score rows with the cough detector and filter by threshold");
  add("segment", "split rows into per-cough segments");
  add("featurize", "compute log-mel spectrograms");
  add("augment", "add SpecAugment and noise copies of training rows");
  add("train", "train the classifier head");
  auto* eval_cmd = add("eval", "evaluate a trained classifier");
  std::string model_path;
  eval_cmd->add_option("--model", model_path, "classifier JSON (default <out-dir>/model/classifier.json)");
  add("run", "run all enabled stages");

  auto* sweep_cmd = add("sweep", "rerun the pipeline over one parameter");
  std::string dimension;
  std::string values_text;
  sweep_cmd->add_option("--dimension", dimension, "threshold, split_ratio, alpha, lr or weight_decay")->required();
  sweep_cmd->add_option("--values", values_text, "comma-separated values (default: built-in grid)");

  auto* synth_cmd = app.add_subcommand("synth", "generate the synthetic burst-train corpus");
  pl::SynthSpec spec;
  std::string synth_out;
  std::optional<std::uint64_t> synth_seed;
  synth_cmd->add_option("--out-dir", synth_out, "output directory")->required();
  synth_cmd->add_option("--seed", synth_seed, "random seed")->required();
  synth_cmd->add_option("--n-files", spec.n_files, "number of recordings");
  synth_cmd->add_option("--min-bursts", spec.min_bursts, "fewest bursts per file");
  synth_cmd->add_option("--max-bursts", spec.max_bursts, "most bursts per file");
  synth_cmd->add_option("--noise-floor", spec.noise_floor, "background noise standard deviation");
  synth_cmd->add_option("--positive-fraction", spec.positive_fraction, "share of positive files");
  synth_cmd->add_option("--test-fraction", spec.test_fraction, "share of files in the test split");

  auto* report_cmd = app.add_subcommand("report", "emit histogram tables for a manifest");
  std::string report_manifest;
  std::string report_out;
  report_cmd->add_option("--manifest", report_manifest, "manifest CSV")->required();
  report_cmd->add_option("--out-dir", report_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  try {
    if (synth_cmd->parsed()) {
      spec.seed = *synth_seed;
      try {
        spec.validate();
      } catch (const ck::Error& e) {
        throw ExitError{kExitConfig, e.what()};
      }
      const auto corpus = pl::generate_synthetic_corpus(spec, synth_out);
      std::cout << "wrote " << corpus.manifest.size() << " recordings to " << corpus.manifest_path.string() << '\n';
      return 0;
    }
    if (report_cmd->parsed()) {
      const auto m = read_manifest(report_manifest);
      pl::write_report(m, report_out);
      std::cout << "report written to " << report_out << '\n';
      return 0;
    }

    const auto it = std::find_if(cmds.begin(), cmds.end(), [](const auto& kv) { return kv.second->parsed(); });
    const auto& name = it->first;
    const auto cfg = flags[name].build(it->second);

    if (name == "sweep") {
      pl::SweepDimension d{};
      std::vector<double> values;
      try {
        d = pl::parse_dimension(dimension);
        values = values_text.empty() ? pl::default_sweep_values(d) : parse_values(values_text);
        for (const double v : values) pl::validate_sweep_value(d, v);
        cfg.check_paths();
      } catch (const ck::Error& e) {
        throw ExitError{kExitConfig, e.what()};
      }
      read_manifest(cfg.manifest);
      const auto result = pl::run_sweep(cfg, d, values);
      std::cout << result.table.to_csv();
      return 0;
    }

    if (name == "run") {
      try {
        cfg.check_paths();
      } catch (const ck::Error& e) {
        throw ExitError{kExitConfig, e.what()};
      }
      const auto input = read_manifest(cfg.manifest);
      const auto pipeline = make_pipeline(cfg);
      pl::RunResult result;
      try {
        result = pipeline.run(input);
      } catch (const ck::Error& e) {
        throw ExitError{kExitStage, e.what()};
      }
      for (const auto& [s, n] : result.stage_rows) std::cout << pl::to_string(s) << ": " << n << " rows\n";
      print_metrics(result);
      return 0;
    }

    const auto pipeline = make_pipeline(cfg);
    const auto input = read_manifest(cfg.manifest);
    const auto s = pl::parse_stage(name);
    std::size_t rows = 0;
    switch (s) {
      case pl::Stage::Prepare: rows = stage(s, [&] { return pipeline.prepare(input); }).size(); break;
      case pl::Stage::Detect: rows = stage(s, [&] { return pipeline.detect(input); }).kept.size(); break;
      case pl::Stage::Segment: rows = stage(s, [&] { return pipeline.segment(input); }).segments.size(); break;
      case pl::Stage::Featurize: rows = stage(s, [&] { return pipeline.featurize(input); }).size(); break;
      case pl::Stage::Augment: rows = stage(s, [&] { return pipeline.augment(input); }).size(); break;
      case pl::Stage::Train: rows = stage(s, [&] { return pipeline.train(input); }).train_ids.size(); break;
      case pl::Stage::Eval: {
        const auto path = model_path.empty() ? cfg.out_dir / "model" / "classifier.json" : std::filesystem::path(model_path);
        const auto classifier = stage(s, [&] { return pl::load_classifier(path); });
        const auto out = stage(s, [&] { return pipeline.evaluate(input, classifier, true); });
        if (out.dev) std::cout << "dev UA " << out.dev->unweighted_accuracy << '\n';
        if (out.test) std::cout << "test UA " << out.test->unweighted_accuracy << '\n';
        return 0;
      }
    }
    std::cout << name << ": " << rows << " rows\n";
    return 0;
  } catch (const ExitError& e) {
    std::cerr << "error: " << e.message << '\n';
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitStage;
  }
}
