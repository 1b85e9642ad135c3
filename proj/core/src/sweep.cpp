#include <cmath>
#include <cstdio>

#include "coughkit/error.hpp"
#include "coughkit/pipeline.hpp"

namespace coughkit::pipeline {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string value_text(SweepDimension d, double v) {
  switch (d) {
    case SweepDimension::Threshold:
    case SweepDimension::SplitRatio:
    case SweepDimension::Alpha: return fixed(v, 2);
    case SweepDimension::LearningRate:
    case SweepDimension::WeightDecay: return format_double(v);
  }
  return format_double(v);
}

template <typename T>
std::string opt_count(const std::optional<T>& v) {
  return v ? std::to_string(*v) : std::string();
}

}  // namespace

std::string_view to_string(SweepDimension d) noexcept {
  switch (d) {
    case SweepDimension::Threshold: return "threshold";
    case SweepDimension::SplitRatio: return "split_ratio";
    case SweepDimension::Alpha: return "alpha";
    case SweepDimension::LearningRate: return "lr";
    case SweepDimension::WeightDecay: return "weight_decay";
  }
  return "?";
}

SweepDimension parse_dimension(std::string_view name) {
  for (const auto d : {SweepDimension::Threshold, SweepDimension::SplitRatio, SweepDimension::Alpha,
                       SweepDimension::LearningRate, SweepDimension::WeightDecay}) {
    if (to_string(d) == name) return d;
  }
  throw Error(Errc::InvalidConfig, "unknown sweep dimension \"" + std::string(name) + "\"");
}

std::vector<double> default_sweep_values(SweepDimension d) {
  switch (d) {
    case SweepDimension::Threshold: return {0.6, 0.7, 0.8, 0.9};
    case SweepDimension::SplitRatio: return {0.6, 0.7, 0.75, 0.8, 0.85, 0.9};
    case SweepDimension::Alpha: return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    case SweepDimension::LearningRate: return {0.0001, 0.0005, 0.001, 0.005, 0.01};
    case SweepDimension::WeightDecay: return {0.0, 0.0001, 0.001, 0.01, 0.1};
  }
  return {};
}

void validate_sweep_value(SweepDimension d, double v) {
  bool ok = false;
  switch (d) {
    case SweepDimension::Threshold: ok = v >= 0.0 && v <= 1.0; break;
    case SweepDimension::SplitRatio: ok = v > 0.0 && v < 1.0; break;
    case SweepDimension::Alpha: ok = v > 0.0 && std::isfinite(v); break;
    case SweepDimension::LearningRate: ok = v > 0.0 && std::isfinite(v); break;
    case SweepDimension::WeightDecay: ok = v >= 0.0 && std::isfinite(v); break;
  }
  if (!ok) {
    throw Error(Errc::InvalidConfig, "value " + format_double(v) + " is out of range for " + std::string(to_string(d)));
  }
}

std::vector<std::string> sweep_columns(SweepDimension d) {
  switch (d) {
    case SweepDimension::Threshold: return {"threshold", "data_count", "ua", "status"};
    case SweepDimension::SplitRatio: return {"split_ratio", "train_count", "dev_count", "ua", "status"};
    case SweepDimension::Alpha: return {"alpha", "ua", "status"};
    case SweepDimension::LearningRate: return {"learning_rate", "ua", "status"};
    case SweepDimension::WeightDecay: return {"weight_decay", "ua", "status"};
  }
  return {};
}

SweepResult run_sweep(const PipelineConfig& base, SweepDimension d, std::span<const double> values,
                      const DataSource& data) {
  base.validate();
  base.check_paths();
  for (const double v : values) validate_sweep_value(d, v);
  const auto input = Manifest::read(base.manifest);
  const auto root = base.out_dir / "sweep" / std::string(to_string(d));

  SweepResult result{d, {}, Table{sweep_columns(d), {}}};
  for (std::size_t k = 0; k < values.size(); ++k) {
    SweepCell cell;
    cell.value = values[k];
    PipelineConfig cfg = base;
    cfg.out_dir = root / std::to_string(k);
    switch (d) {
      case SweepDimension::Threshold: cfg.threshold = cell.value; break;
      case SweepDimension::SplitRatio: cfg.split_fraction = cell.value; break;
      case SweepDimension::Alpha: cfg.train.mixup_alpha = cell.value; break;
      case SweepDimension::LearningRate: cfg.train.lr = cell.value; break;
      case SweepDimension::WeightDecay: cfg.train.weight_decay = cell.value; break;
    }
    try {
      const Pipeline pipeline(cfg, data);
      const auto run = pipeline.run(input, RunOptions{.drop_test = true, .evaluate_test = false});
      cell.data_count = run.detect_kept;
      cell.train_count = run.train_count;
      cell.dev_count = run.dev_count;
      if (run.dev) cell.ua = run.dev->unweighted_accuracy;
      cell.status = "ok";
    } catch (const std::exception& e) {
      cell.status = std::string("error: ") + e.what();
    }

    const auto ua = cell.ua ? fixed(*cell.ua, 6) : std::string();
    const auto v = value_text(d, cell.value);
    switch (d) {
      case SweepDimension::Threshold: result.table.rows.push_back({v, opt_count(cell.data_count), ua, cell.status}); break;
      case SweepDimension::SplitRatio:
        result.table.rows.push_back({v, opt_count(cell.train_count), opt_count(cell.dev_count), ua, cell.status});
        break;
      default: result.table.rows.push_back({v, ua, cell.status}); break;
    }
    result.cells.push_back(std::move(cell));
  }
  result.table.write(base.out_dir / "sweep" / (std::string(to_string(d)) + ".csv"));
  return result;
}

}  // namespace coughkit::pipeline
