#include "coughkit/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>

#include "coughkit/error.hpp"

namespace coughkit::pipeline {

namespace {

const std::vector<Stage> kAllStages = {Stage::Prepare, Stage::Detect,   Stage::Segment, Stage::Featurize,
                                       Stage::Augment, Stage::Train,    Stage::Eval};

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = s.find(sep, pos);
    const auto item = trim(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (!item.empty()) out.push_back(item);
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw Error(Errc::InvalidConfig, "bad value \"" + std::string(value) + "\" for " + std::string(key));
}

template <typename T>
T parse_num(std::string_view key, std::string_view v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v);
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v);
}

std::string num(double v) { return format_double(v); }

std::string join_stages(const std::vector<Stage>& stages) {
  std::string out;
  for (const auto s : stages) {
    if (!out.empty()) out += ',';
    out += to_string(s);
  }
  return out;
}

std::string_view mixup_name(train::MixupLevel l) {
  switch (l) {
    case train::MixupLevel::None: return "none";
    case train::MixupLevel::Embedding: return "embedding";
    case train::MixupLevel::Spectrogram: return "spectrogram";
  }
  return "none";
}

struct Entry {
  ConfigKey key;
  std::function<void(PipelineConfig&, std::string_view)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

#define CK_DOUBLE(name, help, field)                                                          \
  Entry {                                                                                     \
    {name, help}, [](PipelineConfig& c, std::string_view v) { c.field = parse_num<double>(name, v); }, \
        [](const PipelineConfig& c) { return num(c.field); }                                  \
  }
#define CK_INT(name, help, field)                                                             \
  Entry {                                                                                     \
    {name, help}, [](PipelineConfig& c, std::string_view v) { c.field = parse_num<int>(name, v); }, \
        [](const PipelineConfig& c) { return std::to_string(c.field); }                       \
  }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      Entry{{"seed", "master seed (mandatory)"},
            [](PipelineConfig& c, std::string_view v) { c.seed = parse_num<std::uint64_t>("seed", v); },
            [](const PipelineConfig& c) { return c.seed ? std::to_string(*c.seed) : std::string(); }},
      Entry{{"manifest", "input manifest CSV"},
            [](PipelineConfig& c, std::string_view v) { c.manifest = std::string(v); },
            [](const PipelineConfig& c) { return c.manifest.generic_string(); }},
      Entry{{"out_dir", "output directory"},
            [](PipelineConfig& c, std::string_view v) { c.out_dir = std::string(v); },
            [](const PipelineConfig& c) { return c.out_dir.generic_string(); }},
      Entry{{"threads", "worker threads per stage, 0 = all cores"},
            [](PipelineConfig& c, std::string_view v) { c.threads = parse_num<unsigned>("threads", v); },
            [](const PipelineConfig& c) { return std::to_string(c.threads); }},
      Entry{{"stages", "enabled stages, comma separated"},
            [](PipelineConfig& c, std::string_view v) {
              c.stages.clear();
              for (const auto s : split(v, ',')) c.stages.push_back(parse_stage(s));
            },
            [](const PipelineConfig& c) { return join_stages(c.stages); }},
      Entry{{"stage_order", "relative order of detect and segment"},
            [](PipelineConfig& c, std::string_view v) {
              std::vector<Stage> order;
              for (const auto s : split(v, ',')) order.push_back(parse_stage(s));
              const bool ok = order == std::vector<Stage>{Stage::Detect, Stage::Segment} ||
                              order == std::vector<Stage>{Stage::Segment, Stage::Detect};
              if (!ok) bad_value("stage_order", v);
              c.detect_segment_order = order;
            },
            [](const PipelineConfig& c) { return join_stages(c.detect_segment_order); }},
      CK_DOUBLE("threshold", "detection probability threshold", threshold),
      Entry{{"detector_model", "tree-ensemble JSON, empty = built-in demo"},
            [](PipelineConfig& c, std::string_view v) { c.detector_model = std::string(v); },
            [](const PipelineConfig& c) { return c.detector_model.generic_string(); }},
      Entry{{"segmenter", "hysteresis or rms"},
            [](PipelineConfig& c, std::string_view v) { c.segmenter.method = seg::parse_method(v); },
            [](const PipelineConfig& c) { return std::string(seg::to_string(c.segmenter.method)); }},
      CK_INT("seg_frame_len", "envelope frame length in samples", segmenter.frame_len),
      CK_INT("seg_hop", "envelope hop in samples", segmenter.hop),
      CK_DOUBLE("seg_upper_ratio", "hysteresis open threshold / global RMS", segmenter.upper_ratio),
      CK_DOUBLE("seg_lower_ratio", "hysteresis close threshold / global RMS", segmenter.lower_ratio),
      CK_DOUBLE("seg_rms_threshold", "absolute RMS threshold", segmenter.rms_threshold),
      CK_DOUBLE("seg_min_duration_ms", "shortest kept segment", segmenter.min_duration_ms),
      CK_DOUBLE("seg_merge_gap_ms", "gaps shorter than this are bridged", segmenter.merge_gap_ms),
      CK_DOUBLE("seg_pad_ms", "padding added to each side", segmenter.pad_ms),
      CK_DOUBLE("alpha", "mixup Beta(alpha, alpha) parameter", train.mixup_alpha),
      Entry{{"mixup", "none, embedding or spectrogram"},
            [](PipelineConfig& c, std::string_view v) {
              if (v == "none") c.train.mixup = train::MixupLevel::None;
              else if (v == "embedding") c.train.mixup = train::MixupLevel::Embedding;
              else if (v == "spectrogram") c.train.mixup = train::MixupLevel::Spectrogram;
              else bad_value("mixup", v);
            },
            [](const PipelineConfig& c) { return std::string(mixup_name(c.train.mixup)); }},
      CK_INT("n_freq_masks", "SpecAugment frequency masks", augment.n_freq_masks),
      CK_INT("max_freq_width", "widest frequency mask in bands", augment.max_freq_width),
      CK_INT("n_time_masks", "SpecAugment time masks", augment.n_time_masks),
      CK_DOUBLE("max_time_frac", "widest time mask as a fraction of frames", augment.max_time_frac),
      Entry{{"mask_fill", "mean or zero"},
            [](PipelineConfig& c, std::string_view v) {
              if (v == "mean") c.augment.fill = augment::MaskFill::Mean;
              else if (v == "zero") c.augment.fill = augment::MaskFill::Zero;
              else bad_value("mask_fill", v);
            },
            [](const PipelineConfig& c) {
              return std::string(c.augment.fill == augment::MaskFill::Mean ? "mean" : "zero");
            }},
      CK_DOUBLE("snr_min_db", "lowest noise-mix SNR", augment.snr_min_db),
      CK_DOUBLE("snr_max_db", "highest noise-mix SNR", augment.snr_max_db),
      CK_INT("specaugment_copies", "SpecAugment copies per training row", specaugment_copies),
      CK_INT("noise_copies", "noise-mixed copies per training row", noise_copies),
      Entry{{"noise_dir", "directory of noise WAVs"},
            [](PipelineConfig& c, std::string_view v) { c.noise_dir = std::string(v); },
            [](const PipelineConfig& c) { return c.noise_dir.generic_string(); }},
      CK_DOUBLE("lr", "learning rate", train.lr),
      CK_DOUBLE("weight_decay", "AdamW decoupled weight decay", train.weight_decay),
      CK_INT("batch_size", "minibatch size", train.batch_size),
      CK_INT("epochs", "training epochs", train.epochs),
      Entry{{"standardize", "z-score embeddings before the head"},
            [](PipelineConfig& c, std::string_view v) { c.train.standardize = parse_bool("standardize", v); },
            [](const PipelineConfig& c) { return std::string(c.train.standardize ? "true" : "false"); }},
      CK_DOUBLE("split_fraction", "train share of unassigned rows", split_fraction),
      Entry{{"train_source_labels", "per-source label whitelist, e.g. a=positive;b=positive,negative"},
            [](PipelineConfig& c, std::string_view v) {
              c.train_source_labels.clear();
              for (const auto item : split(v, ';')) {
                const auto eq = item.find('=');
                if (eq == std::string_view::npos) bad_value("train_source_labels", v);
                const auto source = std::string(trim(item.substr(0, eq)));
                auto& labels = c.train_source_labels[source];
                for (const auto l : split(item.substr(eq + 1), ',')) {
                  try {
                    labels.push_back(parse_label(l));
                  } catch (const Error&) {
                    bad_value("train_source_labels", v);
                  }
                }
              }
            },
            [](const PipelineConfig& c) {
              std::string out;
              for (const auto& [source, labels] : c.train_source_labels) {
                if (!out.empty()) out += ';';
                out += source + "=";
                for (std::size_t i = 0; i < labels.size(); ++i) {
                  out += (i ? "," : "") + std::string(to_string(labels[i]));
                }
              }
              return out;
            }},
  };
  return table;
}

#undef CK_DOUBLE
#undef CK_INT

const Entry& find_entry(std::string_view key) {
  const auto& table = entries();
  const auto it = std::find_if(table.begin(), table.end(), [&](const Entry& e) { return e.key.name == key; });
  if (it == table.end()) throw Error(Errc::InvalidConfig, "unknown key \"" + std::string(key) + "\"");
  return *it;
}

}  // namespace

std::string_view to_string(Stage s) noexcept {
  switch (s) {
    case Stage::Prepare: return "prepare";
    case Stage::Detect: return "detect";
    case Stage::Segment: return "segment";
    case Stage::Featurize: return "featurize";
    case Stage::Augment: return "augment";
    case Stage::Train: return "train";
    case Stage::Eval: return "eval";
  }
  return "?";
}

Stage parse_stage(std::string_view name) {
  for (const auto s : kAllStages) {
    if (to_string(s) == name) return s;
  }
  throw Error(Errc::InvalidConfig, "unknown stage \"" + std::string(name) + "\"");
}

const std::vector<Stage>& all_stages() noexcept { return kAllStages; }

bool PipelineConfig::enabled(Stage s) const { return std::find(stages.begin(), stages.end(), s) != stages.end(); }

std::vector<Stage> PipelineConfig::execution_order() const {
  std::vector<Stage> order = {Stage::Prepare};
  order.insert(order.end(), detect_segment_order.begin(), detect_segment_order.end());
  order.insert(order.end(), {Stage::Featurize, Stage::Augment, Stage::Train, Stage::Eval});
  std::erase_if(order, [&](Stage s) { return !enabled(s); });
  return order;
}

std::uint64_t PipelineConfig::require_seed() const {
  if (!seed) throw Error(Errc::InvalidConfig, "seed is mandatory");
  return *seed;
}

void PipelineConfig::validate() const {
  require_seed();
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error(Errc::InvalidConfig, "threshold must lie in [0, 1]");
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
    throw Error(Errc::InvalidConfig, "split_fraction must lie in (0, 1)");
  }
  if (specaugment_copies < 0 || noise_copies < 0) throw Error(Errc::InvalidConfig, "copy counts must be >= 0");
  if (out_dir.empty()) throw Error(Errc::InvalidConfig, "out_dir is empty");
  segmenter.validate();
  augment.validate();
  train.validate();
}

void PipelineConfig::check_paths() const {
  if (manifest.empty()) throw Error(Errc::InvalidConfig, "no input manifest given");
  if (!std::filesystem::is_regular_file(manifest)) {
    throw Error(Errc::InvalidConfig, "manifest " + manifest.string() + " does not exist");
  }
  if (!detector_model.empty() && !std::filesystem::is_regular_file(detector_model)) {
    throw Error(Errc::InvalidConfig, "detector model " + detector_model.string() + " does not exist");
  }
  if (noise_copies > 0 && !std::filesystem::is_directory(noise_dir)) {
    throw Error(Errc::InvalidConfig, "noise_dir " + noise_dir.string() + " does not exist");
  }
}

const std::vector<ConfigKey>& config_keys() noexcept {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& e : entries()) out.push_back(e.key);
    return out;
  }();
  return keys;
}

Settings parse_settings(std::string_view text) {
  Settings out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(Errc::InvalidConfig, "line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = std::string(trim(line.substr(0, eq)));
    find_entry(key);
    out.emplace_back(key, std::string(trim(line.substr(eq + 1))));
  }
  return out;
}

Settings read_settings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::InvalidConfig, "cannot read config " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_settings(text);
}

void apply_settings(PipelineConfig& cfg, const Settings& settings) {
  for (const auto& [key, value] : settings) {
    const auto& entry = find_entry(key);
    try {
      entry.set(cfg, value);
    } catch (const Error& e) {
      if (e.kind() == Errc::InvalidConfig) throw;
      throw Error(Errc::InvalidConfig, std::string(key) + ": " + e.what());
    }
  }
}

std::string to_settings_text(const PipelineConfig& cfg) {
  std::ostringstream out;
  for (const auto& e : entries()) out << e.key.name << " = " << e.get(cfg) << '\n';
  return out.str();
}

}  // namespace coughkit::pipeline
