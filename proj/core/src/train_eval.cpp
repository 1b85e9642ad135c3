#include "coughkit/train_eval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <optional>
#include <set>

#include "coughkit/error.hpp"
#include "coughkit/random.hpp"

namespace coughkit::train {

std::vector<double> embed_pooled(const Matrix& log_mel) {
  if (log_mel.rows() == 0 || log_mel.cols() == 0) throw Error(Errc::EmptyInput, "log-mel has no frames");
  const std::size_t bands = log_mel.cols();
  const auto frames = static_cast<double>(log_mel.rows());
  std::vector<double> out(3 * bands, 0.0);
  for (std::size_t b = 0; b < bands; ++b) {
    double sum = 0.0;
    double peak = log_mel(0, b);
    for (std::size_t f = 0; f < log_mel.rows(); ++f) {
      sum += log_mel(f, b);
      peak = std::max(peak, log_mel(f, b));
    }
    const double mean = sum / frames;
    double sq = 0.0;
    for (std::size_t f = 0; f < log_mel.rows(); ++f) {
      const double d = log_mel(f, b) - mean;
      sq += d * d;
    }
    out[b] = mean;
    out[bands + b] = std::sqrt(sq / frames);
    out[2 * bands + b] = peak;
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::span<const std::uint8_t> take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw Error(Errc::FormatError, "embedding file ends early");
    const auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint16_t u16() {
    const auto b = take(2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  std::uint32_t u32() {
    const auto b = take(4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  bool done() const noexcept { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_embeddings(const EmbeddingTable& table) {
  const std::size_t dim = table.empty() ? 0 : table.begin()->second.size();
  std::vector<std::uint8_t> out{'E', 'M', 'B', '1'};
  put_u32(out, static_cast<std::uint32_t>(table.size()));
  put_u32(out, static_cast<std::uint32_t>(dim));
  for (const auto& [id, values] : table) {
    if (values.size() != dim) {
      throw Error(Errc::DimensionMismatch, "\"" + id + "\" has " + std::to_string(values.size()) +
                                               " values, expected " + std::to_string(dim));
    }
    if (id.size() > 0xFFFF) throw Error(Errc::FormatError, "id longer than 65535 bytes");
    put_u16(out, static_cast<std::uint16_t>(id.size()));
    out.insert(out.end(), id.begin(), id.end());
    for (const double v : values) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

EmbeddingTable decode_embeddings(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  const auto magic = in.take(4);
  if (std::memcmp(magic.data(), "EMB1", 4) != 0) throw Error(Errc::FormatError, "missing EMB1 magic");
  const std::uint32_t count = in.u32();
  const std::uint32_t dim = in.u32();
  EmbeddingTable table;
  for (std::uint32_t r = 0; r < count; ++r) {
    const auto id_bytes = in.take(in.u16());
    std::string id(id_bytes.begin(), id_bytes.end());
    std::vector<double> values(dim);
    for (auto& v : values) {
      v = std::bit_cast<float>(in.u32());
      if (!std::isfinite(v)) throw Error(Errc::FormatError, "non-finite value in \"" + id + "\"");
    }
    if (!table.emplace(id, std::move(values)).second) throw Error(Errc::DuplicateId, "\"" + id + "\"");
  }
  if (!in.done()) throw Error(Errc::FormatError, "trailing bytes after " + std::to_string(count) + " records");
  return table;
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingTable& table) {
  const auto bytes = encode_embeddings(table);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_embeddings(bytes);
}

EmbeddingTable merge_embeddings(std::span<const EmbeddingTable> tables) {
  EmbeddingTable merged;
  std::optional<std::size_t> dim;
  for (const auto& table : tables) {
    for (const auto& [id, values] : table) {
      if (dim && values.size() != *dim) {
        throw Error(Errc::DimensionMismatch, "\"" + id + "\" has " + std::to_string(values.size()) +
                                                 " values, expected " + std::to_string(*dim));
      }
      dim = values.size();
      if (!merged.emplace(id, values).second) throw Error(Errc::DuplicateId, "\"" + id + "\"");
    }
  }
  return merged;
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kProbClamp = 1e-12;

double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_dim(const LinearHead& head, std::span<const double> e) {
  if (e.size() != head.dim()) {
    throw Error(Errc::DimensionMismatch, "embedding has " + std::to_string(e.size()) + " values, head expects " +
                                             std::to_string(head.dim()));
  }
}

}  // namespace

Activations logits(const LinearHead& head, std::span<const double> e) {
  check_dim(head, e);
  Activations z{head.bias(0), head.bias(1)};
  for (std::size_t node = 0; node < 2; ++node) {
    for (std::size_t i = 0; i < e.size(); ++i) z[node] += head.weight(node, i) * e[i];
  }
  return z;
}

Activations forward(const LinearHead& head, std::span<const double> e) {
  const auto z = logits(head, e);
  return {sigmoid(z[0]), sigmoid(z[1])};
}

double bce_loss(const Activations& out, const SoftLabel& target) noexcept {
  const std::array<double, 2> t{target.negative, target.positive};
  double loss = 0.0;
  for (std::size_t k = 0; k < 2; ++k) {
    const double o = std::clamp(out[k], kProbClamp, 1.0 - kProbClamp);
    loss -= t[k] * std::log(o) + (1.0 - t[k]) * std::log(1.0 - o);
  }
  return loss / 2.0;
}

double accumulate_gradient(const LinearHead& head, std::span<const double> e, const SoftLabel& target,
                           double scale, std::span<double> grad) {
  if (grad.size() != head.params().size()) throw Error(Errc::ShapeMismatch, "gradient buffer size");
  const auto out = forward(head, e);
  const std::array<double, 2> t{target.negative, target.positive};
  const std::size_t dim = head.dim();
  for (std::size_t node = 0; node < 2; ++node) {
    // d/dz of the per-node BCE through the sigmoid, halved by the node mean.
    // Inside the clamp region the loss is flat in z.
    const bool clamped = out[node] < kProbClamp || out[node] > 1.0 - kProbClamp;
    const double dz = clamped ? 0.0 : scale * 0.5 * (out[node] - t[node]);
    for (std::size_t i = 0; i < dim; ++i) grad[node * dim + i] += dz * e[i];
    grad[2 * dim + node] += dz;
  }
  return bce_loss(out, target);
}

Label argmax_label(const Activations& scores) noexcept {
  return scores[1] > scores[0] ? Label::Positive : Label::Negative;
}

Label predict(const LinearHead& head, std::span<const double> e) { return argmax_label(forward(head, e)); }

// ---------------------------------------------------------------------------

void adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& state, double lr,
                double weight_decay) {
  if (grads.size() != params.size()) throw Error(Errc::ShapeMismatch, "gradient and parameter sizes differ");
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw Error(Errc::ShapeMismatch, "optimizer state does not match parameters");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  const double decay = 1.0 - lr * weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] = params[i] * decay - lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw Error(Errc::InvalidConfig, "lr must be positive");
  if (!(weight_decay >= 0.0)) throw Error(Errc::InvalidConfig, "weight_decay must be >= 0");
  if (batch_size < 1) throw Error(Errc::InvalidConfig, "batch_size must be >= 1");
  if (epochs < 1) throw Error(Errc::InvalidConfig, "epochs must be >= 1");
  if (mixup != MixupLevel::None && !(mixup_alpha > 0.0)) throw Error(Errc::InvalidAlpha, "mixup alpha must be positive");
}

Standardizer Standardizer::fit(std::span<const std::vector<double>> rows) {
  if (rows.empty()) throw Error(Errc::EmptyInput, "no rows to fit");
  const std::size_t dim = rows.front().size();
  Standardizer s{std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0)};
  for (const auto& r : rows) {
    if (r.size() != dim) throw Error(Errc::DimensionMismatch, "rows differ in dimension");
    for (std::size_t i = 0; i < dim; ++i) s.mean[i] += r[i];
  }
  const auto n = static_cast<double>(rows.size());
  for (double& m : s.mean) m /= n;
  std::vector<double> var(dim, 0.0);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < dim; ++i) var[i] += (r[i] - s.mean[i]) * (r[i] - s.mean[i]);
  }
  for (std::size_t i = 0; i < dim; ++i) {
    const double sd = std::sqrt(var[i] / n);
    s.inv_std[i] = sd > 1e-12 ? 1.0 / sd : 1.0;
  }
  return s;
}

Standardizer Standardizer::identity(std::size_t dim) {
  return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
}

std::vector<double> Standardizer::apply(std::span<const double> e) const {
  if (e.size() != mean.size()) {
    throw Error(Errc::DimensionMismatch, "embedding has " + std::to_string(e.size()) + " values, expected " +
                                             std::to_string(mean.size()));
  }
  std::vector<double> out(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) out[i] = (e[i] - mean[i]) * inv_std[i];
  return out;
}

Activations Classifier::scores(std::span<const double> embedding) const {
  return forward(head, standardizer.apply(embedding));
}

Label Classifier::predict(std::span<const double> embedding) const { return argmax_label(scores(embedding)); }

EmbeddingTrainingSet::EmbeddingTrainingSet(std::vector<std::vector<double>> embeddings, std::vector<Label> labels)
    : embeddings_(std::move(embeddings)), labels_(std::move(labels)) {
  if (embeddings_.size() != labels_.size()) throw Error(Errc::ShapeMismatch, "embeddings and labels differ in count");
  for (const auto& e : embeddings_) {
    if (e.size() != embeddings_.front().size()) throw Error(Errc::DimensionMismatch, "embeddings differ in dimension");
  }
}

std::vector<double> EmbeddingTrainingSet::mixed_embedding(std::size_t i, std::size_t j, double lambda) const {
  return augment::mixup(embeddings_[i], embeddings_[j], lambda);
}

SpectrogramTrainingSet::SpectrogramTrainingSet(std::vector<Matrix> log_mels, std::vector<Label> labels)
    : log_mels_(std::move(log_mels)), labels_(std::move(labels)) {
  if (log_mels_.size() != labels_.size()) throw Error(Errc::ShapeMismatch, "spectrograms and labels differ in count");
  embeddings_.reserve(log_mels_.size());
  for (const auto& m : log_mels_) {
    if (m.cols() != log_mels_.front().cols()) throw Error(Errc::DimensionMismatch, "spectrograms differ in bands");
    embeddings_.push_back(embed_pooled(m));
  }
}

std::vector<double> SpectrogramTrainingSet::mixed_embedding(std::size_t i, std::size_t j, double lambda) const {
  const Matrix& a = log_mels_[i];
  const Matrix& b = log_mels_[j];
  const std::size_t frames = std::max(a.rows(), b.rows());
  const Matrix fa = a.rows() == frames ? a : augment::fit_frames(a, frames);
  const Matrix fb = b.rows() == frames ? b : augment::fit_frames(b, frames);
  return embed_pooled(augment::mixup(fa, fb, {}, {}, lambda).first);
}

TrainResult train(const TrainingSet& data, const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t n = data.size();
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n; ++i) positives += data.label(i) == Label::Positive ? 1 : 0;
  if (n < 2 || positives == 0 || positives == n) {
    throw Error(Errc::DegenerateDataset, "need at least two items covering both classes (" + std::to_string(positives) +
                                             " positive of " + std::to_string(n) + ")");
  }

  std::vector<std::vector<double>> raw;
  raw.reserve(n);
  for (std::size_t i = 0; i < n; ++i) raw.push_back(data.embedding(i));
  const std::size_t dim = raw.front().size();
  for (const auto& e : raw) {
    if (e.size() != dim) throw Error(Errc::DimensionMismatch, "embeddings differ in dimension");
  }

  TrainResult result;
  result.classifier.standardizer = cfg.standardize ? Standardizer::fit(raw) : Standardizer::identity(dim);
  std::vector<std::vector<double>> inputs;
  inputs.reserve(n);
  for (const auto& e : raw) inputs.push_back(result.classifier.standardizer.apply(e));

  LinearHead& head = result.classifier.head;
  head = LinearHead(dim);
  AdamWState state(head.params().size());
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad(head.params().size());
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      const std::size_t count = end - start;
      std::fill(grad.begin(), grad.end(), 0.0);

      double lambda = 1.0;
      std::vector<std::size_t> partner(count);
      std::iota(partner.begin(), partner.end(), 0);
      if (cfg.mixup != MixupLevel::None && count > 1) {
        lambda = augment::sample_mixup_lambda(cfg.mixup_alpha, rng);
        // Sattolo's shuffle: a uniformly random single cycle, so nobody is
        // paired with itself.
        for (std::size_t k = count - 1; k > 0; --k) {
          std::swap(partner[k], partner[std::uniform_int_distribution<std::size_t>(0, k - 1)(rng)]);
        }
      }

      const double scale = 1.0 / static_cast<double>(count);
      for (std::size_t k = 0; k < count; ++k) {
        const std::size_t i = order[start + k];
        const std::size_t j = order[start + partner[k]];
        if (i == j || lambda == 1.0) {
          epoch_loss += accumulate_gradient(head, inputs[i], soft(data.label(i)), scale, grad);
          continue;
        }
        const auto target = augment::mixup(soft(data.label(i)), soft(data.label(j)), lambda);
        const std::vector<double> mixed =
            cfg.mixup == MixupLevel::Embedding
                ? augment::mixup(inputs[i], inputs[j], lambda)
                : result.classifier.standardizer.apply(data.mixed_embedding(i, j, lambda));
        epoch_loss += accumulate_gradient(head, mixed, target, scale, grad);
      }
      adamw_step(head.params(), grad, state, cfg.lr, cfg.weight_decay);
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(n));
  }
  return result;
}

TrainResult train(std::span<const std::vector<double>> embeddings, std::span<const Label> labels,
                  const TrainConfig& cfg) {
  TrainConfig c = cfg;
  if (c.mixup == MixupLevel::Spectrogram) c.mixup = MixupLevel::Embedding;
  return train(EmbeddingTrainingSet({embeddings.begin(), embeddings.end()}, {labels.begin(), labels.end()}), c);
}

// ---------------------------------------------------------------------------

MetricsReport unweighted_accuracy(std::span<const Label> preds, std::span<const Label> labels) {
  if (preds.size() != labels.size()) throw Error(Errc::ShapeMismatch, "predictions and labels differ in length");
  MetricsReport r;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool truth = labels[i] == Label::Positive;
    const bool guess = preds[i] == Label::Positive;
    if (truth && guess) ++r.tp;
    else if (truth) ++r.fn;
    else if (guess) ++r.fp;
    else ++r.tn;
  }
  if (r.tp + r.fn == 0) throw Error(Errc::MissingClass, "no positive labels");
  if (r.tn + r.fp == 0) throw Error(Errc::MissingClass, "no negative labels");
  r.recall_positive = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
  r.recall_negative = static_cast<double>(r.tn) / static_cast<double>(r.tn + r.fp);
  r.unweighted_accuracy = (r.recall_positive + r.recall_negative) / 2.0;
  r.accuracy = static_cast<double>(r.tp + r.tn) / static_cast<double>(preds.size());
  return r;
}

// ---------------------------------------------------------------------------

SplitResult split_train_dev(std::span<const SplitItem> items, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(Errc::InvalidConfig, "train fraction must lie strictly between 0 and 1");
  }
  std::set<std::string> seen;
  for (const auto& it : items) {
    if (!seen.insert(it.id).second) throw Error(Errc::DuplicateId, "\"" + it.id + "\"");
  }

  // Stratum key: (label, source); std::map gives the tie-break order.
  std::map<std::pair<int, std::string>, std::vector<std::string>> strata;
  for (const auto& it : items) strata[{static_cast<int>(it.label), it.source}].push_back(it.id);

  const auto total_train =
      static_cast<std::size_t>(std::floor(static_cast<double>(items.size()) * train_fraction + 0.5));
  struct Quota {
    std::size_t take;
    double remainder;
    std::size_t order;
  };
  std::vector<Quota> quotas;
  std::size_t assigned = 0;
  for (const auto& [key, ids] : strata) {
    const double exact = static_cast<double>(ids.size()) * train_fraction;
    const auto base = static_cast<std::size_t>(std::floor(exact));
    quotas.push_back({base, exact - static_cast<double>(base), quotas.size()});
    assigned += base;
  }
  std::vector<std::size_t> rank(quotas.size());
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(),
                   [&](std::size_t a, std::size_t b) { return quotas[a].remainder > quotas[b].remainder; });
  for (std::size_t k = 0; assigned < total_train && k < rank.size(); ++k) {
    auto& q = quotas[rank[k]];
    if (q.remainder > 0.0) {
      ++q.take;
      ++assigned;
    }
  }

  SplitResult result;
  std::size_t s = 0;
  for (auto& [key, ids] : strata) {
    std::sort(ids.begin(), ids.end());
    const std::string name = (key.first ? "positive/" : "negative/") + key.second;
    Rng rng = make_rng(seed, name);
    std::shuffle(ids.begin(), ids.end(), rng);
    const std::size_t take = quotas[s++].take;
    result.train.insert(result.train.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(take));
    result.dev.insert(result.dev.end(), ids.begin() + static_cast<std::ptrdiff_t>(take), ids.end());
    if (take == 0 || take == ids.size()) {
      result.warnings.push_back("EmptyStratum: " + name + " has " + std::to_string(take) + " train and " +
                                std::to_string(ids.size() - take) + " dev items");
    }
  }
  std::sort(result.train.begin(), result.train.end());
  std::sort(result.dev.begin(), result.dev.end());
  return result;
}

}  // namespace coughkit::train
