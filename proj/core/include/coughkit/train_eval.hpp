#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "coughkit/augment.hpp"
#include "coughkit/dsp.hpp"
#include "coughkit/matrix.hpp"

namespace coughkit::train {

enum class Label { Negative = 0, Positive = 1 };

using augment::SoftLabel;

inline SoftLabel soft(Label l) noexcept { return SoftLabel::one_hot(l == Label::Positive); }

// ---------------------------------------------------------------------------
// Embeddings

/// Per-band mean, population standard deviation, and maximum over time,
/// laid out as [means..., stds..., maxes...] (3 * bands values).
std::vector<double> embed_pooled(const Matrix& log_mel);
inline std::vector<double> embed_pooled(const dsp::LogMelSpectrogram& s) { return embed_pooled(s.values); }

using EmbeddingTable = std::map<std::string, std::vector<double>>;

/// "EMB1" | u32 count | u32 dim | count x (u16 id_len | id | dim x f32).
std::vector<std::uint8_t> encode_embeddings(const EmbeddingTable& table);
EmbeddingTable decode_embeddings(std::span<const std::uint8_t> bytes);
void write_embeddings(const std::filesystem::path& path, const EmbeddingTable& table);
EmbeddingTable load_embeddings(const std::filesystem::path& path);
/// Union of several tables; DimensionMismatch / DuplicateId on conflict.
EmbeddingTable merge_embeddings(std::span<const EmbeddingTable> tables);

// ---------------------------------------------------------------------------
// Linear head

/// Two sigmoid outputs, node 0 = negative, node 1 = positive. Parameters are
/// stored flat as [W row 0 (dim), W row 1 (dim), b0, b1].
class LinearHead {
 public:
  LinearHead() = default;
  explicit LinearHead(std::size_t dim) : dim_(dim), params_(2 * dim + 2, 0.0) {}

  std::size_t dim() const noexcept { return dim_; }
  double& weight(std::size_t node, std::size_t i) noexcept { return params_[node * dim_ + i]; }
  double weight(std::size_t node, std::size_t i) const noexcept { return params_[node * dim_ + i]; }
  double& bias(std::size_t node) noexcept { return params_[2 * dim_ + node]; }
  double bias(std::size_t node) const noexcept { return params_[2 * dim_ + node]; }

  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }

 private:
  std::size_t dim_ = 0;
  std::vector<double> params_;
};

using Activations = std::array<double, 2>;

/// Pre-activation scores W e + b.
Activations logits(const LinearHead& head, std::span<const double> e);
/// sigmoid(W e + b). DimensionMismatch when sizes disagree.
Activations forward(const LinearHead& head, std::span<const double> e);

/// Mean over both nodes of -[t log o + (1 - t) log(1 - o)], with o clamped
/// to [1e-12, 1 - 1e-12].
double bce_loss(const Activations& out, const SoftLabel& target) noexcept;

/// Adds scale * d(bce_loss(forward(head, e), target))/d(params) into `grad`
/// and returns the loss.
double accumulate_gradient(const LinearHead& head, std::span<const double> e, const SoftLabel& target,
                           double scale, std::span<double> grad);

/// Argmax of the activations; ties go to Negative.
Label predict(const LinearHead& head, std::span<const double> e);
Label argmax_label(const Activations& scores) noexcept;

// ---------------------------------------------------------------------------
// Optimizer

struct AdamWState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamWState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// theta <- theta (1 - lr wd) - lr m_hat / (sqrt(v_hat) + eps), with the
/// decay applied first and decoupled from the moments. ShapeMismatch when
/// sizes disagree.
void adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& state, double lr,
                double weight_decay);

// ---------------------------------------------------------------------------
// Training

enum class MixupLevel { None, Embedding, Spectrogram };

struct TrainConfig {
  double lr = 0.001;
  double weight_decay = 0.01;
  int batch_size = 16;
  int epochs = 100;
  double mixup_alpha = 0.5;
  MixupLevel mixup = MixupLevel::Spectrogram;
  /// z-score embeddings with statistics of the (unmixed) training set.
  bool standardize = true;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Per-dimension affine map fitted on training embeddings.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> inv_std;

  static Standardizer fit(std::span<const std::vector<double>> rows);
  static Standardizer identity(std::size_t dim);
  std::vector<double> apply(std::span<const double> e) const;
};

struct Classifier {
  Standardizer standardizer;
  LinearHead head;

  Label predict(std::span<const double> embedding) const;
  Activations scores(std::span<const double> embedding) const;
};

struct TrainResult {
  Classifier classifier;
  /// Mean training loss per epoch, as seen by the optimizer.
  std::vector<double> loss_history;
};

/// Source of training items. Spectrogram-level mixup needs the underlying
/// log-mel matrices, so the trainer asks the source to produce mixed
/// embeddings rather than mixing them itself.
class TrainingSet {
 public:
  virtual ~TrainingSet() = default;
  virtual std::size_t size() const = 0;
  virtual Label label(std::size_t i) const = 0;
  virtual const std::vector<double>& embedding(std::size_t i) const = 0;
  /// Embedding of lambda * item i + (1 - lambda) * item j at the source's
  /// mixing level.
  virtual std::vector<double> mixed_embedding(std::size_t i, std::size_t j, double lambda) const = 0;
};

/// Embeddings given directly; mixing is linear in embedding space.
class EmbeddingTrainingSet final : public TrainingSet {
 public:
  EmbeddingTrainingSet(std::vector<std::vector<double>> embeddings, std::vector<Label> labels);
  std::size_t size() const override { return embeddings_.size(); }
  Label label(std::size_t i) const override { return labels_[i]; }
  const std::vector<double>& embedding(std::size_t i) const override { return embeddings_[i]; }
  std::vector<double> mixed_embedding(std::size_t i, std::size_t j, double lambda) const override;

 private:
  std::vector<std::vector<double>> embeddings_;
  std::vector<Label> labels_;
};

/// Log-mel matrices embedded with embed_pooled; mixing happens on the
/// matrices (the shorter one is cyclically repeated to the longer length).
class SpectrogramTrainingSet final : public TrainingSet {
 public:
  SpectrogramTrainingSet(std::vector<Matrix> log_mels, std::vector<Label> labels);
  std::size_t size() const override { return log_mels_.size(); }
  Label label(std::size_t i) const override { return labels_[i]; }
  const std::vector<double>& embedding(std::size_t i) const override { return embeddings_[i]; }
  std::vector<double> mixed_embedding(std::size_t i, std::size_t j, double lambda) const override;

 private:
  std::vector<Matrix> log_mels_;
  std::vector<Label> labels_;
  std::vector<std::vector<double>> embeddings_;
};

/// Seeded shuffle each epoch, minibatches of cfg.batch_size, optional mixup
/// with one lambda ~ Beta(alpha, alpha) per batch and partners drawn as a
/// random cyclic permutation of the batch, analytic BCE gradients, AdamW.
/// Runs every epoch; no early stopping. Throws DegenerateDataset when fewer
/// than two items or a single class is present.
TrainResult train(const TrainingSet& data, const TrainConfig& cfg);
TrainResult train(std::span<const std::vector<double>> embeddings, std::span<const Label> labels,
                  const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Evaluation

struct MetricsReport {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double recall_positive = 0.0;
  double recall_negative = 0.0;
  /// Mean of the two per-class recalls (balanced accuracy).
  double unweighted_accuracy = 0.0;
  /// Fraction of correct predictions.
  double accuracy = 0.0;
};

/// MissingClass when `labels` lacks either class; ShapeMismatch on length.
MetricsReport unweighted_accuracy(std::span<const Label> preds, std::span<const Label> labels);

// ---------------------------------------------------------------------------
// Splitting

struct SplitItem {
  std::string id;
  Label label = Label::Negative;
  std::string source;
};

struct SplitResult {
  std::vector<std::string> train;
  std::vector<std::string> dev;
  /// Strata left with an empty train or dev side.
  std::vector<std::string> warnings;
};

/// Stratified by (label, source). The overall train count is
/// round-half-up(N * fraction); each stratum receives floor(n_s * fraction)
/// and the remaining slots go to strata with the largest fractional parts
/// (ties by stratum order: label, then source). Members are chosen by a
/// seeded shuffle. Output lists are sorted by id.
SplitResult split_train_dev(std::span<const SplitItem> items, double train_fraction, std::uint64_t seed);

}  // namespace coughkit::train
