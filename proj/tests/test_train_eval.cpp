#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "coughkit/error.hpp"
#include "coughkit/train_eval.hpp"

using namespace coughkit;
using namespace coughkit::train;

namespace {

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
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

}  // namespace

TEST(Embedding, PooledStatistics) {
  Matrix m(4, 2);
  const double col0[] = {1, 2, 3, 6};
  for (std::size_t r = 0; r < 4; ++r) {
    m(r, 0) = col0[r];
    m(r, 1) = -5.0;
  }
  const auto e = embed_pooled(m);
  ASSERT_EQ(e.size(), 6u);
  EXPECT_DOUBLE_EQ(e[0], 3.0);
  EXPECT_DOUBLE_EQ(e[1], -5.0);
  EXPECT_NEAR(e[2], std::sqrt((4.0 + 1.0 + 0.0 + 9.0) / 4.0), 1e-12);
  EXPECT_DOUBLE_EQ(e[3], 0.0);
  EXPECT_DOUBLE_EQ(e[4], 6.0);
  EXPECT_DOUBLE_EQ(e[5], -5.0);
  EXPECT_EQ(error_kind([] { embed_pooled(Matrix(0, 64)); }), Errc::EmptyInput);
}

TEST(EmbeddingCodec, RoundTripAndErrors) {
  EmbeddingTable t{{"a", {1.0, -2.5, 0.125}}, {"bb", {0.0, 3.0, 7.5}}};
  const auto bytes = encode_embeddings(t);
  EXPECT_EQ(bytes.size(), 12u + (2 + 1 + 12) + (2 + 2 + 12));
  EXPECT_EQ(decode_embeddings(bytes), t);

  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_EQ(error_kind([&] { decode_embeddings(bad); }), Errc::FormatError);
  auto shortened = bytes;
  shortened.pop_back();
  EXPECT_EQ(error_kind([&] { decode_embeddings(shortened); }), Errc::FormatError);
  auto longer = bytes;
  longer.push_back(0);
  EXPECT_EQ(error_kind([&] { decode_embeddings(longer); }), Errc::FormatError);

  const auto empty = encode_embeddings({});
  EXPECT_EQ(empty.size(), 12u);
  EXPECT_TRUE(decode_embeddings(empty).empty());

  EmbeddingTable ragged{{"a", {1.0}}, {"b", {1.0, 2.0}}};
  EXPECT_EQ(error_kind([&] { encode_embeddings(ragged); }), Errc::DimensionMismatch);
  const std::vector<EmbeddingTable> dup{{{"a", {1.0}}}, {{"a", {2.0}}}};
  EXPECT_EQ(error_kind([&] { merge_embeddings(dup); }), Errc::DuplicateId);
}

// Central differences on the composed loss against the analytic gradient.
TEST(Gradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t dim = 1 + trial % 12;
    LinearHead head(dim);
    const auto p = random_vector(head.params().size(), rng, 0.5);
    std::copy(p.begin(), p.end(), head.params().begin());
    const auto e = random_vector(dim, rng);
    const double lam = u(rng);
    const SoftLabel target{1.0 - lam, lam};

    std::vector<double> grad(head.params().size(), 0.0);
    const double loss = accumulate_gradient(head, e, target, 1.0, grad);
    EXPECT_NEAR(loss, bce_loss(forward(head, e), target), 1e-15);

    std::vector<double> numeric(grad.size());
    const double h = 1e-5;
    for (std::size_t k = 0; k < grad.size(); ++k) {
      const double saved = head.params()[k];
      head.params()[k] = saved + h;
      const double up = bce_loss(forward(head, e), target);
      head.params()[k] = saved - h;
      const double down = bce_loss(forward(head, e), target);
      head.params()[k] = saved;
      numeric[k] = (up - down) / (2.0 * h);
    }
    double diff = 0.0, norm = 0.0;
    for (std::size_t k = 0; k < grad.size(); ++k) {
      diff += (grad[k] - numeric[k]) * (grad[k] - numeric[k]);
      norm += numeric[k] * numeric[k];
    }
    EXPECT_LE(std::sqrt(diff), 1e-4 * std::max(std::sqrt(norm), 1e-8)) << "trial " << trial;
  }
}

TEST(Gradient, ScaleAccumulates) {
  LinearHead head(2);
  const std::vector<double> e{0.3, -0.7};
  std::vector<double> once(6, 0.0), twice(6, 0.0);
  accumulate_gradient(head, e, SoftLabel::one_hot(true), 0.5, once);
  accumulate_gradient(head, e, SoftLabel::one_hot(true), 0.25, twice);
  accumulate_gradient(head, e, SoftLabel::one_hot(true), 0.25, twice);
  for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(once[k], twice[k], 1e-15);
}

TEST(Loss, KnownValues) {
  EXPECT_NEAR(bce_loss({0.5, 0.5}, SoftLabel::one_hot(true)), std::log(2.0), 1e-15);
  EXPECT_NEAR(bce_loss({0.0, 1.0}, SoftLabel::one_hot(true)), -std::log1p(-1e-12), 1e-15);
  EXPECT_TRUE(std::isfinite(bce_loss({1.0, 0.0}, SoftLabel::one_hot(true))));
  EXPECT_NEAR(bce_loss({1.0 - 1e-9, 1e-9}, SoftLabel::one_hot(false)), 0.0, 1e-8);
  EXPECT_NEAR(bce_loss({0.5, 0.5}, SoftLabel{0.3, 0.7}), std::log(2.0), 1e-15);
}

TEST(Loss, MatchesDirectSummation) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.001, 0.999);
  for (int i = 0; i < 200; ++i) {
    const Activations o{u(rng), u(rng)};
    const double lam = u(rng);
    const SoftLabel t{1.0 - lam, lam};
    long double want = 0.0L;
    want -= t.negative * std::log((long double)o[0]) + (1.0L - t.negative) * std::log(1.0L - o[0]);
    want -= t.positive * std::log((long double)o[1]) + (1.0L - t.positive) * std::log(1.0L - o[1]);
    EXPECT_NEAR(bce_loss(o, t), static_cast<double>(want / 2.0L), 1e-12);
  }
}

TEST(AdamW, ZeroGradientIsPureDecay) {
  std::vector<double> p{1.0, -2.0, 0.5};
  const auto before = p;
  const std::vector<double> g(3, 0.0);
  AdamWState s(3);
  adamw_step(p, g, s, 0.001, 0.01);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(p[i], before[i] * (1.0 - 0.001 * 0.01));
  EXPECT_EQ(s.step, 1);
}

TEST(AdamW, TwoStepsMatchHandComputation) {
  const double lr = 0.01, wd = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::vector<double> p{0.7};
  AdamWState s(1);
  const double g1 = 0.4, g2 = -1.3;
  adamw_step(p, std::vector<double>{g1}, s, lr, wd);
  adamw_step(p, std::vector<double>{g2}, s, lr, wd);

  double theta = 0.7, m = 0.0, v = 0.0;
  int t = 0;
  for (const double g : {g1, g2}) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    theta = theta * (1 - lr * wd) - lr * mh / (std::sqrt(vh) + eps);
  }
  EXPECT_NEAR(p[0], theta, 1e-9);
  EXPECT_EQ(error_kind([&] { adamw_step(p, std::vector<double>{1.0, 2.0}, s, lr, wd); }), Errc::ShapeMismatch);
}

TEST(Metrics, UnweightedAccuracy) {
  using L = Label;
  const std::vector<L> labels{L::Positive, L::Positive, L::Positive, L::Positive,
                              L::Negative, L::Negative, L::Negative, L::Negative};
  const std::vector<L> preds{L::Positive, L::Positive, L::Positive, L::Negative,
                             L::Negative, L::Negative, L::Positive, L::Positive};
  const auto r = unweighted_accuracy(preds, labels);
  EXPECT_EQ(r.tp, 3u);
  EXPECT_EQ(r.fn, 1u);
  EXPECT_EQ(r.tn, 2u);
  EXPECT_EQ(r.fp, 2u);
  EXPECT_DOUBLE_EQ(r.unweighted_accuracy, 0.625);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.625);

  const std::vector<L> all_pos(8, L::Positive);
  EXPECT_DOUBLE_EQ(unweighted_accuracy(all_pos, labels).unweighted_accuracy, 0.5);
  EXPECT_EQ(error_kind([&] { unweighted_accuracy(all_pos, all_pos); }), Errc::MissingClass);
  EXPECT_EQ(error_kind([&] { unweighted_accuracy(std::span(all_pos).first(3), labels); }), Errc::ShapeMismatch);
}

TEST(Split, StratifiedCounts) {
  std::vector<SplitItem> items;
  for (int i = 0; i < 100; ++i) {
    items.push_back({"id" + std::to_string(i), i % 2 ? Label::Positive : Label::Negative, "src"});
  }
  const auto r = split_train_dev(items, 0.85, 5);
  EXPECT_EQ(r.train.size(), 85u);
  EXPECT_EQ(r.dev.size(), 15u);
  EXPECT_TRUE(std::is_sorted(r.train.begin(), r.train.end()));
  std::set<std::string> all(r.train.begin(), r.train.end());
  all.insert(r.dev.begin(), r.dev.end());
  EXPECT_EQ(all.size(), 100u);

  auto count_pos = [&](const std::vector<std::string>& ids) {
    std::size_t n = 0;
    for (const auto& id : ids) n += std::stoi(id.substr(2)) % 2;
    return n;
  };
  const std::size_t train_pos = count_pos(r.train);
  EXPECT_TRUE(train_pos == 42u || train_pos == 43u);
  EXPECT_EQ(train_pos + count_pos(r.dev), 50u);

  const auto again = split_train_dev(items, 0.85, 5);
  EXPECT_EQ(again.train, r.train);
  EXPECT_NE(split_train_dev(items, 0.85, 6).train, r.train);
}

TEST(Split, WarnsOnEmptySide) {
  std::vector<SplitItem> items{{"a", Label::Positive, "x"}, {"b", Label::Negative, "x"},
                               {"c", Label::Negative, "x"}, {"d", Label::Negative, "x"}};
  const auto r = split_train_dev(items, 0.75, 1);
  EXPECT_EQ(r.train.size(), 3u);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(Train, SeparatesLinearData) {
  std::mt19937_64 rng(3);
  std::vector<std::vector<double>> x;
  std::vector<Label> y;
  for (int i = 0; i < 200; ++i) {
    auto v = random_vector(4, rng);
    const bool pos = i % 2 == 0;
    v[0] += pos ? 2.0 : -2.0;
    x.push_back(v);
    y.push_back(pos ? Label::Positive : Label::Negative);
  }
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.lr = 0.01;
  cfg.mixup = MixupLevel::Embedding;
  cfg.seed = 1;
  const auto r = train::train(x, y, cfg);
  EXPECT_EQ(r.loss_history.size(), 30u);
  EXPECT_LT(r.loss_history.back(), r.loss_history.front());
  std::vector<Label> preds;
  for (const auto& v : x) preds.push_back(r.classifier.predict(v));
  EXPECT_GT(unweighted_accuracy(preds, y).unweighted_accuracy, 0.95);

  const auto again = train::train(x, y, cfg);
  EXPECT_EQ(again.loss_history, r.loss_history);
}

TEST(Train, GaussianBlobsWithoutMixup) {
  std::mt19937_64 rng(21);
  std::vector<std::vector<double>> x;
  std::vector<Label> y;
  for (int i = 0; i < 200; ++i) {
    auto v = random_vector(8, rng, 0.5);
    const bool pos = i < 100;
    for (auto& c : v) c += pos ? 1.0 : -1.0;
    x.push_back(v);
    y.push_back(pos ? Label::Positive : Label::Negative);
  }
  TrainConfig cfg;
  cfg.mixup = MixupLevel::None;
  cfg.seed = 4;
  const auto r = train::train(x, y, cfg);
  ASSERT_EQ(r.loss_history.size(), 100u);
  for (std::size_t e = 10; e + 10 < r.loss_history.size(); ++e) {
    EXPECT_LE(r.loss_history[e + 10], r.loss_history[e]) << "epoch " << e;
  }
  std::vector<Label> preds;
  for (const auto& v : x) preds.push_back(r.classifier.predict(v));
  EXPECT_GE(unweighted_accuracy(preds, y).unweighted_accuracy, 0.99);
}

TEST(Train, RejectsDegenerateData) {
  const std::vector<std::vector<double>> x{{1.0}, {2.0}};
  const std::vector<Label> one_class{Label::Positive, Label::Positive};
  EXPECT_EQ(error_kind([&] { train::train(x, one_class, TrainConfig{}); }), Errc::DegenerateDataset);
  TrainConfig bad;
  bad.batch_size = 0;
  EXPECT_EQ(error_kind([&] { bad.validate(); }), Errc::InvalidConfig);
}

TEST(SpectrogramSet, MixesMatricesBeforePooling) {
  Matrix a(2, 1), b(4, 1);
  a(0, 0) = 0.0;
  a(1, 0) = 4.0;
  for (std::size_t r = 0; r < 4; ++r) b(r, 0) = 1.0;
  SpectrogramTrainingSet set({a, b}, {Label::Positive, Label::Negative});
  // a is tiled to 4 frames: 0 4 0 4. Mixed at 0.5: 0.5 2.5 0.5 2.5.
  const auto e = set.mixed_embedding(0, 1, 0.5);
  EXPECT_DOUBLE_EQ(e[0], 1.5);
  EXPECT_DOUBLE_EQ(e[1], 1.0);
  EXPECT_DOUBLE_EQ(e[2], 2.5);
  EXPECT_EQ(set.embedding(0), embed_pooled(a));
}

TEST(Embedding, HandTwoByTwo) {
  Matrix m(2, 2);
  m(0, 0) = 1.0, m(0, 1) = 3.0, m(1, 0) = 2.0, m(1, 1) = 4.0;
  const auto e = embed_pooled(m);
  const std::vector<double> want{1.5, 3.5, 0.5, 0.5, 2.0, 4.0};
  ASSERT_EQ(e.size(), want.size());
  for (std::size_t i = 0; i < e.size(); ++i) EXPECT_NEAR(e[i], want[i], 1e-12);
}

TEST(Forward, KnownActivations) {
  LinearHead zero(2);
  const std::vector<double> e{2.0, 5.0};
  const auto z = forward(zero, e);
  EXPECT_DOUBLE_EQ(z[0], 0.5);
  EXPECT_DOUBLE_EQ(z[1], 0.5);

  LinearHead head(2);
  head.weight(1, 0) = 1.0;
  EXPECT_NEAR(forward(head, e)[1], 0.8807970780, 1e-9);
}

TEST(Predict, ArgmaxWithNegativeTies) {
  EXPECT_EQ(argmax_label({0.9, 0.1}), Label::Negative);
  EXPECT_EQ(argmax_label({0.2, 0.7}), Label::Positive);
  EXPECT_EQ(argmax_label({0.4, 0.4}), Label::Negative);
}

TEST(AdamW, FirstStepMovesByLearningRate) {
  std::vector<double> p{0.0};
  AdamWState s(1);
  adamw_step(p, std::vector<double>{1.0}, s, 0.001, 0.0);
  EXPECT_NEAR(p[0], -0.001, 1e-6);

  std::vector<double> q{0.3};
  AdamWState t(1);
  adamw_step(q, std::vector<double>{0.0}, t, 0.001, 0.0);
  EXPECT_EQ(q[0], 0.3);
}

TEST(Metrics, PerfectPredictions) {
  const std::vector<Label> labels{Label::Positive, Label::Negative, Label::Negative};
  EXPECT_DOUBLE_EQ(unweighted_accuracy(labels, labels).unweighted_accuracy, 1.0);
}

TEST(Split, OnePerClassAtHalf) {
  const std::vector<SplitItem> items{{"a", Label::Positive, "x"}, {"b", Label::Negative, "x"},
                                     {"c", Label::Positive, "x"}, {"d", Label::Negative, "x"}};
  const auto r = split_train_dev(items, 0.5, 3);
  EXPECT_EQ(r.train.size(), 2u);
  EXPECT_EQ(r.dev.size(), 2u);

  const auto pair = split_train_dev(std::span(items).first(2), 0.5, 3);
  EXPECT_EQ(pair.train.size(), 1u);
  EXPECT_EQ(pair.dev.size(), 1u);
}
