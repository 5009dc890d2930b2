#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <span>
#include <vector>

#include "helpers.hpp"
#include "setoie/nn/checkpoint.hpp"
#include "setoie/nn/train.hpp"

using namespace setoie;
using namespace setoie::nn;

namespace {

TaggerConfig small_tagger(std::size_t slots = 4) {
  TaggerConfig cfg;
  cfg.encoder.hidden = 16;
  cfg.encoder.layers = 1;
  cfg.encoder.feedforward = 32;
  cfg.slots = slots;
  cfg.seed = 2;
  return cfg;
}

helpers::SynthSet small_corpus(std::size_t n = 12, std::size_t slots = 4) {
  data::SynthConfig sc;
  sc.forced = data::TemplateKind::Pair;
  return helpers::synth_examples(n, 21, slots, sc);
}

TrainConfig quick_train(std::size_t epochs) {
  TrainConfig cfg;
  cfg.learning_rate = 5e-3;
  cfg.batch_size = 4;
  cfg.max_epochs = epochs;
  cfg.validation_fraction = 0.0;
  cfg.seed = 9;
  return cfg;
}

}  // namespace

TEST(Train, LossFallsOnTinyCorpus) {
  const auto set = small_corpus();
  auto model = make_reference_tagger(Vocabulary::build(helpers::sequences(set.examples)), small_tagger());
  const auto result = train(model, std::span<const Example>(set.examples), quick_train(5));
  ASSERT_EQ(result.history.size(), 5u);
  EXPECT_LT(result.history[4].train_loss, result.history[0].train_loss);
  for (const auto& m : result.history) EXPECT_TRUE(std::isfinite(m.train_loss));
}

TEST(Train, SameSeedSameHistory) {
  const auto set = small_corpus();
  const auto vocab = Vocabulary::build(helpers::sequences(set.examples));
  auto a = make_reference_tagger(vocab, small_tagger());
  auto b = make_reference_tagger(vocab, small_tagger());
  const auto ra = train(a, std::span<const Example>(set.examples), quick_train(3));
  const auto rb = train(b, std::span<const Example>(set.examples), quick_train(3));
  ASSERT_EQ(ra.history.size(), rb.history.size());
  for (std::size_t i = 0; i < ra.history.size(); ++i) {
    EXPECT_EQ(ra.history[i].train_loss, rb.history[i].train_loss);
    EXPECT_EQ(ra.history[i].validation_f1, rb.history[i].validation_f1);
  }
  const auto pa = a.named_parameters(), pb = b.named_parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i].second->value.data, pb[i].second->value.data);
}

TEST(Train, BestF1IsMonotoneAndRestored) {
  const auto set = small_corpus();
  auto model = make_reference_tagger(Vocabulary::build(helpers::sequences(set.examples)), small_tagger());
  const auto result = train(model, std::span<const Example>(set.examples), quick_train(6));
  double prev = -1.0;
  for (const auto& m : result.history) {
    EXPECT_GE(m.best_f1, prev);
    EXPECT_GE(m.best_f1, m.validation_f1);
    EXPECT_EQ(m.improved, m.epoch == 1 || m.validation_f1 > prev);
    prev = m.best_f1;
  }
  EXPECT_DOUBLE_EQ(result.best_f1, result.history.back().best_f1);
  // The model is left at the best epoch, not the last.
  EXPECT_DOUBLE_EQ(token_f1(model, std::span<const Example>(set.examples)), result.best_f1);
}

TEST(Train, ValidationSplitIsDisjoint) {
  const auto set = small_corpus();
  auto model = make_reference_tagger(Vocabulary::build(helpers::sequences(set.examples)), small_tagger());
  auto cfg = quick_train(1);
  cfg.validation_fraction = 0.25;
  const auto result = train(model, std::span<const Example>(set.examples), cfg);
  EXPECT_EQ(result.validation_indices.size(), 3u);
  EXPECT_EQ(result.train_indices.size(), 9u);
  for (auto v : result.validation_indices)
    EXPECT_EQ(std::count(result.train_indices.begin(), result.train_indices.end(), v), 0);
}

TEST(Train, CallbackAndEarlyStop) {
  const auto set = small_corpus();
  auto model = make_reference_tagger(Vocabulary::build(helpers::sequences(set.examples)), small_tagger());
  auto cfg = quick_train(10);
  cfg.stop_at_f1 = 0.0;
  std::size_t calls = 0;
  EpochCallback<ReferenceEncoder> cb = [&](const EpochMetrics& m, const ReferenceTagger&) {
    ++calls;
    EXPECT_EQ(m.epoch, calls);
  };
  const auto result = train(model, std::span<const Example>(set.examples), cfg, cb);
  EXPECT_EQ(calls, 1u);
  EXPECT_EQ(result.history.size(), 1u);
}

TEST(Train, RejectsBadInput) {
  const auto set = small_corpus(4, 1);
  auto model = make_reference_tagger(Vocabulary::build(helpers::sequences(set.examples)), small_tagger(1));
  EXPECT_THROW(train(model, std::span<const Example>(set.examples), quick_train(1)), TooManyGold);
  EXPECT_THROW(train(model, std::span<const Example>(), quick_train(1)), ConfigError);
  auto cfg = quick_train(1);
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = quick_train(1);
  cfg.learning_rate = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = quick_train(1);
  cfg.validation_fraction = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Train, CheckpointReloadReproducesScores) {
  const auto set = small_corpus();
  const auto tc = small_tagger();
  auto model = make_reference_tagger(Vocabulary::build(helpers::sequences(set.examples)), tc);
  train(model, std::span<const Example>(set.examples), quick_train(3));
  const auto path = (std::filesystem::temp_directory_path() / "setoie_train_ckpt.json").string();
  save_checkpoint(path, model, tc);
  const auto loaded = load_checkpoint(path);
  std::filesystem::remove(path);
  const std::span<const Example> data(set.examples);
  EXPECT_EQ(token_f1(loaded.model, data), token_f1(model, data));
  for (const auto& ex : set.examples) EXPECT_EQ(loaded.model.forward(ex.seq).probs, model.forward(ex.seq).probs);
}

TEST(Speed, PositiveAndFinite) {
  const auto set = small_corpus(8);
  const auto model = make_reference_tagger(Vocabulary::build(helpers::sequences(set.examples)), small_tagger());
  const auto seqs = helpers::sequences(set.examples);
  const auto r = measure_speed(model, std::span<const TokenSequence>(seqs), 32, 1);
  EXPECT_GT(r.sentences_per_second, 0.0);
  EXPECT_TRUE(std::isfinite(r.sentences_per_second));
  EXPECT_EQ(r.sentences, 8u);
  EXPECT_EQ(r.batch_size, 32u);
  EXPECT_THROW(measure_speed(model, std::span<const TokenSequence>(), 32), ConfigError);
  EXPECT_THROW(measure_speed(model, std::span<const TokenSequence>(seqs), 0), ConfigError);
}

TEST(Speed, DoublingCorpusKeepsThroughput) {
  const auto set = helpers::synth_examples(80, 4);
  TaggerConfig tc;
  tc.seed = 1;
  const auto model = make_reference_tagger(Vocabulary::build(helpers::sequences(set.examples)), tc);
  const auto all = helpers::sequences(set.examples);
  // The second half repeats the first so both runs see the same length mix.
  std::vector<TokenSequence> half(all.begin(), all.begin() + 40), doubled = half;
  doubled.insert(doubled.end(), half.begin(), half.end());
  const double small = measure_speed(model, std::span<const TokenSequence>(half), 32, 5).sentences_per_second;
  const double big = measure_speed(model, std::span<const TokenSequence>(doubled), 32, 5).sentences_per_second;
  EXPECT_LT(std::abs(big - small) / small, 0.20) << small << " vs " << big;
}
