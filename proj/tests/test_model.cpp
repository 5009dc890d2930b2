#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "oracles.hpp"
#include "setoie/matching.hpp"
#include "setoie/nn/checkpoint.hpp"
#include "setoie/nn/decode.hpp"
#include "setoie/nn/model.hpp"
#include "setoie/nn/optim.hpp"

using namespace setoie;
using namespace setoie::nn;

namespace {

constexpr auto B = TokenClass::Background;
constexpr auto S = TokenClass::Subject;
constexpr auto R = TokenClass::Relation;
constexpr auto O = TokenClass::Object;

ReferenceTagger small_tagger(std::size_t slots = 20, std::uint64_t seed = 3, std::size_t hidden = 16) {
  const std::vector<TokenSequence> corpus = {tokenize("Albert Einstein is physicist", true),
                                             tokenize("Obama born in Hawaii", true)};
  TaggerConfig cfg;
  cfg.encoder.hidden = hidden;
  cfg.encoder.feedforward = 2 * hidden;
  cfg.encoder.max_length = 16;
  cfg.slots = slots;
  cfg.seed = seed;
  return make_reference_tagger(Vocabulary::build(corpus), cfg);
}

PredictionTensor background_tensor(std::size_t t, std::size_t n, double bg = 0.7) {
  PredictionTensor p(t, n);
  for (std::size_t k = 0; k < t; ++k)
    for (std::size_t s = 0; s < n; ++s) {
      p.at(k, s, 0) = bg;
      for (std::size_t c = 1; c < 4; ++c) p.at(k, s, c) = (1 - bg) / 3;
    }
  return p;
}

void set_row(PredictionTensor& p, std::size_t t, std::size_t n, TokenClass c, double v) {
  for (std::size_t k = 0; k < 4; ++k) p.at(t, n, k) = (1 - v) / 3;
  p.at(t, n, class_index(c)) = v;
}

}  // namespace

TEST(Vocabulary, SortedWithUnknownBucket) {
  const std::vector<TokenSequence> corpus = {tokenize("b a c a", false)};
  const auto v = Vocabulary::build(corpus);
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(v.id("a"), 1u);
  EXPECT_EQ(v.id("zzz"), Vocabulary::kUnknown);
  EXPECT_EQ(v.size(), 4u);
}

TEST(Model, ForwardShape) {
  const auto model = small_tagger();
  const auto p = model.forward(tokenize("w x y z", false));
  EXPECT_EQ(p.tokens, 4u);
  EXPECT_EQ(p.slots, 20u);
  EXPECT_EQ(p.probs.size(), 4u * 20u * 4u);
  EXPECT_TRUE(p.is_valid(1e-6));
}

TEST(Model, ForwardIsPure) {
  const auto model = small_tagger();
  const auto seq = tokenize("Albert Einstein is physicist", true);
  EXPECT_EQ(model.forward(seq).probs, model.forward(seq).probs);
}

TEST(Model, SameSeedSameWeights) {
  const auto a = small_tagger(20, 9), b = small_tagger(20, 9), c = small_tagger(20, 10);
  const auto seq = tokenize("Obama born in Hawaii", true);
  EXPECT_EQ(a.forward(seq).probs, b.forward(seq).probs);
  EXPECT_NE(a.forward(seq).probs, c.forward(seq).probs);
}

TEST(Model, RowsSumToOneOnRandomInputs) {
  const auto model = small_tagger();
  std::mt19937_64 rng(4);
  const std::vector<std::string> words = {"Albert", "is", "born", "qq", "Hawaii", "[is]", "zz"};
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::string> toks(1 + rng() % 12);
    for (auto& w : toks) w = words[rng() % words.size()];
    EXPECT_TRUE(model.forward(sequence_from_tokens(toks, false)).is_valid(1e-6));
  }
}

TEST(Model, TooLongThrows) {
  const auto model = small_tagger();
  std::vector<std::string> toks(17, "a");
  EXPECT_THROW(model.forward(sequence_from_tokens(toks, false)), TooLong);
}

TEST(Model, AttentionRowsSumToOne) {
  const auto model = small_tagger();
  const auto maps = model.encoder().attention_maps(tokenize("Albert Einstein is physicist", true));
  ASSERT_EQ(maps.size(), 2u);
  for (const auto& m : maps)
    for (std::size_t r = 0; r < m.rows(); ++r) {
      double s = 0;
      for (std::size_t c = 0; c < m.cols(); ++c) s += m.at(r, c);
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
}

TEST(Model, ParameterNamesAndFreezing) {
  const auto model = small_tagger();
  const auto named = model.named_parameters();
  EXPECT_EQ(named.front().first, "embedding");
  EXPECT_EQ(named.back().first, "head.bias");
  EXPECT_EQ(named.size(), 1u + 2u * 12u + 2u);
  EXPECT_EQ(model.trainable_parameters().size(), named.size());

  const std::vector<TokenSequence> corpus = {tokenize("a b", false)};
  TaggerConfig cfg;
  cfg.encoder.hidden = 8;
  cfg.encoder.feedforward = 8;
  cfg.freeze_encoder = true;
  const auto frozen = make_reference_tagger(Vocabulary::build(corpus), cfg);
  EXPECT_EQ(frozen.trainable_parameters().size(), 2u);
  // Backward through a frozen encoder leaves its parameters untouched.
  const auto seq = tokenize("a b", false);
  Var probs = frozen.forward_graph(seq);
  backward(probs, std::vector<double>(probs->value.size(), 1.0));
  for (const auto& [name, v] : frozen.named_parameters()) {
    if (name.rfind("head.", 0) == 0) continue;
    for (double g : v->grad()) EXPECT_EQ(g, 0.0) << name;
  }
}

TEST(Model, EndToEndGradientMatchesFiniteDifferences) {
  // 3-token toy model with N = 4 slots; loss re-matched at every evaluation.
  const auto seq = tokenize("Einstein is physicist", false);
  LabelGrid gold{{TripletMask{{S, R, O}}}, 4};
  for (std::uint64_t point = 0; point < 10; ++point) {
    const auto model = small_tagger(4, 50 + point, 8);
    const auto params = model.trainable_parameters();
    zero_grad(params);
    Var probs = model.forward_graph(seq);
    PredictionTensor pred(3, 4);
    pred.probs = probs->value.data;
    backward(probs, loss_gradient(pred, gold));

    auto loss_at = [&] { return order_agnostic_loss(model.forward(seq), gold).loss; };
    std::mt19937_64 rng(point);
    double worst = 0;
    for (int probe = 0; probe < 30; ++probe) {
      const auto& v = params[rng() % params.size()];
      const std::size_t i = rng() % v->value.size();
      const double keep = v->value.data[i], h = 1e-4;
      v->value.data[i] = keep + h;
      const double up = loss_at();
      v->value.data[i] = keep - h;
      const double down = loss_at();
      v->value.data[i] = keep;
      worst = std::max(worst, oracle::relative_error(v->grad()[i], (up - down) / (2 * h), 1e-4));
    }
    EXPECT_LT(worst, 1e-3) << "point " << point;
  }
}

TEST(Decode, BackgroundHeavyTensorGivesNothing) {
  const auto seq = tokenize("a b c d", false);
  EXPECT_TRUE(decode(background_tensor(4, 20), seq, true).empty());
}

TEST(Decode, SingleSlotTriplet) {
  const auto seq = tokenize("Albert Einstein is physicist", false);
  auto p = background_tensor(4, 20);
  set_row(p, 0, 7, S, 0.9);
  set_row(p, 1, 7, S, 0.8);
  set_row(p, 2, 7, R, 0.6);
  set_row(p, 3, 7, O, 0.95);
  const auto out = decode(p, seq, true);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].arg1, "Albert Einstein");
  EXPECT_EQ(out[0].rel, "is");
  EXPECT_EQ(out[0].arg2, "physicist");
  EXPECT_DOUBLE_EQ(*out[0].confidence, 0.6);
}

TEST(Decode, DuplicateSlotsCollapse) {
  const auto seq = tokenize("a b c", false);
  auto p = background_tensor(3, 5);
  for (std::size_t n : {1u, 3u}) {
    set_row(p, 0, n, S, 0.9);
    set_row(p, 1, n, R, 0.9);
    set_row(p, 2, n, O, 0.9);
  }
  const auto slots = decode_slots(p, seq);
  ASSERT_EQ(slots.size(), 1u);
  EXPECT_EQ(slots[0].slot, 1u);
  DecodeOptions keep;
  keep.deduplicate = false;
  EXPECT_EQ(decode_slots(p, seq, keep).size(), 2u);
}

TEST(Decode, RequireAllParts) {
  const auto seq = tokenize("a b c", false);
  auto p = background_tensor(3, 2);
  set_row(p, 0, 0, S, 0.9);
  set_row(p, 1, 0, R, 0.9);
  EXPECT_TRUE(decode(p, seq, true).empty());
  const auto loose = decode(p, seq, false);
  ASSERT_EQ(loose.size(), 1u);
  EXPECT_EQ(loose[0].arg2, "");
}

TEST(Decode, SlotBound) {
  const auto model = small_tagger(6);
  const auto seq = tokenize("Albert Einstein is physicist", true);
  EXPECT_LE(decode(model.forward(seq), seq, false).size(), 6u);
}

TEST(Confidence, OneHotIsOne) {
  const TripletMask m{{S, R, O}};
  const auto block = onehot_block(m);
  EXPECT_DOUBLE_EQ(confidence(block, m), 1.0);
}

TEST(Confidence, MinOfCountedTokens) {
  const TripletMask m{{S, B, O}};
  std::vector<double> block = {0.05, 0.9, 0.03, 0.02, 0.9, 0.05, 0.03, 0.02, 0.2, 0.1, 0.1, 0.6};
  EXPECT_DOUBLE_EQ(confidence(block, m), 0.6);
  EXPECT_NEAR(confidence(block, m, ConfidenceAggregator::MeanLog), std::sqrt(0.9 * 0.6), 1e-12);
  EXPECT_THROW(confidence(block, TripletMask{{B, B, B}}), NoTriplet);
}

TEST(Confidence, MonotoneInCountedProbabilities) {
  const TripletMask m{{S, R, O}};
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    auto p = oracle::random_prediction(rng, 3, 1);
    auto block = p.slot(0);
    const double before = confidence(block, m);
    const std::size_t t = rng() % 3;
    const std::size_t c = class_index(m.labels[t]);
    block[t * 4 + c] = std::min(1.0, block[t * 4 + c] + 0.1);
    EXPECT_GE(confidence(block, m), before);
  }
}

TEST(Adam, ZeroGradientZeroDecayIsNoOp) {
  auto w = parameter(Tensor({3}, std::vector<double>{1.0, -2.0, 0.5}));
  Adam adam({w}, AdamConfig{5e-4, 0.0});
  adam.zero_grad();
  adam.step();
  EXPECT_EQ(w->value.data, (std::vector<double>{1.0, -2.0, 0.5}));
}

TEST(Adam, FirstStepClosedForm) {
  auto w = parameter(Tensor({1}, 0.3));
  Adam adam({w}, AdamConfig{5e-4, 0.0, 0.9, 0.999, 1e-8});
  w->grad()[0] = 1.0;
  adam.step();
  // m_hat = 1, v_hat = 1 after bias correction.
  EXPECT_NEAR(w->value.data[0], 0.3 - 5e-4 * (1.0 / (1.0 + 1e-8)), 1e-15);
}

TEST(Adam, DecoupledDecayOnly) {
  auto w = parameter(Tensor({2}, std::vector<double>{2.0, -4.0}));
  Adam adam({w}, AdamConfig{1e-2, 1e-1});
  adam.zero_grad();
  adam.step();
  EXPECT_NEAR(w->value.data[0], 2.0 - 1e-2 * 1e-1 * 2.0, 1e-15);
  EXPECT_NEAR(w->value.data[1], -4.0 + 1e-2 * 1e-1 * 4.0, 1e-15);
}

TEST(Adam, NanGradientAbortsStep) {
  auto w = parameter(Tensor({2}, 1.0));
  Adam adam({w}, AdamConfig{});
  w->grad()[0] = 0.5;
  w->grad()[1] = std::nan("");
  EXPECT_THROW(adam.step(), NumericalError);
  EXPECT_EQ(w->value.data, (std::vector<double>{1.0, 1.0}));
  EXPECT_EQ(adam.steps(), 0u);
}

TEST(Checkpoint, RoundTripPreservesOutputs) {
  const auto model = small_tagger(5, 21);
  TaggerConfig cfg;
  cfg.encoder.hidden = 16;
  cfg.encoder.feedforward = 32;
  cfg.encoder.max_length = 16;
  cfg.slots = 5;
  cfg.seed = 21;
  const auto j = checkpoint_json(model, cfg, {{"note", "x"}});
  const auto loaded = load_checkpoint_json(nlohmann::json::parse(j.dump()));
  const auto seq = tokenize("Albert Einstein is physicist", true);
  EXPECT_EQ(loaded.model.forward(seq).probs, model.forward(seq).probs);
  EXPECT_EQ(loaded.metadata.at("note"), "x");
}

TEST(Checkpoint, RejectsOtherVersions) {
  const auto model = small_tagger(5, 21);
  TaggerConfig cfg;
  cfg.encoder.hidden = 16;
  cfg.encoder.feedforward = 32;
  cfg.encoder.max_length = 16;
  cfg.slots = 5;
  auto j = checkpoint_json(model, cfg);
  j["version"] = 2;
  EXPECT_THROW(load_checkpoint_json(j), FormatError);
  j["version"] = 1;
  j["parameters"][0]["shape"] = {1, 1};
  EXPECT_THROW(load_checkpoint_json(j), FormatError);
}
