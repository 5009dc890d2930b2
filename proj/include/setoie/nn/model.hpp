#pragma once

// Tagger = token encoder + N-slot detection head. The encoder is anything
// satisfying TokenEncoder; ReferenceEncoder is a small self-attention stack
// trained from scratch.

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "setoie/core.hpp"
#include "setoie/errors.hpp"
#include "setoie/nn/autograd.hpp"

namespace setoie::nn {

using NamedParameter = std::pair<std::string, Var>;

template <class E>
concept TokenEncoder = requires(const E& enc, const TokenSequence& seq) {
  { enc.encode(seq) } -> std::same_as<Var>;
  { enc.named_parameters() } -> std::same_as<std::vector<NamedParameter>>;
  { enc.hidden_size() } -> std::convertible_to<std::size_t>;
};

// Token -> id map; id 0 is the out-of-vocabulary bucket.
class Vocabulary {
 public:
  static constexpr std::size_t kUnknown = 0;

  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) ids_.emplace(tokens_[i], i + 1);
  }

  // Sorted, de-duplicated vocabulary over the given sequences.
  template <class Range>
  static Vocabulary build(const Range& sequences) {
    std::map<std::string, bool> all;
    for (const TokenSequence& seq : sequences)
      for (const auto& t : seq.tokens) all.emplace(t, true);
    std::vector<std::string> tokens;
    tokens.reserve(all.size());
    for (auto& [t, _] : all) tokens.push_back(t);
    return Vocabulary(std::move(tokens));
  }

  std::size_t id(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnknown : it->second;
  }
  std::size_t size() const noexcept { return tokens_.size() + 1; }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, std::size_t> ids_;
};

struct EncoderConfig {
  std::size_t hidden = 64;
  std::size_t layers = 2;
  std::size_t feedforward = 128;
  std::size_t max_length = 256;
};

namespace detail {

inline Tensor xavier(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor t({in, out});
  for (auto& x : t.data) x = dist(rng);
  return t;
}

inline Tensor gaussian(std::vector<std::size_t> shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor t(std::move(shape));
  for (auto& x : t.data) x = dist(rng);
  return t;
}

inline Tensor sinusoidal_positions(std::size_t length, std::size_t hidden) {
  Tensor pe({length, hidden});
  for (std::size_t pos = 0; pos < length; ++pos)
    for (std::size_t i = 0; i < hidden; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(hidden));
      pe.at(pos, i) = std::sin(static_cast<double>(pos) * freq);
      if (i + 1 < hidden) pe.at(pos, i + 1) = std::cos(static_cast<double>(pos) * freq);
    }
  return pe;
}

inline Tensor slice_rows(const Tensor& t, std::size_t n) {
  const std::size_t c = t.cols();
  return Tensor({n, c}, std::vector<double>(t.data.begin(), t.data.begin() + static_cast<std::ptrdiff_t>(n * c)));
}

}  // namespace detail

class ReferenceEncoder {
 public:
  struct Block {
    Var wq, wk, wv, wo;
    Var ln1_gain, ln1_bias;
    Var w1, b1, w2, b2;
    Var ln2_gain, ln2_bias;
  };

  ReferenceEncoder(Vocabulary vocab, EncoderConfig cfg, std::uint64_t seed)
      : vocab_(std::move(vocab)), cfg_(cfg),
        positions_(detail::sinusoidal_positions(cfg.max_length, cfg.hidden)) {
    if (cfg_.hidden == 0 || cfg_.feedforward == 0) throw ConfigError("encoder widths must be positive");
    std::mt19937_64 rng(seed);
    const std::size_t h = cfg_.hidden;
    embedding_ = parameter(detail::gaussian({vocab_.size(), h}, 1.0, rng));
    for (std::size_t k = 0; k < cfg_.layers; ++k) {
      Block b;
      b.wq = parameter(detail::xavier(h, h, rng));
      b.wk = parameter(detail::xavier(h, h, rng));
      b.wv = parameter(detail::xavier(h, h, rng));
      b.wo = parameter(detail::xavier(h, h, rng));
      b.ln1_gain = parameter(Tensor({h}, 1.0));
      b.ln1_bias = parameter(Tensor({h}, 0.0));
      b.w1 = parameter(detail::xavier(h, cfg_.feedforward, rng));
      b.b1 = parameter(Tensor({cfg_.feedforward}, 0.0));
      b.w2 = parameter(detail::xavier(cfg_.feedforward, h, rng));
      b.b2 = parameter(Tensor({h}, 0.0));
      b.ln2_gain = parameter(Tensor({h}, 1.0));
      b.ln2_bias = parameter(Tensor({h}, 0.0));
      blocks_.push_back(std::move(b));
    }
  }

  Var encode(const TokenSequence& seq) const { return run(seq, nullptr); }

  // Attention weights (T x T) of every block, for inspection.
  std::vector<Tensor> attention_maps(const TokenSequence& seq) const {
    std::vector<Tensor> maps;
    NoGradGuard guard;
    run(seq, &maps);
    return maps;
  }

  std::vector<NamedParameter> named_parameters() const {
    std::vector<NamedParameter> out{{"embedding", embedding_}};
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
      const auto& b = blocks_[k];
      const std::string p = "block" + std::to_string(k) + ".";
      out.insert(out.end(), {{p + "wq", b.wq}, {p + "wk", b.wk}, {p + "wv", b.wv}, {p + "wo", b.wo},
                             {p + "ln1_gain", b.ln1_gain}, {p + "ln1_bias", b.ln1_bias},
                             {p + "w1", b.w1}, {p + "b1", b.b1}, {p + "w2", b.w2}, {p + "b2", b.b2},
                             {p + "ln2_gain", b.ln2_gain}, {p + "ln2_bias", b.ln2_bias}});
    }
    return out;
  }

  std::size_t hidden_size() const noexcept { return cfg_.hidden; }
  const EncoderConfig& config() const noexcept { return cfg_; }
  const Vocabulary& vocabulary() const noexcept { return vocab_; }

 private:
  Var run(const TokenSequence& seq, std::vector<Tensor>* maps) const {
    const std::size_t len = seq.size();
    if (len == 0) throw EmptyInput("cannot encode an empty sequence");
    if (len > cfg_.max_length)
      throw TooLong("sequence of " + std::to_string(len) + " tokens exceeds the maximum of " +
                    std::to_string(cfg_.max_length));
    std::vector<std::size_t> ids(len);
    for (std::size_t t = 0; t < len; ++t) ids[t] = vocab_.id(seq.tokens[t]);

    Var x = add(embedding(embedding_, ids), constant(detail::slice_rows(positions_, len)));
    const double inv_sqrt_h = 1.0 / std::sqrt(static_cast<double>(cfg_.hidden));
    for (const auto& b : blocks_) {
      Var q = matmul(x, b.wq);
      Var k = matmul(x, b.wk);
      Var v = matmul(x, b.wv);
      Var attn = softmax_rows(scale(matmul(q, transpose(k)), inv_sqrt_h));
      if (maps) maps->push_back(attn->value);
      Var mixed = matmul(matmul(attn, v), b.wo);
      x = layer_norm_rows(add(x, mixed), b.ln1_gain, b.ln1_bias);
      Var ff = add_row(matmul(relu(add_row(matmul(x, b.w1), b.b1)), b.w2), b.b2);
      x = layer_norm_rows(add(x, ff), b.ln2_gain, b.ln2_bias);
    }
    return x;
  }

  Vocabulary vocab_;
  EncoderConfig cfg_;
  Tensor positions_;
  Var embedding_;
  std::vector<Block> blocks_;
};

static_assert(TokenEncoder<ReferenceEncoder>);

// Affine map from H to N * C channels per token.
class DetectionHead {
 public:
  DetectionHead(std::size_t hidden, std::size_t slots, std::uint64_t seed) : slots_(slots) {
    if (slots == 0) throw ConfigError("slot count must be positive");
    std::mt19937_64 rng(seed);
    weight_ = parameter(detail::xavier(hidden, slots * kNumClasses, rng));
    bias_ = parameter(Tensor({slots * kNumClasses}, 0.0));
  }

  // (T x H) hidden states -> (T * N x C) probabilities.
  Var apply(const Var& hidden) const {
    const std::size_t len = hidden->value.rows();
    Var logits = add_row(matmul(hidden, weight_), bias_);
    return softmax_rows(reshape(logits, {len * slots_, kNumClasses}));
  }

  std::vector<NamedParameter> named_parameters() const {
    return {{"head.weight", weight_}, {"head.bias", bias_}};
  }
  std::size_t slots() const noexcept { return slots_; }

 private:
  std::size_t slots_;
  Var weight_;
  Var bias_;
};

struct TaggerConfig {
  EncoderConfig encoder;
  std::size_t slots = 20;
  bool freeze_encoder = false;
  std::uint64_t seed = 0;
};

template <TokenEncoder Encoder>
class Tagger {
 public:
  Tagger(Encoder encoder, std::size_t slots, bool freeze_encoder, std::uint64_t head_seed)
      : encoder_(std::move(encoder)),
        head_(encoder_.hidden_size(), slots, head_seed),
        freeze_encoder_(freeze_encoder) {}

  // Probabilities as a graph node of shape (T * N, C).
  Var forward_graph(const TokenSequence& seq) const {
    if (freeze_encoder_) {
      Var hidden;
      {
        NoGradGuard guard;
        hidden = encoder_.encode(seq);
      }
      return head_.apply(constant(hidden->value));
    }
    return head_.apply(encoder_.encode(seq));
  }

  PredictionTensor forward(const TokenSequence& seq) const {
    NoGradGuard guard;
    Var probs = forward_graph(seq);
    PredictionTensor p;
    p.tokens = seq.size();
    p.slots = head_.slots();
    p.probs = std::move(probs->value.data);
    return p;
  }

  std::vector<NamedParameter> named_parameters() const {
    auto out = encoder_.named_parameters();
    auto head = head_.named_parameters();
    out.insert(out.end(), head.begin(), head.end());
    return out;
  }

  std::vector<Var> trainable_parameters() const {
    std::vector<Var> out;
    if (!freeze_encoder_)
      for (auto& [_, v] : encoder_.named_parameters()) out.push_back(v);
    for (auto& [_, v] : head_.named_parameters()) out.push_back(v);
    return out;
  }

  std::size_t slots() const noexcept { return head_.slots(); }
  bool frozen_encoder() const noexcept { return freeze_encoder_; }
  const Encoder& encoder() const noexcept { return encoder_; }

 private:
  Encoder encoder_;
  DetectionHead head_;
  bool freeze_encoder_;
};

using ReferenceTagger = Tagger<ReferenceEncoder>;

inline ReferenceTagger make_reference_tagger(Vocabulary vocab, const TaggerConfig& cfg) {
  return ReferenceTagger(ReferenceEncoder(std::move(vocab), cfg.encoder, cfg.seed), cfg.slots,
                         cfg.freeze_encoder, cfg.seed ^ 0x9e3779b97f4a7c15ULL);
}

inline std::size_t parameter_count(std::span<const NamedParameter> params) {
  std::size_t n = 0;
  for (const auto& [_, v] : params) n += v->value.size();
  return n;
}

}  // namespace setoie::nn
