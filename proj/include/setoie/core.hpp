#pragma once

// Domain types shared by every module: token classes, tokenized sentences,
// per-slot label masks and the string triples they decode to.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "setoie/errors.hpp"

namespace setoie {

enum class TokenClass : unsigned char { Background = 0, Subject = 1, Relation = 2, Object = 3 };

inline constexpr std::size_t kNumClasses = 4;

inline constexpr std::array<TokenClass, kNumClasses> kAllClasses = {
    TokenClass::Background, TokenClass::Subject, TokenClass::Relation, TokenClass::Object};

constexpr std::size_t class_index(TokenClass c) noexcept { return static_cast<std::size_t>(c); }

constexpr TokenClass class_from_index(std::size_t i) {
  if (i >= kNumClasses) throw ShapeError("class index out of range");
  return static_cast<TokenClass>(i);
}

// One-letter codes used by the mask-level corpus files.
constexpr char class_code(TokenClass c) noexcept {
  switch (c) {
    case TokenClass::Subject: return 'S';
    case TokenClass::Relation: return 'R';
    case TokenClass::Object: return 'O';
    default: return 'B';
  }
}

inline TokenClass class_from_code(std::string_view code) {
  if (code == "B") return TokenClass::Background;
  if (code == "S") return TokenClass::Subject;
  if (code == "R") return TokenClass::Relation;
  if (code == "O") return TokenClass::Object;
  throw BadAnnotation("unknown class code '" + std::string(code) + "'");
}

inline constexpr std::array<std::string_view, 3> kPlaceholders = {"[is]", "[from]", "[to]"};

inline bool is_placeholder(std::string_view token) noexcept {
  return std::find(kPlaceholders.begin(), kPlaceholders.end(), token) != kPlaceholders.end();
}

struct CharSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  static constexpr std::size_t kSentinel = std::numeric_limits<std::size_t>::max();
  static constexpr CharSpan sentinel() noexcept { return {kSentinel, kSentinel}; }
  constexpr bool is_sentinel() const noexcept { return begin == kSentinel; }
  friend constexpr bool operator==(CharSpan, CharSpan) = default;
};

struct TokenSequence {
  std::vector<std::string> tokens;
  std::vector<CharSpan> char_spans;
  std::vector<bool> appended_placeholders;

  std::size_t size() const noexcept { return tokens.size(); }
  bool has_placeholders() const noexcept {
    return !appended_placeholders.empty() && appended_placeholders.back();
  }
  // Number of tokens before the trailing placeholders.
  std::size_t body_size() const noexcept {
    return has_placeholders() ? tokens.size() - kPlaceholders.size() : tokens.size();
  }

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

struct TripletMask {
  std::vector<TokenClass> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t count(TokenClass c) const noexcept {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), c));
  }
  bool is_background() const noexcept { return count(TokenClass::Background) == labels.size(); }
  bool has_all_parts() const noexcept {
    return count(TokenClass::Subject) > 0 && count(TokenClass::Relation) > 0 &&
           count(TokenClass::Object) > 0;
  }

  friend bool operator==(const TripletMask&, const TripletMask&) = default;
};

struct LabelGrid {
  std::vector<TripletMask> masks;
  std::size_t n_slots = 20;

  // Number of non-empty masks.
  std::size_t triplet_count() const noexcept {
    return static_cast<std::size_t>(std::count_if(
        masks.begin(), masks.end(), [](const TripletMask& m) { return !m.is_background(); }));
  }

  friend bool operator==(const LabelGrid&, const LabelGrid&) = default;
};

struct Extraction {
  std::string arg1;
  std::string rel;
  std::string arg2;
  std::optional<double> confidence;

  friend bool operator==(const Extraction&, const Extraction&) = default;
};

// Probabilities of shape (T, N, C) stored row-major.
struct PredictionTensor {
  std::size_t tokens = 0;
  std::size_t slots = 0;
  std::vector<double> probs;

  PredictionTensor() = default;
  PredictionTensor(std::size_t t, std::size_t n)
      : tokens(t), slots(n), probs(t * n * kNumClasses, 0.0) {}

  double& at(std::size_t t, std::size_t n, std::size_t c) {
    return probs[(t * slots + n) * kNumClasses + c];
  }
  double at(std::size_t t, std::size_t n, std::size_t c) const {
    return probs[(t * slots + n) * kNumClasses + c];
  }

  // Copy of slot n as a T x C row-major block.
  std::vector<double> slot(std::size_t n) const {
    std::vector<double> out(tokens * kNumClasses);
    for (std::size_t t = 0; t < tokens; ++t)
      for (std::size_t c = 0; c < kNumClasses; ++c) out[t * kNumClasses + c] = at(t, n, c);
    return out;
  }

  // Every (t, n) row is a distribution within tol.
  bool is_valid(double tol = 1e-6) const {
    if (probs.size() != tokens * slots * kNumClasses) return false;
    for (std::size_t row = 0; row < tokens * slots; ++row) {
      double s = 0.0;
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        const double v = probs[row * kNumClasses + c];
        if (!(v >= 0.0 && v <= 1.0)) return false;
        s += v;
      }
      if (std::abs(s - 1.0) > tol) return false;
    }
    return true;
  }
};

// Token indices of one gold triplet, per part.
struct TripletSpans {
  std::vector<std::size_t> subject;
  std::vector<std::size_t> relation;
  std::vector<std::size_t> object;

  friend bool operator==(const TripletSpans&, const TripletSpans&) = default;
};

namespace detail {

inline bool is_space(char ch) noexcept { return std::isspace(static_cast<unsigned char>(ch)) != 0; }

// ASCII punctuation only; bytes of multi-byte UTF-8 sequences count as word characters.
inline bool is_punct(char ch) noexcept {
  const auto u = static_cast<unsigned char>(ch);
  return u < 0x80 && std::ispunct(u) != 0;
}

}  // namespace detail

// Splits on whitespace, then peels leading and trailing ASCII punctuation off
// each chunk as single-character tokens. Inner punctuation ("28,750", "don't")
// stays attached. Chunks that are exactly a placeholder are kept whole.
inline TokenSequence tokenize(std::string_view sentence, bool append_placeholders) {
  TokenSequence seq;
  auto push = [&](std::size_t b, std::size_t e) {
    seq.tokens.emplace_back(sentence.substr(b, e - b));
    seq.char_spans.push_back({b, e});
    seq.appended_placeholders.push_back(false);
  };

  std::size_t i = 0;
  while (i < sentence.size()) {
    while (i < sentence.size() && detail::is_space(sentence[i])) ++i;
    if (i >= sentence.size()) break;
    std::size_t j = i;
    while (j < sentence.size() && !detail::is_space(sentence[j])) ++j;

    if (is_placeholder(sentence.substr(i, j - i))) {
      push(i, j);
      i = j;
      continue;
    }
    std::size_t b = i;
    std::size_t e = j;
    while (b < e && detail::is_punct(sentence[b])) {
      push(b, b + 1);
      ++b;
    }
    std::size_t tail = e;
    while (tail > b && detail::is_punct(sentence[tail - 1])) --tail;
    if (b < tail) push(b, tail);
    for (std::size_t k = tail; k < e; ++k) push(k, k + 1);
    i = j;
  }

  if (seq.tokens.empty()) throw EmptyInput("sentence is empty");

  if (append_placeholders) {
    for (auto p : kPlaceholders) {
      seq.tokens.emplace_back(p);
      seq.char_spans.push_back(CharSpan::sentinel());
      seq.appended_placeholders.push_back(true);
    }
  }
  return seq;
}

// Builds a sequence from pre-split tokens (CoNLL input); spans assume the
// tokens are joined by single spaces.
inline TokenSequence sequence_from_tokens(std::span<const std::string> tokens,
                                          bool append_placeholders) {
  if (tokens.empty()) throw EmptyInput("token list is empty");
  TokenSequence seq;
  std::size_t offset = 0;
  for (const auto& tok : tokens) {
    if (tok.empty()) throw EmptyInput("empty token");
    seq.tokens.push_back(tok);
    seq.char_spans.push_back({offset, offset + tok.size()});
    seq.appended_placeholders.push_back(false);
    offset += tok.size() + 1;
  }
  if (append_placeholders) {
    for (auto p : kPlaceholders) {
      seq.tokens.emplace_back(p);
      seq.char_spans.push_back(CharSpan::sentinel());
      seq.appended_placeholders.push_back(true);
    }
  }
  return seq;
}

inline std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

inline Extraction mask_to_extraction(const TokenSequence& seq, const TripletMask& mask) {
  if (mask.size() != seq.size())
    throw ShapeError("mask length " + std::to_string(mask.size()) + " != sequence length " +
                     std::to_string(seq.size()));
  if (mask.is_background()) throw NoTriplet("mask has no non-background tokens");

  Extraction ex;
  auto append = [](std::string& field, const std::string& tok) {
    if (!field.empty()) field += ' ';
    field += tok;
  };
  for (std::size_t t = 0; t < seq.size(); ++t) {
    switch (mask.labels[t]) {
      case TokenClass::Subject: append(ex.arg1, seq.tokens[t]); break;
      case TokenClass::Relation: append(ex.rel, seq.tokens[t]); break;
      case TokenClass::Object: append(ex.arg2, seq.tokens[t]); break;
      case TokenClass::Background: break;
    }
  }
  return ex;
}

inline TripletMask mask_from_spans(std::size_t length, const TripletSpans& spans) {
  TripletMask mask{std::vector<TokenClass>(length, TokenClass::Background)};
  auto label = [&](const std::vector<std::size_t>& idx, TokenClass c) {
    for (auto t : idx) {
      if (t >= length)
        throw BadAnnotation("token index " + std::to_string(t) + " out of range (T = " +
                            std::to_string(length) + ")");
      if (mask.labels[t] != TokenClass::Background && mask.labels[t] != c)
        throw BadAnnotation("token " + std::to_string(t) + " carries two classes");
      mask.labels[t] = c;
    }
  };
  label(spans.subject, TokenClass::Subject);
  label(spans.relation, TokenClass::Relation);
  label(spans.object, TokenClass::Object);
  return mask;
}

inline TripletSpans spans_from_mask(const TripletMask& mask) {
  TripletSpans spans;
  for (std::size_t t = 0; t < mask.size(); ++t) {
    switch (mask.labels[t]) {
      case TokenClass::Subject: spans.subject.push_back(t); break;
      case TokenClass::Relation: spans.relation.push_back(t); break;
      case TokenClass::Object: spans.object.push_back(t); break;
      case TokenClass::Background: break;
    }
  }
  return spans;
}

inline LabelGrid grid_from_tuples(const TokenSequence& seq, std::span<const TripletSpans> gold,
                                  std::size_t n_slots = 20) {
  LabelGrid grid;
  grid.n_slots = n_slots;
  grid.masks.reserve(gold.size());
  for (const auto& spans : gold) grid.masks.push_back(mask_from_spans(seq.size(), spans));
  for (std::size_t a = 0; a < grid.masks.size(); ++a)
    for (std::size_t b = a + 1; b < grid.masks.size(); ++b)
      if (grid.masks[a] == grid.masks[b])
        throw BadAnnotation("gold triplets " + std::to_string(a) + " and " + std::to_string(b) +
                            " are identical");
  return grid;
}

}  // namespace setoie
