#pragma once

// Template-based synthetic sentences built from lexicalized knowledge-base
// triples. Each triple is rendered as "subject relation object" and one to
// nine of them are glued together by one of four templates.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "setoie/core.hpp"
#include "setoie/errors.hpp"

namespace setoie::data {

struct LexTriplet {
  std::string subject;
  std::string relation;
  std::string object;

  friend bool operator==(const LexTriplet&, const LexTriplet&) = default;
};

using TripletPool = std::vector<LexTriplet>;

enum class TemplateKind : std::size_t { Single = 0, Pair = 1, CommaJoin = 2, PeriodJoin = 3 };

inline constexpr std::array<std::string_view, 4> kTemplateNames = {"single", "pair", "comma_join",
                                                                   "period_join"};

inline std::string_view template_name(TemplateKind k) { return kTemplateNames[static_cast<std::size_t>(k)]; }

struct TemplateSpec {
  double probability;
  TemplateKind kind;
};

inline constexpr std::array<TemplateSpec, 4> kDefaultTemplates = {{
    {0.1, TemplateKind::Single},
    {0.2, TemplateKind::Pair},
    {0.35, TemplateKind::CommaJoin},
    {0.35, TemplateKind::PeriodJoin},
}};

struct SynthConfig {
  std::array<TemplateSpec, 4> templates = kDefaultTemplates;
  std::vector<std::string> conjunctions = {"while", "and"};
  std::size_t comma_min = 3, comma_max = 5;
  std::size_t period_min = 2, period_max = 9;
  std::optional<TemplateKind> forced;

  std::size_t max_arity() const { return std::max<std::size_t>({2, comma_max, period_max}); }

  void validate() const {
    double total = 0.0;
    for (const auto& t : templates) {
      if (t.probability < 0.0) throw ConfigError("template probabilities must be non-negative");
      total += t.probability;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("template probabilities must sum to 1");
    if (conjunctions.empty()) throw ConfigError("conjunction list is empty");
    if (comma_min < 1 || comma_min > comma_max || period_min < 1 || period_min > period_max)
      throw ConfigError("invalid template arity range");
  }
};

struct SynthSentence {
  std::string sentence;
  TemplateKind kind = TemplateKind::Single;
  std::vector<Extraction> gold;
  // Token indices of each gold triple in tokenize(sentence).
  std::vector<TripletSpans> spans;
};

inline std::vector<SynthSentence> synth_generate(const TripletPool& pool, std::size_t n_sentences,
                                                 std::uint64_t seed, const SynthConfig& cfg = {}) {
  cfg.validate();
  if (pool.size() < cfg.max_arity())
    throw ConfigError("triplet pool has " + std::to_string(pool.size()) + " entries; at least " +
                      std::to_string(cfg.max_arity()) + " are required");
  for (const auto& t : pool)
    if (t.subject.empty() || t.relation.empty() || t.object.empty())
      throw ConfigError("triplet pool entries must have non-empty parts");

  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick_template(
      {cfg.templates[0].probability, cfg.templates[1].probability, cfg.templates[2].probability,
       cfg.templates[3].probability});
  std::uniform_int_distribution<std::size_t> pick_triplet(0, pool.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_conj(0, cfg.conjunctions.size() - 1);

  std::vector<SynthSentence> out;
  out.reserve(n_sentences);
  for (std::size_t s = 0; s < n_sentences; ++s) {
    const TemplateKind kind = cfg.forced ? *cfg.forced : cfg.templates[pick_template(rng)].kind;
    std::size_t arity = 1;
    switch (kind) {
      case TemplateKind::Single: arity = 1; break;
      case TemplateKind::Pair: arity = 2; break;
      case TemplateKind::CommaJoin:
        arity = std::uniform_int_distribution<std::size_t>(cfg.comma_min, cfg.comma_max)(rng);
        break;
      case TemplateKind::PeriodJoin:
        arity = std::uniform_int_distribution<std::size_t>(cfg.period_min, cfg.period_max)(rng);
        break;
    }

    std::vector<std::size_t> chosen;
    while (chosen.size() < arity) {
      const std::size_t idx = pick_triplet(rng);
      if (std::find(chosen.begin(), chosen.end(), idx) == chosen.end()) chosen.push_back(idx);
    }

    SynthSentence sent;
    sent.kind = kind;
    std::vector<std::string> tokens;
    auto emit_part = [&](const std::string& text, std::vector<std::size_t>& idx) {
      for (auto& tok : tokenize(text, false).tokens) {
        idx.push_back(tokens.size());
        tokens.push_back(std::move(tok));
      }
    };
    for (std::size_t k = 0; k < chosen.size(); ++k) {
      if (k > 0) {
        switch (kind) {
          case TemplateKind::Pair: {
            std::vector<std::size_t> unused;
            emit_part(cfg.conjunctions[pick_conj(rng)], unused);
            break;
          }
          case TemplateKind::CommaJoin: tokens.emplace_back(","); break;
          case TemplateKind::PeriodJoin: tokens.emplace_back("."); break;
          case TemplateKind::Single: break;
        }
      }
      const auto& triple = pool[chosen[k]];
      TripletSpans spans;
      emit_part(triple.subject, spans.subject);
      emit_part(triple.relation, spans.relation);
      emit_part(triple.object, spans.object);
      Extraction ex;
      auto join = [&](const std::vector<std::size_t>& idx) {
        std::string s;
        for (auto i : idx) s += (s.empty() ? "" : " ") + tokens[i];
        return s;
      };
      ex.arg1 = join(spans.subject);
      ex.rel = join(spans.relation);
      ex.arg2 = join(spans.object);
      ex.confidence = 1.0;
      sent.gold.push_back(std::move(ex));
      sent.spans.push_back(std::move(spans));
    }
    tokens.emplace_back(".");
    sent.sentence = join_tokens(tokens);
    out.push_back(std::move(sent));
  }
  return out;
}

inline TripletPool read_triplet_pool(std::istream& in) {
  TripletPool pool;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cols.size() != 3) throw FormatError("expected 3 tab-separated columns, got " + std::to_string(cols.size()), lineno);
    for (const auto& c : cols)
      if (c.empty()) throw FormatError("empty triplet part", lineno);
    pool.push_back({cols[0], cols[1], cols[2]});
  }
  return pool;
}

inline TripletPool read_triplet_pool(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open triplet pool '" + path + "'");
  return read_triplet_pool(in);
}

}  // namespace setoie::data
