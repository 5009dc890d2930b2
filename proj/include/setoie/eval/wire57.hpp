#pragma once

// WiRe57-style scoring. A prediction possibly matches a gold tuple when every
// part shares at least one token; pairs are then matched greedily by F1 and
// token overlaps are micro-averaged over the corpus.

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "setoie/core.hpp"
#include "setoie/eval/report.hpp"

namespace setoie::eval {

struct ScoredPair {
  std::size_t pred = 0;
  std::size_t gold = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t overlap = 0;
  std::size_t pred_tokens = 0;
  std::size_t gold_tokens = 0;
};

inline std::optional<ScoredPair> wire57_pair(const Extraction& t, const Extraction& g) {
  const auto tp = tuple_parts(t);
  const auto gp = tuple_parts(g);
  ScoredPair s;
  for (std::size_t k = 0; k < 3; ++k) {
    const std::size_t ov = bag_overlap(tp[k], gp[k]);
    if (ov == 0) return std::nullopt;
    s.overlap += ov;
  }
  s.pred_tokens = token_count(tp);
  s.gold_tokens = token_count(gp);
  s.precision = static_cast<double>(s.overlap) / static_cast<double>(s.pred_tokens);
  s.recall = static_cast<double>(s.overlap) / static_cast<double>(s.gold_tokens);
  s.f1 = harmonic_mean(s.precision, s.recall);
  return s;
}

// Greedy matching on one sentence: take the best-F1 remaining pair (ties to
// the lower prediction index, then the lower gold index) until none is left.
inline std::vector<ScoredPair> wire57_greedy(const std::vector<Extraction>& gold,
                                             const std::vector<Extraction>& predicted) {
  std::vector<ScoredPair> candidates;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    for (std::size_t j = 0; j < gold.size(); ++j)
      if (auto s = wire57_pair(predicted[i], gold[j])) {
        s->pred = i;
        s->gold = j;
        candidates.push_back(*s);
      }
  std::vector<char> pred_used(predicted.size(), 0), gold_used(gold.size(), 0);
  std::vector<ScoredPair> matches;
  while (true) {
    const ScoredPair* best = nullptr;
    for (const auto& c : candidates) {
      if (pred_used[c.pred] || gold_used[c.gold]) continue;
      if (!best || c.f1 > best->f1) best = &c;
    }
    if (!best) break;
    pred_used[best->pred] = gold_used[best->gold] = 1;
    matches.push_back(*best);
  }
  return matches;
}

inline BenchmarkReport wire57_score(const AlignedCorpus& corpus) {
  BenchmarkReport report;
  report.scheme = "wire57";
  report.unaligned_sentences = corpus.unaligned;
  for (const auto& s : corpus.sentences) {
    SentenceScore sc;
    sc.sentence = s.sentence;
    sc.gold = s.gold.size();
    sc.predicted = s.predicted.size();
    for (const auto& p : s.predicted) sc.precision_den += static_cast<double>(token_count(tuple_parts(p)));
    for (const auto& g : s.gold) sc.recall_den += static_cast<double>(token_count(tuple_parts(g)));
    for (const auto& m : wire57_greedy(s.gold, s.predicted)) {
      sc.precision_num += static_cast<double>(m.overlap);
      sc.recall_num += static_cast<double>(m.overlap);
      ++sc.matched;
    }
    report.sentences.push_back(std::move(sc));
  }
  finalize(report);
  return report;
}

inline BenchmarkReport wire57_score(const std::vector<data::GenerativeRecord>& gold,
                                    const std::vector<data::GenerativeRecord>& predicted) {
  return wire57_score(align_corpus(gold, predicted));
}

}  // namespace setoie::eval
