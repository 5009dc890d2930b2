#pragma once

// CaRB-style scoring. Pair similarity counts per-part bag-of-words overlap
// after stopword removal: precision over prediction tokens, recall over gold
// tokens. Pairs whose relations share no word score zero.
//
//  carb:   recall  = mean over gold of the best recall in its row;
//          precision = mean over predictions of a greedy 1-1 match by precision.
//  carb11: one optimal 1-1 matching (maximum total F1) for both.

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "setoie/core.hpp"
#include "setoie/eval/report.hpp"
#include "setoie/eval/stopwords.hpp"
#include "setoie/matching.hpp"

namespace setoie::eval {

struct PairSimilarity {
  double precision = 0.0;
  double recall = 0.0;
  bool gated = true;  // false when the relation gate fails

  double f1() const { return harmonic_mean(precision, recall); }
};

namespace detail {

inline std::vector<std::string> drop_stopwords(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  for (const auto& t : tokens)
    if (!is_stopword(t)) out.push_back(t);
  return out;
}

}  // namespace detail

inline PairSimilarity carb_similarity(const Extraction& pred, const Extraction& gold) {
  const std::array<const std::string*, 3> pt = {&pred.arg1, &pred.rel, &pred.arg2};
  const std::array<const std::string*, 3> gt = {&gold.arg1, &gold.rel, &gold.arg2};
  std::array<std::vector<std::string>, 3> praw, graw, pf, gf;
  std::size_t plen = 0, glen = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    praw[k] = part_tokens(*pt[k]);
    graw[k] = part_tokens(*gt[k]);
    pf[k] = detail::drop_stopwords(praw[k]);
    gf[k] = detail::drop_stopwords(graw[k]);
    plen += pf[k].size();
    glen += gf[k].size();
  }
  PairSimilarity s;
  if (bag_overlap(praw[1], graw[1]) == 0) {
    s.gated = false;
    return s;
  }
  // Tuples made only of stopwords are compared on their raw tokens.
  if (plen == 0 || glen == 0) {
    pf = praw;
    gf = graw;
    plen = token_count(pf);
    glen = token_count(gf);
  }
  std::size_t overlap = 0;
  for (std::size_t k = 0; k < 3; ++k) overlap += bag_overlap(pf[k], gf[k]);
  s.precision = plen ? static_cast<double>(overlap) / static_cast<double>(plen) : 0.0;
  s.recall = glen ? static_cast<double>(overlap) / static_cast<double>(glen) : 0.0;
  return s;
}

// table[g][p]
inline std::vector<std::vector<PairSimilarity>> carb_table(const std::vector<Extraction>& gold,
                                                          const std::vector<Extraction>& predicted) {
  std::vector<std::vector<PairSimilarity>> table(gold.size(), std::vector<PairSimilarity>(predicted.size()));
  for (std::size_t g = 0; g < gold.size(); ++g)
    for (std::size_t p = 0; p < predicted.size(); ++p) table[g][p] = carb_similarity(predicted[p], gold[g]);
  return table;
}

inline SentenceScore carb_sentence(const AlignedSentence& s) {
  SentenceScore sc;
  sc.sentence = s.sentence;
  sc.gold = s.gold.size();
  sc.predicted = s.predicted.size();
  sc.precision_den = static_cast<double>(s.predicted.size());
  sc.recall_den = static_cast<double>(s.gold.size());
  const auto table = carb_table(s.gold, s.predicted);

  for (const auto& row : table) {
    double best = 0.0;
    for (const auto& cell : row) best = std::max(best, cell.recall);
    sc.recall_num += best;
  }

  std::vector<char> gold_used(s.gold.size(), 0), pred_used(s.predicted.size(), 0);
  const std::size_t rounds = std::min(s.gold.size(), s.predicted.size());
  for (std::size_t r = 0; r < rounds; ++r) {
    std::size_t bg = 0, bp = 0;
    double best = -1.0, best_recall = -1.0;
    for (std::size_t g = 0; g < s.gold.size(); ++g) {
      if (gold_used[g]) continue;
      for (std::size_t p = 0; p < s.predicted.size(); ++p) {
        if (pred_used[p]) continue;
        const auto& cell = table[g][p];
        // Equal precision: the pair with more recall wins.
        if (cell.precision > best || (cell.precision == best && cell.recall > best_recall)) {
          best = cell.precision;
          best_recall = cell.recall;
          bg = g;
          bp = p;
        }
      }
    }
    gold_used[bg] = pred_used[bp] = 1;
    sc.precision_num += best;
    if (best > 0.0) ++sc.matched;
  }
  return sc;
}

inline BenchmarkReport carb_score(const AlignedCorpus& corpus) {
  BenchmarkReport report;
  report.scheme = "carb";
  report.unaligned_sentences = corpus.unaligned;
  for (const auto& s : corpus.sentences) report.sentences.push_back(carb_sentence(s));
  finalize(report);
  return report;
}

inline SentenceScore carb11_sentence(const AlignedSentence& s) {
  SentenceScore sc;
  sc.sentence = s.sentence;
  sc.gold = s.gold.size();
  sc.predicted = s.predicted.size();
  sc.precision_den = static_cast<double>(s.predicted.size());
  sc.recall_den = static_cast<double>(s.gold.size());
  if (s.gold.empty() || s.predicted.empty()) return sc;

  const auto table = carb_table(s.gold, s.predicted);
  // Rows are predictions padded with empty ones so that rows >= gold columns.
  const std::size_t rows = std::max(s.predicted.size(), s.gold.size());
  SimilarityMatrix sim(rows, s.gold.size());
  for (std::size_t p = 0; p < s.predicted.size(); ++p)
    for (std::size_t g = 0; g < s.gold.size(); ++g) sim.at(p, g) = table[g][p].f1();
  const auto assignment = hungarian_max(sim);
  for (auto [p, g] : assignment.pairs) {
    if (p >= s.predicted.size()) continue;
    const auto& cell = table[g][p];
    sc.precision_num += cell.precision;
    sc.recall_num += cell.recall;
    if (cell.f1() > 0.0) ++sc.matched;
  }
  return sc;
}

inline BenchmarkReport carb_1to1_score(const AlignedCorpus& corpus) {
  BenchmarkReport report;
  report.scheme = "carb11";
  report.unaligned_sentences = corpus.unaligned;
  for (const auto& s : corpus.sentences) report.sentences.push_back(carb11_sentence(s));
  finalize(report);
  return report;
}

inline BenchmarkReport carb_score(const std::vector<data::GenerativeRecord>& gold,
                                  const std::vector<data::GenerativeRecord>& predicted) {
  return carb_score(align_corpus(gold, predicted));
}

inline BenchmarkReport carb_1to1_score(const std::vector<data::GenerativeRecord>& gold,
                                       const std::vector<data::GenerativeRecord>& predicted) {
  return carb_1to1_score(align_corpus(gold, predicted));
}

}  // namespace setoie::eval
