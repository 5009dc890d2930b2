#pragma once

// OIE2016-style scoring: a prediction matches a gold tuple when the heads of
// arg1, rel and arg2 agree. The default head is the last non-stopword token,
// a parser-free stand-in for syntactic heads; plug in a parser-backed
// extractor through HeadExtractor for the canonical behaviour.

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "setoie/core.hpp"
#include "setoie/eval/report.hpp"
#include "setoie/eval/stopwords.hpp"

namespace setoie::eval {

using HeadExtractor = std::function<std::string(const std::vector<std::string>& lowered_tokens)>;

inline std::string last_content_word(const std::vector<std::string>& tokens) {
  for (auto it = tokens.rbegin(); it != tokens.rend(); ++it)
    if (!is_stopword(*it)) return *it;
  return tokens.empty() ? std::string{} : tokens.back();
}

inline bool heads_agree(const Extraction& pred, const Extraction& gold, const HeadExtractor& head) {
  return head(part_tokens(pred.arg1)) == head(part_tokens(gold.arg1)) &&
         head(part_tokens(pred.rel)) == head(part_tokens(gold.rel)) &&
         head(part_tokens(pred.arg2)) == head(part_tokens(gold.arg2));
}

// Each gold tuple takes the first unused prediction whose heads agree.
inline BenchmarkReport oie2016_score(const AlignedCorpus& corpus, const HeadExtractor& head = last_content_word) {
  BenchmarkReport report;
  report.scheme = "oie2016";
  report.unaligned_sentences = corpus.unaligned;
  for (const auto& s : corpus.sentences) {
    SentenceScore sc;
    sc.sentence = s.sentence;
    sc.gold = s.gold.size();
    sc.predicted = s.predicted.size();
    sc.precision_den = static_cast<double>(s.predicted.size());
    sc.recall_den = static_cast<double>(s.gold.size());
    std::vector<char> used(s.predicted.size(), 0);
    for (const auto& g : s.gold) {
      for (std::size_t p = 0; p < s.predicted.size(); ++p) {
        if (used[p] || !heads_agree(s.predicted[p], g, head)) continue;
        used[p] = 1;
        ++sc.matched;
        break;
      }
    }
    sc.precision_num = sc.recall_num = static_cast<double>(sc.matched);
    report.sentences.push_back(std::move(sc));
  }
  finalize(report);
  return report;
}

inline BenchmarkReport oie2016_score(const std::vector<data::GenerativeRecord>& gold,
                                     const std::vector<data::GenerativeRecord>& predicted,
                                     const HeadExtractor& head = last_content_word) {
  return oie2016_score(align_corpus(gold, predicted), head);
}

}  // namespace setoie::eval
