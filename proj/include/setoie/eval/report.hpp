#pragma once

// Shared scorer plumbing: sentence alignment of gold and system files,
// scorer-side tokenization, micro-averaged reports and their JSON / text form.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "setoie/core.hpp"
#include "setoie/data/tuples_tsv.hpp"

namespace setoie::eval {

using json = nlohmann::json;

struct SentenceScore {
  std::string sentence;
  std::size_t gold = 0;
  std::size_t predicted = 0;
  std::size_t matched = 0;
  double precision_num = 0.0;
  double precision_den = 0.0;
  double recall_num = 0.0;
  double recall_den = 0.0;
};

struct BenchmarkReport {
  std::string scheme;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<double> auc;
  std::size_t gold_count = 0;
  std::size_t prediction_count = 0;
  std::size_t matched_count = 0;
  // Prediction sentences with no gold counterpart; excluded from the scores.
  std::vector<std::string> unaligned_sentences;
  std::vector<SentenceScore> sentences;
};

inline double harmonic_mean(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

// Area under the piecewise-linear curve (0, 1) -> (recall, precision) -> (1, 0).
inline double auc_single_point(double precision, double recall) {
  precision = std::clamp(precision, 0.0, 1.0);
  recall = std::clamp(recall, 0.0, 1.0);
  return 0.5 * (1.0 + precision) * recall + 0.5 * precision * (1.0 - recall);
}

inline constexpr std::string_view kAucConvention =
    "single-point: trapezoids through (0,1), (recall,precision), (1,0); approximate";

// Micro-averages the per-sentence numerators and denominators. An empty
// denominator yields 0, so a system with no predictions has precision 0.
inline void finalize(BenchmarkReport& report) {
  double pn = 0, pd = 0, rn = 0, rd = 0;
  report.gold_count = report.prediction_count = report.matched_count = 0;
  for (const auto& s : report.sentences) {
    pn += s.precision_num;
    pd += s.precision_den;
    rn += s.recall_num;
    rd += s.recall_den;
    report.gold_count += s.gold;
    report.prediction_count += s.predicted;
    report.matched_count += s.matched;
  }
  report.precision = pd > 0 ? pn / pd : 0.0;
  report.recall = rd > 0 ? rn / rd : 0.0;
  report.f1 = harmonic_mean(report.precision, report.recall);
  report.auc = auc_single_point(report.precision, report.recall);
}

struct AlignedSentence {
  std::string sentence;
  std::vector<Extraction> gold;
  std::vector<Extraction> predicted;
};

struct AlignedCorpus {
  std::vector<AlignedSentence> sentences;
  std::vector<std::string> unaligned;
};

// Pairs records by exact sentence string, in gold order.
inline AlignedCorpus align_corpus(const std::vector<data::GenerativeRecord>& gold,
                                  const std::vector<data::GenerativeRecord>& predicted) {
  std::map<std::string, const data::GenerativeRecord*> by_sentence;
  for (const auto& r : predicted) by_sentence.emplace(r.sentence, &r);
  AlignedCorpus out;
  std::map<std::string, bool> in_gold;
  for (const auto& g : gold) {
    in_gold.emplace(g.sentence, true);
    AlignedSentence s{g.sentence, g.tuples, {}};
    if (auto it = by_sentence.find(g.sentence); it != by_sentence.end()) s.predicted = it->second->tuples;
    out.sentences.push_back(std::move(s));
  }
  for (const auto& r : predicted)
    if (!in_gold.count(r.sentence)) out.unaligned.push_back(r.sentence);
  return out;
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

// Lower-cased word tokens of one tuple part; empty text gives no tokens.
inline std::vector<std::string> part_tokens(const std::string& text) {
  if (text.find_first_not_of(" \t") == std::string::npos) return {};
  auto seq = tokenize(text, false);
  std::vector<std::string> out;
  out.reserve(seq.tokens.size());
  for (const auto& t : seq.tokens) out.push_back(to_lower(t));
  return out;
}

inline std::array<std::vector<std::string>, 3> tuple_parts(const Extraction& e) {
  return {part_tokens(e.arg1), part_tokens(e.rel), part_tokens(e.arg2)};
}

inline std::size_t token_count(const std::array<std::vector<std::string>, 3>& parts) {
  return parts[0].size() + parts[1].size() + parts[2].size();
}

// Size of the multiset intersection of a and b.
inline std::size_t bag_overlap(std::vector<std::string> a, std::vector<std::string> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0, n = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++n;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return n;
}

inline json to_json(const BenchmarkReport& r) {
  json sentences = json::array();
  for (const auto& s : r.sentences)
    sentences.push_back({{"sentence", s.sentence},
                         {"gold", s.gold},
                         {"predicted", s.predicted},
                         {"matched", s.matched},
                         {"precision_num", s.precision_num},
                         {"precision_den", s.precision_den},
                         {"recall_num", s.recall_num},
                         {"recall_den", s.recall_den}});
  json j{{"scheme", r.scheme},
         {"precision", r.precision},
         {"recall", r.recall},
         {"f1", r.f1},
         {"auc", r.auc ? json(*r.auc) : json(nullptr)},
         {"auc_convention", kAucConvention},
         {"counts",
          {{"gold", r.gold_count},
           {"predicted", r.prediction_count},
           {"matched", r.matched_count},
           {"unaligned_prediction_sentences", r.unaligned_sentences.size()}}},
         {"unaligned_sentences", r.unaligned_sentences},
         {"sentences", sentences}};
  return j;
}

// One row in the layout of a results table: scheme, P, R, F1, AUC.
inline std::string format_table(const std::vector<BenchmarkReport>& reports) {
  std::ostringstream os;
  os << std::left << std::setw(10) << "scheme" << std::right << std::setw(8) << "P" << std::setw(8) << "R"
     << std::setw(8) << "F1" << std::setw(8) << "AUC*" << '\n';
  os << std::fixed << std::setprecision(1);
  for (const auto& r : reports) {
    os << std::left << std::setw(10) << r.scheme << std::right << std::setw(8) << 100 * r.precision
       << std::setw(8) << 100 * r.recall << std::setw(8) << 100 * r.f1 << std::setw(8)
       << 100 * r.auc.value_or(0.0) << '\n';
  }
  os << "* AUC approximated from a single precision/recall point\n";
  return os.str();
}

}  // namespace setoie::eval
