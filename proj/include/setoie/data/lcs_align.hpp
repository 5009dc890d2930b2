#pragma once

// Projects string tuples onto token masks. Repeatedly takes the longest
// contiguous run of tokens shared by the sentence and one tuple part, labels
// it with the part's class and removes it from both sides. Tuple words "is",
// "from" and "to" that never occur in the sentence fall back to the appended
// [is] / [from] / [to] tokens.

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "setoie/core.hpp"
#include "setoie/data/tuples_tsv.hpp"
#include "setoie/errors.hpp"

namespace setoie::data {

struct SkippedTuple {
  std::size_t tuple_index = 0;
  std::string reason;
  std::vector<std::string> unmatched;
};

struct Alignment {
  TokenSequence seq;
  LabelGrid grid;
  // Index into the record's tuples for every mask in grid.
  std::vector<std::size_t> accepted;
  std::vector<SkippedTuple> skipped;
};

namespace detail {

struct Run {
  std::size_t length = 0;
  std::size_t sent_start = 0;
  std::size_t part = 0;
  std::size_t part_start = 0;
};

// Longest common run between available sentence tokens and available tokens
// of part k; earliest sentence position wins ties.
inline Run longest_run(const std::vector<std::string>& sent, const std::vector<char>& sent_free,
                       const std::vector<std::string>& part, const std::vector<char>& part_free,
                       std::size_t k) {
  Run best;
  best.part = k;
  std::vector<std::size_t> prev(part.size() + 1, 0), cur(part.size() + 1, 0);
  for (std::size_t i = 1; i <= sent.size(); ++i) {
    for (std::size_t j = 1; j <= part.size(); ++j) {
      if (sent_free[i - 1] && part_free[j - 1] && sent[i - 1] == part[j - 1]) {
        cur[j] = prev[j - 1] + 1;
        const std::size_t start = i - cur[j];
        if (cur[j] > best.length || (cur[j] == best.length && start < best.sent_start)) {
          best.length = cur[j];
          best.sent_start = start;
          best.part_start = j - cur[j];
        }
      } else {
        cur[j] = 0;
      }
    }
    std::swap(prev, cur);
  }
  return best;
}

inline std::string placeholder_for(const std::string& word) {
  if (word == "is" || word == "from" || word == "to") return "[" + word + "]";
  return {};
}

}  // namespace detail

// Aligns one tuple against seq; returns the mask or the tokens left unmatched.
inline TripletMask align_tuple(const TokenSequence& seq, const Extraction& tuple,
                               std::vector<std::string>& unmatched) {
  const std::array<TokenClass, 3> classes = {TokenClass::Subject, TokenClass::Relation, TokenClass::Object};
  std::array<std::vector<std::string>, 3> parts;
  const std::array<const std::string*, 3> texts = {&tuple.arg1, &tuple.rel, &tuple.arg2};
  for (std::size_t k = 0; k < 3; ++k) {
    if (texts[k]->find_first_not_of(" \t") == std::string::npos) continue;
    parts[k] = tokenize(*texts[k], false).tokens;
  }

  TripletMask mask{std::vector<TokenClass>(seq.size(), TokenClass::Background)};
  std::vector<char> sent_free(seq.size(), 1);
  std::array<std::vector<char>, 3> part_free;
  for (std::size_t k = 0; k < 3; ++k) part_free[k].assign(parts[k].size(), 1);

  while (true) {
    detail::Run best;
    for (std::size_t k = 0; k < 3; ++k) {
      auto run = detail::longest_run(seq.tokens, sent_free, parts[k], part_free[k], k);
      if (run.length > best.length || (run.length == best.length && run.length > 0 && run.sent_start < best.sent_start))
        best = run;
    }
    if (best.length == 0) break;
    for (std::size_t d = 0; d < best.length; ++d) {
      sent_free[best.sent_start + d] = 0;
      part_free[best.part][best.part_start + d] = 0;
      mask.labels[best.sent_start + d] = classes[best.part];
    }
  }

  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t i = 0; i < parts[k].size(); ++i) {
      if (!part_free[k][i]) continue;
      const std::string ph = detail::placeholder_for(parts[k][i]);
      if (!ph.empty()) {
        for (std::size_t t = seq.body_size(); t < seq.size(); ++t) {
          if (sent_free[t] && seq.tokens[t] == ph) {
            sent_free[t] = 0;
            part_free[k][i] = 0;
            mask.labels[t] = classes[k];
            break;
          }
        }
      }
      if (part_free[k][i]) unmatched.push_back(parts[k][i]);
    }
  }
  return mask;
}

inline Alignment lcs_align(const GenerativeRecord& record, std::size_t n_slots = 20) {
  Alignment out;
  out.seq = tokenize(record.sentence, true);
  out.grid.n_slots = n_slots;
  for (std::size_t i = 0; i < record.tuples.size(); ++i) {
    const auto& tuple = record.tuples[i];
    if (tuple.arg1.empty() || tuple.rel.empty() || tuple.arg2.empty()) {
      out.skipped.push_back({i, "empty tuple part", {}});
      continue;
    }
    std::vector<std::string> unmatched;
    TripletMask mask = align_tuple(out.seq, tuple, unmatched);
    if (!unmatched.empty()) {
      out.skipped.push_back({i, "tokens not found in sentence", std::move(unmatched)});
      continue;
    }
    if (!mask.has_all_parts()) {
      out.skipped.push_back({i, "empty tuple part", {}});
      continue;
    }
    bool duplicate = false;
    for (const auto& m : out.grid.masks) duplicate = duplicate || m == mask;
    if (duplicate) {
      out.skipped.push_back({i, "duplicate of an earlier tuple", {}});
      continue;
    }
    if (out.grid.masks.size() == n_slots) {
      out.skipped.push_back({i, "more tuples than slots", {}});
      continue;
    }
    out.grid.masks.push_back(std::move(mask));
    out.accepted.push_back(i);
  }
  return out;
}

}  // namespace setoie::data
