#pragma once

// Independent reference computations used by the unit tests and the
// acceptance binary. Deliberately naive: enumeration and direct formulas.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <random>
#include <string>
#include <vector>

#include "setoie/core.hpp"
#include "setoie/matching.hpp"

namespace oracle {

using setoie::kNumClasses;

// Max over all injections of M columns into N rows.
inline double brute_force_assignment(const setoie::SimilarityMatrix& sim) {
  const std::size_t n = sim.rows, m = sim.cols;
  if (m == 0) return 0.0;
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  double best = -1e300;
  // Every permutation of rows; the first m entries pick the rows of columns 0..m-1.
  do {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += sim.at(rows[j], j);
    best = std::max(best, s);
  } while (std::next_permutation(rows.begin(), rows.end()));
  return best;
}

inline setoie::SimilarityMatrix random_matrix(std::mt19937_64& rng, std::size_t n, std::size_t m) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  setoie::SimilarityMatrix sim(n, m);
  for (auto& v : sim.values) v = u(rng);
  return sim;
}

// Random valid (T, N, C) tensor with entries bounded away from zero.
inline setoie::PredictionTensor random_prediction(std::mt19937_64& rng, std::size_t t, std::size_t n) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  setoie::PredictionTensor p(t, n);
  for (std::size_t row = 0; row < t * n; ++row) {
    double s = 0.0;
    for (std::size_t c = 0; c < kNumClasses; ++c) s += (p.probs[row * kNumClasses + c] = u(rng));
    for (std::size_t c = 0; c < kNumClasses; ++c) p.probs[row * kNumClasses + c] /= s;
  }
  return p;
}

// Random distinct non-background masks.
inline setoie::LabelGrid random_gold(std::mt19937_64& rng, std::size_t t, std::size_t m, std::size_t slots) {
  setoie::LabelGrid g;
  g.n_slots = slots;
  while (g.masks.size() < m) {
    setoie::TripletMask mask;
    for (std::size_t k = 0; k < t; ++k) mask.labels.push_back(setoie::kAllClasses[rng() % kNumClasses]);
    if (mask.is_background()) continue;
    if (std::find(g.masks.begin(), g.masks.end(), mask) != g.masks.end()) continue;
    g.masks.push_back(mask);
  }
  return g;
}

// Smooth IoU written out from its definition.
inline double iou(const setoie::PredictionTensor& p, std::size_t slot, const setoie::TripletMask& mask,
                  bool exclude_background) {
  double i = 0, sp = 0, sl = 0;
  for (std::size_t t = 0; t < p.tokens; ++t)
    for (std::size_t c = exclude_background ? 1 : 0; c < kNumClasses; ++c) {
      const double l = setoie::class_index(mask.labels[t]) == c ? 1.0 : 0.0;
      i += p.at(t, slot, c) * l;
      sp += p.at(t, slot, c);
      sl += l;
    }
  const double u = sp + sl - i;
  return u > 0 ? i / u : 0.0;
}

// Loss by enumerating every injection of gold masks into slots: the matching
// with the largest summed IoU defines the targets; mean weighted CE over cells.
inline double brute_force_loss(const setoie::PredictionTensor& p, const setoie::LabelGrid& gold,
                               const std::array<double, 4>& weights = {1, 2, 2, 2}) {
  const std::size_t n = p.slots, m = gold.masks.size();
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  double best_sim = -1.0;
  std::vector<std::size_t> best_rows;
  do {
    double s = 0;
    for (std::size_t j = 0; j < m; ++j) s += iou(p, rows[j], gold.masks[j], true);
    if (s > best_sim + 1e-12) {
      best_sim = s;
      best_rows.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(m));
    }
  } while (std::next_permutation(rows.begin(), rows.end()));
  double total = 0;
  for (std::size_t t = 0; t < p.tokens; ++t)
    for (std::size_t s = 0; s < n; ++s) {
      std::size_t c = 0;
      for (std::size_t j = 0; j < m; ++j)
        if (best_rows[j] == s) c = setoie::class_index(gold.masks[j].labels[t]);
      total += -weights[c] * std::log(std::max(p.at(t, s, c), 1e-12));
    }
  return total / static_cast<double>(p.tokens * n);
}

// |a - b| / max(|a|, |b|), with a floor so that two near-zero values compare as equal.
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({floor, std::abs(a), std::abs(b)});
}

// ---- WiRe57

inline std::multiset<std::string> lowered_words(const std::string& text) {
  std::multiset<std::string> out;
  std::istringstream in(text);
  for (std::string w; in >> w;) {
    for (auto& ch : w) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    out.insert(w);
  }
  return out;
}

inline std::size_t multiset_overlap(const std::multiset<std::string>& a, const std::multiset<std::string>& b) {
  std::size_t n = 0;
  for (auto it = a.begin(); it != a.end(); it = a.upper_bound(*it)) n += std::min(a.count(*it), b.count(*it));
  return n;
}

struct PairScore {
  std::size_t overlap = 0, t_len = 0, g_len = 0;
  double precision = 0, recall = 0, f1 = 0;
};

// Inputs are whitespace-separated words (no punctuation splitting needed).
inline std::optional<PairScore> wire57_pair(const setoie::Extraction& t, const setoie::Extraction& g) {
  const std::array<const std::string*, 3> tp = {&t.arg1, &t.rel, &t.arg2}, gp = {&g.arg1, &g.rel, &g.arg2};
  PairScore s;
  for (std::size_t k = 0; k < 3; ++k) {
    const auto a = lowered_words(*tp[k]), b = lowered_words(*gp[k]);
    const auto ov = multiset_overlap(a, b);
    if (ov == 0) return std::nullopt;
    s.overlap += ov;
    s.t_len += a.size();
    s.g_len += b.size();
  }
  s.precision = double(s.overlap) / double(s.t_len);
  s.recall = double(s.overlap) / double(s.g_len);
  s.f1 = 2 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

struct WireCase {
  setoie::Extraction t, g;
  bool matches;
  double precision, recall, f1;
};

// Worked by hand from the prec/rec formulas.
inline std::vector<WireCase> wire57_worked_cases() {
  return {
      {{"Einstein", "was born in", "Ulm", {}}, {"Einstein", "was born in", "Ulm", {}}, true, 1.0, 1.0, 1.0},
      {{"A spectrum", "has", "a ratio", {}}, {"A spectrum from FID", "has", "a low ratio", {}}, true, 1.0, 0.625,
       2 * 0.625 / 1.625},
      {{"Einstein", "was born in", "Ulm", {}}, {"Albert Einstein", "was born in", "Ulm", {}}, true, 1.0, 5.0 / 6.0,
       10.0 / 11.0},
      {{"Albert Einstein", "worked", "in Bern", {}}, {"Albert Einstein", "worked in", "Bern", {}}, true, 0.8, 0.8, 0.8},
      {{"the Danube", "flows", "through Vienna", {}}, {"The Danube", "flows through", "Vienna", {}}, true, 0.8, 0.8,
       0.8},
      {{"Einstein", "lived in", "Zurich", {}}, {"Albert Einstein", "worked in", "Bern", {}}, false, 0, 0, 0},
      {{"Ulm", "is", "city", {}}, {"Ulm", "was", "city", {}}, false, 0, 0, 0},
  };
}

struct GreedyOutcome {
  std::size_t matched = 0;
  std::size_t overlap = 0;
};

// Exhaustive simulation of greedy matching. Pairs are ranked by (F1 desc, pred
// asc, gold asc); greedy picks the best-ranked free pair each round, so its
// result is the maximal matching whose sorted rank sequence is lexicographically
// smallest. Every matching is enumerated and compared on that key.
inline GreedyOutcome wire57_greedy_exhaustive(const std::vector<setoie::Extraction>& gold,
                                              const std::vector<setoie::Extraction>& pred) {
  struct Pair {
    std::size_t p, g;
    PairScore s;
  };
  std::vector<Pair> pairs;
  for (std::size_t p = 0; p < pred.size(); ++p)
    for (std::size_t g = 0; g < gold.size(); ++g)
      if (auto s = wire57_pair(pred[p], gold[g])) pairs.push_back({p, g, *s});
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (pairs[a].s.f1 != pairs[b].s.f1) return pairs[a].s.f1 > pairs[b].s.f1;
    if (pairs[a].p != pairs[b].p) return pairs[a].p < pairs[b].p;
    return pairs[a].g < pairs[b].g;
  });
  std::vector<std::size_t> rank(pairs.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r;

  std::vector<std::size_t> best_ranks;
  std::uint32_t best_mask = 0;
  bool have = false;
  for (std::uint32_t mask = 0; mask < (1u << pairs.size()); ++mask) {
    std::vector<char> pu(pred.size()), gu(gold.size());
    bool ok = true;
    std::vector<std::size_t> ranks;
    for (std::size_t i = 0; i < pairs.size() && ok; ++i) {
      if (!(mask >> i & 1u)) continue;
      if (pu[pairs[i].p] || gu[pairs[i].g]) ok = false;
      pu[pairs[i].p] = gu[pairs[i].g] = 1;
      ranks.push_back(rank[i]);
    }
    if (!ok) continue;
    bool maximal = true;
    for (const auto& pr : pairs) maximal = maximal && (pu[pr.p] || gu[pr.g]);
    if (!maximal) continue;
    std::sort(ranks.begin(), ranks.end());
    if (!have || ranks < best_ranks) {
      best_ranks = ranks;
      best_mask = mask;
      have = true;
    }
  }
  GreedyOutcome out;
  for (std::size_t i = 0; i < pairs.size(); ++i)
    if (best_mask >> i & 1u) {
      ++out.matched;
      out.overlap += pairs[i].s.overlap;
    }
  return out;
}

inline setoie::Extraction random_tuple(std::mt19937_64& rng) {
  static const std::vector<std::string> words = {"a", "b", "c", "d", "e"};
  auto part = [&] {
    std::string s;
    const std::size_t n = 1 + rng() % 3;
    for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + words[rng() % words.size()];
    return s;
  };
  setoie::Extraction e;
  e.arg1 = part();
  e.rel = part();
  e.arg2 = part();
  return e;
}

}  // namespace oracle
