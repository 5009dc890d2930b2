#pragma once

// Order-agnostic set loss: smooth IoU between probability slots and gold
// masks, a maximum-weight assignment between them, and class-weighted
// cross-entropy where unmatched slots are pushed towards all-Background.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "setoie/core.hpp"
#include "setoie/errors.hpp"

namespace setoie {

struct SimilarityMatrix {
  std::size_t rows = 0;  // prediction slots (N)
  std::size_t cols = 0;  // gold masks (M)
  std::vector<double> values;

  SimilarityMatrix() = default;
  SimilarityMatrix(std::size_t n, std::size_t m) : rows(n), cols(m), values(n * m, 0.0) {}
  SimilarityMatrix(std::size_t n, std::size_t m, std::vector<double> v)
      : rows(n), cols(m), values(std::move(v)) {
    if (values.size() != n * m) throw ShapeError("similarity matrix data does not match shape");
  }

  double& at(std::size_t n, std::size_t m) { return values[n * cols + m]; }
  double at(std::size_t n, std::size_t m) const { return values[n * cols + m]; }
};

struct Assignment {
  // (slot, gold) pairs ordered by gold index.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  double total = 0.0;

  // Gold index matched to each slot, or npos.
  std::vector<std::size_t> gold_for_slots(std::size_t n_slots) const {
    std::vector<std::size_t> out(n_slots, npos);
    for (auto [n, m] : pairs) out.at(n) = m;
    return out;
  }

  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
};

enum class LossReduction { MeanOverCells, WeightedMean, Sum };

struct LossConfig {
  std::array<double, kNumClasses> class_weights = {1.0, 2.0, 2.0, 2.0};
  bool exclude_background_in_iou = true;
  LossReduction reduction = LossReduction::MeanOverCells;
  bool focal = false;
  double focal_gamma = 2.0;
  double epsilon = 1e-12;
};

namespace detail {

// Smooth IoU over T tokens given accessors p(t, c) and l(t, c).
template <class P, class L>
double smooth_iou_kernel(std::size_t tokens, P&& p, L&& l, bool exclude_background) {
  const std::size_t first = exclude_background ? 1 : 0;
  double inter = 0.0, psum = 0.0, lsum = 0.0;
  for (std::size_t t = 0; t < tokens; ++t) {
    for (std::size_t c = first; c < kNumClasses; ++c) {
      const double pv = p(t, c);
      const double lv = l(t, c);
      inter += pv * lv;
      psum += pv;
      lsum += lv;
    }
  }
  const double uni = psum + lsum - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

inline double onehot(const TripletMask& mask, std::size_t t, std::size_t c) {
  return class_index(mask.labels[t]) == c ? 1.0 : 0.0;
}

}  // namespace detail

// p_slot and l_mask are T x C row-major blocks.
inline double smooth_iou(std::span<const double> p_slot, std::span<const double> l_mask,
                         bool exclude_background) {
  if (p_slot.size() != l_mask.size() || p_slot.size() % kNumClasses != 0)
    throw ShapeError("smooth_iou: shapes differ (" + std::to_string(p_slot.size()) + " vs " +
                     std::to_string(l_mask.size()) + ")");
  const std::size_t tokens = p_slot.size() / kNumClasses;
  return detail::smooth_iou_kernel(
      tokens, [&](std::size_t t, std::size_t c) { return p_slot[t * kNumClasses + c]; },
      [&](std::size_t t, std::size_t c) { return l_mask[t * kNumClasses + c]; },
      exclude_background);
}

inline std::vector<double> onehot_block(const TripletMask& mask) {
  std::vector<double> out(mask.size() * kNumClasses, 0.0);
  for (std::size_t t = 0; t < mask.size(); ++t) out[t * kNumClasses + class_index(mask.labels[t])] = 1.0;
  return out;
}

inline SimilarityMatrix similarity_matrix(const PredictionTensor& p, const LabelGrid& gold,
                                          const LossConfig& cfg) {
  SimilarityMatrix sim(p.slots, gold.masks.size());
  for (std::size_t m = 0; m < gold.masks.size(); ++m) {
    const auto& mask = gold.masks[m];
    if (mask.size() != p.tokens)
      throw ShapeError("gold mask length " + std::to_string(mask.size()) +
                       " != prediction length " + std::to_string(p.tokens));
    for (std::size_t n = 0; n < p.slots; ++n) {
      sim.at(n, m) = detail::smooth_iou_kernel(
          p.tokens, [&](std::size_t t, std::size_t c) { return p.at(t, n, c); },
          [&](std::size_t t, std::size_t c) { return detail::onehot(mask, t, c); },
          cfg.exclude_background_in_iou);
    }
  }
  return sim;
}

// Maximum-weight assignment of every gold column to a distinct slot row.
// Kuhn-Munkres with potentials on the (M x N) cost matrix -sim, followed by a
// pass that moves each gold mask to the lowest slot index reachable without
// lowering the total, so equal-score optima resolve the same way every call.
inline Assignment hungarian_max(const SimilarityMatrix& sim) {
  const std::size_t n_slots = sim.rows;
  const std::size_t n_gold = sim.cols;
  if (n_gold > n_slots)
    throw TooManyGold(std::to_string(n_gold) + " gold masks for " + std::to_string(n_slots) +
                      " slots");
  Assignment result;
  if (n_gold == 0) return result;

  constexpr double inf = std::numeric_limits<double>::infinity();
  auto cost = [&](std::size_t gold, std::size_t slot) { return -sim.at(slot, gold); };

  // 1-based potentials; row 0 / column 0 are the virtual start.
  std::vector<double> u(n_gold + 1, 0.0), v(n_slots + 1, 0.0);
  std::vector<std::size_t> owner(n_slots + 1, 0), way(n_slots + 1, 0);
  std::vector<double> minv(n_slots + 1);
  std::vector<char> used(n_slots + 1);

  for (std::size_t i = 1; i <= n_gold; ++i) {
    owner[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = owner[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n_slots; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n_slots; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<std::size_t> slot_of(n_gold);
  std::vector<std::size_t> gold_of(n_slots, Assignment::npos);
  for (std::size_t j = 1; j <= n_slots; ++j) {
    if (owner[j] != 0) {
      slot_of[owner[j] - 1] = j - 1;
      gold_of[j - 1] = owner[j] - 1;
    }
  }

  constexpr double tie_tol = 1e-12;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t m = 0; m < n_gold; ++m) {
      const std::size_t cur = slot_of[m];
      for (std::size_t n = 0; n < cur; ++n) {
        const std::size_t other = gold_of[n];
        if (other == Assignment::npos) {
          if (sim.at(n, m) >= sim.at(cur, m) - tie_tol) {
            gold_of[cur] = Assignment::npos;
            gold_of[n] = m;
            slot_of[m] = n;
            changed = true;
            break;
          }
        } else if (other > m) {
          const double before = sim.at(cur, m) + sim.at(n, other);
          const double after = sim.at(n, m) + sim.at(cur, other);
          if (after >= before - tie_tol) {
            std::swap(gold_of[cur], gold_of[n]);
            slot_of[m] = n;
            slot_of[other] = cur;
            changed = true;
            break;
          }
        }
      }
    }
  }

  for (std::size_t m = 0; m < n_gold; ++m) {
    result.pairs.emplace_back(slot_of[m], m);
    result.total += sim.at(slot_of[m], m);
  }
  return result;
}

// Per-(t, n) target classes: matched slots copy their gold mask, all other
// slots are Background.
inline std::vector<TokenClass> slot_targets(std::size_t tokens, std::size_t slots,
                                            const LabelGrid& gold, const Assignment& assignment) {
  std::vector<TokenClass> target(tokens * slots, TokenClass::Background);
  for (auto [n, m] : assignment.pairs) {
    const auto& mask = gold.masks.at(m);
    for (std::size_t t = 0; t < tokens; ++t) target[t * slots + n] = mask.labels[t];
  }
  return target;
}

inline Assignment loss_assignment(const PredictionTensor& p, const LabelGrid& gold,
                                  const LossConfig& cfg) {
  if (gold.masks.empty()) return {};
  if (gold.masks.size() > p.slots)
    throw TooManyGold(std::to_string(gold.masks.size()) + " gold masks for " +
                      std::to_string(p.slots) + " slots");
  return hungarian_max(similarity_matrix(p, gold, cfg));
}

namespace detail {

inline double cell_loss(double prob, const LossConfig& cfg) {
  const double q = std::max(prob, cfg.epsilon);
  if (!cfg.focal) return -std::log(q);
  return -std::pow(1.0 - q, cfg.focal_gamma) * std::log(q);
}

inline double cell_loss_derivative(double prob, const LossConfig& cfg) {
  if (prob < cfg.epsilon) return 0.0;
  if (!cfg.focal) return -1.0 / prob;
  const double g = cfg.focal_gamma;
  const double one_minus = 1.0 - prob;
  const double dpow = one_minus > 0.0 ? g * std::pow(one_minus, g - 1.0) : 0.0;
  return dpow * std::log(prob) - std::pow(one_minus, g) / prob;
}

inline double reduction_denominator(const std::vector<TokenClass>& targets, const LossConfig& cfg) {
  switch (cfg.reduction) {
    case LossReduction::Sum: return 1.0;
    case LossReduction::WeightedMean: {
      double s = 0.0;
      for (auto c : targets) s += cfg.class_weights[class_index(c)];
      return s > 0.0 ? s : 1.0;
    }
    case LossReduction::MeanOverCells:
    default: return targets.empty() ? 1.0 : static_cast<double>(targets.size());
  }
}

inline void check_loss_inputs(const PredictionTensor& p, const LabelGrid& gold) {
  if (p.probs.size() != p.tokens * p.slots * kNumClasses)
    throw ShapeError("prediction tensor data does not match its shape");
  for (const auto& mask : gold.masks)
    if (mask.size() != p.tokens) throw ShapeError("gold mask length differs from T");
}

}  // namespace detail

struct LossResult {
  double loss = 0.0;
  Assignment assignment;
};

inline double loss_with_assignment(const PredictionTensor& p, const LabelGrid& gold,
                                   const Assignment& assignment, const LossConfig& cfg) {
  const auto targets = slot_targets(p.tokens, p.slots, gold, assignment);
  double total = 0.0;
  for (std::size_t t = 0; t < p.tokens; ++t) {
    for (std::size_t n = 0; n < p.slots; ++n) {
      const auto c = class_index(targets[t * p.slots + n]);
      total += cfg.class_weights[c] * detail::cell_loss(p.at(t, n, c), cfg);
    }
  }
  return total / detail::reduction_denominator(targets, cfg);
}

inline LossResult order_agnostic_loss(const PredictionTensor& p, const LabelGrid& gold,
                                      const LossConfig& cfg = {}) {
  detail::check_loss_inputs(p, gold);
  LossResult out;
  out.assignment = loss_assignment(p, gold, cfg);
  out.loss = loss_with_assignment(p, gold, out.assignment, cfg);
  return out;
}

// d loss / d p with the assignment held fixed; same (T, N, C) layout as p.
inline std::vector<double> gradient_with_assignment(const PredictionTensor& p,
                                                    const LabelGrid& gold,
                                                    const Assignment& assignment,
                                                    const LossConfig& cfg) {
  const auto targets = slot_targets(p.tokens, p.slots, gold, assignment);
  const double denom = detail::reduction_denominator(targets, cfg);
  std::vector<double> grad(p.probs.size(), 0.0);
  for (std::size_t t = 0; t < p.tokens; ++t) {
    for (std::size_t n = 0; n < p.slots; ++n) {
      const auto c = class_index(targets[t * p.slots + n]);
      grad[(t * p.slots + n) * kNumClasses + c] =
          cfg.class_weights[c] * detail::cell_loss_derivative(p.at(t, n, c), cfg) / denom;
    }
  }
  return grad;
}

inline std::vector<double> loss_gradient(const PredictionTensor& p, const LabelGrid& gold,
                                         const LossConfig& cfg = {}) {
  detail::check_loss_inputs(p, gold);
  return gradient_with_assignment(p, gold, loss_assignment(p, gold, cfg), cfg);
}

}  // namespace setoie
