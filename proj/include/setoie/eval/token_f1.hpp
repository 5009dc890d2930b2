#pragma once

#include <array>
#include <cstddef>

#include "setoie/core.hpp"
#include "setoie/errors.hpp"
#include "setoie/matching.hpp"

namespace setoie::eval {

// Token-level confusion counts, indexed [gold class][predicted class].
struct TokenConfusion {
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> counts{};

  void add(const TripletMask& predicted, const TripletMask& gold) {
    if (predicted.size() != gold.size()) throw ShapeError("token F1: mask lengths differ");
    for (std::size_t t = 0; t < gold.size(); ++t)
      ++counts[class_index(gold.labels[t])][class_index(predicted.labels[t])];
  }

  // Slots matched to a gold mask are compared with it; the rest with all-Background.
  void add_grid(const LabelGrid& predicted, const LabelGrid& gold, const Assignment& assignment) {
    const auto gold_of = assignment.gold_for_slots(predicted.masks.size());
    for (std::size_t n = 0; n < predicted.masks.size(); ++n) {
      const auto& pm = predicted.masks[n];
      if (gold_of[n] != Assignment::npos) {
        add(pm, gold.masks.at(gold_of[n]));
      } else {
        add(pm, TripletMask{std::vector<TokenClass>(pm.size(), TokenClass::Background)});
      }
    }
  }

  void merge(const TokenConfusion& other) {
    for (std::size_t g = 0; g < kNumClasses; ++g)
      for (std::size_t p = 0; p < kNumClasses; ++p) counts[g][p] += other.counts[g][p];
  }

  // F1 of one class; 0 when it has no true positives.
  double class_f1(TokenClass c) const {
    const std::size_t k = class_index(c);
    std::size_t tp = counts[k][k], fp = 0, fn = 0;
    for (std::size_t o = 0; o < kNumClasses; ++o) {
      if (o == k) continue;
      fp += counts[o][k];
      fn += counts[k][o];
    }
    if (tp == 0) return 0.0;
    return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
  }

  bool class_present(TokenClass c) const {
    const std::size_t k = class_index(c);
    for (std::size_t o = 0; o < kNumClasses; ++o)
      if (counts[k][o] != 0 || counts[o][k] != 0) return true;
    return false;
  }

  // Mean F1 over classes that occur in gold or predictions.
  double macro_f1() const {
    double total = 0.0;
    std::size_t present = 0;
    for (auto c : kAllClasses) {
      if (!class_present(c)) continue;
      total += class_f1(c);
      ++present;
    }
    return present == 0 ? 1.0 : total / static_cast<double>(present);
  }
};

inline double token_macro_f1(const LabelGrid& predicted, const LabelGrid& gold,
                             const Assignment& assignment) {
  TokenConfusion conf;
  conf.add_grid(predicted, gold, assignment);
  return conf.macro_f1();
}

}  // namespace setoie::eval
