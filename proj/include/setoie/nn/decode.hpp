#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "setoie/core.hpp"
#include "setoie/errors.hpp"

namespace setoie::nn {

enum class ConfidenceAggregator { Min, MeanLog };

// p_slot is a T x C block; mask selects the counted tokens and their classes.
inline double confidence(std::span<const double> p_slot, const TripletMask& mask,
                         ConfidenceAggregator agg = ConfidenceAggregator::Min) {
  if (p_slot.size() != mask.size() * kNumClasses) throw ShapeError("confidence: shape mismatch");
  if (mask.is_background()) throw NoTriplet("confidence of an all-background mask");
  double lowest = 1.0;
  double log_sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t t = 0; t < mask.size(); ++t) {
    if (mask.labels[t] == TokenClass::Background) continue;
    const double v = p_slot[t * kNumClasses + class_index(mask.labels[t])];
    lowest = std::min(lowest, v);
    log_sum += std::log(std::max(v, 1e-300));
    ++counted;
  }
  if (agg == ConfidenceAggregator::MeanLog) return std::exp(log_sum / static_cast<double>(counted));
  return lowest;
}

// Per-slot argmax labels; ties go to the lower class index.
inline TripletMask argmax_mask(const PredictionTensor& p, std::size_t slot) {
  TripletMask mask{std::vector<TokenClass>(p.tokens, TokenClass::Background)};
  for (std::size_t t = 0; t < p.tokens; ++t) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < kNumClasses; ++c)
      if (p.at(t, slot, c) > p.at(t, slot, best)) best = c;
    mask.labels[t] = class_from_index(best);
  }
  return mask;
}

inline LabelGrid argmax_grid(const PredictionTensor& p) {
  LabelGrid grid;
  grid.n_slots = p.slots;
  for (std::size_t n = 0; n < p.slots; ++n) grid.masks.push_back(argmax_mask(p, n));
  return grid;
}

struct DecodeOptions {
  bool require_all_parts = true;
  bool deduplicate = true;
  ConfidenceAggregator aggregator = ConfidenceAggregator::Min;
};

struct DecodedSlot {
  std::size_t slot = 0;
  TripletMask mask;
  Extraction extraction;
};

inline std::vector<DecodedSlot> decode_slots(const PredictionTensor& p, const TokenSequence& seq,
                                             const DecodeOptions& opts = {}) {
  if (p.tokens != seq.size()) throw ShapeError("decode: tensor and sequence lengths differ");
  std::vector<DecodedSlot> out;
  for (std::size_t n = 0; n < p.slots; ++n) {
    TripletMask mask = argmax_mask(p, n);
    if (mask.is_background()) continue;
    if (opts.require_all_parts && !mask.has_all_parts()) continue;
    if (opts.deduplicate) {
      bool seen = false;
      for (const auto& d : out) seen = seen || d.mask == mask;
      if (seen) continue;
    }
    DecodedSlot d{n, mask, mask_to_extraction(seq, mask)};
    const auto block = p.slot(n);
    d.extraction.confidence = confidence(block, mask, opts.aggregator);
    out.push_back(std::move(d));
  }
  return out;
}

inline std::vector<Extraction> decode(const PredictionTensor& p, const TokenSequence& seq,
                                      bool require_all_parts) {
  DecodeOptions opts;
  opts.require_all_parts = require_all_parts;
  std::vector<Extraction> out;
  for (auto& d : decode_slots(p, seq, opts)) out.push_back(std::move(d.extraction));
  return out;
}

}  // namespace setoie::nn
