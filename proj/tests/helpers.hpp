#pragma once

#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "setoie/core.hpp"
#include "setoie/data/synth.hpp"
#include "setoie/nn/decode.hpp"
#include "setoie/nn/train.hpp"

#ifndef SETOIE_DATA
#define SETOIE_DATA "data"
#endif
#ifndef SETOIE_FIXTURES
#define SETOIE_FIXTURES "tests/fixtures"
#endif

namespace helpers {

inline std::string data_path(const std::string& name) { return std::string(SETOIE_DATA) + "/" + name; }
inline std::string fixture(const std::string& name) { return std::string(SETOIE_FIXTURES) + "/" + name; }

struct SynthSet {
  std::vector<setoie::data::SynthSentence> sentences;
  std::vector<setoie::nn::Example> examples;
};

inline SynthSet synth_examples(std::size_t n, std::uint64_t seed, std::size_t slots = 20,
                               const setoie::data::SynthConfig& cfg = {}) {
  SynthSet out;
  out.sentences = setoie::data::synth_generate(setoie::data::read_triplet_pool(data_path("pool_en.tsv")), n, seed, cfg);
  for (const auto& s : out.sentences) {
    auto seq = setoie::tokenize(s.sentence, true);
    auto grid = setoie::grid_from_tuples(seq, s.spans, slots);
    out.examples.push_back({std::move(seq), std::move(grid)});
  }
  return out;
}

inline std::vector<setoie::TokenSequence> sequences(const std::vector<setoie::nn::Example>& examples) {
  std::vector<setoie::TokenSequence> seqs;
  for (const auto& e : examples) seqs.push_back(e.seq);
  return seqs;
}

using TupleKey = std::tuple<std::string, std::string, std::string>;

inline std::set<TupleKey> tuple_set(const std::vector<setoie::Extraction>& xs) {
  std::set<TupleKey> s;
  for (const auto& e : xs) s.insert({e.arg1, e.rel, e.arg2});
  return s;
}

// Sentences whose decoded extraction set equals the gold set.
template <class Model>
std::size_t exact_matches(const Model& model, const SynthSet& set) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < set.examples.size(); ++i) {
    const auto& seq = set.examples[i].seq;
    n += tuple_set(setoie::nn::decode(model.forward(seq), seq, true)) == tuple_set(set.sentences[i].gold);
  }
  return n;
}

}  // namespace helpers
