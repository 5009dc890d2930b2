#pragma once

// JSON-lines corpora: the IMoJIE-style input (sentence + string tuples) and the
// mask-level training file written by `setoie convert`.

#include <cstddef>
#include <fstream>
#include <istream>
#include <ostream>
#include <regex>
#include <string>
#include <vector>

#include "json.hpp"
#include "setoie/core.hpp"
#include "setoie/data/tuples_tsv.hpp"
#include "setoie/errors.hpp"

namespace setoie::data {

using json = nlohmann::json;

// Parses "<arg1> a </arg1> <rel> r </rel> <arg2> b </arg2> [<arg3> c </arg3> ...]".
// Arguments after arg2 are appended to arg2.
inline Extraction parse_tagged_tuple(const std::string& text) {
  static const std::regex field(R"(<(arg\d+|rel)>\s*(.*?)\s*</\1>)");
  Extraction ex;
  bool has_rel = false, has_arg1 = false;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), field); it != std::sregex_iterator(); ++it) {
    const std::string name = (*it)[1];
    const std::string value = (*it)[2];
    if (name == "rel") {
      ex.rel = value;
      has_rel = true;
    } else if (name == "arg1") {
      ex.arg1 = value;
      has_arg1 = true;
    } else if (!value.empty()) {
      if (!ex.arg2.empty()) ex.arg2 += ' ';
      ex.arg2 += value;
    }
  }
  if (!has_rel || !has_arg1) throw FormatError("tuple string lacks <arg1> or <rel>: '" + text + "'");
  return ex;
}

inline Extraction tuple_from_json(const json& j) {
  if (j.is_string()) return parse_tagged_tuple(j.get<std::string>());
  if (j.is_array()) {
    if (j.size() < 3) throw FormatError("tuple array needs at least 3 parts");
    Extraction ex{j[0].get<std::string>(), j[1].get<std::string>(), j[2].get<std::string>(), {}};
    for (std::size_t k = 3; k < j.size(); ++k) {
      const auto extra = j[k].get<std::string>();
      if (extra.empty()) continue;
      if (!ex.arg2.empty()) ex.arg2 += ' ';
      ex.arg2 += extra;
    }
    return ex;
  }
  if (j.is_object()) {
    Extraction ex{j.at("arg1").get<std::string>(), j.at("rel").get<std::string>(),
                  j.value("arg2", std::string{}), {}};
    if (j.contains("confidence")) ex.confidence = j.at("confidence").get<double>();
    return ex;
  }
  throw FormatError("unsupported tuple encoding");
}

inline std::vector<GenerativeRecord> read_imojie_jsonl(std::istream& in) {
  std::vector<GenerativeRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      GenerativeRecord rec;
      rec.sentence = j.at("sentence").get<std::string>();
      for (const auto& t : j.at("tuples")) rec.tuples.push_back(tuple_from_json(t));
      out.push_back(std::move(rec));
    } catch (const json::exception& e) {
      throw FormatError(e.what(), lineno);
    } catch (const FormatError& e) {
      throw FormatError(e.what(), lineno);
    }
  }
  return out;
}

inline std::vector<GenerativeRecord> read_imojie_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_imojie_jsonl(in);
}

// One training sentence: tokens (placeholders included) and its gold masks.
struct MaskedRecord {
  std::string sentence;
  TokenSequence seq;
  LabelGrid grid;

  friend bool operator==(const MaskedRecord&, const MaskedRecord&) = default;
};

inline std::string mask_codes(const TripletMask& mask) {
  std::string s;
  s.reserve(mask.size());
  for (auto c : mask.labels) s += class_code(c);
  return s;
}

inline TripletMask mask_from_codes(const std::string& codes) {
  TripletMask mask;
  for (char ch : codes) mask.labels.push_back(class_from_code(std::string_view(&ch, 1)));
  return mask;
}

inline json to_json(const MaskedRecord& rec) {
  json masks = json::array();
  for (const auto& m : rec.grid.masks) masks.push_back(mask_codes(m));
  return json{{"sentence", rec.sentence}, {"tokens", rec.seq.tokens}, {"masks", masks}};
}

inline MaskedRecord masked_record_from_json(const json& j, std::size_t n_slots) {
  MaskedRecord rec;
  rec.sentence = j.at("sentence").get<std::string>();
  const auto tokens = j.at("tokens").get<std::vector<std::string>>();
  std::size_t body = tokens.size();
  while (body > 0 && is_placeholder(tokens[body - 1])) --body;
  const bool placeholders = tokens.size() - body == kPlaceholders.size();
  std::vector<std::string> words(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(placeholders ? body : tokens.size()));
  // Keep real character offsets when the sentence re-tokenizes to the same tokens.
  try {
    auto seq = tokenize(rec.sentence, placeholders);
    if (seq.tokens == tokens) rec.seq = std::move(seq);
  } catch (const EmptyInput&) {
  }
  if (rec.seq.tokens != tokens) rec.seq = sequence_from_tokens(words, placeholders);
  rec.grid.n_slots = n_slots;
  for (const auto& m : j.at("masks")) {
    auto mask = mask_from_codes(m.get<std::string>());
    if (mask.size() != rec.seq.size()) throw BadAnnotation("mask length differs from token count");
    rec.grid.masks.push_back(std::move(mask));
  }
  return rec;
}

inline void write_masked_jsonl(std::ostream& out, const std::vector<MaskedRecord>& records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

inline std::vector<MaskedRecord> read_masked_jsonl(std::istream& in, std::size_t n_slots = 20) {
  std::vector<MaskedRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(masked_record_from_json(json::parse(line), n_slots));
    } catch (const json::exception& e) {
      throw FormatError(e.what(), lineno);
    } catch (const DataError& e) {
      throw FormatError(e.what(), lineno);
    }
  }
  return out;
}

inline std::vector<MaskedRecord> read_masked_jsonl(const std::string& path, std::size_t n_slots = 20) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_masked_jsonl(in, n_slots);
}

}  // namespace setoie::data
