#pragma once

// LSOIE-style CoNLL: one token per line followed by one tag column per
// annotated tuple, records separated by blank lines. Tags are P-B/P-I for the
// predicate, A<k>-B/A<k>-I for arguments and O outside. A0 becomes the
// subject, every A<k> with k > 0 is merged into the object.

#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "setoie/core.hpp"
#include "setoie/errors.hpp"

namespace setoie::data {

struct ConllRecord {
  std::vector<std::string> tokens;
  // layers[k][t] is the tag of token t in annotation k.
  std::vector<std::vector<std::string>> layers;
  std::size_t first_line = 0;
};

struct LsoieConversion {
  TokenSequence seq;
  std::optional<LabelGrid> grid;
  // One reason per annotation layer that did not yield a triplet.
  std::vector<std::string> rejected_layers;

  bool accepted() const noexcept { return grid.has_value(); }
};

namespace detail {

struct Tag {
  enum class Role { Outside, Predicate, Argument } role = Role::Outside;
  int arg_index = -1;
  bool begin = false;
  std::string label;  // "P" or "A<k>"
};

inline Tag parse_tag(const std::string& text) {
  Tag tag;
  if (text == "O") return tag;
  const auto dash = text.rfind('-');
  if (dash == std::string::npos || dash + 2 != text.size())
    throw BadAnnotation("malformed tag '" + text + "'");
  const char pos = text[dash + 1];
  if (pos != 'B' && pos != 'I') throw BadAnnotation("malformed tag '" + text + "'");
  tag.begin = pos == 'B';
  tag.label = text.substr(0, dash);
  if (tag.label == "P") {
    tag.role = Tag::Role::Predicate;
  } else if (tag.label.size() >= 2 && tag.label[0] == 'A' &&
             tag.label.find_first_not_of("0123456789", 1) == std::string::npos) {
    tag.role = Tag::Role::Argument;
    tag.arg_index = std::stoi(tag.label.substr(1));
  } else {
    throw BadAnnotation("unknown role in tag '" + text + "'");
  }
  return tag;
}

}  // namespace detail

// Converts one record; layers without a predicate, an A0 and a higher
// argument are dropped, and the record is rejected when none survive.
inline LsoieConversion lsoie_convert(const ConllRecord& record, std::size_t n_slots = 20) {
  LsoieConversion out;
  out.seq = sequence_from_tokens(record.tokens, true);
  LabelGrid grid;
  grid.n_slots = n_slots;

  for (std::size_t k = 0; k < record.layers.size(); ++k) {
    const auto& tags = record.layers[k];
    if (tags.size() != record.tokens.size())
      throw BadAnnotation("layer " + std::to_string(k) + " length differs from token count");
    TripletMask mask{std::vector<TokenClass>(out.seq.size(), TokenClass::Background)};
    std::string previous;  // label of the previous tagged token, empty after O
    bool has_pred = false, has_subj = false, has_obj = false;
    for (std::size_t t = 0; t < tags.size(); ++t) {
      const auto tag = detail::parse_tag(tags[t]);
      if (tag.role == detail::Tag::Role::Outside) {
        previous.clear();
        continue;
      }
      if (!tag.begin && previous != tag.label)
        throw BadAnnotation("tag '" + tags[t] + "' at token " + std::to_string(t) +
                            " does not continue a " + tag.label + " span");
      previous = tag.label;
      if (tag.role == detail::Tag::Role::Predicate) {
        mask.labels[t] = TokenClass::Relation;
        has_pred = true;
      } else if (tag.arg_index == 0) {
        mask.labels[t] = TokenClass::Subject;
        has_subj = true;
      } else {
        mask.labels[t] = TokenClass::Object;
        has_obj = true;
      }
    }
    if (!has_pred) {
      out.rejected_layers.push_back("layer " + std::to_string(k) + ": no predicate");
      continue;
    }
    if (!has_subj || !has_obj) {
      out.rejected_layers.push_back("layer " + std::to_string(k) + ": fewer than two arguments (A0 and A1+)");
      continue;
    }
    bool duplicate = false;
    for (const auto& m : grid.masks) duplicate = duplicate || m == mask;
    if (duplicate) {
      out.rejected_layers.push_back("layer " + std::to_string(k) + ": duplicate");
      continue;
    }
    if (grid.masks.size() == n_slots) {
      out.rejected_layers.push_back("layer " + std::to_string(k) + ": more tuples than slots");
      continue;
    }
    grid.masks.push_back(std::move(mask));
  }
  if (!grid.masks.empty()) out.grid = std::move(grid);
  return out;
}

inline std::vector<ConllRecord> read_conll(std::istream& in) {
  std::vector<ConllRecord> records;
  ConllRecord cur;
  std::size_t columns = 0;
  auto flush = [&] {
    if (!cur.tokens.empty()) records.push_back(std::move(cur));
    cur = ConllRecord{};
    columns = 0;
  };
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) {
      flush();
      continue;
    }
    if (line[0] == '#') continue;
    std::istringstream fields(line);
    std::vector<std::string> cols;
    for (std::string f; fields >> f;) cols.push_back(f);
    if (cols.size() < 2) throw FormatError("expected a token and at least one tag column", lineno);
    if (cur.tokens.empty()) {
      columns = cols.size();
      cur.first_line = lineno;
      cur.layers.assign(columns - 1, {});
    } else if (cols.size() != columns) {
      throw FormatError("column count changed within a record", lineno);
    }
    cur.tokens.push_back(cols[0]);
    for (std::size_t k = 1; k < cols.size(); ++k) cur.layers[k - 1].push_back(cols[k]);
  }
  flush();
  return records;
}

inline std::vector<ConllRecord> read_conll(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_conll(in);
}

}  // namespace setoie::data
