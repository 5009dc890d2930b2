#pragma once

// Tuples TSV: one extraction per line,
//   sentence <TAB> confidence <TAB> arg1 <TAB> rel <TAB> arg2 [<TAB> extra ...]
// Columns beyond arg2 (CaRB time/location attributes, n-ary arguments) are
// folded into arg2. Lines with the same sentence form one record.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "setoie/core.hpp"
#include "setoie/errors.hpp"

namespace setoie::data {

struct GenerativeRecord {
  std::string sentence;
  std::vector<Extraction> tuples;

  friend bool operator==(const GenerativeRecord&, const GenerativeRecord&) = default;
};

inline std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> cols;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    cols.emplace_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return cols;
}

// Shortest round-trip text for a confidence, always with a decimal point.
inline std::string format_confidence(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw FormatError("cannot format confidence");
  std::string s(buf, end);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

inline double parse_confidence(std::string_view text, std::size_t line) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value))
    throw FormatError("bad confidence '" + std::string(text) + "'", line);
  return value;
}

inline std::vector<GenerativeRecord> read_tuples_tsv(std::istream& in) {
  std::vector<GenerativeRecord> records;
  std::map<std::string, std::size_t> index;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cols = split_tabs(line);
    if (cols.size() < 5)
      throw FormatError("expected at least 5 tab-separated columns, got " + std::to_string(cols.size()), lineno);
    if (cols[0].empty()) throw FormatError("empty sentence column", lineno);
    Extraction ex;
    ex.confidence = parse_confidence(cols[1], lineno);
    ex.arg1 = cols[2];
    ex.rel = cols[3];
    ex.arg2 = cols[4];
    for (std::size_t k = 5; k < cols.size(); ++k) {
      if (cols[k].empty()) continue;
      if (!ex.arg2.empty()) ex.arg2 += ' ';
      ex.arg2 += cols[k];
    }
    auto [it, inserted] = index.emplace(cols[0], records.size());
    if (inserted) records.push_back({cols[0], {}});
    records[it->second].tuples.push_back(std::move(ex));
  }
  return records;
}

inline std::vector<GenerativeRecord> read_tuples_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_tuples_tsv(in);
}

// Missing confidences are written as 1.0.
inline void write_tuples_tsv(std::ostream& out, const std::vector<GenerativeRecord>& records) {
  auto check = [](const std::string& field) {
    if (field.find_first_of("\t\n\r") != std::string::npos)
      throw FormatError("field contains a tab or newline: '" + field + "'");
  };
  for (const auto& rec : records) {
    check(rec.sentence);
    for (const auto& ex : rec.tuples) {
      check(ex.arg1);
      check(ex.rel);
      check(ex.arg2);
      out << rec.sentence << '\t' << format_confidence(ex.confidence.value_or(1.0)) << '\t' << ex.arg1
          << '\t' << ex.rel << '\t' << ex.arg2 << '\n';
    }
  }
}

inline void write_tuples_tsv(const std::string& path, const std::vector<GenerativeRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_tuples_tsv(out, records);
}

}  // namespace setoie::data
