#pragma once

#include <cstdlib>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "phonotact/util.hpp"

namespace phonotact {

struct WordEntry {
  std::string concept_id;
  std::string raw_transcription;  // always the selected (first) variant
  std::vector<std::string> variants;

  bool operator==(const WordEntry&) const = default;
};

inline const std::string& select_variant(const WordEntry& e) {
  return e.variants.front();
}

struct DialectLexicon {
  std::string site_id;
  std::string site_name;
  double longitude = 0.0;
  double latitude = 0.0;
  std::vector<WordEntry> entries;

  bool operator==(const DialectLexicon&) const = default;
};

struct Dataset {
  std::vector<DialectLexicon> lexica;
  LanguageProfile language_profile = LanguageProfile::generic;

  bool operator==(const Dataset&) const = default;
};

struct ParseStats {
  std::size_t skipped_rows = 0;
  std::vector<std::string> warnings;
};

inline constexpr const char* kWordlistHeader =
    "site_id\tsite_name\tlongitude\tlatitude\tconcept_id\ttranscription";

namespace detail {

inline double parse_coord(const std::string& s, double lo, double hi,
                          const char* what, std::size_t lineno) {
  const char* begin = s.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw ParseError(lineno, std::string("unparseable ") + what + " \"" + s + "\"");
  if (!(v >= lo && v <= hi))
    throw ParseError(lineno, std::string(what) + " " + s + " outside [" +
                                 std::to_string(lo) + ", " + std::to_string(hi) +
                                 "]");
  return v;
}

}  // namespace detail

// TSV with header row; one row per (site, concept); variants separated by
// "|" inside the transcription cell. Rows with an empty transcription are
// skipped and counted.
inline Dataset parse_wordlist(std::istream& in, LanguageProfile profile,
                              ParseStats* stats = nullptr) {
  Dataset ds;
  ds.language_profile = profile;
  std::map<std::string, std::size_t> index;
  std::string line;
  std::size_t lineno = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (!seen_header) {
      if (line != kWordlistHeader)
        throw ParseError(lineno,
                         "expected header \"" + std::string(kWordlistHeader) +
                             "\"");
      seen_header = true;
      continue;
    }
    auto cols = split(line, '\t');
    if (cols.size() != 6)
      throw ParseError(lineno, "expected 6 tab-separated columns, got " +
                                   std::to_string(cols.size()));
    std::string transcription = std::string(trim(cols[5]));
    if (transcription.empty()) {
      if (stats) {
        ++stats->skipped_rows;
        stats->warnings.push_back("line " + std::to_string(lineno) +
                                  ": empty transcription, row skipped");
      }
      continue;
    }
    WordEntry entry;
    entry.concept_id = cols[4];
    for (const auto& v : split(transcription, '|')) {
      std::string var = std::string(trim(v));
      if (var.empty())
        throw ParseError(lineno, "empty variant in \"" + transcription + "\"");
      entry.variants.push_back(std::move(var));
    }
    entry.raw_transcription = entry.variants.front();

    auto [it, inserted] = index.try_emplace(cols[0], ds.lexica.size());
    if (inserted) {
      DialectLexicon fresh;
      fresh.site_id = cols[0];
      fresh.site_name = cols[1];
      fresh.longitude =
          detail::parse_coord(cols[2], -180.0, 180.0, "longitude", lineno);
      fresh.latitude =
          detail::parse_coord(cols[3], -90.0, 90.0, "latitude", lineno);
      ds.lexica.push_back(std::move(fresh));
    }
    ds.lexica[it->second].entries.push_back(std::move(entry));
  }
  return ds;
}

inline std::string serialize_wordlist(const Dataset& ds) {
  std::ostringstream out;
  out << kWordlistHeader << '\n';
  for (const auto& lex : ds.lexica) {
    for (const auto& e : lex.entries) {
      out << lex.site_id << '\t' << lex.site_name << '\t'
          << fmt_fixed(lex.longitude) << '\t' << fmt_fixed(lex.latitude)
          << '\t' << e.concept_id << '\t';
      for (std::size_t i = 0; i < e.variants.size(); ++i) {
        if (i) out << '|';
        out << e.variants[i];
      }
      out << '\n';
    }
  }
  return out.str();
}

inline Dataset filter_sites(const Dataset& ds,
                            const std::set<std::string>& excluded,
                            std::vector<std::string>* warnings = nullptr) {
  Dataset out;
  out.language_profile = ds.language_profile;
  for (const auto& lex : ds.lexica)
    if (!excluded.count(lex.site_id)) out.lexica.push_back(lex);
  if (warnings) {
    for (const auto& id : excluded) {
      bool present = false;
      for (const auto& lex : ds.lexica)
        if (lex.site_id == id) {
          present = true;
          break;
        }
      if (!present)
        warnings->push_back("excluded site \"" + id + "\" not in dataset");
    }
  }
  return out;
}

}  // namespace phonotact
