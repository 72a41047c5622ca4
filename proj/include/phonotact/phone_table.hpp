#pragma once

#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "phonotact/util.hpp"

namespace phonotact {

enum class PhoneKind { segment, tone };

struct PhoneFeatures {
  int sonority = 0;  // 1..9 for segments, 0 for tones
  bool consonantal = false;
  PhoneKind kind = PhoneKind::segment;

  bool operator==(const PhoneFeatures&) const = default;
};

struct Token {
  std::string symbol;
  PhoneFeatures features;

  bool operator==(const Token&) const = default;
};

inline bool is_vowel(const PhoneFeatures& f) {
  return f.kind == PhoneKind::segment && !f.consonantal && f.sonority >= 8;
}

inline int sonority(const Token& tok) {
  if (tok.features.kind != PhoneKind::segment)
    throw Error("sonority queried on tone token \"" + tok.symbol + "\"");
  return tok.features.sonority;
}

struct PhoneTable {
  std::map<std::string, PhoneFeatures> entries;
  std::size_t max_symbol_len = 0;  // in codepoints

  void add(std::string symbol, PhoneFeatures f) {
    std::size_t n = decode_utf8(symbol).size();
    if (n == 0) throw ConfigError("empty symbol in feature table");
    if (n > max_symbol_len) max_symbol_len = n;
    entries[std::move(symbol)] = f;
  }

  const PhoneFeatures* find(const std::string& symbol) const {
    auto it = entries.find(symbol);
    return it == entries.end() ? nullptr : &it->second;
  }
};

inline const char* to_string(PhoneKind k) {
  return k == PhoneKind::tone ? "tone" : "segment";
}

// ---------------------------------------------------------------------------
// Built-in feature table. Sonority classes:
//   1 voiceless stops and ʔ   2 voiced stops      3 voiceless fricatives
//   4 voiced fricatives       5 nasals            6 liquids
//   7 glides                  8 high vowels       9 non-high vowels
// Long (ː) and nasalized (combining tilde) vowel variants and aspirated
// voiceless stops are generated from the base symbols. ʔ keeps
// consonantal=false; it is special-cased by the syllabifiers.
// ---------------------------------------------------------------------------

constexpr const char* kBuiltinTableVersion = "1";

namespace detail {

struct ClassRow {
  const char* symbols;  // space-separated
  int sonority;
  bool consonantal;
};

inline const std::vector<ClassRow>& builtin_class_rows() {
  static const std::vector<ClassRow> rows = {
      {"p t k c q", 1, true},
      {"ʔ", 1, false},                                        // ʔ
      {"b d g ɡ ɟ ɖ", 2, true},                     // ɡ ɟ ɖ
      {"f s ʃ x χ h θ ç ɕ ʂ", 3, true},
      {"v z ʒ ɣ ʁ ð ʐ ʑ β", 4, true},
      {"m n ŋ ɲ ɳ ɱ", 5, true},
      {"l r ɾ ɹ ʀ ɫ ʎ ɭ ɽ ɻ", 6, true},
      {"j w ɥ ʋ", 7, true},
      {"i y ɨ ʉ ɯ u ɪ ʏ ʊ", 8, false},
      {"e ø ɘ ɵ ɤ o ə ɛ œ ɜ ɞ "
       "ʌ ɔ æ ɐ a ɶ ɑ ɒ",
       9, false},
  };
  return rows;
}

}  // namespace detail

inline PhoneTable make_builtin_table() {
  PhoneTable t;
  for (const auto& row : detail::builtin_class_rows()) {
    for (const auto& sym : split(row.symbols, ' ')) {
      if (sym.empty()) continue;
      PhoneFeatures f{row.sonority, row.consonantal, PhoneKind::segment};
      t.add(sym, f);
      if (!row.consonantal && row.sonority >= 8) {
        t.add(sym + "ː", f);      // long
        t.add(sym + "̃", f);      // nasalized
      }
      if (row.sonority == 1 && row.consonantal) {
        t.add(sym + "ʰ", f);      // aspirated
      }
    }
  }
  // common affricates as units; they pattern with stops for sonority
  for (const char* a : {"ts", "tʃ", "tɕ", "tʂ"}) {
    PhoneFeatures f{1, true, PhoneKind::segment};
    t.add(a, f);
    t.add(std::string(a) + "ʰ", f);
  }
  for (const char* a : {"dz", "dʒ", "dʑ", "dʐ"}) {
    t.add(a, {2, true, PhoneKind::segment});
  }
  return t;
}

inline const PhoneTable& builtin_table() {
  static const PhoneTable t = make_builtin_table();
  return t;
}

// ---------------------------------------------------------------------------
// Feature-table TSV: symbol, sonority, consonantal, kind. Lines starting
// with '#' and an optional header row are skipped. Empty stream falls back
// to the built-in table.
// ---------------------------------------------------------------------------

inline PhoneTable load_feature_table(std::istream& in,
                                     std::vector<std::string>* warnings = nullptr) {
  PhoneTable t;
  std::string line;
  std::size_t lineno = 0;
  bool any = false;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = trim(line);
    if (sv.empty() || sv.front() == '#') continue;
    auto cols = split(sv, '\t');
    if (cols.size() == 4 && cols[0] == "symbol" && cols[1] == "sonority")
      continue;
    if (cols.size() != 4)
      throw ParseError(lineno, "expected 4 tab-separated columns, got " +
                                   std::to_string(cols.size()));
    const std::string& sym = cols[0];
    if (sym.empty()) throw ParseError(lineno, "empty symbol");
    int son;
    try {
      son = std::stoi(cols[1]);
    } catch (const std::exception&) {
      throw ParseError(lineno, "unparseable sonority \"" + cols[1] + "\"");
    }
    if (son < 0 || son > 9)
      throw ParseError(lineno, "sonority " + cols[1] + " outside 0-9");
    bool cons;
    if (cols[2] == "true")
      cons = true;
    else if (cols[2] == "false")
      cons = false;
    else
      throw ParseError(lineno, "consonantal must be true or false, got \"" +
                                   cols[2] + "\"");
    PhoneKind kind;
    if (cols[3] == "segment")
      kind = PhoneKind::segment;
    else if (cols[3] == "tone")
      kind = PhoneKind::tone;
    else
      throw ParseError(lineno, "unknown kind \"" + cols[3] + "\"");
    if (kind == PhoneKind::segment && son < 1)
      throw ParseError(lineno, "segment sonority must be 1-9");
    if (warnings && t.find(sym))
      warnings->push_back("duplicate symbol \"" + sym + "\" at line " +
                          std::to_string(lineno) + "; last wins");
    t.add(sym, {son, cons, kind});
    any = true;
  }
  if (!any) return builtin_table();
  return t;
}

// Flags table rows that break the documented feature conventions.
inline std::vector<std::string> validate_table(const PhoneTable& t) {
  std::vector<std::string> issues;
  for (const auto& [sym, f] : t.entries) {
    if (f.kind != PhoneKind::segment) continue;
    if (!f.consonantal && sym != "ʔ" && f.sonority < 8)
      issues.push_back("vowel \"" + sym + "\" has sonority " +
                       std::to_string(f.sonority) + " (expected >= 8)");
    if (f.consonantal && f.sonority > 7)
      issues.push_back("consonant \"" + sym + "\" has sonority " +
                       std::to_string(f.sonority) + " (expected <= 7)");
  }
  return issues;
}

inline std::string dump_feature_table(const PhoneTable& t) {
  std::ostringstream out;
  out << "# phonotact feature table v" << kBuiltinTableVersion << "\n";
  out << "symbol\tsonority\tconsonantal\tkind\n";
  for (const auto& [sym, f] : t.entries) {
    out << sym << '\t' << f.sonority << '\t' << (f.consonantal ? "true" : "false")
        << '\t' << to_string(f.kind) << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Tokenization: greedy longest match over the table keys, never splitting a
// base symbol from trailing combining marks. Min-profile digit runs over the
// Chao numerals 1-5 become single tone tokens.
// ---------------------------------------------------------------------------

inline bool is_chao_digit(char32_t c) { return c >= U'1' && c <= U'5'; }

inline std::vector<Token> tokenize(std::string_view transcription,
                                   const PhoneTable& table,
                                   LanguageProfile profile) {
  std::string_view text = trim(transcription);
  if (text.empty()) throw InputError("empty transcription");
  auto cps = decode_utf8(text);
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < cps.size()) {
    char32_t c = cps[i].value;
    if (c >= U'0' && c <= U'9') {
      if (profile == LanguageProfile::min && is_chao_digit(c)) {
        std::size_t j = i;
        while (j < cps.size() && is_chao_digit(cps[j].value)) ++j;
        std::size_t begin = cps[i].byte_offset;
        std::size_t end = cps[j - 1].byte_offset + cps[j - 1].byte_len;
        out.push_back({std::string(text.substr(begin, end - begin)),
                       {0, false, PhoneKind::tone}});
        i = j;
        continue;
      }
      std::string sym(text.substr(cps[i].byte_offset, cps[i].byte_len));
      throw TokenizeError(sym, cps[i].byte_offset,
                          profile == LanguageProfile::min
                              ? "digit outside Chao tone range 1-5"
                              : "unexpected digit in transcription");
    }
    std::size_t longest = std::min(table.max_symbol_len, cps.size() - i);
    bool matched = false;
    for (std::size_t len = longest; len >= 1; --len) {
      if (i + len < cps.size() && is_combining_mark(cps[i + len].value))
        continue;  // would sever a combining mark from its base
      std::size_t begin = cps[i].byte_offset;
      std::size_t end = cps[i + len - 1].byte_offset + cps[i + len - 1].byte_len;
      std::string cand(text.substr(begin, end - begin));
      if (const PhoneFeatures* f = table.find(cand)) {
        out.push_back({std::move(cand), *f});
        i += len;
        matched = true;
        break;
      }
    }
    if (!matched) {
      // report the whole grapheme cluster for a readable message
      std::size_t j = i + 1;
      while (j < cps.size() && is_combining_mark(cps[j].value)) ++j;
      std::size_t begin = cps[i].byte_offset;
      std::size_t end = cps[j - 1].byte_offset + cps[j - 1].byte_len;
      throw TokenizeError(std::string(text.substr(begin, end - begin)), begin,
                          "no feature-table entry matches");
    }
  }
  return out;
}

}  // namespace phonotact
