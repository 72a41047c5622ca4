#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phonotact/phone_table.hpp"
#include "phonotact/util.hpp"

namespace phonotact {

struct Syllable {
  std::vector<Token> onset;
  std::vector<Token> nucleus;
  std::vector<Token> coda;
  std::optional<Token> tone;

  bool operator==(const Syllable&) const = default;
};

enum class Constituent : int { O = 0, N = 1, C = 2, T = 3 };

inline char to_char(Constituent c) {
  switch (c) {
    case Constituent::O: return 'O';
    case Constituent::N: return 'N';
    case Constituent::C: return 'C';
    case Constituent::T: return 'T';
  }
  return '?';
}

inline bool is_stop(const Token& t) {
  return t.features.kind == PhoneKind::segment && t.features.sonority <= 2;
}

// Dutch [s] in s+stop word-initial clusters and stop+s word-final clusters
// acts extrasyllabic; it gets sonority 0 in the working view so the cluster
// stays in one onset or coda. The table itself is untouched.
inline std::vector<int> effective_sonorities(std::span<const Token> tokens,
                                             LanguageProfile profile) {
  std::vector<int> son(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i)
    son[i] = tokens[i].features.kind == PhoneKind::segment
                 ? tokens[i].features.sonority
                 : 0;
  if (profile == LanguageProfile::dutch && tokens.size() >= 2) {
    if (tokens.front().symbol == "s" && is_stop(tokens[1])) son.front() = 0;
    if (tokens.back().symbol == "s" && is_stop(tokens[tokens.size() - 2]))
      son.back() = 0;
  }
  return son;
}

// ---------------------------------------------------------------------------
// Sonority-driven syllabification. Nuclei are maximal vowel runs
// (sonority >= 8); a consonant that is a strict local sonority peak
// (>= its left neighbour, > its right, word edges counting as -1) becomes a
// degenerate one-token nucleus, which keeps every onset non-decreasing and
// gives vowel-less words a syllable. Intervocalic clusters split so the
// onset is the longest non-decreasing suffix.
// ---------------------------------------------------------------------------

inline std::vector<Syllable> syllabify_ssp(std::span<const Token> tokens,
                                           LanguageProfile profile) {
  if (tokens.empty()) throw SyllabifyError("cannot syllabify an empty word");
  for (const auto& t : tokens)
    if (t.features.kind == PhoneKind::tone)
      throw SyllabifyError("tone token \"" + t.symbol +
                           "\" outside the min profile");

  const std::size_t n = tokens.size();
  std::vector<int> son = effective_sonorities(tokens, profile);

  // nucleus spans as [begin, end) index pairs
  std::vector<std::pair<std::size_t, std::size_t>> nuclei;
  std::size_t i = 0;
  while (i < n) {
    if (son[i] >= 8) {
      std::size_t j = i;
      while (j < n && son[j] >= 8) ++j;
      nuclei.emplace_back(i, j);
      i = j;
    } else {
      int left = i == 0 ? -1 : son[i - 1];
      int right = i + 1 == n ? -1 : son[i + 1];
      if (son[i] >= left && son[i] > right) nuclei.emplace_back(i, i + 1);
      ++i;
    }
  }
  if (nuclei.empty())
    throw SyllabifyError("no syllable nucleus found");  // unreachable

  auto slice = [&](std::size_t b, std::size_t e) {
    return std::vector<Token>(tokens.begin() + b, tokens.begin() + e);
  };

  std::vector<Syllable> out(nuclei.size());
  for (std::size_t k = 0; k < nuclei.size(); ++k)
    out[k].nucleus = slice(nuclei[k].first, nuclei[k].second);

  out.front().onset = slice(0, nuclei.front().first);
  out.back().coda = slice(nuclei.back().second, n);

  for (std::size_t k = 0; k + 1 < nuclei.size(); ++k) {
    std::size_t b = nuclei[k].second;
    std::size_t e = nuclei[k + 1].first;
    std::size_t split = e;
    while (split > b && (split == e || son[split - 1] <= son[split]))
      --split;
    // split is now the start of the longest non-decreasing suffix
    out[k].coda = slice(b, split);
    out[k + 1].onset = slice(split, e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Min syllabification: Chao tone tokens close syllables; non-consonantal
// segments other than ʔ form the nucleus; consonantal segments and ʔ go to
// the onset until a nucleus exists, afterwards to the coda.
// ---------------------------------------------------------------------------

inline std::vector<Syllable> syllabify_min(std::span<const Token> tokens) {
  if (tokens.empty()) throw SyllabifyError("cannot syllabify an empty word");
  std::vector<Syllable> out;
  Syllable cur;
  bool any_token = false;
  for (const auto& t : tokens) {
    if (t.features.kind == PhoneKind::tone) {
      if (!any_token)
        throw SyllabifyError("tone \"" + t.symbol +
                             "\" with no preceding segments");
      if (cur.nucleus.empty())
        throw SyllabifyError("syllable closed by tone \"" + t.symbol +
                             "\" has no nucleus");
      cur.tone = t;
      out.push_back(std::move(cur));
      cur = Syllable{};
      any_token = false;
      continue;
    }
    any_token = true;
    bool nuclear = !t.features.consonantal && t.symbol != "ʔ";
    if (nuclear) {
      if (!cur.coda.empty())
        throw SyllabifyError("vowel \"" + t.symbol + "\" after coda material");
      cur.nucleus.push_back(t);
    } else {
      if (cur.nucleus.empty())
        cur.onset.push_back(t);
      else
        cur.coda.push_back(t);
    }
  }
  if (any_token)
    throw SyllabifyError("trailing segments with no closing tone");
  return out;
}

inline std::vector<Syllable> syllabify(std::span<const Token> tokens,
                                       LanguageProfile profile) {
  return profile == LanguageProfile::min ? syllabify_min(tokens)
                                         : syllabify_ssp(tokens, profile);
}

// ---------------------------------------------------------------------------
// Per-token constituent labels, the supervision signal for the auxiliary
// prediction task.
// ---------------------------------------------------------------------------

inline std::vector<Constituent> constituent_labels(
    std::span<const Token> tokens, const std::vector<Syllable>& syllables) {
  std::vector<Constituent> labels;
  std::vector<const Token*> flat;
  for (const auto& s : syllables) {
    for (const auto& t : s.onset) { flat.push_back(&t); labels.push_back(Constituent::O); }
    for (const auto& t : s.nucleus) { flat.push_back(&t); labels.push_back(Constituent::N); }
    for (const auto& t : s.coda) { flat.push_back(&t); labels.push_back(Constituent::C); }
    if (s.tone) { flat.push_back(&*s.tone); labels.push_back(Constituent::T); }
  }
  if (flat.size() != tokens.size())
    throw Error("internal: syllables do not partition the token sequence");
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (!(*flat[i] == tokens[i]))
      throw Error("internal: syllable token mismatch at position " +
                  std::to_string(i));
  return labels;
}

// ---------------------------------------------------------------------------
// Textual rendering: syllables joined by ".", constituents by "|", tone
// appended with "+". parse_syllables inverts render_syllables for any
// syllabification built from greedy-tokenized input.
// ---------------------------------------------------------------------------

inline std::string render_syllables(const std::vector<Syllable>& syllables) {
  std::string out;
  for (std::size_t k = 0; k < syllables.size(); ++k) {
    const Syllable& s = syllables[k];
    if (k) out += '.';
    for (const auto& t : s.onset) out += t.symbol;
    out += '|';
    for (const auto& t : s.nucleus) out += t.symbol;
    out += '|';
    for (const auto& t : s.coda) out += t.symbol;
    if (s.tone) {
      out += '+';
      out += s.tone->symbol;
    }
  }
  return out;
}

inline std::vector<Syllable> parse_syllables(std::string_view text,
                                             const PhoneTable& table,
                                             LanguageProfile profile) {
  std::vector<Syllable> out;
  for (const auto& part : split(text, '.')) {
    Syllable s;
    std::string_view body = part;
    if (auto plus = body.find('+'); plus != std::string_view::npos) {
      std::string_view tone_text = body.substr(plus + 1);
      auto toks = tokenize(tone_text, table, profile);
      if (toks.size() != 1 || toks[0].features.kind != PhoneKind::tone)
        throw InputError("bad tone \"" + std::string(tone_text) + "\"");
      s.tone = toks[0];
      body = body.substr(0, plus);
    }
    auto fields = split(body, '|');
    if (fields.size() != 3)
      throw InputError("syllable \"" + std::string(part) +
                       "\" must have onset|nucleus|coda");
    auto tok_field = [&](const std::string& f) {
      return f.empty() ? std::vector<Token>{} : tokenize(f, table, profile);
    };
    s.onset = tok_field(fields[0]);
    s.nucleus = tok_field(fields[1]);
    s.coda = tok_field(fields[2]);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace phonotact
