#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "phonotact/corpus.hpp"
#include "phonotact/util.hpp"

namespace phonotact {

// Synthetic dialect continuum. Sites sit on a square lattice around the
// capital. Vowel-harmony strength and mean word length both peak AT the
// capital and fall off with distance, so bits per phoneme rises away from
// the capital while word length shrinks: the compensation tradeoff the
// end-to-end checks assert, with the surface minimum at the capital.
struct SynthConfig {
  int n_sites = 30;
  double capital_lon = 5.0;
  double capital_lat = 52.0;
  std::vector<std::string> consonants = {"p", "t", "k"};
  std::vector<std::string> front_vowels = {"i", "e", "y"};
  std::vector<std::string> back_vowels = {"u", "o", "a"};
  double harmony_base = 0.35;     // strength at the far edge
  double harmony_gradient = 0.8;  // added strength at the capital, clamped to 1
  double length_base = 2.0;       // mean syllables at the far edge
  double length_gradient = 2.0;   // added mean syllables at the capital
  int words_per_site = 200;
  double spacing = 0.1;           // lattice step in degrees
  std::uint64_t seed = 0;
};

struct SiteParams {
  std::string site_id;
  std::string site_name;
  double longitude = 0.0;
  double latitude = 0.0;
  double dist_norm = 0.0;         // 0 at the capital, 1 at the farthest site
  double harmony_strength = 0.0;  // P(later vowel copies the first's class)
  double mean_syllables = 0.0;
};

inline void validate_synth_config(const SynthConfig& c) {
  if (c.n_sites < 2) throw ConfigError("n_sites must be at least 2");
  if (c.consonants.empty() || c.front_vowels.empty() || c.back_vowels.empty())
    throw ConfigError("vocabulary must list consonants, front_vowels and back_vowels");
  if (c.words_per_site < 1) throw ConfigError("words_per_site must be positive");
  if (c.length_base < 1.0) throw ConfigError("length_base must be at least 1");
  if (c.length_gradient < 0.0 || c.harmony_gradient < 0.0)
    throw ConfigError("gradients must be non-negative");
  if (!(c.spacing > 0.0)) throw ConfigError("spacing must be positive");
}

namespace detail {

inline double snap_coord(double v) { return std::round(v * 1e6) / 1e6; }

inline std::string padded_number(std::size_t value, std::size_t width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%0*zu", static_cast<int>(width), value);
  return buf;
}

}  // namespace detail

inline std::vector<SiteParams> synth_site_params(const SynthConfig& c) {
  validate_synth_config(c);
  std::size_t side = 1;
  while (side * side < static_cast<std::size_t>(c.n_sites)) ++side;
  double mid = (static_cast<double>(side) - 1.0) / 2.0;
  std::size_t width = std::to_string(c.n_sites).size();

  std::vector<SiteParams> sites(c.n_sites);
  double max_dist = 0.0;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    SiteParams& s = sites[i];
    s.site_id = "S" + detail::padded_number(i + 1, width);
    s.site_name = "Site " + detail::padded_number(i + 1, width);
    s.longitude = detail::snap_coord(
        c.capital_lon + (static_cast<double>(i % side) - mid) * c.spacing);
    s.latitude = detail::snap_coord(
        c.capital_lat + (static_cast<double>(i / side) - mid) * c.spacing);
    double d = std::hypot(s.longitude - c.capital_lon, s.latitude - c.capital_lat);
    s.dist_norm = d;
    max_dist = std::max(max_dist, d);
  }
  for (auto& s : sites) {
    s.dist_norm = max_dist > 0.0 ? s.dist_norm / max_dist : 0.0;
    double prox = 1.0 - s.dist_norm;
    s.harmony_strength =
        std::clamp(c.harmony_base + c.harmony_gradient * prox, 0.0, 1.0);
    s.mean_syllables = c.length_base + c.length_gradient * prox;
  }
  return sites;
}

inline Dataset synth_continuum(const SynthConfig& c) {
  auto sites = synth_site_params(c);
  std::size_t cwidth = std::to_string(c.words_per_site).size();

  std::vector<std::string> all_vowels = c.front_vowels;
  all_vowels.insert(all_vowels.end(), c.back_vowels.begin(), c.back_vowels.end());

  Dataset ds;
  ds.language_profile = LanguageProfile::generic;
  for (const auto& sp : sites) {
    Rng rng(c.seed ^ fnv1a64(sp.site_id));
    DialectLexicon lex;
    lex.site_id = sp.site_id;
    lex.site_name = sp.site_name;
    lex.longitude = sp.longitude;
    lex.latitude = sp.latitude;
    for (int w = 0; w < c.words_per_site; ++w) {
      // rounded site mean plus uniform ±1 jitter
      long long n = std::llround(sp.mean_syllables) +
                    static_cast<long long>(rng.below(3)) - 1;
      if (n < 1) n = 1;
      std::size_t n_syll = static_cast<std::size_t>(n);

      std::string word;
      bool first_is_front = false;
      for (std::size_t s = 0; s < n_syll; ++s) {
        word += c.consonants[rng.below(c.consonants.size())];
        if (s == 0) {
          std::size_t v = rng.below(all_vowels.size());
          first_is_front = v < c.front_vowels.size();
          word += all_vowels[v];
        } else if (rng.next_unit() < sp.harmony_strength) {
          const auto& cls = first_is_front ? c.front_vowels : c.back_vowels;
          word += cls[rng.below(cls.size())];
        } else {
          word += all_vowels[rng.below(all_vowels.size())];
        }
      }
      WordEntry e;
      e.concept_id = "c" + detail::padded_number(w + 1, cwidth);
      e.variants = {word};
      e.raw_transcription = word;
      lex.entries.push_back(std::move(e));
    }
    ds.lexica.push_back(std::move(lex));
  }
  return ds;
}

// JSON config: {n_sites, capital: [lon, lat], vocabulary: {consonants,
// front_vowels, back_vowels}, harmony_gradient, length_gradient,
// words_per_site, seed} plus optional harmony_base, length_base, spacing.
inline SynthConfig parse_synth_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad synth config JSON: ") + e.what());
  }
  SynthConfig c;
  try {
    if (j.contains("n_sites")) c.n_sites = j.at("n_sites").get<int>();
    if (j.contains("capital")) {
      auto cap = j.at("capital");
      c.capital_lon = cap.at(0).get<double>();
      c.capital_lat = cap.at(1).get<double>();
    }
    if (j.contains("vocabulary")) {
      auto v = j.at("vocabulary");
      if (v.contains("consonants"))
        c.consonants = v.at("consonants").get<std::vector<std::string>>();
      if (v.contains("front_vowels"))
        c.front_vowels = v.at("front_vowels").get<std::vector<std::string>>();
      if (v.contains("back_vowels"))
        c.back_vowels = v.at("back_vowels").get<std::vector<std::string>>();
    }
    if (j.contains("harmony_base")) c.harmony_base = j.at("harmony_base").get<double>();
    if (j.contains("harmony_gradient"))
      c.harmony_gradient = j.at("harmony_gradient").get<double>();
    if (j.contains("length_base")) c.length_base = j.at("length_base").get<double>();
    if (j.contains("length_gradient"))
      c.length_gradient = j.at("length_gradient").get<double>();
    if (j.contains("words_per_site"))
      c.words_per_site = j.at("words_per_site").get<int>();
    if (j.contains("spacing")) c.spacing = j.at("spacing").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad synth config value: ") + e.what());
  }
  validate_synth_config(c);
  return c;
}

}  // namespace phonotact
