#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "phonotact/corpus.hpp"
#include "phonotact/model.hpp"
#include "phonotact/phone_table.hpp"
#include "phonotact/stats.hpp"
#include "phonotact/syllabify.hpp"
#include "phonotact/tps.hpp"
#include "phonotact/train.hpp"
#include "phonotact/util.hpp"

namespace phonotact {

struct SitePreparation {
  Vocabulary vocab;
  std::vector<TrainingWord> words;
};

// Tokenizes the selected variant of every entry, builds the site vocabulary
// from the whole lexicon, and attaches constituency labels when asked.
inline SitePreparation prepare_site(const DialectLexicon& lex, const PhoneTable& table,
                                    LanguageProfile profile, bool with_labels) {
  std::vector<std::vector<Token>> tokenized;
  tokenized.reserve(lex.entries.size());
  for (const auto& entry : lex.entries) {
    try {
      tokenized.push_back(tokenize(select_variant(entry), table, profile));
    } catch (const InputError& e) {
      throw InputError("site " + lex.site_id + " concept " + entry.concept_id + ": " +
                       e.what());
    }
  }
  SitePreparation prep;
  prep.vocab = vocabulary_from_words(tokenized);
  prep.words.reserve(tokenized.size());
  for (std::size_t i = 0; i < tokenized.size(); ++i) {
    TrainingWord tw;
    tw.word = encode_word(tokenized[i], prep.vocab);
    for (const auto& t : tokenized[i])
      if (t.features.kind == PhoneKind::segment) ++tw.segment_count;
    if (with_labels) {
      try {
        auto sylls = syllabify(tokenized[i], profile);
        for (Constituent c : constituent_labels(tokenized[i], sylls))
          tw.word.constituents.push_back(static_cast<int>(c));
      } catch (const InputError& e) {
        throw InputError("site " + lex.site_id + " concept " + lex.entries[i].concept_id +
                         ": " + e.what());
      }
    }
    prep.words.push_back(std::move(tw));
  }
  return prep;
}

inline ComplexityRow site_complexity(const DialectLexicon& lex, const PhoneTable& table,
                                     LanguageProfile profile, const ModelConfig& cfg) {
  SitePreparation prep = prepare_site(lex, table, profile, cfg.multitask);
  return estimate_complexity(lex.site_id, prep.words, prep.vocab, cfg);
}

// One model per site, sharded over a small worker pool; per-site seeds are
// derived from the run seed and the site id, so results do not depend on
// scheduling, and rows come back in site_id order.
inline std::vector<ComplexityRow> run_complexity(const Dataset& ds, const PhoneTable& table,
                                                 const ModelConfig& cfg, int jobs = 1) {
  if (ds.lexica.empty()) throw InputError("corpus has no sites");
  if (jobs < 1) throw ConfigError("jobs must be at least 1");
  std::vector<const DialectLexicon*> sites;
  sites.reserve(ds.lexica.size());
  for (const auto& lex : ds.lexica) sites.push_back(&lex);
  std::sort(sites.begin(), sites.end(),
            [](const DialectLexicon* a, const DialectLexicon* b) {
              return a->site_id < b->site_id;
            });

  const int n = static_cast<int>(sites.size());
  std::vector<ComplexityRow> rows(n);
  std::vector<std::exception_ptr> failures(n);
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        ModelConfig site_cfg = cfg;
        site_cfg.seed = derive_seed(cfg.seed, sites[i]->site_id);
        rows[i] = site_complexity(*sites[i], table, ds.language_profile, site_cfg);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  int pool = std::min(jobs, n);
  if (pool <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(pool);
    for (int i = 0; i < pool; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  for (int i = 0; i < n; ++i)
    if (failures[i]) std::rethrow_exception(failures[i]);
  return rows;
}

// ---------------------------------------------------------------------------
// Output formats
// ---------------------------------------------------------------------------

inline constexpr const char* kComplexityHeader =
    "site_id\tbits_per_phoneme\tavg_word_length\tn_words";

inline std::string complexity_tsv(const std::vector<ComplexityRow>& rows) {
  std::string out = kComplexityHeader;
  out += '\n';
  for (const auto& r : rows) {
    out += r.site_id;
    out += '\t';
    out += fmt_fixed(r.bits_per_phoneme);
    out += '\t';
    out += fmt_fixed(r.avg_word_length);
    out += '\t';
    out += std::to_string(r.n_words);
    out += '\n';
  }
  return out;
}

inline std::vector<ComplexityRow> parse_complexity_tsv(std::istream& in) {
  std::vector<ComplexityRow> rows;
  std::string line;
  std::size_t lineno = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!seen_header) {
      if (line != kComplexityHeader)
        throw ParseError(lineno, "unexpected complexity header");
      seen_header = true;
      continue;
    }
    auto cols = split(line, '\t');
    if (cols.size() != 4)
      throw ParseError(lineno, "expected 4 tab-separated columns, found " +
                                  std::to_string(cols.size()));
    ComplexityRow r;
    r.site_id = std::string(cols[0]);
    if (r.site_id.empty()) throw ParseError(lineno, "empty site_id");
    auto num = [&](std::string_view sv, const char* what) {
      std::string s(sv);
      char* end = nullptr;
      double v = std::strtod(s.c_str(), &end);
      if (end != s.c_str() + s.size() || s.empty() || !std::isfinite(v))
        throw ParseError(lineno, std::string("invalid ") + what + " '" + s + "'");
      return v;
    };
    r.bits_per_phoneme = num(cols[1], "bits_per_phoneme");
    r.avg_word_length = num(cols[2], "avg_word_length");
    double nw = num(cols[3], "n_words");
    r.n_words = static_cast<long>(nw);
    if (nw != static_cast<double>(r.n_words) || r.n_words < 1)
      throw ParseError(lineno, "invalid n_words '" + std::string(cols[3]) + "'");
    rows.push_back(std::move(r));
  }
  if (!seen_header) throw ParseError(lineno == 0 ? 1 : lineno, "empty complexity table");
  return rows;
}

inline std::string grid_csv(const SurfaceGrid& grid) {
  std::string out = "lon,lat,value,inside_hull\n";
  for (const auto& p : grid.points) {
    out += fmt_fixed(p.lon);
    out += ',';
    out += fmt_fixed(p.lat);
    out += ',';
    out += fmt_fixed(p.value);
    out += ',';
    out += p.inside_hull ? '1' : '0';
    out += '\n';
  }
  return out;
}

inline nlohmann::ordered_json correlation_json(const CorrelationReport& rep, bool multitask) {
  nlohmann::ordered_json j;
  j["pearson"] = rep.pearson_r;
  j["spearman"] = rep.spearman_rho;
  j["n"] = rep.n_sites;
  j["multitask"] = multitask;
  return j;
}

inline nlohmann::ordered_json surface_summary_json(const FitSummary& s) {
  nlohmann::ordered_json j;
  j["intercept"] = s.intercept;
  j["edf"] = s.edf;
  j["adj_r2"] = s.adj_r2;
  j["lambda"] = s.lambda;
  j["n"] = s.n;
  return j;
}

// ---------------------------------------------------------------------------
// Surface fitting over complexity rows joined with site coordinates
// ---------------------------------------------------------------------------

enum class SurfaceResponse { complexity, length };

inline SurfaceResponse parse_response(const std::string& s) {
  if (s == "complexity") return SurfaceResponse::complexity;
  if (s == "length") return SurfaceResponse::length;
  throw ConfigError("unknown response '" + s + "' (expected complexity or length)");
}

struct SurfaceResult {
  TPSFit fit;
  FitSummary summary;
  SurfaceGrid grid;
};

inline SurfaceResult fit_surface(const std::vector<ComplexityRow>& rows, const Dataset& ds,
                                 SurfaceResponse response, double fixed_lambda = 0.0,
                                 int grid_res = 25) {
  if (rows.empty()) throw InputError("complexity table has no rows");
  std::map<std::string, std::pair<double, double>> coords;
  for (const auto& lex : ds.lexica)
    coords.emplace(lex.site_id, std::make_pair(lex.longitude, lex.latitude));
  Eigen::MatrixXd points(static_cast<int>(rows.size()), 2);
  Eigen::VectorXd values(static_cast<int>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto it = coords.find(rows[i].site_id);
    if (it == coords.end())
      throw InputError("site_id " + rows[i].site_id + " not present in the corpus");
    points(static_cast<int>(i), 0) = it->second.first;
    points(static_cast<int>(i), 1) = it->second.second;
    values(static_cast<int>(i)) =
        response == SurfaceResponse::complexity ? rows[i].bits_per_phoneme
                                                : rows[i].avg_word_length;
  }
  double lambda = fixed_lambda;
  if (!(lambda > 0.0)) lambda = gcv_select(points, values, default_lambda_grid()).lambda;
  SurfaceResult res;
  res.fit = fit_tps(points, values, lambda);
  res.summary = fit_summary(res.fit);
  BBox bbox;
  bbox.min_lon = points.col(0).minCoeff();
  bbox.max_lon = points.col(0).maxCoeff();
  bbox.min_lat = points.col(1).minCoeff();
  bbox.max_lat = points.col(1).maxCoeff();
  res.grid = surface_grid(res.fit, bbox, grid_res, grid_res);
  return res;
}

// ---------------------------------------------------------------------------
// Corpus validation sweep
// ---------------------------------------------------------------------------

struct ValidationIssue {
  std::string site_id;
  std::string concept_id;
  std::string message;
};

struct ValidationReport {
  std::vector<std::pair<std::string, std::size_t>> site_word_counts;
  std::size_t skipped_rows = 0;
  std::vector<std::string> warnings;
  std::vector<ValidationIssue> issues;
};

// tokenizes and syllabifies every variant of every entry, collecting
// problems instead of stopping at the first one
inline ValidationReport validate_dataset(const Dataset& ds, const PhoneTable& table,
                                         const ParseStats& stats) {
  ValidationReport rep;
  rep.skipped_rows = stats.skipped_rows;
  rep.warnings = stats.warnings;
  for (const auto& lex : ds.lexica) {
    rep.site_word_counts.emplace_back(lex.site_id, lex.entries.size());
    for (const auto& entry : lex.entries) {
      for (const auto& variant : entry.variants) {
        try {
          auto toks = tokenize(variant, table, ds.language_profile);
          auto sylls = syllabify(toks, ds.language_profile);
          constituent_labels(toks, sylls);
        } catch (const Error& e) {
          rep.issues.push_back({lex.site_id, entry.concept_id, e.what()});
        }
      }
    }
  }
  return rep;
}

}  // namespace phonotact
