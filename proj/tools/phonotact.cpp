#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "phonotact/corpus.hpp"
#include "phonotact/model.hpp"
#include "phonotact/phone_table.hpp"
#include "phonotact/pipeline.hpp"
#include "phonotact/stats.hpp"
#include "phonotact/synth.hpp"
#include "phonotact/syllabify.hpp"
#include "phonotact/tps.hpp"
#include "phonotact/train.hpp"
#include "phonotact/util.hpp"

namespace fs = std::filesystem;
using namespace phonotact;

namespace {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PhoneTable load_table(const std::string& path, std::vector<std::string>* warnings = nullptr) {
  if (path.empty()) return builtin_table();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open feature table: " + path);
  return load_feature_table(in, warnings);
}

Dataset load_corpus(const std::string& path, LanguageProfile profile,
                    ParseStats* stats = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open corpus: " + path);
  return parse_wordlist(in, profile, stats);
}

void write_output(const std::string& out_dir, const std::string& name,
                  const std::string& content) {
  fs::create_directories(out_dir);
  fs::path p = fs::path(out_dir) / name;
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << content;
  out.flush();
  if (!out) throw Error("failed while writing " + p.string());
  std::cout << "wrote " << p.string() << '\n';
}

struct CommonOpts {
  std::string corpus;
  std::string profile = "generic";
  std::string feature_table;
  std::string out_dir = "out";
};

void run_validate(const CommonOpts& o) {
  std::vector<std::string> table_warnings;
  PhoneTable table = load_table(o.feature_table, &table_warnings);
  ParseStats stats;
  Dataset ds = load_corpus(o.corpus, parse_profile(o.profile), &stats);
  ValidationReport rep = validate_dataset(ds, table, stats);
  std::cout << "sites: " << rep.site_word_counts.size() << '\n';
  for (const auto& [site, count] : rep.site_word_counts)
    std::cout << "  " << site << ": " << count << " words\n";
  std::cout << "skipped rows: " << rep.skipped_rows << '\n';
  for (const auto& w : table_warnings) std::cout << "warning: " << w << '\n';
  for (const auto& w : rep.warnings) std::cout << "warning: " << w << '\n';
  for (const auto& issue : rep.issues)
    std::cout << "issue: site " << issue.site_id << " concept " << issue.concept_id << ": "
              << issue.message << '\n';
  if (!rep.issues.empty())
    throw InputError(std::to_string(rep.issues.size()) + " validation issue(s) found");
  std::cout << "no issues\n";
}

void run_syllabify(const CommonOpts& o) {
  PhoneTable table = load_table(o.feature_table);
  LanguageProfile profile = parse_profile(o.profile);
  Dataset ds = load_corpus(o.corpus, profile);
  std::string out = "site_id\tconcept_id\tsyllables\n";
  for (const auto& lex : ds.lexica) {
    for (const auto& entry : lex.entries) {
      try {
        auto toks = tokenize(select_variant(entry), table, profile);
        auto sylls = syllabify(toks, profile);
        out += lex.site_id;
        out += '\t';
        out += entry.concept_id;
        out += '\t';
        out += render_syllables(sylls);
        out += '\n';
      } catch (const InputError& e) {
        throw InputError("site " + lex.site_id + " concept " + entry.concept_id + ": " +
                         e.what());
      }
    }
  }
  write_output(o.out_dir, "syllables.tsv", out);
}

struct SynthOpts {
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
};

void run_synth(const SynthOpts& o) {
  SynthConfig cfg;
  if (!o.config_path.empty()) cfg = parse_synth_config(read_text_file(o.config_path));
  cfg.seed = o.seed;
  Dataset ds = synth_continuum(cfg);
  write_output(o.out_dir, "corpus.tsv", serialize_wordlist(ds));
}

struct ComplexityOpts {
  CommonOpts common;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool multitask = false;
  std::string weighting = "uncertainty";
  ModelConfig model;
};

void run_complexity(const ComplexityOpts& o) {
  PhoneTable table = load_table(o.common.feature_table);
  Dataset ds = load_corpus(o.common.corpus, parse_profile(o.common.profile));
  ModelConfig cfg = o.model;
  cfg.seed = o.seed;
  cfg.multitask = o.multitask;
  cfg.weighting = parse_weighting(o.weighting);
  validate_model_config(cfg);
  std::vector<ComplexityRow> rows = run_complexity(ds, table, cfg, o.jobs);
  write_output(o.common.out_dir, "complexity.tsv", complexity_tsv(rows));
}

struct CorrelateOpts {
  std::string complexity_path;
  std::string out_dir = "out";
  bool multitask = false;
};

void run_correlate(const CorrelateOpts& o) {
  std::ifstream in(o.complexity_path, std::ios::binary);
  if (!in) throw InputError("cannot open complexity table: " + o.complexity_path);
  std::vector<ComplexityRow> rows = parse_complexity_tsv(in);
  CorrelationReport rep = correlate_dialects(rows);
  std::cout << "pearson " << fmt_fixed(rep.pearson_r) << " spearman "
            << fmt_fixed(rep.spearman_rho) << " n " << rep.n_sites << '\n';
  write_output(o.out_dir, "correlation.json",
               correlation_json(rep, o.multitask).dump() + "\n");
}

struct SurfaceOpts {
  std::string complexity_path;
  std::string corpus;
  std::string response = "complexity";
  std::string out_dir = "out";
  double lambda = 0.0;
  int grid_res = 25;
};

void run_surface(const SurfaceOpts& o) {
  std::ifstream in(o.complexity_path, std::ios::binary);
  if (!in) throw InputError("cannot open complexity table: " + o.complexity_path);
  std::vector<ComplexityRow> rows = parse_complexity_tsv(in);
  Dataset ds = load_corpus(o.corpus, LanguageProfile::generic);
  SurfaceResponse resp = parse_response(o.response);
  SurfaceResult res = fit_surface(rows, ds, resp, o.lambda, o.grid_res);
  std::string base =
      resp == SurfaceResponse::complexity ? "surface_complexity" : "surface_length";
  write_output(o.out_dir, base + ".csv", grid_csv(res.grid));
  write_output(o.out_dir, base + ".json", surface_summary_json(res.summary).dump() + "\n");
}

struct ReportOpts {
  std::string complexity_path;
  std::string corpus;
  std::string out_dir = "out";
  bool multitask = false;
  double lambda = 0.0;
  int grid_res = 25;
};

void run_report(const ReportOpts& o) {
  std::ifstream in(o.complexity_path, std::ios::binary);
  if (!in) throw InputError("cannot open complexity table: " + o.complexity_path);
  std::vector<ComplexityRow> rows = parse_complexity_tsv(in);
  Dataset ds = load_corpus(o.corpus, LanguageProfile::generic);
  CorrelationReport rep = correlate_dialects(rows);
  SurfaceResult sc = fit_surface(rows, ds, SurfaceResponse::complexity, o.lambda, o.grid_res);
  SurfaceResult sl = fit_surface(rows, ds, SurfaceResponse::length, o.lambda, o.grid_res);
  nlohmann::ordered_json j;
  j["correlation"] = correlation_json(rep, o.multitask);
  j["surface_complexity"] = surface_summary_json(sc.summary);
  j["surface_length"] = surface_summary_json(sl.summary);
  write_output(o.out_dir, "report.json", j.dump(2) + "\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"phonotactic complexity across dialect continua"};
  app.require_subcommand(1);

  CommonOpts validate_opts;
  auto* validate_cmd = app.add_subcommand("validate", "parse, tokenize and syllabify a corpus");
  validate_cmd->add_option("--corpus", validate_opts.corpus, "wordlist TSV")->required();
  validate_cmd->add_option("--profile", validate_opts.profile, "generic, dutch or min");
  validate_cmd->add_option("--feature-table", validate_opts.feature_table, "feature TSV");
  validate_cmd->callback([&] { run_validate(validate_opts); });

  CommonOpts syl_opts;
  auto* syl_cmd = app.add_subcommand("syllabify", "write syllabifications for a corpus");
  syl_cmd->add_option("--corpus", syl_opts.corpus, "wordlist TSV")->required();
  syl_cmd->add_option("--profile", syl_opts.profile, "generic, dutch or min");
  syl_cmd->add_option("--feature-table", syl_opts.feature_table, "feature TSV");
  syl_cmd->add_option("--out", syl_opts.out_dir, "output directory");
  syl_cmd->callback([&] { run_syllabify(syl_opts); });

  SynthOpts synth_opts;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dialect continuum");
  synth_cmd->add_option("--config", synth_opts.config_path, "JSON generator settings");
  synth_cmd->add_option("--seed", synth_opts.seed, "random seed")->required();
  synth_cmd->add_option("--out", synth_opts.out_dir, "output directory");
  synth_cmd->callback([&] { run_synth(synth_opts); });

  ComplexityOpts cx_opts;
  auto* cx_cmd = app.add_subcommand("complexity", "estimate bits per phoneme per site");
  cx_cmd->add_option("--corpus", cx_opts.common.corpus, "wordlist TSV")->required();
  cx_cmd->add_option("--profile", cx_opts.common.profile, "generic, dutch or min");
  cx_cmd->add_option("--feature-table", cx_opts.common.feature_table, "feature TSV");
  cx_cmd->add_option("--out", cx_opts.common.out_dir, "output directory");
  cx_cmd->add_option("--seed", cx_opts.seed, "random seed")->required();
  cx_cmd->add_option("--jobs", cx_opts.jobs, "parallel site workers");
  cx_cmd->add_flag("--multitask", cx_opts.multitask, "train the constituency head too");
  cx_cmd->add_option("--weighting", cx_opts.weighting, "uncertainty or static");
  cx_cmd->add_option("--lambda-a", cx_opts.model.lambda_a, "static weight for the phone loss");
  cx_cmd->add_option("--lambda-b", cx_opts.model.lambda_b,
                     "static weight for the constituency loss");
  cx_cmd->add_option("--embedding-dim", cx_opts.model.embedding_dim, "embedding size");
  cx_cmd->add_option("--hidden-dim", cx_opts.model.hidden_dim, "recurrent state size");
  cx_cmd->add_option("--layers", cx_opts.model.layers, "recurrent layers");
  cx_cmd->add_option("--learning-rate", cx_opts.model.learning_rate, "optimizer step size");
  cx_cmd->add_option("--max-epochs", cx_opts.model.max_epochs, "epoch cap");
  cx_cmd->add_option("--patience", cx_opts.model.patience, "early-stopping patience");
  cx_cmd->add_option("--batch-size", cx_opts.model.batch_size, "words per batch");
  cx_cmd->add_option("--folds", cx_opts.model.folds, "cross-validation folds");
  cx_cmd->add_option("--min-words", cx_opts.model.min_words, "training floor per site");
  cx_cmd->callback([&] { run_complexity(cx_opts); });

  CorrelateOpts corr_opts;
  auto* corr_cmd = app.add_subcommand("correlate", "correlate complexity with word length");
  corr_cmd->add_option("--complexity", corr_opts.complexity_path, "complexity TSV")->required();
  corr_cmd->add_option("--out", corr_opts.out_dir, "output directory");
  corr_cmd->add_flag("--multitask", corr_opts.multitask,
                     "tag the output as coming from a multitask run");
  corr_cmd->callback([&] { run_correlate(corr_opts); });

  SurfaceOpts surf_opts;
  auto* surf_cmd = app.add_subcommand("surface", "fit a smooth geographic surface");
  surf_cmd->add_option("--complexity", surf_opts.complexity_path, "complexity TSV")->required();
  surf_cmd->add_option("--corpus", surf_opts.corpus, "wordlist TSV with coordinates")
      ->required();
  surf_cmd->add_option("--response", surf_opts.response, "complexity or length");
  surf_cmd->add_option("--lambda", surf_opts.lambda,
                       "fixed smoothing parameter (omit to select by GCV)");
  surf_cmd->add_option("--grid-res", surf_opts.grid_res, "grid points per axis");
  surf_cmd->add_option("--out", surf_opts.out_dir, "output directory");
  surf_cmd->callback([&] { run_surface(surf_opts); });

  ReportOpts rep_opts;
  auto* rep_cmd = app.add_subcommand("report", "combined correlation and surface summary");
  rep_cmd->add_option("--complexity", rep_opts.complexity_path, "complexity TSV")->required();
  rep_cmd->add_option("--corpus", rep_opts.corpus, "wordlist TSV with coordinates")->required();
  rep_cmd->add_flag("--multitask", rep_opts.multitask,
                    "tag the correlation as coming from a multitask run");
  rep_cmd->add_option("--lambda", rep_opts.lambda,
                      "fixed smoothing parameter (omit to select by GCV)");
  rep_cmd->add_option("--grid-res", rep_opts.grid_res, "grid points per axis");
  rep_cmd->add_option("--out", rep_opts.out_dir, "output directory");
  rep_cmd->callback([&] { run_report(rep_opts); });

  std::string dump_table_path;
  auto* dump_cmd = app.add_subcommand("dump-table", "print the active feature table");
  dump_cmd->add_option("--feature-table", dump_table_path, "feature TSV");
  dump_cmd->callback([&] { std::cout << dump_feature_table(load_table(dump_table_path)); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
