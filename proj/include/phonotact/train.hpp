#pragma once

#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "phonotact/model.hpp"
#include "phonotact/util.hpp"

namespace phonotact {

struct AdamState {
  ParamSet m;
  ParamSet v;
  double m_eta_phon = 0.0, v_eta_phon = 0.0;
  double m_eta_syl = 0.0, v_eta_syl = 0.0;
  long step_count = 0;

  explicit AdamState(const ParamSet& shape) : m(zeros_like(shape)), v(zeros_like(shape)) {}

  void step(ParamSet& p, const ParamSet& g, double lr) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++step_count;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_count));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_count));
    zip_tensors(p, g, m, v, [&](auto& th, const auto& gr, auto& mm, auto& vv) {
      mm = b1 * mm + (1.0 - b1) * gr;
      vv = (b2 * vv.array() + (1.0 - b2) * gr.array().square()).matrix();
      th.array() -= lr * (mm.array() / c1) / ((vv.array() / c2).sqrt() + eps);
    });
    auto scalar = [&](double& th, double gr, double& mm, double& vv) {
      mm = b1 * mm + (1.0 - b1) * gr;
      vv = b2 * vv + (1.0 - b2) * gr * gr;
      th -= lr * (mm / c1) / (std::sqrt(vv / c2) + eps);
    };
    scalar(p.eta_phon, g.eta_phon, m_eta_phon, v_eta_phon);
    scalar(p.eta_syl, g.eta_syl, m_eta_syl, v_eta_syl);
  }
};

struct EpochStats {
  int epoch = 0;
  double train_phon = 0.0;
  double train_syl = 0.0;
  double train_total = 0.0;
  double dev_phon = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;
  double best_dev_phon = 0.0;
  bool early_stopped = false;
  int train_words = 0;
  int dev_words = 0;
};

inline std::pair<PhonoLM, TrainReport> train(const std::vector<Word>& words,
                                             const Vocabulary& vocab, const ModelConfig& cfg) {
  validate_model_config(cfg);
  const int n = static_cast<int>(words.size());
  if (n < cfg.min_words)
    throw TrainError("training requires at least " + std::to_string(cfg.min_words) +
                     " words; got " + std::to_string(n));
  if (cfg.multitask && !detail::batch_has_labels(words))
    throw TrainError("constituent labels required for multitask training");

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng dev_rng(derive_seed(cfg.seed, "dev-split"));
  dev_rng.shuffle(order);
  int dev_n = std::max(1, n / 10);
  if (dev_n >= n) dev_n = n - 1;
  std::vector<Word> dev_words;
  std::vector<Word> train_words;
  for (int i = 0; i < n; ++i)
    (i < dev_n ? dev_words : train_words).push_back(words[order[i]]);

  PhonoLM model = init_model(vocab, cfg);
  AdamState opt(model.p);
  Rng epoch_rng(derive_seed(cfg.seed, "epoch-order"));

  TrainReport report;
  report.train_words = static_cast<int>(train_words.size());
  report.dev_words = static_cast<int>(dev_words.size());
  ParamSet best = model.p;
  double best_dev = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int since_best = 0;

  std::vector<int> idx(train_words.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    epoch_rng.shuffle(idx);
    double phon_sum = 0.0, syl_sum = 0.0;
    long phon_cnt = 0, syl_cnt = 0;
    double total_sum = 0.0;
    long batches = 0;
    const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
    for (std::size_t start = 0; start < idx.size(); start += bs) {
      std::vector<Word> batch;
      for (std::size_t i = start; i < std::min(idx.size(), start + bs); ++i)
        batch.push_back(train_words[idx[i]]);
      GradientResult gr = compute_gradients(model, batch, cfg);
      if (!std::isfinite(gr.total))
        throw TrainError("non-finite loss at epoch " + std::to_string(epoch) +
                         "; try a smaller learning_rate");
      const LossPair& lp = gr.batch_losses;
      phon_sum += lp.phon_total;
      phon_cnt += lp.phon_count;
      syl_sum += lp.syl_total;
      syl_cnt += lp.syl_count;
      total_sum += gr.total;
      ++batches;
      opt.step(model.p, gr.grad, cfg.learning_rate);
    }
    LossPair dev = losses(model, dev_words);
    if (!std::isfinite(dev.phon))
      throw TrainError("non-finite dev loss at epoch " + std::to_string(epoch) +
                       "; try a smaller learning_rate");
    EpochStats st;
    st.epoch = epoch;
    st.train_phon = phon_cnt > 0 ? phon_sum / static_cast<double>(phon_cnt) : 0.0;
    st.train_syl = syl_cnt > 0 ? syl_sum / static_cast<double>(syl_cnt) : 0.0;
    st.train_total = batches > 0 ? total_sum / static_cast<double>(batches) : 0.0;
    st.dev_phon = dev.phon;
    report.epochs.push_back(st);
    if (dev.phon < best_dev) {
      best_dev = dev.phon;
      best = model.p;
      best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      report.early_stopped = true;
      break;
    }
  }
  model.p = std::move(best);
  report.best_epoch = best_epoch;
  report.best_dev_phon = best_dev;
  return {std::move(model), std::move(report)};
}

// a tokenized word ready for the model, with its phoneme count retained
// (tone tokens count for the model but not for word length)
struct TrainingWord {
  Word word;
  int segment_count = 0;
};

inline double avg_word_length(const std::vector<TrainingWord>& words) {
  if (words.empty()) throw TrainError("cannot average word length of an empty lexicon");
  double sum = 0.0;
  for (const auto& w : words) sum += static_cast<double>(w.segment_count);
  return sum / static_cast<double>(words.size());
}

struct ComplexityRow {
  std::string site_id;
  double bits_per_phoneme = 0.0;
  double avg_word_length = 0.0;
  long n_words = 0;
};

// k-fold cross-validated bits per phoneme; every word is scored exactly once
// by a model that never saw it
inline ComplexityRow estimate_complexity(const std::string& site_id,
                                         const std::vector<TrainingWord>& words,
                                         const Vocabulary& vocab, const ModelConfig& cfg) {
  validate_model_config(cfg);
  const int n = static_cast<int>(words.size());
  if (n < cfg.min_words)
    throw TrainError("site " + site_id + " has " + std::to_string(n) +
                     " words; complexity estimation requires at least " +
                     std::to_string(cfg.min_words));
  if (cfg.folds > n)
    throw ConfigError("folds (" + std::to_string(cfg.folds) + ") exceeds word count (" +
                      std::to_string(n) + ")");

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(cfg.seed, "cv-folds"));
  rng.shuffle(order);

  const int k = cfg.folds;
  ModelConfig fold_cfg = cfg;
  fold_cfg.min_words = 2;

  double nll_nats = 0.0;
  long tokens = 0;
  int start = 0;
  for (int f = 0; f < k; ++f) {
    int size = n / k + (f < n % k ? 1 : 0);
    int stop = start + size;
    std::vector<Word> fold_train;
    std::vector<Word> fold_eval;
    for (int i = 0; i < n; ++i)
      (i >= start && i < stop ? fold_eval : fold_train).push_back(words[order[i]].word);
    start = stop;
    if (fold_train.size() < 2)
      throw TrainError("fold " + std::to_string(f + 1) + " leaves fewer than 2 training words");
    auto [model, rep] = train(fold_train, vocab, fold_cfg);
    LossPair lp = detail::run_batch(model, fold_eval, false, nullptr, nullptr);
    nll_nats += lp.phon_total;
    tokens += lp.phon_count;
  }

  ComplexityRow row;
  row.site_id = site_id;
  row.bits_per_phoneme = nll_nats / std::log(2.0) / static_cast<double>(tokens);
  row.avg_word_length = avg_word_length(words);
  row.n_words = n;
  return row;
}

}  // namespace phonotact
