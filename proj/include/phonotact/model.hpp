#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "phonotact/phone_table.hpp"
#include "phonotact/util.hpp"

namespace phonotact {

enum class Weighting { uncertainty, static_weights };

inline std::string to_string(Weighting w) {
  return w == Weighting::uncertainty ? "uncertainty" : "static";
}

inline Weighting parse_weighting(const std::string& s) {
  if (s == "uncertainty") return Weighting::uncertainty;
  if (s == "static") return Weighting::static_weights;
  throw ConfigError("unknown weighting '" + s + "' (expected uncertainty or static)");
}

struct ModelConfig {
  int embedding_dim = 32;
  int hidden_dim = 64;
  int layers = 1;
  double learning_rate = 0.005;
  int max_epochs = 150;
  int patience = 15;
  int batch_size = 32;
  std::uint64_t seed = 0;
  bool multitask = false;
  Weighting weighting = Weighting::uncertainty;
  double lambda_a = 1.0;
  double lambda_b = 1.0;
  int folds = 5;
  int min_words = 20;
};

inline void validate_model_config(const ModelConfig& c) {
  if (c.embedding_dim < 1 || c.hidden_dim < 1 || c.layers < 1)
    throw ConfigError("model dimensions must be at least 1");
  if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate))
    throw ConfigError("learning_rate must be positive and finite");
  if (c.max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
  if (c.patience < 1) throw ConfigError("patience must be at least 1");
  if (c.batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (c.lambda_a < 0.0 || c.lambda_b < 0.0)
    throw ConfigError("static weights must be non-negative");
  if (c.folds < 2) throw ConfigError("folds must be at least 2");
  if (c.min_words < 2) throw ConfigError("min_words must be at least 2");
}

inline const std::string kEosSymbol = "<eos>";
inline const std::string kBosSymbol = "<bos>";

struct Vocabulary {
  std::vector<std::string> symbols;
  std::unordered_map<std::string, int> index;
  int eos_id = 0;
  int bos_id = 0;

  int size() const { return static_cast<int>(symbols.size()); }

  int id(const std::string& s) const {
    auto it = index.find(s);
    if (it == index.end()) throw TrainError("out-of-vocabulary symbol: " + s);
    return it->second;
  }
};

inline Vocabulary build_vocabulary(std::vector<std::string> symbols) {
  std::sort(symbols.begin(), symbols.end());
  symbols.erase(std::unique(symbols.begin(), symbols.end()), symbols.end());
  if (symbols.empty()) throw ConfigError("vocabulary has no symbols");
  for (const auto& s : symbols)
    if (s.empty() || s == kEosSymbol || s == kBosSymbol)
      throw ConfigError("invalid vocabulary symbol '" + s + "'");
  Vocabulary v;
  v.symbols = std::move(symbols);
  v.symbols.push_back(kEosSymbol);
  v.symbols.push_back(kBosSymbol);
  v.eos_id = static_cast<int>(v.symbols.size()) - 2;
  v.bos_id = static_cast<int>(v.symbols.size()) - 1;
  for (int i = 0; i < static_cast<int>(v.symbols.size()); ++i) v.index.emplace(v.symbols[i], i);
  return v;
}

inline Vocabulary vocabulary_from_words(const std::vector<std::vector<Token>>& words) {
  std::vector<std::string> syms;
  for (const auto& w : words)
    for (const auto& t : w) syms.push_back(t.symbol);
  return build_vocabulary(std::move(syms));
}

// token ids plus one constituency label per token (labels optional)
struct Word {
  std::vector<int> tokens;
  std::vector<int> constituents;
};

inline Word encode_word(const std::vector<Token>& toks, const Vocabulary& v) {
  Word w;
  w.tokens.reserve(toks.size());
  for (const auto& t : toks) w.tokens.push_back(v.id(t.symbol));
  return w;
}

inline constexpr int kConstituentClasses = 4;

struct LstmLayer {
  // gate rows stacked input/forget/cell/output, each hidden_dim tall
  Eigen::MatrixXd W;
  Eigen::MatrixXd U;
  Eigen::VectorXd b;
};

struct ParamSet {
  Eigen::MatrixXd embedding;        // embedding_dim x vocab
  std::vector<LstmLayer> lstm;
  Eigen::MatrixXd phone_w;          // vocab x hidden
  Eigen::VectorXd phone_b;
  Eigen::MatrixXd constit_w;        // 4 x hidden
  Eigen::VectorXd constit_b;
  double eta_phon = 0.0;
  double eta_syl = 0.0;
};

struct PhonoLM {
  Vocabulary vocab;
  int embedding_dim = 0;
  int hidden_dim = 0;
  int layers = 0;
  ParamSet p;
};

template <class F>
void for_each_tensor(ParamSet& ps, F&& f) {
  f(ps.embedding);
  for (auto& l : ps.lstm) {
    f(l.W);
    f(l.U);
    f(l.b);
  }
  f(ps.phone_w);
  f(ps.phone_b);
  f(ps.constit_w);
  f(ps.constit_b);
}

template <class F>
void zip_tensors(ParamSet& a, const ParamSet& b, ParamSet& c, ParamSet& d, F&& f) {
  f(a.embedding, b.embedding, c.embedding, d.embedding);
  for (std::size_t i = 0; i < a.lstm.size(); ++i) {
    f(a.lstm[i].W, b.lstm[i].W, c.lstm[i].W, d.lstm[i].W);
    f(a.lstm[i].U, b.lstm[i].U, c.lstm[i].U, d.lstm[i].U);
    f(a.lstm[i].b, b.lstm[i].b, c.lstm[i].b, d.lstm[i].b);
  }
  f(a.phone_w, b.phone_w, c.phone_w, d.phone_w);
  f(a.phone_b, b.phone_b, c.phone_b, d.phone_b);
  f(a.constit_w, b.constit_w, c.constit_w, d.constit_w);
  f(a.constit_b, b.constit_b, c.constit_b, d.constit_b);
}

inline std::vector<std::pair<double*, long>> tensor_spans(ParamSet& ps) {
  std::vector<std::pair<double*, long>> spans;
  for_each_tensor(ps, [&](auto& t) { spans.emplace_back(t.data(), static_cast<long>(t.size())); });
  spans.emplace_back(&ps.eta_phon, 1);
  spans.emplace_back(&ps.eta_syl, 1);
  return spans;
}

inline ParamSet zeros_like(const ParamSet& src) {
  ParamSet z;
  z.embedding = Eigen::MatrixXd::Zero(src.embedding.rows(), src.embedding.cols());
  z.lstm.resize(src.lstm.size());
  for (std::size_t i = 0; i < src.lstm.size(); ++i) {
    z.lstm[i].W = Eigen::MatrixXd::Zero(src.lstm[i].W.rows(), src.lstm[i].W.cols());
    z.lstm[i].U = Eigen::MatrixXd::Zero(src.lstm[i].U.rows(), src.lstm[i].U.cols());
    z.lstm[i].b = Eigen::VectorXd::Zero(src.lstm[i].b.size());
  }
  z.phone_w = Eigen::MatrixXd::Zero(src.phone_w.rows(), src.phone_w.cols());
  z.phone_b = Eigen::VectorXd::Zero(src.phone_b.size());
  z.constit_w = Eigen::MatrixXd::Zero(src.constit_w.rows(), src.constit_w.cols());
  z.constit_b = Eigen::VectorXd::Zero(src.constit_b.size());
  return z;
}

inline PhonoLM init_model(const Vocabulary& vocab, const ModelConfig& cfg) {
  validate_model_config(cfg);
  if (vocab.size() < 3) throw ConfigError("vocabulary has no symbols");
  PhonoLM m;
  m.vocab = vocab;
  m.embedding_dim = cfg.embedding_dim;
  m.hidden_dim = cfg.hidden_dim;
  m.layers = cfg.layers;

  Rng rng(derive_seed(cfg.seed, "model-init"));
  auto fill = [&](Eigen::Ref<Eigen::MatrixXd> t, int fan_in) {
    double s = 1.0 / std::sqrt(static_cast<double>(std::max(1, fan_in)));
    for (Eigen::Index j = 0; j < t.cols(); ++j)
      for (Eigen::Index i = 0; i < t.rows(); ++i) t(i, j) = rng.uniform(-s, s);
  };

  int v = vocab.size();
  int de = cfg.embedding_dim;
  int hd = cfg.hidden_dim;
  m.p.embedding = Eigen::MatrixXd(de, v);
  fill(m.p.embedding, v);
  m.p.lstm.resize(cfg.layers);
  for (int l = 0; l < cfg.layers; ++l) {
    int in = l == 0 ? de : hd;
    m.p.lstm[l].W = Eigen::MatrixXd(4 * hd, in);
    fill(m.p.lstm[l].W, in);
    m.p.lstm[l].U = Eigen::MatrixXd(4 * hd, hd);
    fill(m.p.lstm[l].U, hd);
    m.p.lstm[l].b = Eigen::VectorXd::Zero(4 * hd);
  }
  m.p.phone_w = Eigen::MatrixXd(v, hd);
  fill(m.p.phone_w, hd);
  m.p.phone_b = Eigen::VectorXd::Zero(v);
  m.p.constit_w = Eigen::MatrixXd(kConstituentClasses, hd);
  fill(m.p.constit_w, hd);
  m.p.constit_b = Eigen::VectorXd::Zero(kConstituentClasses);
  m.p.eta_phon = 0.0;
  m.p.eta_syl = 0.0;
  return m;
}

struct LossPair {
  double phon = 0.0;
  double syl = 0.0;
  double phon_total = 0.0;
  double syl_total = 0.0;
  long phon_count = 0;
  long syl_count = 0;
};

inline double total_loss(double l_phon, double l_syl, const PhonoLM& m, const ModelConfig& cfg) {
  if (!cfg.multitask) return l_phon;
  if (cfg.weighting == Weighting::static_weights)
    return cfg.lambda_a * l_phon + cfg.lambda_b * l_syl;
  return 0.5 * (std::exp(-m.p.eta_phon) * l_phon + m.p.eta_phon) +
         0.5 * (std::exp(-m.p.eta_syl) * l_syl + m.p.eta_syl);
}

namespace detail {

struct GateCache {
  Eigen::MatrixXd gi, gf, gg, go, c, tc, h;
};

inline void softmax_columns(const Eigen::MatrixXd& logits, Eigen::MatrixXd& probs,
                            Eigen::MatrixXd& shifted, Eigen::RowVectorXd& log_z) {
  Eigen::RowVectorXd mx = logits.colwise().maxCoeff();
  shifted = logits.rowwise() - mx;
  probs = shifted.array().exp();
  Eigen::RowVectorXd sums = probs.colwise().sum();
  log_z = sums.array().log();
  probs.array().rowwise() /= sums.array();
}

inline bool batch_has_labels(const std::vector<Word>& batch) {
  for (const auto& w : batch)
    if (w.constituents.size() != w.tokens.size()) return false;
  return true;
}

// One masked pass over a batch of words; fills gradients when grad is given.
// Words are right-padded: a column is active at step t while t <= word length
// (the final active step targets EOS), so inactive columns never feed a loss
// and their adjoints stay identically zero without explicit masking.
inline LossPair run_batch(const PhonoLM& m, const std::vector<Word>& batch, bool with_syl,
                          ParamSet* grad, const ModelConfig* cfg) {
  if (batch.empty()) throw TrainError("empty batch");
  const int B = static_cast<int>(batch.size());
  const int V = m.vocab.size();
  const int hd = m.hidden_dim;
  const int L = m.layers;
  int T = 0;
  for (const auto& w : batch) {
    for (int id : w.tokens)
      if (id < 0 || id >= V) throw TrainError("token id out of range");
    T = std::max<int>(T, static_cast<int>(w.tokens.size()) + 1);
  }
  if (with_syl && !batch_has_labels(batch))
    throw TrainError("constituent labels required for multitask loss");

  auto len = [&](int b) { return static_cast<int>(batch[b].tokens.size()); };
  auto input_at = [&](int t, int b) { return t == 0 ? m.vocab.bos_id : batch[b].tokens[t - 1]; };

  std::vector<Eigen::MatrixXd> xs(T);
  std::vector<std::vector<GateCache>> cache(T, std::vector<GateCache>(L));
  std::vector<Eigen::MatrixXd> phone_q(T), constit_q(T);
  std::vector<Eigen::MatrixXd> phone_sh(T), constit_sh(T);
  std::vector<Eigen::RowVectorXd> phone_lz(T), constit_lz(T);

  std::vector<Eigen::MatrixXd> hprev(L, Eigen::MatrixXd::Zero(hd, B));
  std::vector<Eigen::MatrixXd> cprev(L, Eigen::MatrixXd::Zero(hd, B));

  LossPair out;
  for (int t = 0; t < T; ++t) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(m.embedding_dim, B);
    for (int b = 0; b < B; ++b)
      if (t <= len(b)) x.col(b) = m.p.embedding.col(input_at(t, b));
    xs[t] = x;
    Eigen::MatrixXd a = x;
    for (int l = 0; l < L; ++l) {
      const auto& ly = m.p.lstm[l];
      Eigen::MatrixXd z = ly.W * a + ly.U * hprev[l];
      z.colwise() += ly.b;
      GateCache& g = cache[t][l];
      g.gi = (1.0 / (1.0 + (-z.topRows(hd)).array().exp())).matrix();
      g.gf = (1.0 / (1.0 + (-z.middleRows(hd, hd)).array().exp())).matrix();
      g.gg = z.middleRows(2 * hd, hd).array().tanh().matrix();
      g.go = (1.0 / (1.0 + (-z.bottomRows(hd)).array().exp())).matrix();
      g.c = (g.gf.array() * cprev[l].array() + g.gi.array() * g.gg.array()).matrix();
      g.tc = g.c.array().tanh().matrix();
      g.h = (g.go.array() * g.tc.array()).matrix();
      hprev[l] = g.h;
      cprev[l] = g.c;
      a = g.h;
    }
    Eigen::MatrixXd logits = m.p.phone_w * a;
    logits.colwise() += m.p.phone_b;
    softmax_columns(logits, phone_q[t], phone_sh[t], phone_lz[t]);
    if (with_syl) {
      Eigen::MatrixXd cl = m.p.constit_w * a;
      cl.colwise() += m.p.constit_b;
      softmax_columns(cl, constit_q[t], constit_sh[t], constit_lz[t]);
    }
    for (int b = 0; b < B; ++b) {
      if (t > len(b)) continue;
      int target = t < len(b) ? batch[b].tokens[t] : m.vocab.eos_id;
      out.phon_total += phone_lz[t](b) - phone_sh[t](target, b);
      ++out.phon_count;
      if (with_syl && t < len(b)) {
        int lbl = batch[b].constituents[t];
        if (lbl < 0 || lbl >= kConstituentClasses)
          throw TrainError("constituent label out of range");
        out.syl_total += constit_lz[t](b) - constit_sh[t](lbl, b);
        ++out.syl_count;
      }
    }
  }
  out.phon = out.phon_total / static_cast<double>(out.phon_count);
  if (out.syl_count > 0) out.syl = out.syl_total / static_cast<double>(out.syl_count);

  if (!grad) return out;

  // chain factors d(total)/d(L_task) under the configured weighting
  double fa = 1.0, fb = 0.0;
  if (cfg->multitask) {
    if (cfg->weighting == Weighting::static_weights) {
      fa = cfg->lambda_a;
      fb = cfg->lambda_b;
    } else {
      fa = 0.5 * std::exp(-m.p.eta_phon);
      fb = 0.5 * std::exp(-m.p.eta_syl);
    }
  }
  const double inv_np = fa / static_cast<double>(out.phon_count);
  const double inv_ns = out.syl_count > 0 ? fb / static_cast<double>(out.syl_count) : 0.0;

  std::vector<Eigen::MatrixXd> dh_next(L, Eigen::MatrixXd::Zero(hd, B));
  std::vector<Eigen::MatrixXd> dc_next(L, Eigen::MatrixXd::Zero(hd, B));
  for (int t = T - 1; t >= 0; --t) {
    Eigen::MatrixXd du = phone_q[t];
    for (int b = 0; b < B; ++b) {
      if (t > len(b)) {
        du.col(b).setZero();
        continue;
      }
      int target = t < len(b) ? batch[b].tokens[t] : m.vocab.eos_id;
      du(target, b) -= 1.0;
    }
    du *= inv_np;
    const Eigen::MatrixXd& top = cache[t][L - 1].h;
    grad->phone_w.noalias() += du * top.transpose();
    grad->phone_b += du.rowwise().sum();
    Eigen::MatrixXd ds = m.p.phone_w.transpose() * du;
    if (with_syl && fb != 0.0) {
      Eigen::MatrixXd dv = constit_q[t];
      for (int b = 0; b < B; ++b) {
        if (t < len(b)) {
          dv(batch[b].constituents[t], b) -= 1.0;
        } else {
          dv.col(b).setZero();
        }
      }
      dv *= inv_ns;
      grad->constit_w.noalias() += dv * top.transpose();
      grad->constit_b += dv.rowwise().sum();
      ds.noalias() += m.p.constit_w.transpose() * dv;
    }
    for (int l = L - 1; l >= 0; --l) {
      const GateCache& g = cache[t][l];
      Eigen::MatrixXd zeros;
      const Eigen::MatrixXd* cp;
      const Eigen::MatrixXd* hp;
      if (t > 0) {
        cp = &cache[t - 1][l].c;
        hp = &cache[t - 1][l].h;
      } else {
        zeros = Eigen::MatrixXd::Zero(hd, B);
        cp = &zeros;
        hp = &zeros;
      }
      // ds holds d(total)/d(h) for the layer currently on top of the chain
      Eigen::MatrixXd dh = ds + dh_next[l];
      Eigen::MatrixXd dc = dc_next[l] +
          (dh.array() * g.go.array() * (1.0 - g.tc.array().square())).matrix();
      Eigen::ArrayXXd d_o = dh.array() * g.tc.array();
      Eigen::ArrayXXd d_i = dc.array() * g.gg.array();
      Eigen::ArrayXXd d_f = dc.array() * cp->array();
      Eigen::ArrayXXd d_g = dc.array() * g.gi.array();
      Eigen::MatrixXd dz(4 * hd, B);
      dz.topRows(hd) = (d_i * g.gi.array() * (1.0 - g.gi.array())).matrix();
      dz.middleRows(hd, hd) = (d_f * g.gf.array() * (1.0 - g.gf.array())).matrix();
      dz.middleRows(2 * hd, hd) = (d_g * (1.0 - g.gg.array().square())).matrix();
      dz.bottomRows(hd) = (d_o * g.go.array() * (1.0 - g.go.array())).matrix();
      const Eigen::MatrixXd& a_in = l == 0 ? xs[t] : cache[t][l - 1].h;
      auto& gl = grad->lstm[l];
      gl.W.noalias() += dz * a_in.transpose();
      gl.U.noalias() += dz * hp->transpose();
      gl.b += dz.rowwise().sum();
      dh_next[l] = m.p.lstm[l].U.transpose() * dz;
      dc_next[l] = (dc.array() * g.gf.array()).matrix();
      Eigen::MatrixXd da = m.p.lstm[l].W.transpose() * dz;
      if (l == 0) {
        for (int b = 0; b < B; ++b)
          if (t <= len(b)) grad->embedding.col(input_at(t, b)) += da.col(b);
      } else {
        ds = std::move(da);
      }
    }
  }
  return out;
}

}  // namespace detail

inline LossPair losses(const PhonoLM& m, const std::vector<Word>& batch) {
  return detail::run_batch(m, batch, detail::batch_has_labels(batch), nullptr, nullptr);
}

struct GradientResult {
  ParamSet grad;
  LossPair batch_losses;
  double total = 0.0;
};

inline GradientResult compute_gradients(const PhonoLM& m, const std::vector<Word>& batch,
                                        const ModelConfig& cfg) {
  bool with_syl = cfg.multitask;
  GradientResult r;
  r.grad = zeros_like(m.p);
  LossPair lp = detail::run_batch(m, batch, with_syl || detail::batch_has_labels(batch),
                                  &r.grad, &cfg);
  r.batch_losses = lp;
  r.total = total_loss(lp.phon, lp.syl, m, cfg);
  if (cfg.multitask && cfg.weighting == Weighting::uncertainty) {
    r.grad.eta_phon = 0.5 * (1.0 - std::exp(-m.p.eta_phon) * lp.phon);
    r.grad.eta_syl = 0.5 * (1.0 - std::exp(-m.p.eta_syl) * lp.syl);
  }
  return r;
}

struct ForwardResult {
  Eigen::MatrixXd phone;    // steps x vocab
  Eigen::MatrixXd constit;  // steps x 4
};

inline ForwardResult forward(const PhonoLM& m, const std::vector<int>& tokens) {
  const int V = m.vocab.size();
  for (int id : tokens)
    if (id < 0 || id >= V) throw TrainError("token id out of range");
  const int hd = m.hidden_dim;
  const int T = static_cast<int>(tokens.size()) + 1;
  std::vector<Eigen::VectorXd> h(m.layers, Eigen::VectorXd::Zero(hd));
  std::vector<Eigen::VectorXd> c(m.layers, Eigen::VectorXd::Zero(hd));
  ForwardResult r;
  r.phone.resize(T, V);
  r.constit.resize(T, kConstituentClasses);
  auto softmax = [](Eigen::VectorXd v) {
    v.array() -= v.maxCoeff();
    Eigen::VectorXd e = v.array().exp();
    return Eigen::VectorXd(e / e.sum());
  };
  for (int t = 0; t < T; ++t) {
    Eigen::VectorXd a = m.p.embedding.col(t == 0 ? m.vocab.bos_id : tokens[t - 1]);
    for (int l = 0; l < m.layers; ++l) {
      const auto& ly = m.p.lstm[l];
      Eigen::VectorXd z = ly.W * a + ly.U * h[l] + ly.b;
      Eigen::ArrayXd gi = 1.0 / (1.0 + (-z.segment(0, hd)).array().exp());
      Eigen::ArrayXd gf = 1.0 / (1.0 + (-z.segment(hd, hd)).array().exp());
      Eigen::ArrayXd gg = z.segment(2 * hd, hd).array().tanh();
      Eigen::ArrayXd go = 1.0 / (1.0 + (-z.segment(3 * hd, hd)).array().exp());
      c[l] = (gf * c[l].array() + gi * gg).matrix();
      h[l] = (go * c[l].array().tanh()).matrix();
      a = h[l];
    }
    r.phone.row(t) = softmax(m.p.phone_w * a + m.p.phone_b).transpose();
    r.constit.row(t) = softmax(m.p.constit_w * a + m.p.constit_b).transpose();
  }
  return r;
}

inline ForwardResult forward(const PhonoLM& m, const std::vector<std::string>& symbols) {
  std::vector<int> ids;
  ids.reserve(symbols.size());
  for (const auto& s : symbols) ids.push_back(m.vocab.id(s));
  return forward(m, ids);
}

// summed negative natural-log likelihood of the word under the phone head,
// EOS step included
inline double sequence_nll(const PhonoLM& m, const Word& w) {
  return detail::run_batch(m, {w}, false, nullptr, nullptr).phon_total;
}

// per parameter group: central differences with step 1e-5, then
// ||g_a - g_n|| / max(||g_a||, ||g_n||, 1e-8); returns the worst group
inline double gradient_check(PhonoLM& model, const std::vector<Word>& batch,
                             const ModelConfig& cfg,
                             const std::function<void(ParamSet&)>& tamper = {}) {
  GradientResult res = compute_gradients(model, batch, cfg);
  if (tamper) tamper(res.grad);
  auto grad_spans = tensor_spans(res.grad);
  auto param_spans = tensor_spans(model.p);
  bool with_syl = cfg.multitask || detail::batch_has_labels(batch);
  auto eval_total = [&]() {
    LossPair lp = detail::run_batch(model, batch, with_syl, nullptr, nullptr);
    return total_loss(lp.phon, lp.syl, model, cfg);
  };
  const double step = 1e-5;
  double worst = 0.0;
  for (std::size_t s = 0; s < param_spans.size(); ++s) {
    double diff_sq = 0.0, ga_sq = 0.0, gn_sq = 0.0;
    for (long k = 0; k < param_spans[s].second; ++k) {
      double& theta = param_spans[s].first[k];
      const double orig = theta;
      theta = orig + step;
      double fp = eval_total();
      theta = orig - step;
      double fm = eval_total();
      theta = orig;
      double gn = (fp - fm) / (2.0 * step);
      double ga = grad_spans[s].first[k];
      diff_sq += (ga - gn) * (ga - gn);
      ga_sq += ga * ga;
      gn_sq += gn * gn;
    }
    double rel = std::sqrt(diff_sq) /
                 std::max({std::sqrt(ga_sq), std::sqrt(gn_sq), 1e-8});
    worst = std::max(worst, rel);
  }
  return worst;
}

namespace detail {

inline nlohmann::ordered_json tensor_json(const Eigen::MatrixXd& t) {
  nlohmann::ordered_json j;
  j["rows"] = t.rows();
  j["cols"] = t.cols();
  auto& data = j["data"] = nlohmann::json::array();
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    for (Eigen::Index c = 0; c < t.cols(); ++c) data.push_back(t(i, c));
  return j;
}

inline Eigen::MatrixXd tensor_from_json(const nlohmann::json& j) {
  Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw ConfigError("model tensor shape mismatch");
  Eigen::MatrixXd t(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c) t(i, c) = data[k++].get<double>();
  return t;
}

}  // namespace detail

inline std::string serialize_model(const PhonoLM& m) {
  nlohmann::ordered_json j;
  j["format"] = "phonotact-model";
  j["version"] = 1;
  std::vector<std::string> syms(m.vocab.symbols.begin(), m.vocab.symbols.end() - 2);
  j["symbols"] = syms;
  j["embedding_dim"] = m.embedding_dim;
  j["hidden_dim"] = m.hidden_dim;
  j["layers"] = m.layers;
  j["eta_phon"] = m.p.eta_phon;
  j["eta_syl"] = m.p.eta_syl;
  j["embedding"] = detail::tensor_json(m.p.embedding);
  auto& lstm = j["lstm"] = nlohmann::json::array();
  for (const auto& l : m.p.lstm) {
    nlohmann::ordered_json lj;
    lj["W"] = detail::tensor_json(l.W);
    lj["U"] = detail::tensor_json(l.U);
    lj["b"] = detail::tensor_json(l.b);
    lstm.push_back(std::move(lj));
  }
  j["phone_w"] = detail::tensor_json(m.p.phone_w);
  j["phone_b"] = detail::tensor_json(m.p.phone_b);
  j["constit_w"] = detail::tensor_json(m.p.constit_w);
  j["constit_b"] = detail::tensor_json(m.p.constit_b);
  return j.dump();
}

inline PhonoLM deserialize_model(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model parse failed: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "phonotact-model" || j.at("version").get<int>() != 1)
      throw ConfigError("unsupported model format");
    PhonoLM m;
    m.vocab = build_vocabulary(j.at("symbols").get<std::vector<std::string>>());
    m.embedding_dim = j.at("embedding_dim").get<int>();
    m.hidden_dim = j.at("hidden_dim").get<int>();
    m.layers = j.at("layers").get<int>();
    if (m.embedding_dim < 1 || m.hidden_dim < 1 || m.layers < 1)
      throw ConfigError("model dimensions must be at least 1");
    m.p.eta_phon = j.at("eta_phon").get<double>();
    m.p.eta_syl = j.at("eta_syl").get<double>();
    if (!std::isfinite(m.p.eta_phon) || !std::isfinite(m.p.eta_syl))
      throw ConfigError("model eta values must be finite");
    m.p.embedding = detail::tensor_from_json(j.at("embedding"));
    for (const auto& lj : j.at("lstm")) {
      LstmLayer l;
      l.W = detail::tensor_from_json(lj.at("W"));
      l.U = detail::tensor_from_json(lj.at("U"));
      l.b = Eigen::VectorXd(detail::tensor_from_json(lj.at("b")));
      m.p.lstm.push_back(std::move(l));
    }
    if (static_cast<int>(m.p.lstm.size()) != m.layers)
      throw ConfigError("model layer count mismatch");
    m.p.phone_w = detail::tensor_from_json(j.at("phone_w"));
    m.p.phone_b = Eigen::VectorXd(detail::tensor_from_json(j.at("phone_b")));
    m.p.constit_w = detail::tensor_from_json(j.at("constit_w"));
    m.p.constit_b = Eigen::VectorXd(detail::tensor_from_json(j.at("constit_b")));
    int v = m.vocab.size();
    int hd = m.hidden_dim;
    int de = m.embedding_dim;
    if (m.p.embedding.rows() != de || m.p.embedding.cols() != v ||
        m.p.phone_w.rows() != v || m.p.phone_w.cols() != hd || m.p.phone_b.size() != v ||
        m.p.constit_w.rows() != kConstituentClasses || m.p.constit_w.cols() != hd ||
        m.p.constit_b.size() != kConstituentClasses)
      throw ConfigError("model tensor shape mismatch");
    for (int l = 0; l < m.layers; ++l) {
      int in = l == 0 ? de : hd;
      if (m.p.lstm[l].W.rows() != 4 * hd || m.p.lstm[l].W.cols() != in ||
          m.p.lstm[l].U.rows() != 4 * hd || m.p.lstm[l].U.cols() != hd ||
          m.p.lstm[l].b.size() != 4 * hd)
        throw ConfigError("model tensor shape mismatch");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model payload invalid: ") + e.what());
  }
}

}  // namespace phonotact
