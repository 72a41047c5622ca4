#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "phonotact/util.hpp"

namespace phonotact {

struct CorrelationReport {
  double pearson_r = 0.0;
  double spearman_rho = 0.0;
  int n_sites = 0;
};

inline double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size())
    throw StatsError("correlation inputs differ in length");
  if (xs.size() < 3) throw StatsError("correlation needs at least 3 points");
  const std::size_t n = xs.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double dx = xs[i] - mx;
    double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0)
    throw StatsError("correlation undefined: zero variance");
  return sxy / std::sqrt(sxx * syy);
}

// average ranks, 1-based; ties share the mean of their positions
inline std::vector<double> rank_average(std::span<const double> xs) {
  const std::size_t n = xs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
    double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

inline double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size())
    throw StatsError("correlation inputs differ in length");
  if (xs.size() < 3) throw StatsError("correlation needs at least 3 points");
  auto rx = rank_average(xs);
  auto ry = rank_average(ys);
  return pearson(rx, ry);
}

// Correlates complexity (bits per phoneme) against mean word length across
// sites. Works on any row type exposing those two fields.
template <class Rows>
CorrelationReport correlate_dialects(const Rows& rows) {
  std::vector<double> bits, lens;
  for (const auto& r : rows) {
    bits.push_back(r.bits_per_phoneme);
    lens.push_back(r.avg_word_length);
  }
  if (bits.size() < 3)
    throw StatsError("need at least 3 dialect rows to correlate");
  CorrelationReport rep;
  rep.pearson_r = pearson(bits, lens);
  rep.spearman_rho = spearman(bits, lens);
  rep.n_sites = static_cast<int>(bits.size());
  return rep;
}

}  // namespace phonotact
