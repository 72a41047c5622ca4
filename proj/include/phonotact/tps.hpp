#pragma once

#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "phonotact/util.hpp"

namespace phonotact {

// Full thin plate spline over planar (longitude, latitude) with roughness
// penalty lambda. f(p) = sum_i delta_i * eta(|p - c_i|) + b0 + b1 x + b2 y,
// eta(r) = r^2 log r. Coordinates are centered and shared-scaled before
// fitting; duplicate sites merge into one weighted point.
struct TPSFit {
  Eigen::MatrixXd centers;   // m x 2, transformed coordinates
  Eigen::VectorXd delta;     // m radial coefficients
  Eigen::Vector3d beta;      // intercept, x, y (transformed space)
  Eigen::VectorXd weights;   // m duplicate multiplicities
  Eigen::VectorXd values;    // m merged responses
  double lambda = 0.0;
  double edf = 0.0;
  double rss = 0.0;
  double tss = 0.0;
  double adj_r2 = 0.0;
  double gcv = 0.0;
  double cx = 0.0, cy = 0.0, scale = 1.0;
  int n_points = 0;          // before duplicate merging
};

struct FitSummary {
  double intercept = 0.0;    // polynomial intercept in raw coordinates
  double edf = 0.0;
  double adj_r2 = 0.0;
  double rss = 0.0;
  double lambda = 0.0;
  int n = 0;
};

inline double tps_eta(double r) { return r > 0.0 ? r * r * std::log(r) : 0.0; }

inline TPSFit fit_tps(const Eigen::MatrixXd& points, const Eigen::VectorXd& values,
                      double lambda) {
  const int n = static_cast<int>(points.rows());
  if (points.cols() != 2) throw FitError("points must be n x 2");
  if (values.size() != n) throw FitError("points and values differ in length");
  if (n < 4) throw FitError("need at least 4 sites to fit a surface");
  if (!(lambda > 0.0)) throw FitError("lambda must be positive");

  TPSFit fit;
  fit.lambda = lambda;
  fit.n_points = n;
  fit.cx = points.col(0).mean();
  fit.cy = points.col(1).mean();
  double varx = (points.col(0).array() - fit.cx).square().mean();
  double vary = (points.col(1).array() - fit.cy).square().mean();
  fit.scale = std::sqrt(varx + vary);
  if (!(fit.scale > 0.0)) throw FitError("all sites share one coordinate");

  // merge exact duplicates (transform is injective, so raw duplicates only)
  std::map<std::pair<double, double>, int> seen;
  std::vector<double> xs, ys, sums, counts;
  for (int i = 0; i < n; ++i) {
    double tx = (points(i, 0) - fit.cx) / fit.scale;
    double ty = (points(i, 1) - fit.cy) / fit.scale;
    auto [it, inserted] =
        seen.try_emplace({tx, ty}, static_cast<int>(xs.size()));
    if (inserted) {
      xs.push_back(tx);
      ys.push_back(ty);
      sums.push_back(values(i));
      counts.push_back(1.0);
    } else {
      sums[it->second] += values(i);
      counts[it->second] += 1.0;
    }
  }
  const int m = static_cast<int>(xs.size());
  if (m < 4) throw FitError("fewer than 4 distinct sites");

  fit.centers.resize(m, 2);
  fit.weights.resize(m);
  fit.values.resize(m);
  for (int i = 0; i < m; ++i) {
    fit.centers(i, 0) = xs[i];
    fit.centers(i, 1) = ys[i];
    fit.weights(i) = counts[i];
    fit.values(i) = sums[i] / counts[i];
  }

  // the system is nonsingular exactly when the sites are not collinear
  double mx = fit.centers.col(0).mean();
  double my = fit.centers.col(1).mean();
  double cxx = (fit.centers.col(0).array() - mx).square().mean();
  double cyy = (fit.centers.col(1).array() - my).square().mean();
  double cxy = ((fit.centers.col(0).array() - mx) *
                (fit.centers.col(1).array() - my))
                   .mean();
  if (cxx * cyy - cxy * cxy < 1e-12)
    throw FitError("degenerate site geometry (collinear sites)");

  // For lambda > 1 the solve runs in u = lambda*delta, which keeps the
  // system O(1)-conditioned across the whole smoothing grid:
  //   (E/lambda + diag(1/w)) u + T beta = y,   T' u = 0
  const bool scaled = lambda > 1.0;
  const double efac = scaled ? 1.0 / lambda : 1.0;
  const double dfac = scaled ? 1.0 : lambda;

  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(m, m);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m + 3, m + 3);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < i; ++j) {
      double r = std::hypot(xs[i] - xs[j], ys[i] - ys[j]);
      double e = tps_eta(r);
      E(i, j) = E(j, i) = e;
      M(i, j) = M(j, i) = e * efac;
    }
    M(i, i) = dfac / fit.weights(i);
    M(i, m) = M(m, i) = 1.0;
    M(i, m + 1) = M(m + 1, i) = xs[i];
    M(i, m + 2) = M(m + 2, i) = ys[i];
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + 3);
  rhs.head(m) = fit.values;
  Eigen::VectorXd sol = lu.solve(rhs);
  if (!sol.allFinite()) throw FitError("surface solve failed");
  fit.delta = scaled ? Eigen::VectorXd(sol.head(m) / lambda)
                     : Eigen::VectorXd(sol.head(m));
  fit.beta = sol.tail(3);

  // influence trace: y_hat = y - lambda * diag(1/w) * delta, delta = X_d * y
  Eigen::MatrixXd rhs_edf = Eigen::MatrixXd::Zero(m + 3, m);
  rhs_edf.topRows(m).setIdentity();
  Eigen::MatrixXd Xd = lu.solve(rhs_edf).topRows(m);
  double edf = static_cast<double>(m);
  for (int i = 0; i < m; ++i)
    edf -= (scaled ? 1.0 : lambda) * Xd(i, i) / fit.weights(i);
  fit.edf = edf;

  Eigen::VectorXd yhat = E * fit.delta;
  for (int i = 0; i < m; ++i)
    yhat(i) += fit.beta(0) + fit.beta(1) * xs[i] + fit.beta(2) * ys[i];
  fit.rss =
      (fit.weights.array() * (fit.values - yhat).array().square()).sum();
  double wsum = fit.weights.sum();
  double wmean = fit.weights.dot(fit.values) / wsum;
  fit.tss =
      (fit.weights.array() * (fit.values.array() - wmean).square()).sum();
  // exact fits bottom out at solver noise; snap those to zero so the GCV
  // tie-break can prefer the smoother end of the grid
  double y2 = fit.tss + wsum * wmean * wmean;
  if (fit.rss < 1e-20 * y2) fit.rss = 0.0;
  double dm = static_cast<double>(m);
  fit.adj_r2 = fit.tss > 0.0
                   ? 1.0 - (fit.rss / (dm - fit.edf)) / (fit.tss / (dm - 1.0))
                   : 0.0;
  fit.gcv = dm * fit.rss / ((dm - fit.edf) * (dm - fit.edf));
  return fit;
}

inline Eigen::VectorXd evaluate(const TPSFit& fit, const Eigen::MatrixXd& query) {
  if (query.cols() != 2) throw FitError("query must be k x 2");
  const int k = static_cast<int>(query.rows());
  const int m = static_cast<int>(fit.centers.rows());
  Eigen::VectorXd out(k);
  for (int q = 0; q < k; ++q) {
    double tx = (query(q, 0) - fit.cx) / fit.scale;
    double ty = (query(q, 1) - fit.cy) / fit.scale;
    double v = fit.beta(0) + fit.beta(1) * tx + fit.beta(2) * ty;
    for (int i = 0; i < m; ++i) {
      double r = std::hypot(tx - fit.centers(i, 0), ty - fit.centers(i, 1));
      v += fit.delta(i) * tps_eta(r);
    }
    out(q) = v;
  }
  return out;
}

inline std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  for (int i = -12; i <= 12; ++i)
    grid.push_back(std::pow(10.0, static_cast<double>(i) / 2.0));
  return grid;
}

struct GcvResult {
  double lambda = 0.0;
  std::vector<std::pair<double, double>> curve;  // (lambda, gcv)
};

// Ascending scan keeping ties at the larger lambda, so exactly-planar data
// selects the smoothest fit on the grid.
inline GcvResult gcv_select(const Eigen::MatrixXd& points,
                            const Eigen::VectorXd& values,
                            const std::vector<double>& grid) {
  if (grid.empty()) throw FitError("empty lambda grid");
  GcvResult res;
  bool any = false;
  double best = 0.0;
  for (double lam : grid) {
    TPSFit fit;
    try {
      fit = fit_tps(points, values, lam);
    } catch (const FitError&) {
      continue;
    }
    res.curve.emplace_back(lam, fit.gcv);
    if (!any || fit.gcv <= best) {
      any = true;
      best = fit.gcv;
      res.lambda = lam;
    }
  }
  if (!any) throw FitError("no lambda in the grid produced a fit");
  return res;
}

inline FitSummary fit_summary(const TPSFit& fit) {
  FitSummary s;
  s.intercept = fit.beta(0) -
                (fit.beta(1) * fit.cx + fit.beta(2) * fit.cy) / fit.scale;
  s.edf = fit.edf;
  s.adj_r2 = fit.adj_r2;
  s.rss = fit.rss;
  s.lambda = fit.lambda;
  s.n = fit.n_points;
  return s;
}

// ---------------------------------------------------------------------------
// Contour-ready lattice over the site bounding box, flagging points outside
// the convex hull of the sites.
// ---------------------------------------------------------------------------

struct GridPoint {
  double lon = 0.0;
  double lat = 0.0;
  double value = 0.0;
  bool inside_hull = false;
};

struct SurfaceGrid {
  std::vector<GridPoint> points;  // lat-major, lon fastest
  bool hull_degenerate = false;
};

namespace detail {

inline double cross(const std::pair<double, double>& o,
                    const std::pair<double, double>& a,
                    const std::pair<double, double>& b) {
  return (a.first - o.first) * (b.second - o.second) -
         (a.second - o.second) * (b.first - o.first);
}

// Andrew's monotone chain; returns counter-clockwise hull without the
// closing point. Collinear input collapses to fewer than 3 vertices.
inline std::vector<std::pair<double, double>> convex_hull(
    std::vector<std::pair<double, double>> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  const std::size_t n = pts.size();
  if (n < 3) return pts;
  std::vector<std::pair<double, double>> hull(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = n - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

inline bool inside_convex(const std::vector<std::pair<double, double>>& hull,
                          double x, double y) {
  if (hull.size() < 3) return false;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const auto& a = hull[i];
    const auto& b = hull[(i + 1) % hull.size()];
    if (cross(a, b, {x, y}) < -1e-12) return false;
  }
  return true;
}

}  // namespace detail

struct BBox {
  double min_lon = 0.0, max_lon = 0.0, min_lat = 0.0, max_lat = 0.0;
};

inline SurfaceGrid surface_grid(const TPSFit& fit, const BBox& bbox,
                                int res_lon, int res_lat) {
  if (res_lon < 2 || res_lat < 2)
    throw FitError("grid resolution must be at least 2 per axis");
  std::vector<std::pair<double, double>> sites;
  for (int i = 0; i < fit.centers.rows(); ++i)
    sites.emplace_back(fit.centers(i, 0) * fit.scale + fit.cx,
                       fit.centers(i, 1) * fit.scale + fit.cy);
  auto hull = detail::convex_hull(sites);

  SurfaceGrid grid;
  grid.hull_degenerate = hull.size() < 3;
  Eigen::MatrixXd query(res_lon * res_lat, 2);
  int row = 0;
  for (int iy = 0; iy < res_lat; ++iy) {
    double lat = bbox.min_lat + (bbox.max_lat - bbox.min_lat) * iy /
                                    static_cast<double>(res_lat - 1);
    for (int ix = 0; ix < res_lon; ++ix, ++row) {
      query(row, 0) = bbox.min_lon + (bbox.max_lon - bbox.min_lon) * ix /
                                         static_cast<double>(res_lon - 1);
      query(row, 1) = lat;
    }
  }
  Eigen::VectorXd vals = evaluate(fit, query);
  grid.points.resize(query.rows());
  for (int i = 0; i < query.rows(); ++i) {
    grid.points[i] = {query(i, 0), query(i, 1), vals(i),
                      detail::inside_convex(hull, query(i, 0), query(i, 1))};
  }
  return grid;
}

}  // namespace phonotact
