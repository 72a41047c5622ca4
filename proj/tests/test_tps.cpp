#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "phonotact/tps.hpp"

using namespace phonotact;

namespace {

void check_side_conditions(const TPSFit& fit) {
  double s0 = fit.delta.sum();
  double sx = fit.delta.dot(fit.centers.col(0));
  double sy = fit.delta.dot(fit.centers.col(1));
  CHECK(std::abs(s0) < 1e-8);
  CHECK(std::abs(sx) < 1e-8);
  CHECK(std::abs(sy) < 1e-8);
}

Eigen::MatrixXd random_points(Rng& rng, int n, double lo, double hi) {
  Eigen::MatrixXd pts(n, 2);
  for (int i = 0; i < n; ++i) {
    pts(i, 0) = rng.uniform(lo, hi);
    pts(i, 1) = rng.uniform(lo, hi);
  }
  return pts;
}

}  // namespace

TEST_CASE("huge lambda recovers the least-squares plane") {
  Rng rng(101);
  auto pts = random_points(rng, 20, 0.0, 10.0);
  Eigen::VectorXd y(20);
  for (int i = 0; i < 20; ++i)
    y(i) = 2.0 + 0.5 * pts(i, 0) - 0.3 * pts(i, 1) + 0.1 * rng.normal();

  TPSFit fit = fit_tps(pts, y, 1e9);
  check_side_conditions(fit);
  CHECK(fit.delta.cwiseAbs().maxCoeff() < 1e-6);
  CHECK(std::abs(fit.edf - 3.0) < 0.01);

  // OLS plane in the transformed coordinates
  Eigen::MatrixXd T(20, 3);
  for (int i = 0; i < 20; ++i) {
    T(i, 0) = 1.0;
    T(i, 1) = (pts(i, 0) - fit.cx) / fit.scale;
    T(i, 2) = (pts(i, 1) - fit.cy) / fit.scale;
  }
  Eigen::Vector3d ols = (T.transpose() * T).ldlt().solve(T.transpose() * y);
  CHECK((fit.beta - ols).cwiseAbs().maxCoeff() < 1e-6);
  double ols_rss = (y - T * ols).squaredNorm();
  double ols_adj = 1.0 - (ols_rss / 17.0) / (fit.tss / 19.0);
  CHECK(std::abs(fit.adj_r2 - ols_adj) < 1e-3);
}

TEST_CASE("tiny lambda interpolates distinct points") {
  Rng rng(202);
  auto pts = random_points(rng, 20, 0.0, 5.0);
  Eigen::VectorXd y(20);
  for (int i = 0; i < 20; ++i) y(i) = rng.normal();
  TPSFit fit = fit_tps(pts, y, 1e-9);
  check_side_conditions(fit);
  Eigen::VectorXd yhat = evaluate(fit, pts);
  CHECK((yhat - y).cwiseAbs().maxCoeff() < 1e-5);
  CHECK(fit.edf > 19.5);
  CHECK(fit.adj_r2 <= 1.0 + 1e-9);
}

TEST_CASE("gcv-selected fit denoises a known surface") {
  Rng rng(303);
  int side = 10;
  Eigen::MatrixXd pts(side * side, 2);
  Eigen::VectorXd y(side * side), truth(side * side);
  int k = 0;
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j, ++k) {
      double x = 3.0 * i / (side - 1.0);
      double yy = 3.0 * j / (side - 1.0);
      pts(k, 0) = x;
      pts(k, 1) = yy;
      truth(k) = std::sin(x) * std::cos(yy);
      y(k) = truth(k) + 0.05 * rng.normal();
    }
  auto grid = default_lambda_grid();
  auto sel = gcv_select(pts, y, grid);
  CHECK(sel.lambda > grid.front());
  CHECK(sel.lambda < grid.back());
  TPSFit fit = fit_tps(pts, y, sel.lambda);
  check_side_conditions(fit);
  Eigen::VectorXd yhat = evaluate(fit, pts);
  double rmse = std::sqrt((yhat - truth).squaredNorm() / truth.size());
  CHECK(rmse < 0.05);
}

TEST_CASE("gcv prefers the largest lambda on exactly planar data") {
  Rng rng(404);
  auto pts = random_points(rng, 25, 0.0, 8.0);
  Eigen::VectorXd y(25);
  for (int i = 0; i < 25; ++i) y(i) = 1.0 + 0.2 * pts(i, 0) + 0.7 * pts(i, 1);
  auto grid = default_lambda_grid();
  auto sel = gcv_select(pts, y, grid);
  CHECK(sel.lambda == grid.back());
  CHECK(sel.curve.size() == grid.size());
}

TEST_CASE("single-element lambda grid is returned unchanged") {
  Rng rng(505);
  auto pts = random_points(rng, 10, 0.0, 4.0);
  Eigen::VectorXd y(10);
  for (int i = 0; i < 10; ++i) y(i) = rng.normal();
  auto sel = gcv_select(pts, y, {0.25});
  CHECK(sel.lambda == 0.25);
  REQUIRE(sel.curve.size() == 1);
}

TEST_CASE("edf decreases as lambda grows") {
  Rng rng(606);
  auto pts = random_points(rng, 30, 0.0, 6.0);
  Eigen::VectorXd y(30);
  for (int i = 0; i < 30; ++i)
    y(i) = std::sin(pts(i, 0)) + 0.1 * rng.normal();
  double prev = 1e18;
  for (double lam : default_lambda_grid()) {
    TPSFit fit = fit_tps(pts, y, lam);
    check_side_conditions(fit);
    CHECK(fit.edf <= prev + 1e-9);
    CHECK(fit.edf >= 3.0 - 1e-6);
    CHECK(fit.edf <= 30.0 + 1e-6);
    prev = fit.edf;
  }
}

TEST_CASE("the smoother is linear in the response") {
  Rng rng(707);
  auto pts = random_points(rng, 15, 0.0, 5.0);
  Eigen::VectorXd y1(15), y2(15);
  for (int i = 0; i < 15; ++i) {
    y1(i) = rng.normal();
    y2(i) = rng.normal();
  }
  auto q = random_points(rng, 8, -1.0, 6.0);
  TPSFit f1 = fit_tps(pts, y1, 0.01);
  TPSFit f2 = fit_tps(pts, y2, 0.01);
  TPSFit f12 = fit_tps(pts, y1 + y2, 0.01);
  Eigen::VectorXd sum = evaluate(f1, q) + evaluate(f2, q);
  CHECK((evaluate(f12, q) - sum).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("fits are rotation invariant") {
  Rng rng(808);
  auto pts = random_points(rng, 18, 0.0, 5.0);
  Eigen::VectorXd y(18);
  for (int i = 0; i < 18; ++i)
    y(i) = std::sin(pts(i, 0) * 0.8) + 0.3 * pts(i, 1) + 0.05 * rng.normal();
  auto q = random_points(rng, 6, 1.0, 4.0);

  double th = 0.7;
  Eigen::Matrix2d R;
  R << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  Eigen::MatrixXd pts_rot = pts * R.transpose();
  Eigen::MatrixXd q_rot = q * R.transpose();

  TPSFit plain = fit_tps(pts, y, 0.05);
  TPSFit rot = fit_tps(pts_rot, y, 0.05);
  CHECK((evaluate(plain, q) - evaluate(rot, q_rot)).cwiseAbs().maxCoeff() <
        1e-6);
  CHECK(std::abs(plain.edf - rot.edf) < 1e-6);
  CHECK(std::abs(plain.rss - rot.rss) < 1e-8);
}

TEST_CASE("evaluate special points") {
  Rng rng(909);
  auto pts = random_points(rng, 12, 0.0, 4.0);
  Eigen::VectorXd y(12);
  for (int i = 0; i < 12; ++i) y(i) = 1.0 + 0.3 * pts(i, 0) - 0.2 * pts(i, 1);
  TPSFit fit = fit_tps(pts, y, 1e9);
  // plane fit passes through the centroid
  Eigen::MatrixXd centroid(1, 2);
  centroid << pts.col(0).mean(), pts.col(1).mean();
  CHECK(std::abs(evaluate(fit, centroid)(0) - y.mean()) < 1e-6);
  // far-field stays finite
  Eigen::MatrixXd far(1, 2);
  far << 40.0, -40.0;
  CHECK(std::isfinite(evaluate(fit, far)(0)));
}

TEST_CASE("fit error cases") {
  Eigen::MatrixXd three(3, 2);
  three << 0, 0, 1, 0, 0, 1;
  Eigen::VectorXd y3(3);
  y3 << 1, 2, 3;
  CHECK_THROWS_AS(fit_tps(three, y3, 1.0), FitError);

  Eigen::MatrixXd line(6, 2);
  for (int i = 0; i < 6; ++i) {
    line(i, 0) = i;
    line(i, 1) = 2.0 * i + 1.0;
  }
  Eigen::VectorXd y6(6);
  y6 << 1, 2, 1, 2, 1, 2;
  CHECK_THROWS_AS(fit_tps(line, y6, 1.0), FitError);

  Eigen::MatrixXd ok(4, 2);
  ok << 0, 0, 1, 0, 0, 1, 1, 1;
  Eigen::VectorXd y4(4);
  y4 << 1, 2, 3, 4;
  CHECK_THROWS_AS(fit_tps(ok, y4, 0.0), FitError);
  CHECK_THROWS_AS(fit_tps(ok, y4, -1.0), FitError);
}

TEST_CASE("duplicate sites are merged, not fatal") {
  Eigen::MatrixXd pts(6, 2);
  pts << 0, 0, 1, 0, 0, 1, 1, 1, 1, 1, 0.5, 0.5;
  Eigen::VectorXd y(6);
  y << 1, 2, 3, 4, 6, 2.5;
  TPSFit fit = fit_tps(pts, y, 0.01);
  CHECK(fit.centers.rows() == 5);
  CHECK(fit.weights.sum() == 6.0);
  check_side_conditions(fit);
  // the duplicated site contributes its mean response
  int dup = -1;
  for (int i = 0; i < 5; ++i)
    if (fit.weights(i) == 2.0) dup = i;
  REQUIRE(dup >= 0);
  CHECK(fit.values(dup) == 5.0);
}

TEST_CASE("surface grid shape and hull flags") {
  Eigen::MatrixXd pts(8, 2);
  pts << 0, 0, 4, 0, 0, 4, 4, 4, 2, 2, 1, 3, 3, 1, 2, 1;
  Eigen::VectorXd y(8);
  for (int i = 0; i < 8; ++i) y(i) = pts(i, 0) + pts(i, 1);
  TPSFit fit = fit_tps(pts, y, 1.0);

  SECTION("2x2 grid has 4 corner rows") {
    auto grid = surface_grid(fit, {0, 4, 0, 4}, 2, 2);
    REQUIRE(grid.points.size() == 4);
    CHECK(grid.points[0].lon == 0.0);
    CHECK(grid.points[0].lat == 0.0);
    CHECK(grid.points[3].lon == 4.0);
    CHECK(grid.points[3].lat == 4.0);
    CHECK_FALSE(grid.hull_degenerate);
    for (const auto& p : grid.points) CHECK(p.inside_hull);
  }
  SECTION("points beyond the sites fall outside the hull") {
    auto grid = surface_grid(fit, {-2, 6, -2, 6}, 5, 5);
    REQUIRE(grid.points.size() == 25);
    int inside = 0;
    for (const auto& p : grid.points) inside += p.inside_hull;
    CHECK(inside > 0);
    CHECK(inside < 25);
    for (const auto& p : grid.points)
      if (p.lon < 0 || p.lon > 4 || p.lat < 0 || p.lat > 4)
        CHECK_FALSE(p.inside_hull);
  }
  SECTION("resolution below 2 is rejected") {
    CHECK_THROWS_AS(surface_grid(fit, {0, 4, 0, 4}, 1, 5), FitError);
  }
}

TEST_CASE("collinear sites degrade to an all-outside hull") {
  // collinear x with jitter in y keeps the fit nonsingular but the test
  // needs truly collinear sites, so build the hull path via a fit whose
  // sites form a line plus evaluate-only geometry checks
  std::vector<std::pair<double, double>> line = {
      {0, 0}, {1, 2}, {2, 4}, {3, 6}};
  auto hull = detail::convex_hull(line);
  CHECK(hull.size() < 3);
  CHECK_FALSE(detail::inside_convex(hull, 1.0, 2.0));
}

TEST_CASE("fit summary back-transforms the intercept") {
  Rng rng(111);
  auto pts = random_points(rng, 16, 2.0, 9.0);
  Eigen::VectorXd y(16);
  for (int i = 0; i < 16; ++i) y(i) = 4.0 + 0.25 * pts(i, 0) - 0.5 * pts(i, 1);
  TPSFit fit = fit_tps(pts, y, 1e9);
  FitSummary s = fit_summary(fit);
  CHECK(s.n == 16);
  CHECK(s.lambda == 1e9);
  CHECK(std::abs(s.edf - 3.0) < 0.01);
  // the plane's value at raw (0,0) given slopes beta1/scale, beta2/scale
  double vx = fit.beta(1) / fit.scale;
  double vy = fit.beta(2) / fit.scale;
  Eigen::MatrixXd origin(1, 2);
  origin << 0.0, 0.0;
  double at_origin = evaluate(fit, origin)(0);
  // radial part is ~0 at lambda=1e9, so intercept matches the plane at zero
  CHECK(std::abs(s.intercept - (at_origin)) < 1e-4);
  CHECK(std::abs((4.0) - (s.intercept)) < 1e-4);
  CHECK(std::abs(vx - 0.25) < 1e-6);
  CHECK(std::abs(vy + 0.5) < 1e-6);
}
