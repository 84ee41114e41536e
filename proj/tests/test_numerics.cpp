#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "msmkit/errors.hpp"
#include "msmkit/numerics.hpp"
#include "msmkit/rng.hpp"

using namespace msmkit;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Brute-force likelihood grid search for a two-parameter logistic model,
// refined until the step is below 1e-7. Independent of the IRLS path.
VectorXd grid_search_mle(const MatrixXd& X, const VectorXd& y) {
  REQUIRE(X.cols() == 2);
  const VectorXd ones = VectorXd::Ones(X.rows());
  double c0 = 0.0, c1 = 0.0;
  double half_width = 5.0;
  while (half_width / 20.0 > 1e-8) {
    const double step = half_width / 20.0;
    double best = -1e300, b0 = c0, b1 = c1;
    for (int i = -20; i <= 20; ++i) {
      for (int j = -20; j <= 20; ++j) {
        VectorXd beta(2);
        beta << c0 + i * step, c1 + j * step;
        VectorXd p = (X * beta).unaryExpr([](double v) { return expit(v); });
        const double ll = bernoulli_log_likelihood(y, p, ones);
        if (ll > best) {
          best = ll;
          b0 = beta(0);
          b1 = beta(1);
        }
      }
    }
    c0 = b0;
    c1 = b1;
    half_width = 3.0 * step;
  }
  VectorXd out(2);
  out << c0, c1;
  return out;
}

}  // namespace

TEST_CASE("WLS: unit-weight intercept-only mean") {
  MatrixXd X = MatrixXd::Ones(4, 1);
  VectorXd y(4);
  y << 1, 2, 3, 4;
  const auto fit = fit_wls(X, y, VectorXd::Ones(4));
  CHECK(fit.coefficients(0) == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("WLS: exact interpolation through two points") {
  MatrixXd X(2, 2);
  X << 1, 0, 1, 1;
  VectorXd y(2);
  y << 0, 1;
  const auto fit = fit_wls(X, y, VectorXd::Ones(2));
  CHECK(fit.coefficients(0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(fit.coefficients(1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("WLS: weighted mean 12/6") {
  MatrixXd X = MatrixXd::Ones(4, 1);
  VectorXd y(4);
  y << 0, 0, 0, 4;
  VectorXd w(4);
  w << 1, 1, 1, 3;
  const auto fit = fit_wls(X, y, w);
  CHECK(fit.coefficients(0) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("WLS equals OLS under unit weights") {
  RngStream rng(11);
  MatrixXd X(40, 3);
  VectorXd y(40);
  for (int i = 0; i < 40; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = rng.normal();
    X(i, 2) = rng.normal();
    y(i) = 0.3 + 0.5 * X(i, 1) - 0.2 * X(i, 2) + rng.normal();
  }
  const auto wls = fit_wls(X, y, VectorXd::Ones(40));
  const VectorXd ols = (X.transpose() * X).ldlt().solve(X.transpose() * y);
  CHECK((wls.coefficients - ols).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("WLS and logistic coefficients invariant to doubling the weights") {
  RngStream rng(12);
  MatrixXd X(60, 2);
  VectorXd y(60), yb(60), w(60);
  for (int i = 0; i < 60; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = rng.normal();
    y(i) = 1.0 + 0.4 * X(i, 1) + rng.normal();
    yb(i) = rng.bernoulli(expit(0.3 + 0.8 * X(i, 1))) ? 1.0 : 0.0;
    w(i) = 0.5 + rng.uniform();
  }
  const auto lin1 = fit_wls(X, y, w);
  const auto lin2 = fit_wls(X, y, 2.0 * w);
  CHECK((lin1.coefficients - lin2.coefficients).cwiseAbs().maxCoeff() < 1e-10);

  const auto log1 = fit_logistic(X, yb, w);
  const auto log2 = fit_logistic(X, yb, 2.0 * w);
  CHECK((log1.coefficients - log2.coefficients).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("WLS robust covariance matches the sandwich formula") {
  RngStream rng(13);
  MatrixXd X(30, 2);
  VectorXd y(30), w(30);
  for (int i = 0; i < 30; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = rng.normal();
    y(i) = 0.2 * X(i, 1) + rng.normal() * (1.0 + 0.5 * std::abs(X(i, 1)));
    w(i) = 0.5 + rng.uniform();
  }
  const auto fit = fit_wls(X, y, w);
  const MatrixXd A = X.transpose() * w.asDiagonal() * X;
  const MatrixXd Ainv = A.inverse();
  const VectorXd r = y - X * fit.coefficients;
  MatrixXd meat = MatrixXd::Zero(2, 2);
  for (int i = 0; i < 30; ++i) {
    meat += w(i) * w(i) * r(i) * r(i) * X.row(i).transpose() * X.row(i);
  }
  const MatrixXd expected = Ainv * meat * Ainv;
  CHECK((fit.robust_covariance - expected).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("WLS singular design raises") {
  MatrixXd X(4, 2);
  X << 1, 2, 1, 2, 1, 2, 1, 2;  // second column collinear with the first
  VectorXd y(4);
  y << 1, 2, 3, 4;
  CHECK_THROWS_AS(fit_wls(X, y, VectorXd::Ones(4)), SingularDesign);
}

TEST_CASE("WLS dimension mismatch raises") {
  MatrixXd X = MatrixXd::Ones(4, 1);
  VectorXd y(3);
  y << 1, 2, 3;
  CHECK_THROWS_AS(fit_wls(X, y, VectorXd::Ones(4)), DimensionMismatch);
}

TEST_CASE("logistic: symmetric intercept-only gives zero") {
  MatrixXd X = MatrixXd::Ones(8, 1);
  VectorXd y(8);
  y << 0, 0, 0, 0, 1, 1, 1, 1;
  const auto fit = fit_logistic(X, y, VectorXd::Ones(8));
  CHECK(std::abs(fit.coefficients(0)) < 1e-9);
}

TEST_CASE("logistic: intercept-only logit of 3/4") {
  MatrixXd X = MatrixXd::Ones(4, 1);
  VectorXd y(4);
  y << 1, 1, 1, 0;
  const auto fit = fit_logistic(X, y, VectorXd::Ones(4));
  CHECK(fit.coefficients(0) == doctest::Approx(std::log(3.0)).epsilon(1e-8));
}

TEST_CASE("logistic matches the brute-force grid-search MLE") {
  MatrixXd X(8, 2);
  VectorXd y(8);
  // one binary covariate
  const double xs[8] = {0, 0, 0, 0, 1, 1, 1, 1};
  const double ys[8] = {0, 0, 1, 0, 1, 1, 0, 1};
  for (int i = 0; i < 8; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = xs[i];
    y(i) = ys[i];
  }
  const auto fit = fit_logistic(X, y, VectorXd::Ones(8));
  const VectorXd oracle = grid_search_mle(X, y);
  CHECK((fit.coefficients - oracle).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("logistic score vanishes at the optimum") {
  RngStream rng(14);
  MatrixXd X(120, 3);
  VectorXd y(120);
  for (int i = 0; i < 120; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = rng.normal();
    X(i, 2) = rng.bernoulli(0.4) ? 1.0 : 0.0;
    y(i) = rng.bernoulli(expit(-0.2 + 0.7 * X(i, 1) - 0.4 * X(i, 2))) ? 1.0 : 0.0;
  }
  const auto fit = fit_logistic(X, y, VectorXd::Ones(120));
  REQUIRE(fit.converged);
  const VectorXd score = logistic_score(X, y, VectorXd::Ones(120), fit.coefficients);
  CHECK(score.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("analytic score matches central finite differences") {
  RngStream rng(15);
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 25;
    MatrixXd X(n, 2);
    VectorXd y(n), w(n);
    for (int i = 0; i < n; ++i) {
      X(i, 0) = 1.0;
      X(i, 1) = rng.normal();
      y(i) = rng.bernoulli(0.5) ? 1.0 : 0.0;
      w(i) = 0.5 + rng.uniform();
    }
    VectorXd beta(2);
    beta << rng.normal() * 0.5, rng.normal() * 0.5;
    const VectorXd analytic = logistic_score(X, y, w, beta);
    const double h = 1e-6;
    for (int j = 0; j < 2; ++j) {
      VectorXd bp = beta, bm = beta;
      bp(j) += h;
      bm(j) -= h;
      const VectorXd pp = (X * bp).unaryExpr([](double v) { return expit(v); });
      const VectorXd pm = (X * bm).unaryExpr([](double v) { return expit(v); });
      const double fd =
          (bernoulli_log_likelihood(y, pp, w) - bernoulli_log_likelihood(y, pm, w)) / (2 * h);
      const double scale = std::max(1.0, std::abs(analytic(j)));
      CHECK(std::abs(analytic(j) - fd) / scale < 1e-6);
    }
  }
}

TEST_CASE("logistic separation raises") {
  MatrixXd X(6, 2);
  VectorXd y(6);
  for (int i = 0; i < 6; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = i < 3 ? -1.0 : 1.0;
    y(i) = i < 3 ? 0.0 : 1.0;  // perfectly separated
  }
  CHECK_THROWS_AS(fit_logistic(X, y, VectorXd::Ones(6)), Separation);
}

TEST_CASE("predict_prob basics and clipping") {
  MatrixXd X = MatrixXd::Ones(3, 1);
  VectorXd y(3);
  y << 0, 1, 1;
  auto fit = fit_logistic(X, y, VectorXd::Ones(3));

  fit.coefficients(0) = 0.0;
  CHECK(predict_prob(fit, X)(0) == doctest::Approx(0.5));

  fit.coefficients(0) = std::log(3.0);
  CHECK(predict_prob(fit, X)(0) == doctest::Approx(0.75).epsilon(1e-12));

  fit.coefficients(0) = 1e6;
  CHECK(predict_prob(fit, X)(0) == 1.0 - kProbClip);

  MatrixXd bad = MatrixXd::Ones(2, 3);
  CHECK_THROWS_AS(predict_prob(fit, bad), DimensionMismatch);
}

TEST_CASE("posterior draws: determinism, centering and concentration") {
  RngStream data_rng(16);
  const int n = 400;
  MatrixXd X(n, 2);
  VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = data_rng.normal();
    y(i) = 1.5 + 0.7 * X(i, 1) + data_rng.normal(0.0, 0.5);
  }
  const auto fit = fit_wls(X, y, VectorXd::Ones(n));

  RngStream a(77), b(77);
  const auto da = posterior_draw(fit, a);
  const auto db = posterior_draw(fit, b);
  CHECK(da.coefficients == db.coefficients);
  CHECK(da.residual_variance == db.residual_variance);

  RngStream rng(78);
  const int draws = 100000;
  double sum = 0.0, ss = 0.0;
  for (int d = 0; d < draws; ++d) {
    const double v = posterior_draw(fit, rng).coefficients(1);
    sum += v;
    ss += v * v;
  }
  const double mean = sum / draws;
  const double sd = std::sqrt(ss / draws - mean * mean);
  const double mcse = sd / std::sqrt(static_cast<double>(draws));
  CHECK(std::abs(mean - fit.coefficients(1)) < 4.0 * mcse);

  const double asym_se = std::sqrt(fit.covariance(1, 1));
  CHECK(sd < 10.0 * asym_se);

  RegressionFit bad = fit;
  bad.converged = false;
  RngStream c(79);
  CHECK_THROWS_AS(posterior_draw(bad, c), NotConverged);
}

TEST_CASE("logistic posterior draws center on the estimate") {
  RngStream data_rng(17);
  const int n = 500;
  MatrixXd X(n, 2);
  VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = data_rng.normal();
    y(i) = data_rng.bernoulli(expit(-0.3 + 0.9 * X(i, 1))) ? 1.0 : 0.0;
  }
  const auto fit = fit_logistic(X, y, VectorXd::Ones(n));
  RngStream rng(80);
  const int draws = 20000;
  double sum = 0.0, ss = 0.0;
  for (int d = 0; d < draws; ++d) {
    const double v = posterior_draw(fit, rng).coefficients(1);
    sum += v;
    ss += v * v;
  }
  const double mean = sum / draws;
  const double sd = std::sqrt(ss / draws - mean * mean);
  CHECK(std::abs(mean - fit.coefficients(1)) < 4.0 * sd / std::sqrt(double(draws)));
  CHECK(sd == doctest::Approx(std::sqrt(fit.covariance(1, 1))).epsilon(0.05));
}
