#include "msmkit/numerics.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <string>

#include "msmkit/errors.hpp"

namespace msmkit {

namespace {

void check_design(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& w) {
  if (X.rows() != y.size() || X.rows() != w.size()) {
    throw DimensionMismatch("design rows (" + std::to_string(X.rows()) +
                            ") do not match response (" + std::to_string(y.size()) +
                            ") and weights (" + std::to_string(w.size()) + ")");
  }
  if (X.rows() < X.cols()) {
    throw DimensionMismatch("fewer observations than parameters: n=" +
                            std::to_string(X.rows()) + ", p=" + std::to_string(X.cols()));
  }
  if (!X.allFinite() || !y.allFinite() || !w.allFinite()) {
    throw ValidationError("non-finite entries in regression inputs");
  }
  if ((w.array() < 0.0).any()) throw ValidationError("negative weights");
}

// Inverse of a symmetric positive-definite normal matrix with an explicit
// reciprocal-condition check.
Eigen::MatrixXd invert_normal_matrix(const Eigen::MatrixXd& A) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  if (!(smax > 0.0) || smin / smax < kSingularRcond) {
    throw SingularDesign("weighted normal matrix numerically singular (rcond=" +
                         std::to_string(smax > 0.0 ? smin / smax : 0.0) + ")");
  }
  return svd.solve(Eigen::MatrixXd::Identity(A.rows(), A.cols()));
}

// Symmetric square root used for posterior draws; tolerates semi-definite
// covariances by clamping tiny negative eigenvalues.
Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double bernoulli_log_likelihood(const Eigen::VectorXd& y, const Eigen::VectorXd& p,
                                const Eigen::VectorXd& w) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double pi = std::min(std::max(p(i), kProbClip), 1.0 - kProbClip);
    ll += w(i) * (y(i) * std::log(pi) + (1.0 - y(i)) * std::log1p(-pi));
  }
  return ll;
}

Eigen::VectorXd logistic_score(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& w, const Eigen::VectorXd& beta) {
  Eigen::VectorXd eta = X * beta;
  Eigen::VectorXd p = eta.unaryExpr([](double v) { return expit(v); });
  return X.transpose() * (w.array() * (y - p).array()).matrix();
}

RegressionFit fit_wls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& w) {
  check_design(X, y, w);
  if (w.sum() <= 0.0) throw ValidationError("weights sum to zero");

  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();

  Eigen::MatrixXd Xw = w.asDiagonal() * X;            // W X
  Eigen::MatrixXd A = X.transpose() * Xw;             // X' W X
  Eigen::MatrixXd Ainv = invert_normal_matrix(A);
  Eigen::VectorXd beta = Ainv * (Xw.transpose() * y);

  Eigen::VectorXd resid = y - X * beta;
  double rss = (w.array() * resid.array().square()).sum();
  double sigma2 = n > p ? rss / static_cast<double>(n - p) : 0.0;

  // Sandwich with weights treated as known: A^-1 (sum w_i^2 r_i^2 x x') A^-1.
  Eigen::VectorXd meat_w = (w.array() * resid.array()).square();
  Eigen::MatrixXd meat = X.transpose() * meat_w.asDiagonal() * X;

  RegressionFit fit;
  fit.coefficients = std::move(beta);
  fit.normal_inverse = Ainv;
  fit.covariance = sigma2 * Ainv;
  fit.robust_covariance = Ainv * meat * Ainv;
  fit.residual_variance = sigma2;
  fit.converged = true;
  fit.iterations = 1;
  fit.n_obs = static_cast<int>(n);
  fit.n_params = static_cast<int>(p);
  fit.logistic = false;
  return fit;
}

RegressionFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const Eigen::VectorXd& w, const FitOptions& opts) {
  check_design(X, y, w);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y(i) != 0.0 && y(i) != 1.0) throw ValidationError("logistic response must be 0/1");
  }

  const Eigen::Index p = X.cols();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  if (opts.start) {
    if (opts.start->size() != p) throw DimensionMismatch("warm start has wrong length");
    beta = *opts.start;
  }

  auto probs = [&X](const Eigen::VectorXd& b) {
    return Eigen::VectorXd((X * b).unaryExpr([](double v) { return expit(v); }));
  };

  Eigen::VectorXd pvec = probs(beta);
  double ll = bernoulli_log_likelihood(y, pvec, w);

  RegressionFit fit;
  fit.n_obs = static_cast<int>(X.rows());
  fit.n_params = static_cast<int>(p);
  fit.logistic = true;

  Eigen::MatrixXd info(p, p);
  bool converged = false;
  int iter = 0;
  for (; iter < opts.max_iterations; ++iter) {
    Eigen::VectorXd irls_w = (w.array() * pvec.array() * (1.0 - pvec.array())).matrix();
    info = X.transpose() * irls_w.asDiagonal() * X;
    Eigen::VectorXd score = X.transpose() * (w.array() * (y - pvec).array()).matrix();

    if (score.cwiseAbs().maxCoeff() < opts.tolerance) {
      converged = true;
      break;
    }

    Eigen::MatrixXd info_inv = invert_normal_matrix(info);
    Eigen::VectorXd delta = info_inv * score;

    // Step-halving keeps the log-likelihood nondecreasing.
    double step = 1.0;
    Eigen::VectorXd candidate;
    double ll_new;
    for (int h = 0; h < 40; ++h) {
      candidate = beta + step * delta;
      ll_new = bernoulli_log_likelihood(y, probs(candidate), w);
      if (ll_new >= ll - 1e-12) break;
      step *= 0.5;
    }

    const double max_change = (step * delta).cwiseAbs().maxCoeff();
    beta = candidate;
    pvec = probs(beta);
    ll = ll_new;

    if (beta.cwiseAbs().maxCoeff() > opts.separation_bound) {
      throw Separation("coefficient magnitude exceeded " +
                       std::to_string(opts.separation_bound) +
                       "; data likely separated");
    }
    if (max_change < opts.tolerance) {
      converged = true;
      ++iter;
      break;
    }
  }

  if (!converged) {
    throw NonConvergence("IRLS did not converge in " +
                         std::to_string(opts.max_iterations) + " iterations");
  }

  Eigen::VectorXd irls_w = (w.array() * pvec.array() * (1.0 - pvec.array())).matrix();
  info = X.transpose() * irls_w.asDiagonal() * X;
  fit.normal_inverse = invert_normal_matrix(info);
  fit.covariance = fit.normal_inverse;
  fit.coefficients = std::move(beta);
  fit.log_likelihood = ll;
  fit.converged = true;
  fit.iterations = iter;
  return fit;
}

Eigen::VectorXd predict_prob(const RegressionFit& fit, const Eigen::MatrixXd& X) {
  if (X.cols() != fit.coefficients.size()) {
    throw DimensionMismatch("prediction design has " + std::to_string(X.cols()) +
                            " columns, fit has " + std::to_string(fit.coefficients.size()));
  }
  Eigen::VectorXd p = (X * fit.coefficients).unaryExpr([](double v) { return expit(v); });
  return p.cwiseMax(kProbClip).cwiseMin(1.0 - kProbClip);
}

PosteriorDraw posterior_draw(const RegressionFit& fit, RngStream& rng) {
  if (!fit.converged) throw NotConverged("posterior draw requires a converged fit");

  const Eigen::Index p = fit.coefficients.size();
  Eigen::VectorXd z(p);
  for (Eigen::Index j = 0; j < p; ++j) z(j) = rng.normal();

  PosteriorDraw draw;
  if (fit.logistic) {
    draw.coefficients = fit.coefficients + symmetric_sqrt(fit.covariance) * z;
    return draw;
  }

  const double df = std::max(1, fit.n_obs - fit.n_params);
  draw.residual_variance = fit.residual_variance * df / rng.chi_square(df);
  draw.coefficients =
      fit.coefficients +
      std::sqrt(draw.residual_variance) * (symmetric_sqrt(fit.normal_inverse) * z);
  return draw;
}

}  // namespace msmkit
