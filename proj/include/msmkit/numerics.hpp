#pragma once

#include <Eigen/Dense>
#include <optional>

#include "msmkit/rng.hpp"

namespace msmkit {

// Probabilities are clipped to [kProbClip, 1 - kProbClip] before any
// reciprocal so that inverse-probability weights stay finite.
inline constexpr double kProbClip = 1e-10;

// Reciprocal-condition threshold below which a weighted normal matrix is
// treated as singular.
inline constexpr double kSingularRcond = 1e-12;

struct FitOptions {
  int max_iterations = 100;
  double tolerance = 1e-8;
  double separation_bound = 15.0;
  std::optional<Eigen::VectorXd> start;  // warm start for IRLS
};

struct RegressionFit {
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd covariance;         // model-based
  Eigen::MatrixXd robust_covariance;  // linear fits: weights-as-known sandwich
  Eigen::MatrixXd normal_inverse;     // (X'WX)^-1, kept for posterior draws
  double residual_variance = 0.0;     // linear fits only
  double log_likelihood = 0.0;        // logistic fits only
  bool converged = false;
  int iterations = 0;
  int n_obs = 0;
  int n_params = 0;
  bool logistic = false;
};

// Weighted least squares. Returns both the model-based covariance
// sigma^2 (X'WX)^-1 and a heteroskedasticity-consistent sandwich with the
// weights treated as known.
RegressionFit fit_wls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& w);

// Weighted Bernoulli maximum likelihood via iteratively reweighted least
// squares with step-halving. Covariance is the inverse observed information.
RegressionFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const Eigen::VectorXd& w, const FitOptions& opts = {});

// expit(X beta), clipped to [kProbClip, 1 - kProbClip].
Eigen::VectorXd predict_prob(const RegressionFit& fit, const Eigen::MatrixXd& X);

inline double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Weighted Bernoulli log-likelihood at given probabilities.
double bernoulli_log_likelihood(const Eigen::VectorXd& y, const Eigen::VectorXd& p,
                                const Eigen::VectorXd& w);

// Score vector X' w (y - p) of a logistic model at given coefficients.
Eigen::VectorXd logistic_score(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& w, const Eigen::VectorXd& beta);

struct PosteriorDraw {
  Eigen::VectorXd coefficients;
  double residual_variance = 0.0;  // linear draws only
};

// Approximate proper-imputation draw from the parameter posterior.
// Linear fits: residual variance from a scaled inverse chi-square with
// n - p degrees of freedom, then coefficients from a normal centered at the
// estimate with covariance scaled by the drawn variance. Logistic fits:
// large-sample normal with the fit covariance.
PosteriorDraw posterior_draw(const RegressionFit& fit, RngStream& rng);

}  // namespace msmkit
