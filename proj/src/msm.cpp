#include "msmkit/msm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "msmkit/errors.hpp"

namespace msmkit {

namespace {

constexpr double kZ975 = 1.959963984540054;

void require_complete_confounders(const PanelDataset& data) {
  for (int k = 0; k < kOccasions; ++k) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (!data.l1_obs[k][i] || !data.l2_obs[k][i] || !data.a_obs[k][i]) {
        throw ValidationError(
            "treatment weights require fully observed L and A cells; "
            "handle missingness first (subject " +
            std::to_string(i) + ", occasion " + std::to_string(k) + ")");
      }
    }
  }
}

int count_clipped(const Eigen::VectorXd& p) {
  int n = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) <= kProbClip || p(i) >= 1.0 - kProbClip) ++n;
  }
  return n;
}

}  // namespace

WeightVector treatment_weights(const PanelDataset& data, const TreatmentWeightOptions& opts) {
  return treatment_weights(data, {}, opts);
}

WeightVector treatment_weights(const PanelDataset& data, const std::vector<double>& fit_weights,
                               const TreatmentWeightOptions& opts) {
  require_complete_confounders(data);
  const std::size_t n = data.size();
  if (!fit_weights.empty() && fit_weights.size() != n) {
    throw DimensionMismatch("fit weights do not match the panel size");
  }

  WeightVector wv;
  for (auto& c : wv.cumulative) c.assign(n, 1.0);
  wv.final_weight.assign(n, 1.0);

  for (int k = 0; k < kOccasions; ++k) {
    std::vector<int> risk_set;
    risk_set.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (k == 0 || data.a[k - 1][i] == 0) risk_set.push_back(static_cast<int>(i));
    }
    if (risk_set.empty()) {
      throw EmptyRiskSet("no untreated subjects remain at occasion " + std::to_string(k));
    }

    const Eigen::Index m = static_cast<Eigen::Index>(risk_set.size());
    Eigen::MatrixXd Xd(m, 3);
    Eigen::MatrixXd Xn = Eigen::MatrixXd::Ones(m, 1);
    Eigen::VectorXd yk(m);
    Eigen::VectorXd wk(m);
    for (Eigen::Index r = 0; r < m; ++r) {
      const int i = risk_set[r];
      Xd(r, 0) = 1.0;
      Xd(r, 1) = data.l1[k][i];
      Xd(r, 2) = data.l2[k][i];
      yk(r) = static_cast<double>(data.a[k][i]);
      wk(r) = fit_weights.empty() ? 1.0 : fit_weights[i];
    }

    const RegressionFit denom = fit_logistic(Xd, yk, wk);
    const RegressionFit numer = fit_logistic(Xn, yk, wk);
    const Eigen::VectorXd p_den = predict_prob(denom, Xd);
    const Eigen::VectorXd p_num = predict_prob(numer, Xn);
    wv.diagnostics.n_clipped += count_clipped(p_den) + count_clipped(p_num);

    for (std::size_t i = 0; i < n; ++i) {
      if (k > 0) wv.cumulative[k][i] = wv.cumulative[k - 1][i];
    }
    for (Eigen::Index r = 0; r < m; ++r) {
      const int i = risk_set[r];
      const double num = yk(r) == 1.0 ? p_num(r) : 1.0 - p_num(r);
      const double den = yk(r) == 1.0 ? p_den(r) : 1.0 - p_den(r);
      wv.cumulative[k][i] *= num / den;
    }
  }

  wv.final_weight = wv.cumulative[kOccasions - 1];

  if (opts.truncation_percentile) {
    const double q = *opts.truncation_percentile;
    if (q <= 0.0 || q >= 0.5) throw ValidationError("truncation percentile must be in (0, 0.5)");
    std::vector<double> sorted = wv.final_weight;
    std::sort(sorted.begin(), sorted.end());
    const auto at = [&](double frac) {
      const std::size_t idx = static_cast<std::size_t>(frac * (sorted.size() - 1));
      return sorted[idx];
    };
    const double lo = at(q);
    const double hi = at(1.0 - q);
    for (double& w : wv.final_weight) {
      if (w < lo) {
        w = lo;
        ++wv.diagnostics.n_truncated;
      } else if (w > hi) {
        w = hi;
        ++wv.diagnostics.n_truncated;
      }
    }
  }

  double sum = 0.0, max = 0.0;
  for (double w : wv.final_weight) {
    sum += w;
    max = std::max(max, w);
    if (w > opts.extreme_threshold) ++wv.diagnostics.n_extreme;
  }
  wv.diagnostics.mean = sum / static_cast<double>(n);
  wv.diagnostics.max = max;
  return wv;
}

RegressionFit msm_regression(const PanelDataset& data, const std::vector<double>& weights,
                             Comparator comparator) {
  const std::size_t n = data.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!data.y_obs[i]) {
      throw ValidationError("outcome missing for subject " + std::to_string(i) +
                            "; the outcome stage requires observed Y");
    }
  }

  const bool adjusted = comparator == Comparator::CovariateAdjusted;
  const Eigen::Index p = adjusted ? 4 + 2 * kOccasions + 1 : 4;
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd y(n);
  Eigen::VectorXd w(n);

  for (std::size_t i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    for (int k = 0; k < kOccasions; ++k) X(i, 1 + k) = static_cast<double>(data.a[k][i]);
    if (adjusted) {
      for (int k = 0; k < kOccasions; ++k) {
        if (!data.l1_obs[k][i] || !data.l2_obs[k][i]) {
          throw ValidationError("covariate-adjusted comparator requires observed confounders");
        }
        X(i, 4 + k) = data.l1[k][i];
        X(i, 4 + kOccasions + k) = data.l2[k][i];
      }
      X(i, 4 + 2 * kOccasions) = data.v[i];
    }
    y(i) = data.y[i];
    if (comparator == Comparator::None) {
      w(i) = weights.empty() ? 1.0 : weights[i];
    } else {
      w(i) = 1.0;
    }
  }

  return fit_wls(X, y, w);
}

EffectEstimates effects_from_regression(const RegressionFit& fit) {
  EffectEstimates est;
  est.n_used = fit.n_obs;
  for (int k = 0; k < kOccasions; ++k) {
    est.theta[k] = fit.coefficients(1 + k);
    est.se[k] = std::sqrt(fit.robust_covariance(1 + k, 1 + k));
    est.ci_low[k] = est.theta[k] - kZ975 * est.se[k];
    est.ci_high[k] = est.theta[k] + kZ975 * est.se[k];
  }
  return est;
}

EffectEstimates fit_msm(const PanelDataset& data, const WeightVector& weights,
                        Comparator comparator) {
  if (comparator == Comparator::None) {
    return effects_from_regression(msm_regression(data, weights.final_weight, comparator));
  }
  return effects_from_regression(msm_regression(data, {}, comparator));
}

namespace {

std::array<BalanceRow, kOccasions> balance_impl(const PanelDataset& data,
                                                const std::vector<double>* final_weight,
                                                const std::array<std::vector<double>, kOccasions>*
                                                    cumulative) {
  std::array<BalanceRow, kOccasions> rows{};
  const std::size_t n = data.size();
  for (int k = 0; k < kOccasions; ++k) {
    double sw[2] = {0, 0};
    double m1[2] = {0, 0}, m2[2] = {0, 0};
    double s1[2] = {0, 0}, s2[2] = {0, 0};
    int count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (k > 0 && data.a[k - 1][i] == 1) continue;
      ++count;
      const int g = data.a[k][i];
      const double w = cumulative ? (*cumulative)[k][i]
                                  : (final_weight ? (*final_weight)[i] : 1.0);
      sw[g] += w;
      m1[g] += w * data.l1[k][i];
      m2[g] += w * data.l2[k][i];
    }
    for (int g = 0; g < 2; ++g) {
      if (sw[g] > 0) {
        m1[g] /= sw[g];
        m2[g] /= sw[g];
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (k > 0 && data.a[k - 1][i] == 1) continue;
      const int g = data.a[k][i];
      const double w = cumulative ? (*cumulative)[k][i]
                                  : (final_weight ? (*final_weight)[i] : 1.0);
      s1[g] += w * (data.l1[k][i] - m1[g]) * (data.l1[k][i] - m1[g]);
      s2[g] += w * (data.l2[k][i] - m2[g]) * (data.l2[k][i] - m2[g]);
    }
    for (int g = 0; g < 2; ++g) {
      if (sw[g] > 0) {
        s1[g] /= sw[g];
        s2[g] /= sw[g];
      }
    }
    const double pool1 = std::sqrt(0.5 * (s1[0] + s1[1]));
    const double pool2 = std::sqrt(0.5 * (s2[0] + s2[1]));
    rows[k].smd_l1 = pool1 > 0 ? (m1[1] - m1[0]) / pool1 : 0.0;
    rows[k].smd_l2 = pool2 > 0 ? (m2[1] - m2[0]) / pool2 : 0.0;
    rows[k].risk_set_size = count;
  }
  return rows;
}

}  // namespace

std::array<BalanceRow, kOccasions> balance_diagnostics(const PanelDataset& data,
                                                       const WeightVector& weights) {
  return balance_impl(data, nullptr, &weights.cumulative);
}

std::array<BalanceRow, kOccasions> balance_diagnostics(const PanelDataset& data) {
  return balance_impl(data, nullptr, nullptr);
}

}  // namespace msmkit
