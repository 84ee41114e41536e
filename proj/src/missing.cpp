#include "msmkit/missing.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <numeric>

#include "msmkit/errors.hpp"

namespace msmkit {

namespace {

constexpr double kZ975 = 1.959963984540054;

std::vector<int> indices_where(const std::vector<std::uint8_t>& mask) {
  std::vector<int> idx;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) idx.push_back(static_cast<int>(i));
  }
  return idx;
}

// Drops subjects whose treatment path or outcome is unobserved (possible in
// applied datasets only; simulated panels always have them).
PanelDataset drop_incomplete_treatment_outcome(const PanelDataset& data) {
  std::vector<int> keep;
  for (std::size_t i = 0; i < data.size(); ++i) {
    bool ok = data.y_obs[i] != 0;
    for (int k = 0; k < kOccasions && ok; ++k) ok = data.a_obs[k][i] != 0;
    if (ok) keep.push_back(static_cast<int>(i));
  }
  if (keep.size() == data.size()) return data;
  return subset(data, keep);
}

}  // namespace

EffectEstimates cc_analyze(const PanelDataset& data, const MethodOptions& opts) {
  const auto mask = complete_case_mask(data);
  const auto idx = indices_where(mask);
  PanelDataset cc = subset(data, idx);

  // Every weight-model risk set needs at least as many complete cases as
  // the model has parameters.
  constexpr int kWeightModelParams = 3;
  for (int k = 0; k < kOccasions; ++k) {
    int risk = 0;
    for (std::size_t i = 0; i < cc.size(); ++i) {
      if (k == 0 || cc.a[k - 1][i] == 0) ++risk;
    }
    if (risk < kWeightModelParams) {
      throw InsufficientCompleteCases("complete-case risk set at occasion " +
                                      std::to_string(k) + " has " + std::to_string(risk) +
                                      " subjects");
    }
  }

  const WeightVector w = treatment_weights(cc, opts.weights);
  return fit_msm(cc, w, Comparator::None);
}

PanelDataset locf_impute(const PanelDataset& data) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data.l1_obs[0][i] || !data.l2_obs[0][i]) {
      throw MissingBaseline("subject " + std::to_string(i) +
                            " has unobserved baseline confounders");
    }
  }

  PanelDataset out = data;
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (int k = 1; k < kOccasions; ++k) {
      if (!out.l1_obs[k][i]) {
        out.l1[k][i] = out.l1[k - 1][i];  // k-1 already filled
        out.l1_obs[k][i] = 1;
      }
      if (!out.l2_obs[k][i]) {
        out.l2[k][i] = out.l2[k - 1][i];
        out.l2_obs[k][i] = 1;
      }
    }
  }
  return out;
}

EffectEstimates locf_analyze(const PanelDataset& data, const MethodOptions& opts) {
  PanelDataset completed = drop_incomplete_treatment_outcome(locf_impute(data));
  const WeightVector w = treatment_weights(completed, opts.weights);
  return fit_msm(completed, w, Comparator::None);
}

PooledEstimate rubin_pool(const std::vector<Eigen::VectorXd>& estimates,
                          const std::vector<Eigen::MatrixXd>& covariances) {
  const int m = static_cast<int>(estimates.size());
  if (m < 2) throw MTooSmall("Rubin pooling needs at least 2 imputations, got " +
                             std::to_string(m));
  if (covariances.size() != estimates.size()) {
    throw DimensionMismatch("estimate and covariance counts differ");
  }
  const Eigen::Index p = estimates.front().size();
  for (int j = 0; j < m; ++j) {
    if (estimates[j].size() != p || covariances[j].rows() != p || covariances[j].cols() != p) {
      throw DimensionMismatch("imputation " + std::to_string(j) +
                              " has inconsistent dimensions");
    }
  }

  PooledEstimate pooled;
  pooled.imputations = m;
  pooled.theta = Eigen::VectorXd::Zero(p);
  for (const auto& est : estimates) pooled.theta += est;
  pooled.theta /= static_cast<double>(m);

  pooled.within = Eigen::MatrixXd::Zero(p, p);
  for (const auto& cov : covariances) pooled.within += cov;
  pooled.within /= static_cast<double>(m);

  pooled.between = Eigen::MatrixXd::Zero(p, p);
  for (const auto& est : estimates) {
    const Eigen::VectorXd d = est - pooled.theta;
    pooled.between += d * d.transpose();
  }
  pooled.between /= static_cast<double>(m - 1);

  const double inflation = 1.0 + 1.0 / static_cast<double>(m);
  pooled.total_covariance = pooled.within + inflation * pooled.between;

  pooled.df = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::infinity());
  for (Eigen::Index j = 0; j < p; ++j) {
    const double b = pooled.between(j, j);
    if (b > 0.0) {
      const double r = pooled.within(j, j) / (inflation * b);
      pooled.df(j) = static_cast<double>(m - 1) * (1.0 + r) * (1.0 + r);
    }
  }
  return pooled;
}

EffectEstimates PooledEstimate::to_effects(int n_used) const {
  EffectEstimates est;
  est.n_used = n_used;
  for (int k = 0; k < 3; ++k) {
    const Eigen::Index j = k + 1;  // skip intercept
    est.theta[k] = theta(j);
    est.se[k] = std::sqrt(total_covariance(j, j));
    double q = kZ975;
    if (std::isfinite(df(j)) && df(j) > 0.0) {
      q = boost::math::quantile(boost::math::students_t_distribution<double>(df(j)), 0.975);
    }
    est.ci_low[k] = est.theta[k] - q * est.se[k];
    est.ci_high[k] = est.theta[k] + q * est.se[k];
  }
  return est;
}

ChainedImputer::ChainedImputer(const PanelDataset& data) : data_(&data) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data.l1_obs[0][i] || !data.l2_obs[0][i]) {
      throw MissingBaseline("imputation requires observed baseline confounders");
    }
    bool ok = data.y_obs[i] != 0;
    for (int k = 0; k < kOccasions && ok; ++k) ok = data.a_obs[k][i] != 0;
    if (!ok) {
      throw ValidationError("imputation models require observed A and Y; drop such rows first");
    }
  }

  // Fixed visit order: L1_1, L2_1, L1_2, L2_2 (only those with missing cells).
  for (int k = 1; k < kOccasions; ++k) {
    for (int var = 0; var < 2; ++var) {
      const auto& obs = var == 0 ? data.l1_obs[k] : data.l2_obs[k];
      Target t;
      t.var = var;
      t.k = k;
      for (std::size_t i = 0; i < data.size(); ++i) {
        (obs[i] ? t.observed_rows : t.missing_rows).push_back(static_cast<int>(i));
      }
      if (!t.missing_rows.empty()) targets_.push_back(std::move(t));
    }
  }
}

PanelDataset ChainedImputer::impute(int cycles, RngStream& rng) const {
  const PanelDataset& data = *data_;
  const std::size_t n = data.size();

  // Working values for the six L cells.
  std::array<std::vector<double>, kOccasions> l1 = data.l1;
  std::array<std::vector<double>, kOccasions> l2 = data.l2;

  // Initial fill: random draws from each variable's observed margin.
  for (const Target& t : targets_) {
    auto& col = t.var == 0 ? l1[t.k] : l2[t.k];
    for (int i : t.missing_rows) {
      const int pick =
          t.observed_rows[static_cast<std::size_t>(rng.uniform() * t.observed_rows.size())];
      col[i] = col[pick];
    }
  }

  // Imputation model design: intercept, the other five L cells, A0..A2, V, Y.
  const int p = 1 + 5 + kOccasions + 1 + 1;
  auto build_row = [&](int i, const Target& t, Eigen::RowVectorXd& row) {
    int c = 0;
    row(c++) = 1.0;
    for (int k = 0; k < kOccasions; ++k) {
      if (!(t.var == 0 && k == t.k)) row(c++) = l1[k][i];
    }
    for (int k = 0; k < kOccasions; ++k) {
      if (!(t.var == 1 && k == t.k)) row(c++) = l2[k][i];
    }
    for (int k = 0; k < kOccasions; ++k) row(c++) = static_cast<double>(data.a[k][i]);
    row(c++) = data.v[i];
    row(c++) = data.y[i];
  };

  std::vector<Eigen::VectorXd> warm(targets_.size());

  for (int cycle = 0; cycle < cycles; ++cycle) {
    for (std::size_t ti = 0; ti < targets_.size(); ++ti) {
      const Target& t = targets_[ti];
      const Eigen::Index n_obs = static_cast<Eigen::Index>(t.observed_rows.size());
      Eigen::MatrixXd X(n_obs, p);
      Eigen::VectorXd y(n_obs);
      Eigen::RowVectorXd row(p);
      for (Eigen::Index r = 0; r < n_obs; ++r) {
        const int i = t.observed_rows[r];
        build_row(i, t, row);
        X.row(r) = row;
        y(r) = t.var == 0 ? l1[t.k][i] : l2[t.k][i];
      }
      const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n_obs);

      if (t.var == 0) {
        FitOptions fo;
        if (warm[ti].size() == p) fo.start = warm[ti];
        const RegressionFit fit = fit_logistic(X, y, ones, fo);
        warm[ti] = fit.coefficients;
        const PosteriorDraw draw = posterior_draw(fit, rng);
        for (int i : t.missing_rows) {
          build_row(i, t, row);
          const double eta = row * draw.coefficients;
          const double prob =
              std::min(std::max(expit(eta), kProbClip), 1.0 - kProbClip);
          l1[t.k][i] = rng.bernoulli(prob) ? 1.0 : 0.0;
        }
      } else {
        const RegressionFit fit = fit_wls(X, y, ones);
        const PosteriorDraw draw = posterior_draw(fit, rng);
        const double sd = std::sqrt(draw.residual_variance);
        for (int i : t.missing_rows) {
          build_row(i, t, row);
          l2[t.k][i] = row * draw.coefficients + rng.normal(0.0, sd);
        }
      }
    }
  }

  PanelDataset completed = data;
  completed.l1 = l1;
  completed.l2 = l2;
  for (int k = 0; k < kOccasions; ++k) {
    std::fill(completed.l1_obs[k].begin(), completed.l1_obs[k].end(), 1);
    std::fill(completed.l2_obs[k].begin(), completed.l2_obs[k].end(), 1);
  }
  return completed;
}

MiResult mi_analyze(const PanelDataset& data, const MethodOptions& opts, RngStream rng) {
  if (opts.mi_imputations < 2) {
    throw MTooSmall("multiple imputation needs M >= 2");
  }
  PanelDataset base = drop_incomplete_treatment_outcome(data);
  ChainedImputer imputer(base);

  // Independent substreams are derived up front so the M imputations could
  // run concurrently without changing results.
  std::vector<RngStream> streams;
  streams.reserve(opts.mi_imputations);
  for (int m = 0; m < opts.mi_imputations; ++m) {
    streams.push_back(rng.child(static_cast<std::uint64_t>(m)));
  }

  MiResult result;
  std::vector<Eigen::VectorXd> estimates;
  std::vector<Eigen::MatrixXd> covariances;
  for (int m = 0; m < opts.mi_imputations; ++m) {
    try {
      const PanelDataset completed = imputer.impute(opts.mi_cycles, streams[m]);
      const WeightVector w = treatment_weights(completed, opts.weights);
      const RegressionFit fit = msm_regression(completed, w.final_weight, Comparator::None);
      estimates.push_back(fit.coefficients);
      covariances.push_back(fit.robust_covariance);
    } catch (const Error& e) {
      ++result.n_failed;
      result.failures.push_back(e.what());
    }
  }

  if (result.n_failed * 5 > opts.mi_imputations) {
    throw FailedImputation(std::to_string(result.n_failed) + " of " +
                           std::to_string(opts.mi_imputations) + " imputations failed");
  }
  result.pooled = rubin_pool(estimates, covariances);
  result.effects = result.pooled.to_effects(static_cast<int>(base.size()));
  return result;
}

namespace {

// Pattern-specific weight model: confounder columns available in a pattern.
std::vector<int> pattern_covariates(MissPattern p) {
  switch (p) {
    case MissPattern::BothObserved: return {0, 1};  // L1, L2
    case MissPattern::L1Missing: return {1};
    case MissPattern::L2Missing: return {0};
    case MissPattern::BothMissing: return {};
  }
  return {};
}

}  // namespace

MpaResult mpa_analyze_detail(const PanelDataset& data, const MethodOptions& opts) {
  const std::size_t n = data.size();
  for (std::size_t i = 0; i < n; ++i) {
    bool ok = data.y_obs[i] != 0;
    for (int k = 0; k < kOccasions && ok; ++k) ok = data.a_obs[k][i] != 0;
    if (!ok) {
      throw ValidationError(
          "the missingness pattern approach cannot accommodate missing treatment "
          "or outcome data");
    }
    if (!data.l1_obs[0][i] || !data.l2_obs[0][i]) {
      throw MissingBaseline("baseline confounders must be observed");
    }
  }

  MpaResult result;
  std::array<std::vector<double>, kOccasions> cumulative;
  for (auto& c : cumulative) c.assign(n, 1.0);

  for (int k = 0; k < kOccasions; ++k) {
    if (k > 0) cumulative[k] = cumulative[k - 1];

    // Partition this occasion's risk set by missingness pattern (a single
    // both-observed cell at baseline).
    std::array<std::vector<int>, 4> cells;
    for (std::size_t i = 0; i < n; ++i) {
      if (k > 0 && data.a[k - 1][i] == 1) continue;
      const MissPattern pat = k == 0 ? MissPattern::BothObserved : pattern_of(data, i, k);
      cells[static_cast<int>(pat)].push_back(static_cast<int>(i));
    }

    for (int pi = 0; pi < 4; ++pi) {
      const auto& cell = cells[pi];
      if (cell.empty()) continue;
      const MissPattern pat = static_cast<MissPattern>(pi);
      std::vector<int> covs = pattern_covariates(pat);

      auto note = [&](int dropped, const char* why) {
        result.merge_notes.push_back("occasion " + std::to_string(k) + " pattern " +
                                     to_string(pat) + ": dropped covariate " +
                                     (dropped == 0 ? "L1" : "L2") + " (" + why +
                                     ", cell size " + std::to_string(cell.size()) + ")");
      };
      auto drop_one = [&](const char* why) {
        // Drop the least prevalent covariate first: binary L1 scored by its
        // minority share, continuous L2 always counts as fully prevalent.
        int drop = covs.back();
        if (std::find(covs.begin(), covs.end(), 0) != covs.end()) {
          double mean = 0.0;
          for (int i : cell) mean += data.l1[k][i];
          mean /= static_cast<double>(cell.size());
          if (std::min(mean, 1.0 - mean) < 0.5) drop = 0;
        }
        covs.erase(std::remove(covs.begin(), covs.end(), drop), covs.end());
        note(drop, why);
      };

      // Sparse cells: reduce the model, then fall back to intercept-only.
      // Below the absolute floor even a pattern proportion is meaningless.
      if (cell.size() < 5) {
        throw SparsePattern("occasion " + std::to_string(k) + " pattern " + to_string(pat) +
                            " has only " + std::to_string(cell.size()) + " subjects");
      }
      auto min_size = [](std::size_t p_full) { return std::max<std::size_t>(25, 5 * p_full); };
      while (!covs.empty() && cell.size() < min_size(covs.size() + 1)) drop_one("sparse cell");

      const Eigen::Index m = static_cast<Eigen::Index>(cell.size());
      Eigen::VectorXd yk(m);
      bool constant_response = true;
      for (Eigen::Index r = 0; r < m; ++r) {
        const int i = cell[r];
        yk(r) = static_cast<double>(data.a[k][i]);
        if (yk(r) != yk(0)) constant_response = false;
      }
      // An intercept-only cell needs no estimation: the numerator and the
      // denominator are the same fit on the same subjects, so the factor is
      // exactly 1. The same holds when nobody (or everybody) initiates.
      if (constant_response) continue;

      while (!covs.empty()) {
        Eigen::MatrixXd Xd(m, static_cast<Eigen::Index>(covs.size()) + 1);
        for (Eigen::Index r = 0; r < m; ++r) {
          const int i = cell[r];
          Xd(r, 0) = 1.0;
          for (std::size_t c = 0; c < covs.size(); ++c) {
            Xd(r, static_cast<Eigen::Index>(c) + 1) =
                covs[c] == 0 ? data.l1[k][i] : data.l2[k][i];
          }
        }
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(m);
        try {
          const RegressionFit denom = fit_logistic(Xd, yk, ones);
          const Eigen::MatrixXd Xn = Eigen::MatrixXd::Ones(m, 1);
          const RegressionFit numer = fit_logistic(Xn, yk, ones);
          const Eigen::VectorXd p_den = predict_prob(denom, Xd);
          const Eigen::VectorXd p_num = predict_prob(numer, Xn);
          for (Eigen::Index r = 0; r < m; ++r) {
            const int i = cell[r];
            const double num = yk(r) == 1.0 ? p_num(r) : 1.0 - p_num(r);
            const double den = yk(r) == 1.0 ? p_den(r) : 1.0 - p_den(r);
            cumulative[k][i] *= num / den;
          }
          break;
        } catch (const Error&) {
          drop_one("degenerate fit");
        }
      }
    }
  }

  WeightVector wv;
  wv.cumulative = std::move(cumulative);
  wv.final_weight = wv.cumulative[kOccasions - 1];
  double sum = 0.0, mx = 0.0;
  for (double w : wv.final_weight) {
    sum += w;
    mx = std::max(mx, w);
    if (w > opts.weights.extreme_threshold) ++wv.diagnostics.n_extreme;
  }
  wv.diagnostics.mean = sum / static_cast<double>(n);
  wv.diagnostics.max = mx;

  result.effects = fit_msm(data, wv, Comparator::None);
  return result;
}

EffectEstimates mpa_analyze(const PanelDataset& data, const MethodOptions& opts) {
  return mpa_analyze_detail(data, opts).effects;
}

IpmwResult ipmw_analyze_detail(const PanelDataset& data, const MethodOptions& opts) {
  const std::size_t n = data.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!data.l1_obs[0][i] || !data.l2_obs[0][i]) {
      throw MissingBaseline("IPMW requires fully observed baseline data");
    }
  }

  // Monotone censoring: a subject is censored at the first occasion with an
  // incomplete confounder record, even if later cells are observed.
  // complete_at[k]: L1_k, L2_k and A_k all observed.
  auto complete_at = [&](std::size_t i, int k) {
    return data.l1_obs[k][i] && data.l2_obs[k][i] && data.a_obs[k][i];
  };

  std::vector<double> miss_prob(n, 1.0);  // cumulative P(complete record so far)
  std::vector<std::uint8_t> uncensored(n, 1);

  for (int k = 1; k < kOccasions; ++k) {
    std::vector<int> at_risk;
    for (std::size_t i = 0; i < n; ++i) {
      if (uncensored[i]) at_risk.push_back(static_cast<int>(i));
    }
    if (at_risk.empty()) {
      throw InsufficientCompleteCases("all subjects censored before occasion " +
                                      std::to_string(k));
    }

    // Predictors: V plus treatment and confounder history through k-1.
    const Eigen::Index p = static_cast<Eigen::Index>(2 + 3 * k);
    const Eigen::Index m = static_cast<Eigen::Index>(at_risk.size());
    Eigen::MatrixXd X(m, p);
    Eigen::VectorXd r(m);
    for (Eigen::Index row = 0; row < m; ++row) {
      const int i = at_risk[row];
      Eigen::Index c = 0;
      X(row, c++) = 1.0;
      X(row, c++) = data.v[i];
      for (int j = 0; j < k; ++j) {
        X(row, c++) = static_cast<double>(data.a[j][i]);
        X(row, c++) = data.l1[j][i];
        X(row, c++) = data.l2[j][i];
      }
      r(row) = complete_at(i, k) ? 1.0 : 0.0;
    }
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(m);
    const RegressionFit fit = fit_logistic(X, r, ones);
    const Eigen::VectorXd prob = predict_prob(fit, X);

    double marginal = 1.0;
    if (opts.ipmw_stabilized) {
      marginal = r.mean();
    }

    for (Eigen::Index row = 0; row < m; ++row) {
      const int i = at_risk[row];
      if (r(row) == 1.0) {
        miss_prob[i] *= prob(row) / marginal;
      } else {
        uncensored[i] = 0;
      }
    }
  }

  IpmwResult result;
  std::vector<int> cc_idx;
  std::vector<double> miss_weight;
  for (std::size_t i = 0; i < n; ++i) {
    if (uncensored[i] && data.y_obs[i] && data.a_obs[0][i]) {
      cc_idx.push_back(static_cast<int>(i));
      miss_weight.push_back(1.0 / miss_prob[i]);
    }
  }
  if (cc_idx.size() < 4) {
    throw InsufficientCompleteCases("only " + std::to_string(cc_idx.size()) +
                                    " complete cases for IPMW");
  }

  double sum = 0.0, mx = 0.0;
  for (double w : miss_weight) {
    sum += w;
    mx = std::max(mx, w);
    if (w > opts.weights.extreme_threshold) ++result.missingness_diagnostics.n_extreme;
  }
  result.missingness_diagnostics.mean = sum / static_cast<double>(miss_weight.size());
  result.missingness_diagnostics.max = mx;
  result.n_complete = static_cast<int>(cc_idx.size());

  PanelDataset cc = subset(data, cc_idx);
  // The treatment models are fitted on the complete cases weighted by the
  // missingness weights, so they estimate the full-population assignment
  // model rather than its selection-distorted complete-case version.
  const WeightVector tw = treatment_weights(cc, miss_weight, opts.weights);
  std::vector<double> combined(cc_idx.size());
  for (std::size_t j = 0; j < cc_idx.size(); ++j) {
    combined[j] = tw.final_weight[j] * miss_weight[j];
  }
  result.effects = effects_from_regression(msm_regression(cc, combined, Comparator::None));
  return result;
}

EffectEstimates ipmw_analyze(const PanelDataset& data, const MethodOptions& opts) {
  return ipmw_analyze_detail(data, opts).effects;
}

}  // namespace msmkit
