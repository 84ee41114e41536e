#pragma once

#include <array>
#include <optional>
#include <vector>

#include "msmkit/numerics.hpp"
#include "msmkit/panel.hpp"

namespace msmkit {

struct WeightDiagnostics {
  double mean = 0.0;
  double max = 0.0;
  int n_clipped = 0;   // probability evaluations that hit the clip bound
  int n_extreme = 0;   // final weights above extreme_threshold
  int n_truncated = 0;
};

// Cumulative stabilized inverse-probability-of-treatment weights. Weights
// are constant after treatment initiation.
struct WeightVector {
  std::array<std::vector<double>, kOccasions> cumulative;
  std::vector<double> final_weight;
  WeightDiagnostics diagnostics;
};

struct TreatmentWeightOptions {
  // Symmetric percentile truncation of the final weights, e.g. 0.01 caps at
  // the 1st/99th percentiles. Off by default; all simulation-study runs use
  // untruncated weights.
  std::optional<double> truncation_percentile;
  double extreme_threshold = 50.0;
};

// Stabilized treatment weights from per-occasion pooled logistic fits.
// Denominator: A_k on the current L1_k, L2_k among subjects untreated at
// k-1 (everyone at k=0). Numerator: intercept-only on the same risk set.
// Requires fully observed L and A cells.
WeightVector treatment_weights(const PanelDataset& data,
                               const TreatmentWeightOptions& opts = {});

// Variant with per-subject fitting weights for the numerator and denominator
// models (IPMW fits its treatment models on missingness-weighted complete
// cases so the fitted assignment model targets the full population).
WeightVector treatment_weights(const PanelDataset& data,
                               const std::vector<double>& fit_weights,
                               const TreatmentWeightOptions& opts = {});

enum class Comparator {
  None,               // weighted MSM: Y on (1, A0, A1, A2) with supplied weights
  Unadjusted,         // unit weights, same design
  CovariateAdjusted,  // unit weights, design adds L1_k, L2_k (k=0,1,2) and V
};

struct EffectEstimates {
  std::array<double, 3> theta{};
  std::array<double, 3> se{};
  std::array<double, 3> ci_low{};
  std::array<double, 3> ci_high{};
  int n_used = 0;
};

// Outcome stage: weighted linear regression with robust (weights-as-known)
// standard errors. The weights argument is ignored for the comparator
// estimators.
EffectEstimates fit_msm(const PanelDataset& data, const WeightVector& weights,
                        Comparator comparator = Comparator::None);

// Full regression detail of the outcome stage (used for Rubin pooling).
RegressionFit msm_regression(const PanelDataset& data, const std::vector<double>& weights,
                             Comparator comparator);

EffectEstimates effects_from_regression(const RegressionFit& fit);

struct BalanceRow {
  double smd_l1 = 0.0;
  double smd_l2 = 0.0;
  int risk_set_size = 0;
};

// Weighted standardized mean differences of L1, L2 between treated and
// untreated within each occasion's risk set.
std::array<BalanceRow, kOccasions> balance_diagnostics(const PanelDataset& data,
                                                       const WeightVector& weights);

// Unit-weight variant (diagnosing the unweighted sample).
std::array<BalanceRow, kOccasions> balance_diagnostics(const PanelDataset& data);

}  // namespace msmkit
