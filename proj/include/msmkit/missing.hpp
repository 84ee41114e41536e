#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "msmkit/msm.hpp"
#include "msmkit/panel.hpp"
#include "msmkit/rng.hpp"

namespace msmkit {

struct MethodOptions {
  int mi_imputations = 10;
  int mi_cycles = 10;
  TreatmentWeightOptions weights;
  bool ipmw_stabilized = false;
};

// Complete case analysis: restrict to subjects with every cell observed,
// then estimate treatment weights and the weighted outcome model.
EffectEstimates cc_analyze(const PanelDataset& data, const MethodOptions& opts = {});

// Last observation carried forward for the confounder cells. Observed cells
// are never changed; missing L cells take the nearest earlier observed value.
PanelDataset locf_impute(const PanelDataset& data);

// LOCF followed by the standard pipeline on the singly imputed data. The
// reported variance is the ordinary robust variance of that single dataset;
// the imputation uncertainty is deliberately not accounted for.
EffectEstimates locf_analyze(const PanelDataset& data, const MethodOptions& opts = {});

// Rubin's rules pooled estimate.
struct PooledEstimate {
  Eigen::VectorXd theta;
  Eigen::MatrixXd total_covariance;  // W + (1 + 1/M) B
  Eigen::MatrixXd within;
  Eigen::MatrixXd between;
  int imputations = 0;
  Eigen::VectorXd df;  // per coefficient; +inf when B vanishes

  EffectEstimates to_effects(int n_used) const;
};

PooledEstimate rubin_pool(const std::vector<Eigen::VectorXd>& estimates,
                          const std::vector<Eigen::MatrixXd>& covariances);

// Chained-equations imputation engine for the four partially observed cells
// (L1_1, L2_1, L1_2, L2_2). Each variable is regressed on all other L cells,
// the treatment indicators, V and Y; binary cells are imputed by a logistic
// posterior draw plus Bernoulli noise, continuous cells by a linear posterior
// draw plus Gaussian noise.
class ChainedImputer {
 public:
  explicit ChainedImputer(const PanelDataset& data);

  // One completed dataset after `cycles` full sweeps.
  PanelDataset impute(int cycles, RngStream& rng) const;

  bool has_missing() const { return !targets_.empty(); }

 private:
  struct Target {
    int var = 0;  // 0 = L1 (binary), 1 = L2 (continuous)
    int k = 0;
    std::vector<int> observed_rows;
    std::vector<int> missing_rows;
  };

  const PanelDataset* data_;
  std::vector<Target> targets_;
};

struct MiResult {
  PooledEstimate pooled;
  EffectEstimates effects;
  int n_failed = 0;
  std::vector<std::string> failures;
};

// Multiple imputation: M completed datasets, each analyzed with the full
// weight + outcome pipeline, pooled with Rubin's rules. Weights are never
// pooled across imputations; only the effect estimates are.
MiResult mi_analyze(const PanelDataset& data, const MethodOptions& opts, RngStream rng);

struct MpaResult {
  EffectEstimates effects;
  std::vector<std::string> merge_notes;  // sparse-cell model reductions
};

// Missingness pattern approach: pattern-specific weight models at k = 1, 2
// using only the confounders observed in that pattern; the outcome model is
// fitted on the full sample.
MpaResult mpa_analyze_detail(const PanelDataset& data, const MethodOptions& opts = {});
EffectEstimates mpa_analyze(const PanelDataset& data, const MethodOptions& opts = {});

struct IpmwResult {
  EffectEstimates effects;
  WeightDiagnostics missingness_diagnostics;
  int n_complete = 0;
};

// Inverse-probability-of-missingness weighting with monotone censoring at
// the first incomplete occasion. Treatment weights are estimated on the
// complete cases; the analysis weight is the product of the treatment and
// missingness weights.
IpmwResult ipmw_analyze_detail(const PanelDataset& data, const MethodOptions& opts = {});
EffectEstimates ipmw_analyze(const PanelDataset& data, const MethodOptions& opts = {});

}  // namespace msmkit
