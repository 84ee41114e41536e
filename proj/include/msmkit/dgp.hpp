#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "msmkit/panel.hpp"
#include "msmkit/rng.hpp"

namespace msmkit {

enum class Mechanism {
  None,          // no masking (full-data runs)
  MCAR,
  MarAL,         // missingness depends on past treatment and confounders
  MarALY,        // ... plus the outcome
  MarALV,        // ... plus the independent risk factor
  Constant,      // missing iff the value remained constant since the last visit
  Differential,  // MAR missingness that removes the confounder-treatment arrow
};

const char* mechanism_name(Mechanism m);
std::optional<Mechanism> parse_mechanism(const std::string& name);

// Per-variable missingness model on the logit scale. Predictors are the
// previous-occasion treatment and the most recently observed confounder
// values, so the mechanism stays missing-at-random for nonmonotone patterns.
struct MissModelCoefficients {
  double intercept = 0.0;
  double a_prev = 0.0;
  double l1_prev = 0.0;
  double l2_prev = 0.0;
  double y = 0.0;
  double v = 0.0;
};

struct MissingnessModels {
  std::array<MissModelCoefficients, 2> l1;  // occasions 1 and 2
  std::array<MissModelCoefficients, 2> l2;
};

// Structural coefficients of the data-generating process.
//
// The outcome is built from the never-treated confounder path (factual and
// never-treated paths share their random innovations), which makes the
// structural theta equal to the g-computation regime contrasts exactly while
// keeping L a genuine time-varying confounder with treatment-confounder
// feedback.
struct DGPCoefficients {
  double l1_baseline_p = 0.5;
  double l2_baseline_sd = 1.0;

  // treatment assignment: logit = intercept_k + l1 * L1_k + l2 * L2_k + v * V
  std::array<double, kOccasions> treat_intercept{-1.15625, -1.140625, -1.125};
  double treat_l1 = 0.5;
  double treat_l2 = 0.5;
  double treat_v = 0.0;

  // L1 transition: logit = intercept + lag * L1_{k-1} + treat * A_{k-1}
  double l1_trans_intercept = -0.2;
  double l1_trans_lag = 1.2;
  double l1_trans_treat = -1.0;

  // L2 transition: lag * L2_{k-1} + treat * A_{k-1} + Normal(0, noise_sd)
  double l2_trans_lag = 0.7;
  double l2_trans_treat = -0.8;
  double l2_noise_sd = 0.7;

  // outcome: theta . A + out_l1 * L1(never-treated, k=2)
  //                    + out_l2 * L2(never-treated, k=2) + out_v * V + noise
  std::array<double, kOccasions> theta{1.0, 0.8, 0.6};
  double out_l1 = 0.5;
  double out_l2 = 0.5;
  double out_v = 0.4;
  double out_noise_sd = 1.0;

  // Constant mechanism: explicit carry-over probability per variable and
  // occasion, plus the Bernoulli keep-probabilities that thin the
  // chance-equality events of the binary confounder to the target rate.
  double persistence = 0.2254033307585166;
  std::array<double, 2> l1_keep_prob{0.313969, 0.311705};
};

struct ScenarioConfig {
  Mechanism mechanism = Mechanism::MCAR;
  int n = 2000;
  std::uint64_t seed = 1;
  // Probability that a subject has at least one missing confounder value at
  // a given post-baseline occasion.
  double target_missing_rate = 0.40;
  DGPCoefficients dgp;
  MissingnessModels miss;
};

// Scenario with the calibrated default coefficients for the mechanism.
ScenarioConfig make_scenario(Mechanism mechanism, int n, std::uint64_t seed);

// Fully observed latent panel. Under Differential the per-cell missingness
// flags are drawn during generation (they alter the treatment assignment)
// and stored on the dataset for apply_missingness.
PanelDataset generate_full(const ScenarioConfig& config);
PanelDataset generate_full(const ScenarioConfig& config, RngStream gen, RngStream mask);

// Masks confounder cells at occasions 1 and 2 according to the mechanism.
// Masked values are overwritten with NaN; the observed flags are the source
// of truth downstream.
PanelDataset apply_missingness(const PanelDataset& latent, const ScenarioConfig& config);
PanelDataset apply_missingness(const PanelDataset& latent, const ScenarioConfig& config,
                               RngStream mask);

struct TrueEffects {
  std::array<double, 3> theta{};
  std::array<double, 3> mcse{};
};

// Potential-outcome oracle: simulates the four absorbing regimes
// (0,0,0), (0,0,1), (0,1,1), (1,1,1) with forced treatment paths and reads
// the effects off the regime contrasts of the saturated MSM parameterization.
TrueEffects true_effects(const ScenarioConfig& config, std::size_t n_oracle = 1000000);
TrueEffects true_effects(const ScenarioConfig& config, std::size_t n_oracle, RngStream rng);

// Bisection on a logistic sub-model intercept until the simulated marginal
// rate is within `tolerance` of the target.
double calibrate_intercept(const std::function<double(double)>& rate_at, double target,
                           double lo = -10.0, double hi = 10.0, int max_iterations = 40,
                           double tolerance = 0.005);

// Recalibrates the treatment and missingness intercepts of a scenario by
// simulation (used when coefficients or targets differ from the defaults).
void calibrate_scenario(ScenarioConfig& config, std::size_t n_sim = 100000);

// Per-variable missingness rate implied by the per-occasion target under
// conditionally independent indicators.
double per_variable_missing_rate(double per_occasion_rate);

}  // namespace msmkit
