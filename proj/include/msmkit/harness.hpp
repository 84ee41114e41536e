#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "msmkit/dgp.hpp"
#include "msmkit/missing.hpp"

namespace msmkit {

enum class Method { Full, Unadjusted, Adjusted, CC, LOCF, MPA, MI, IPMW };

const char* method_name(Method m);
std::optional<Method> parse_method(const std::string& name);

// Dispatcher used by the replication engine, the bootstrap and the CLI.
// Full/Unadjusted/Adjusted expect complete data; the five missing-data
// methods accept masked panels. Only MI consumes the random stream.
EffectEstimates analyze(const PanelDataset& data, Method method, const MethodOptions& opts,
                        RngStream rng);

struct Measures {
  double bias = 0.0;
  double emp_se = 0.0;
  double coverage = 0.0;
  double mse = 0.0;
  double mcse_bias = 0.0;
  double mcse_coverage = 0.0;
  double mcse_emp_se = 0.0;
  int s_success = 0;
  int s_fail = 0;
};

// Simulation-study performance measures with their Monte-Carlo standard
// errors; coverage from theta_hat +- 1.96 se intervals.
Measures performance_measures(const std::vector<double>& estimates,
                              const std::vector<double>& ses, double theta_true);

struct ReplicationOutcome {
  bool ok = false;
  std::array<double, 3> theta{};
  std::array<double, 3> se{};
  std::array<double, 3> ci_low{};
  std::array<double, 3> ci_high{};
  std::string error;
};

struct MethodReport {
  Method method = Method::Full;
  std::array<Measures, 3> by_k{};
  std::vector<ReplicationOutcome> replications;
  int failures = 0;
};

struct PerformanceReport {
  std::string scenario;
  int n = 0;
  int replications = 0;
  std::uint64_t master_seed = 0;
  std::array<double, 3> theta_true{};
  std::array<double, 3> theta_true_mcse{};
  std::vector<MethodReport> methods;
  bool flagged = false;  // some method failed in more than 10% of replications
};

struct RunOptions {
  int threads = 0;  // 0: use the available hardware parallelism
  std::size_t oracle_n = 1000000;
  MethodOptions method;
  bool log_failures = false;  // one structured line per failure to stderr
};

// Runs S replications of generate -> mask -> analyze for each requested
// method. Full-data methods are evaluated on the latent panel, the
// missing-data methods on the masked panel. Replication r uses streams keyed
// by (master_seed, r, role), so parallel and serial runs are identical.
PerformanceReport run_scenario(const ScenarioConfig& scenario,
                               const std::vector<Method>& methods, int S,
                               std::uint64_t master_seed, const RunOptions& opts = {});

struct BootstrapCi {
  std::array<double, 3> lo{};
  std::array<double, 3> hi{};
  int resamples = 0;
  int failed = 0;
};

// Subject-level nonparametric bootstrap with the full pipeline (weights
// re-estimated per resample); percentile 95% intervals.
BootstrapCi bootstrap_ci(const PanelDataset& data, Method method, int B, RngStream rng,
                         const MethodOptions& opts = {});

enum class ReportFormat { Csv, Markdown };

void write_summary(const std::vector<PerformanceReport>& reports, std::ostream& out,
                   ReportFormat format);
void write_raw(const std::vector<PerformanceReport>& reports, std::ostream& out);

// Writes summary.(csv|md) and optionally raw.csv into out_dir; returns the
// paths written.
std::vector<std::string> emit_report(const std::vector<PerformanceReport>& reports,
                                     const std::string& out_dir, ReportFormat format,
                                     bool include_raw);

}  // namespace msmkit
