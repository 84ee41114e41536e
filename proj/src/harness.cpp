#include "msmkit/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "msmkit/errors.hpp"
#include "msmkit/msm.hpp"

namespace msmkit {

namespace {

constexpr double kZ975 = 1.96;  // coverage convention of the study design

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string error_kind(const Error& e) {
  if (dynamic_cast<const Separation*>(&e)) return "Separation";
  if (dynamic_cast<const NonConvergence*>(&e)) return "NonConvergence";
  if (dynamic_cast<const SingularDesign*>(&e)) return "SingularDesign";
  if (dynamic_cast<const EmptyRiskSet*>(&e)) return "EmptyRiskSet";
  if (dynamic_cast<const InsufficientCompleteCases*>(&e)) return "InsufficientCompleteCases";
  if (dynamic_cast<const SparsePattern*>(&e)) return "SparsePattern";
  if (dynamic_cast<const FailedImputation*>(&e)) return "FailedImputation";
  if (dynamic_cast<const MissingBaseline*>(&e)) return "MissingBaseline";
  if (dynamic_cast<const ValidationError*>(&e)) return "ValidationError";
  return "Error";
}

}  // namespace

const char* method_name(Method m) {
  switch (m) {
    case Method::Full: return "full";
    case Method::Unadjusted: return "unadjusted";
    case Method::Adjusted: return "adjusted";
    case Method::CC: return "cc";
    case Method::LOCF: return "locf";
    case Method::MPA: return "mpa";
    case Method::MI: return "mi";
    case Method::IPMW: return "ipmw";
  }
  return "?";
}

std::optional<Method> parse_method(const std::string& name) {
  for (Method m : {Method::Full, Method::Unadjusted, Method::Adjusted, Method::CC,
                   Method::LOCF, Method::MPA, Method::MI, Method::IPMW}) {
    if (name == method_name(m)) return m;
  }
  return std::nullopt;
}

EffectEstimates analyze(const PanelDataset& data, Method method, const MethodOptions& opts,
                        RngStream rng) {
  switch (method) {
    case Method::Full: {
      const WeightVector w = treatment_weights(data, opts.weights);
      return fit_msm(data, w, Comparator::None);
    }
    case Method::Unadjusted:
      return fit_msm(data, WeightVector{}, Comparator::Unadjusted);
    case Method::Adjusted:
      return fit_msm(data, WeightVector{}, Comparator::CovariateAdjusted);
    case Method::CC:
      return cc_analyze(data, opts);
    case Method::LOCF:
      return locf_analyze(data, opts);
    case Method::MPA:
      return mpa_analyze(data, opts);
    case Method::MI:
      return mi_analyze(data, opts, rng).effects;
    case Method::IPMW:
      return ipmw_analyze(data, opts);
  }
  throw Error("unknown method");
}

Measures performance_measures(const std::vector<double>& estimates,
                              const std::vector<double>& ses, double theta_true) {
  const std::size_t s = estimates.size();
  if (s < 2) throw TooFewReplications("performance measures need at least 2 estimates");
  if (ses.size() != s) throw DimensionMismatch("estimates and ses differ in length");
  for (double se : ses) {
    if (!(se > 0.0)) throw ValidationError("standard errors must be positive");
  }

  std::vector<std::uint8_t> covered(s);
  for (std::size_t i = 0; i < s; ++i) {
    covered[i] = (estimates[i] - kZ975 * ses[i] <= theta_true &&
                  theta_true <= estimates[i] + kZ975 * ses[i])
                     ? 1
                     : 0;
  }

  Measures m;
  double mean = 0.0;
  for (double est : estimates) mean += est;
  mean /= static_cast<double>(s);
  m.bias = mean - theta_true;

  double ss = 0.0, mse = 0.0;
  int cov = 0;
  for (std::size_t i = 0; i < s; ++i) {
    ss += (estimates[i] - mean) * (estimates[i] - mean);
    mse += (estimates[i] - theta_true) * (estimates[i] - theta_true);
    cov += covered[i];
  }
  m.emp_se = std::sqrt(ss / static_cast<double>(s - 1));
  m.mse = mse / static_cast<double>(s);
  m.coverage = static_cast<double>(cov) / static_cast<double>(s);
  m.mcse_bias = m.emp_se / std::sqrt(static_cast<double>(s));
  m.mcse_coverage = std::sqrt(m.coverage * (1.0 - m.coverage) / static_cast<double>(s));
  m.mcse_emp_se = m.emp_se / std::sqrt(2.0 * static_cast<double>(s - 1));
  m.s_success = static_cast<int>(s);
  return m;
}

namespace {

Measures measures_from_outcomes(const std::vector<ReplicationOutcome>& outcomes, int k,
                                double theta_true) {
  std::vector<double> estimates;
  std::vector<std::uint8_t> covered;
  int fails = 0;
  for (const auto& rec : outcomes) {
    if (!rec.ok) {
      ++fails;
      continue;
    }
    estimates.push_back(rec.theta[k]);
    covered.push_back(rec.ci_low[k] <= theta_true && theta_true <= rec.ci_high[k] ? 1 : 0);
  }
  const std::size_t s = estimates.size();
  if (s < 2) throw TooFewReplications("fewer than 2 successful replications");

  Measures m;
  double mean = 0.0;
  for (double est : estimates) mean += est;
  mean /= static_cast<double>(s);
  m.bias = mean - theta_true;

  double ss = 0.0, mse = 0.0;
  int cov = 0;
  for (std::size_t i = 0; i < s; ++i) {
    ss += (estimates[i] - mean) * (estimates[i] - mean);
    mse += (estimates[i] - theta_true) * (estimates[i] - theta_true);
    cov += covered[i];
  }
  m.emp_se = std::sqrt(ss / static_cast<double>(s - 1));
  m.mse = mse / static_cast<double>(s);
  m.coverage = static_cast<double>(cov) / static_cast<double>(s);
  m.mcse_bias = m.emp_se / std::sqrt(static_cast<double>(s));
  m.mcse_coverage = std::sqrt(m.coverage * (1.0 - m.coverage) / static_cast<double>(s));
  m.mcse_emp_se = m.emp_se / std::sqrt(2.0 * static_cast<double>(s - 1));
  m.s_success = static_cast<int>(s);
  m.s_fail = fails;
  return m;
}

}  // namespace

PerformanceReport run_scenario(const ScenarioConfig& scenario,
                               const std::vector<Method>& methods, int S,
                               std::uint64_t master_seed, const RunOptions& opts) {
  if (S < 2) throw TooFewReplications("run_scenario needs at least 2 replications");

  PerformanceReport report;
  report.scenario = mechanism_name(scenario.mechanism);
  report.n = scenario.n;
  report.replications = S;
  report.master_seed = master_seed;

  const TrueEffects truth =
      true_effects(scenario, opts.oracle_n, make_stream(master_seed, 0, StreamRole::Oracle));
  report.theta_true = truth.theta;
  report.theta_true_mcse = truth.mcse;

  std::vector<std::vector<ReplicationOutcome>> outcomes(methods.size());
  for (auto& v : outcomes) v.resize(S);

  std::mutex log_mutex;
  auto run_replication = [&](int r) {
    const std::uint64_t rep = static_cast<std::uint64_t>(r) + 1;
    RngStream gen = make_stream(master_seed, rep, StreamRole::Generate);
    RngStream mask = make_stream(master_seed, rep, StreamRole::Mask);
    const PanelDataset latent = generate_full(scenario, gen, mask);
    const PanelDataset masked = apply_missingness(latent, scenario, mask);

    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      const Method method = methods[mi];
      const bool full_data =
          method == Method::Full || method == Method::Unadjusted || method == Method::Adjusted;
      ReplicationOutcome& rec = outcomes[mi][r];
      try {
        const EffectEstimates est =
            analyze(full_data ? latent : masked, method, opts.method,
                    make_stream(master_seed, rep, StreamRole::Imputation));
        rec.ok = true;
        rec.theta = est.theta;
        rec.se = est.se;
        rec.ci_low = est.ci_low;
        rec.ci_high = est.ci_high;
      } catch (const Error& e) {
        rec.ok = false;
        rec.error = error_kind(e);
        if (opts.log_failures) {
          std::lock_guard<std::mutex> lock(log_mutex);
          std::cerr << "[fail] scenario=" << report.scenario
                    << " method=" << method_name(method) << " replication=" << rep
                    << " error=" << rec.error << '\n';
        }
      }
    }
  };

  int threads = opts.threads > 0 ? opts.threads
                                 : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, S));
  if (threads == 1) {
    for (int r = 0; r < S; ++r) run_replication(r);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t]() {
        for (int r = t; r < S; r += threads) run_replication(r);
      });
    }
    for (auto& th : pool) th.join();
  }

  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    MethodReport mr;
    mr.method = methods[mi];
    mr.replications = std::move(outcomes[mi]);
    for (const auto& rec : mr.replications) {
      if (!rec.ok) ++mr.failures;
    }
    for (int k = 0; k < 3; ++k) {
      mr.by_k[k] = measures_from_outcomes(mr.replications, k, report.theta_true[k]);
    }
    if (mr.failures * 10 > S) report.flagged = true;
    report.methods.push_back(std::move(mr));
  }
  return report;
}

BootstrapCi bootstrap_ci(const PanelDataset& data, Method method, int B, RngStream rng,
                         const MethodOptions& opts) {
  if (B < 100) throw ValidationError("bootstrap needs at least 100 resamples");
  const std::size_t n = data.size();

  std::vector<RngStream> streams;
  streams.reserve(B);
  for (int b = 0; b < B; ++b) streams.push_back(rng.child(static_cast<std::uint64_t>(b)));

  std::array<std::vector<double>, 3> draws;
  int failed = 0;
  for (int b = 0; b < B; ++b) {
    std::vector<int> idx(n);
    for (std::size_t i = 0; i < n; ++i) {
      idx[i] = static_cast<int>(streams[b].uniform() * static_cast<double>(n));
    }
    try {
      const PanelDataset resample = subset(data, idx);
      const EffectEstimates est = analyze(resample, method, opts, streams[b].child(1));
      for (int k = 0; k < 3; ++k) draws[k].push_back(est.theta[k]);
    } catch (const Error&) {
      ++failed;
    }
  }
  if (failed * 10 > B) {
    throw TooManyFailures(std::to_string(failed) + " of " + std::to_string(B) +
                          " bootstrap resamples failed");
  }

  auto percentile = [](std::vector<double>& v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
  };

  BootstrapCi ci;
  ci.resamples = B;
  ci.failed = failed;
  for (int k = 0; k < 3; ++k) {
    ci.lo[k] = percentile(draws[k], 0.025);
    ci.hi[k] = percentile(draws[k], 0.975);
  }
  return ci;
}

namespace {

struct SummaryRow {
  std::string scenario;
  std::string method;
  int k;
  const Measures* m;
};

std::vector<SummaryRow> sorted_rows(const std::vector<PerformanceReport>& reports) {
  std::vector<SummaryRow> rows;
  for (const auto& rep : reports) {
    for (const auto& mr : rep.methods) {
      for (int k = 0; k < 3; ++k) {
        rows.push_back({rep.scenario, method_name(mr.method), k, &mr.by_k[k]});
      }
    }
  }
  std::sort(rows.begin(), rows.end(), [](const SummaryRow& a, const SummaryRow& b) {
    if (a.scenario != b.scenario) return a.scenario < b.scenario;
    if (a.method != b.method) return a.method < b.method;
    return a.k < b.k;
  });
  return rows;
}

}  // namespace

void write_summary(const std::vector<PerformanceReport>& reports, std::ostream& out,
                   ReportFormat format) {
  const auto rows = sorted_rows(reports);
  const char* cols[] = {"scenario", "method",    "k",
                        "bias",     "emp_se",    "coverage",
                        "mse",      "mcse_bias", "mcse_coverage",
                        "s_success", "s_fail"};
  if (format == ReportFormat::Csv) {
    for (std::size_t c = 0; c < std::size(cols); ++c) {
      out << (c ? "," : "") << cols[c];
    }
    out << '\n';
    for (const auto& row : rows) {
      out << row.scenario << ',' << row.method << ',' << row.k << ',' << fmt(row.m->bias)
          << ',' << fmt(row.m->emp_se) << ',' << fmt(row.m->coverage) << ','
          << fmt(row.m->mse) << ',' << fmt(row.m->mcse_bias) << ','
          << fmt(row.m->mcse_coverage) << ',' << row.m->s_success << ',' << row.m->s_fail
          << '\n';
    }
    return;
  }
  out << '|';
  for (const char* c : cols) out << ' ' << c << " |";
  out << "\n|";
  for (std::size_t c = 0; c < std::size(cols); ++c) out << " --- |";
  out << '\n';
  for (const auto& row : rows) {
    out << "| " << row.scenario << " | " << row.method << " | " << row.k << " | "
        << fmt(row.m->bias) << " | " << fmt(row.m->emp_se) << " | " << fmt(row.m->coverage)
        << " | " << fmt(row.m->mse) << " | " << fmt(row.m->mcse_bias) << " | "
        << fmt(row.m->mcse_coverage) << " | " << row.m->s_success << " | " << row.m->s_fail
        << " |\n";
  }
}

void write_raw(const std::vector<PerformanceReport>& reports, std::ostream& out) {
  out << "scenario,method,k,replication,estimate,se\n";
  for (const auto& rep : reports) {
    for (const auto& mr : rep.methods) {
      for (int k = 0; k < 3; ++k) {
        for (std::size_t r = 0; r < mr.replications.size(); ++r) {
          const auto& rec = mr.replications[r];
          out << rep.scenario << ',' << method_name(mr.method) << ',' << k << ',' << (r + 1)
              << ',';
          if (rec.ok) {
            out << fmt(rec.theta[k]) << ',' << fmt(rec.se[k]);
          } else {
            out << "NA,NA";
          }
          out << '\n';
        }
      }
    }
  }
}

std::vector<std::string> emit_report(const std::vector<PerformanceReport>& reports,
                                     const std::string& out_dir, ReportFormat format,
                                     bool include_raw) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + out_dir + "'");

  std::vector<std::string> written;
  const std::string summary_path =
      (fs::path(out_dir) / (format == ReportFormat::Csv ? "summary.csv" : "summary.md"))
          .string();
  {
    std::ofstream out(summary_path);
    if (!out) throw IoError("cannot open '" + summary_path + "' for writing");
    write_summary(reports, out, format);
  }
  written.push_back(summary_path);

  if (include_raw) {
    const std::string raw_path = (fs::path(out_dir) / "raw.csv").string();
    std::ofstream out(raw_path);
    if (!out) throw IoError("cannot open '" + raw_path + "' for writing");
    write_raw(reports, out);
    written.push_back(raw_path);
  }
  return written;
}

}  // namespace msmkit
