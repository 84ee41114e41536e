#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "msmkit/dgp.hpp"
#include "msmkit/harness.hpp"

namespace msmkit {

// Flat TOML-style configuration document: `key = value` lines with scalars,
// quoted strings and arrays. Unknown keys are reported after loading so the
// CLI can fail with the offending key named.
class ConfigDoc {
 public:
  static ConfigDoc parse(std::istream& in);
  static ConfigDoc parse_file(const std::string& path);

  bool has(const std::string& key) const;
  double number(const std::string& key, double fallback) const;
  long integer(const std::string& key, long fallback) const;
  bool boolean(const std::string& key, bool fallback) const;
  std::string text(const std::string& key, const std::string& fallback) const;
  std::vector<std::string> list(const std::string& key,
                                const std::vector<std::string>& fallback) const;

  // Keys present in the document that no getter has touched.
  std::vector<std::string> unconsumed() const;

 private:
  struct Entry {
    bool is_list = false;
    std::string scalar;
    std::vector<std::string> items;
  };
  std::map<std::string, Entry> entries_;
  mutable std::set<std::string> consumed_;
};

struct RunConfig {
  std::vector<Mechanism> scenarios;
  std::vector<Method> methods;
  int n = 2000;
  int replications = 500;
  std::uint64_t seed = 20260801;
  std::string out_dir = "out";
  int threads = 0;
  std::size_t oracle_n = 1000000;
  double target_missing_rate = 0.40;
  MethodOptions method_options;
  int bootstrap_b = 500;
  bool include_raw = true;
  bool markdown = false;
  bool latent = false;
};

// Reads and validates a run configuration; throws ConfigError with the path
// and key on any problem.
RunConfig load_run_config(const std::string& path);

}  // namespace msmkit
