#include "msmkit/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "msmkit/errors.hpp"

namespace msmkit {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Strips a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

std::string unquote(const std::string& token, int line_no) {
  std::string t = trim(token);
  if (t.size() >= 2 && t.front() == '"') {
    if (t.back() != '"') {
      throw ConfigError("line " + std::to_string(line_no) + ": unterminated string");
    }
    return t.substr(1, t.size() - 2);
  }
  return t;
}

}  // namespace

ConfigDoc ConfigDoc::parse(std::istream& in) {
  ConfigDoc doc;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": sections are not supported; use flat keys");
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    }
    if (doc.entries_.count(key)) {
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }

    Entry entry;
    if (!value.empty() && value.front() == '[') {
      if (value.back() != ']') {
        throw ConfigError("line " + std::to_string(line_no) + ": unterminated array");
      }
      entry.is_list = true;
      std::string body = value.substr(1, value.size() - 2);
      std::string item;
      bool quoted = false;
      for (char c : body) {
        if (c == '"') quoted = !quoted;
        if (c == ',' && !quoted) {
          const std::string t = trim(item);
          if (!t.empty()) entry.items.push_back(unquote(t, line_no));
          item.clear();
        } else {
          item.push_back(c);
        }
      }
      const std::string t = trim(item);
      if (!t.empty()) entry.items.push_back(unquote(t, line_no));
    } else {
      entry.scalar = unquote(value, line_no);
    }
    doc.entries_.emplace(key, std::move(entry));
  }
  return doc;
}

ConfigDoc ConfigDoc::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse(in);
}

bool ConfigDoc::has(const std::string& key) const { return entries_.count(key) != 0; }

double ConfigDoc::number(const std::string& key, double fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  consumed_.insert(key);
  const std::string& s = it->second.scalar;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (it->second.is_list || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("key '" + key + "': expected a number, got '" + s + "'");
  }
  return value;
}

long ConfigDoc::integer(const std::string& key, long fallback) const {
  const double v = number(key, static_cast<double>(fallback));
  const long r = static_cast<long>(v);
  if (static_cast<double>(r) != v) {
    throw ConfigError("key '" + key + "': expected an integer");
  }
  return r;
}

bool ConfigDoc::boolean(const std::string& key, bool fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  consumed_.insert(key);
  const std::string& s = it->second.scalar;
  if (s == "true") return true;
  if (s == "false") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + s + "'");
}

std::string ConfigDoc::text(const std::string& key, const std::string& fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  consumed_.insert(key);
  if (it->second.is_list) {
    throw ConfigError("key '" + key + "': expected a scalar, got an array");
  }
  return it->second.scalar;
}

std::vector<std::string> ConfigDoc::list(const std::string& key,
                                         const std::vector<std::string>& fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  consumed_.insert(key);
  if (!it->second.is_list) {
    throw ConfigError("key '" + key + "': expected an array like [\"a\", \"b\"]");
  }
  return it->second.items;
}

std::vector<std::string> ConfigDoc::unconsumed() const {
  std::vector<std::string> keys;
  for (const auto& [key, entry] : entries_) {
    if (!consumed_.count(key)) keys.push_back(key);
  }
  return keys;
}

RunConfig load_run_config(const std::string& path) {
  const ConfigDoc doc = ConfigDoc::parse_file(path);
  RunConfig cfg;

  const std::vector<std::string> default_scenarios = {"MCAR",    "MAR_AL",   "MAR_ALY",
                                                      "MAR_ALV", "Constant", "Differential"};
  for (const std::string& name : doc.list("scenarios", default_scenarios)) {
    const auto mech = parse_mechanism(name);
    if (!mech) {
      throw ConfigError("key 'scenarios': unknown mechanism name '" + name + "'");
    }
    cfg.scenarios.push_back(*mech);
  }

  const std::vector<std::string> default_methods = {"cc", "locf", "mpa", "mi", "ipmw"};
  for (const std::string& name : doc.list("methods", default_methods)) {
    const auto m = parse_method(name);
    if (!m) throw ConfigError("key 'methods': unknown method name '" + name + "'");
    cfg.methods.push_back(*m);
  }

  cfg.n = static_cast<int>(doc.integer("n", cfg.n));
  cfg.replications = static_cast<int>(doc.integer("replications", cfg.replications));
  cfg.seed = static_cast<std::uint64_t>(doc.integer("seed", static_cast<long>(cfg.seed)));
  cfg.out_dir = doc.text("out_dir", cfg.out_dir);
  cfg.threads = static_cast<int>(doc.integer("threads", cfg.threads));
  cfg.oracle_n = static_cast<std::size_t>(doc.integer("oracle_n", static_cast<long>(cfg.oracle_n)));
  cfg.target_missing_rate = doc.number("target_missing_rate", cfg.target_missing_rate);
  cfg.method_options.mi_imputations =
      static_cast<int>(doc.integer("mi_imputations", cfg.method_options.mi_imputations));
  cfg.method_options.mi_cycles =
      static_cast<int>(doc.integer("mi_cycles", cfg.method_options.mi_cycles));
  cfg.method_options.ipmw_stabilized =
      doc.boolean("ipmw_stabilized", cfg.method_options.ipmw_stabilized);
  cfg.method_options.weights.extreme_threshold =
      doc.number("extreme_weight_threshold", cfg.method_options.weights.extreme_threshold);
  if (doc.has("truncation_percentile")) {
    cfg.method_options.weights.truncation_percentile = doc.number("truncation_percentile", 0.0);
  }
  cfg.bootstrap_b = static_cast<int>(doc.integer("bootstrap_b", cfg.bootstrap_b));
  cfg.include_raw = doc.boolean("include_raw", cfg.include_raw);
  cfg.markdown = doc.boolean("markdown", cfg.markdown);
  cfg.latent = doc.boolean("latent", cfg.latent);

  if (cfg.n <= 0) throw ConfigError("key 'n': must be positive");
  if (cfg.replications < 2) throw ConfigError("key 'replications': must be at least 2");
  if (cfg.target_missing_rate <= 0.0 || cfg.target_missing_rate >= 1.0) {
    throw ConfigError("key 'target_missing_rate': must be in (0, 1)");
  }
  if (cfg.scenarios.empty()) throw ConfigError("key 'scenarios': at least one scenario");
  if (cfg.methods.empty()) throw ConfigError("key 'methods': at least one method");

  const auto leftover = doc.unconsumed();
  if (!leftover.empty()) {
    throw ConfigError("unknown configuration key '" + leftover.front() + "'");
  }
  return cfg;
}

}  // namespace msmkit
