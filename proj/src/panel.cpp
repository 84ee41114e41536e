#include "msmkit/panel.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "msmkit/errors.hpp"

namespace msmkit {

void PanelDataset::resize(std::size_t n) {
  v.assign(n, 0.0);
  y.assign(n, 0.0);
  y_obs.assign(n, 1);
  for (int k = 0; k < kOccasions; ++k) {
    l1[k].assign(n, 0.0);
    l2[k].assign(n, 0.0);
    a[k].assign(n, 0);
    l1_obs[k].assign(n, 1);
    l2_obs[k].assign(n, 1);
    a_obs[k].assign(n, 1);
  }
}

const char* to_string(MissPattern p) {
  switch (p) {
    case MissPattern::BothObserved: return "both-observed";
    case MissPattern::L1Missing: return "L1-missing";
    case MissPattern::L2Missing: return "L2-missing";
    case MissPattern::BothMissing: return "both-missing";
  }
  return "?";
}

MissPattern pattern_of(const PanelDataset& data, std::size_t subject, int k) {
  const bool l1_ok = data.l1_obs[k][subject] != 0;
  const bool l2_ok = data.l2_obs[k][subject] != 0;
  if (l1_ok && l2_ok) return MissPattern::BothObserved;
  if (!l1_ok && l2_ok) return MissPattern::L1Missing;
  if (l1_ok && !l2_ok) return MissPattern::L2Missing;
  return MissPattern::BothMissing;
}

std::vector<std::uint8_t> complete_case_mask(const PanelDataset& data) {
  const std::size_t n = data.size();
  std::vector<std::uint8_t> mask(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    bool complete = data.y_obs[i] != 0;
    for (int k = 0; k < kOccasions && complete; ++k) {
      complete = data.l1_obs[k][i] && data.l2_obs[k][i] && data.a_obs[k][i];
    }
    mask[i] = complete ? 1 : 0;
  }
  return mask;
}

PanelDataset subset(const PanelDataset& data, const std::vector<int>& indices) {
  PanelDataset out;
  out.resize(indices.size());
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const std::size_t i = static_cast<std::size_t>(indices[j]);
    out.v[j] = data.v[i];
    out.y[j] = data.y[i];
    out.y_obs[j] = data.y_obs[i];
    for (int k = 0; k < kOccasions; ++k) {
      out.l1[k][j] = data.l1[k][i];
      out.l2[k][j] = data.l2[k][i];
      out.a[k][j] = data.a[k][i];
      out.l1_obs[k][j] = data.l1_obs[k][i];
      out.l2_obs[k][j] = data.l2_obs[k][i];
      out.a_obs[k][j] = data.a_obs[k][i];
    }
  }
  return out;
}

void validate_panel(const PanelDataset& data, Validation level) {
  const std::size_t n = data.size();
  auto expect_size = [&](std::size_t got, const char* what) {
    if (got != n) {
      throw ValidationError(std::string("internal size mismatch in ") + what);
    }
  };
  expect_size(data.y.size(), "Y");
  expect_size(data.y_obs.size(), "Y flags");
  for (int k = 0; k < kOccasions; ++k) {
    expect_size(data.l1[k].size(), "L1");
    expect_size(data.l2[k].size(), "L2");
    expect_size(data.a[k].size(), "A");
    expect_size(data.l1_obs[k].size(), "L1 flags");
    expect_size(data.l2_obs[k].size(), "L2 flags");
    expect_size(data.a_obs[k].size(), "A flags");
  }

  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < kOccasions; ++k) {
      if (data.l1_obs[k][i] && data.l1[k][i] != 0.0 && data.l1[k][i] != 1.0) {
        throw ValidationError("subject " + std::to_string(i) + ": L1_" +
                              std::to_string(k) + " must be 0/1");
      }
      if (data.l2_obs[k][i] && !std::isfinite(data.l2[k][i])) {
        throw ValidationError("subject " + std::to_string(i) + ": non-finite L2_" +
                              std::to_string(k));
      }
      if (data.a_obs[k][i] && data.a[k][i] > 1) {
        throw ValidationError("subject " + std::to_string(i) + ": A_" +
                              std::to_string(k) + " must be 0/1");
      }
    }
    // Treatment is absorbing wherever both occasions are observed.
    for (int k = 1; k < kOccasions; ++k) {
      if (data.a_obs[k - 1][i] && data.a_obs[k][i] && data.a[k - 1][i] == 1 &&
          data.a[k][i] == 0) {
        throw ValidationError("subject " + std::to_string(i) +
                              ": treatment not absorbing at occasion " + std::to_string(k));
      }
    }
    if (data.y_obs[i] && !std::isfinite(data.y[i])) {
      throw ValidationError("subject " + std::to_string(i) + ": non-finite Y");
    }
    if (level == Validation::Strict) {
      if (!data.y_obs[i]) {
        throw ValidationError("subject " + std::to_string(i) + ": missing Y in strict mode");
      }
      for (int k = 0; k < kOccasions; ++k) {
        if (!data.a_obs[k][i]) {
          throw ValidationError("subject " + std::to_string(i) + ": missing A_" +
                                std::to_string(k) + " in strict mode");
        }
      }
      if (!data.l1_obs[0][i] || !data.l2_obs[0][i]) {
        throw ValidationError("subject " + std::to_string(i) +
                              ": baseline confounders must be observed");
      }
    }
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

bool is_missing_token(const std::string& s) { return s.empty() || s == "NA"; }

double parse_double(const std::string& s, std::size_t row, const std::string& col) {
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError("row " + std::to_string(row) + ", column " + col +
                     ": cannot parse numeric value '" + s + "'");
  }
  return value;
}

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

PanelDataset load_panel_csv(std::istream& in, Validation level, const CsvSchema& schema) {
  std::string header;
  if (!std::getline(in, header)) throw SchemaError("empty input: no header row");
  const auto names = split_csv_line(header);

  std::map<std::string, std::size_t> pos;
  for (std::size_t j = 0; j < names.size(); ++j) pos[names[j]] = j;

  auto column = [&](const std::string& name) {
    auto it = pos.find(name);
    if (it == pos.end()) throw SchemaError("missing required column '" + name + "'");
    return it->second;
  };

  const std::size_t c_id = column(schema.id);
  const std::size_t c_v = column(schema.v);
  const std::size_t c_y = column(schema.y);
  std::array<std::size_t, kOccasions> c_l1, c_l2, c_a;
  for (int k = 0; k < kOccasions; ++k) {
    c_l1[k] = column(schema.l1[k]);
    c_l2[k] = column(schema.l2[k]);
    c_a[k] = column(schema.a[k]);
  }
  (void)c_id;

  PanelDataset data;
  std::string line;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != names.size()) {
      throw ParseError("row " + std::to_string(row) + ": expected " +
                       std::to_string(names.size()) + " fields, found " +
                       std::to_string(fields.size()));
    }

    const std::size_t i = data.size();
    data.v.push_back(0.0);
    data.y.push_back(0.0);
    data.y_obs.push_back(1);
    for (int k = 0; k < kOccasions; ++k) {
      data.l1[k].push_back(0.0);
      data.l2[k].push_back(0.0);
      data.a[k].push_back(0);
      data.l1_obs[k].push_back(1);
      data.l2_obs[k].push_back(1);
      data.a_obs[k].push_back(1);
    }

    auto load_cell = [&](std::size_t c, double& value, std::uint8_t& flag,
                         const std::string& name) {
      const std::string& s = fields[c];
      if (is_missing_token(s)) {
        flag = 0;
        value = 0.0;
      } else {
        flag = 1;
        value = parse_double(s, row, name);
      }
    };

    if (is_missing_token(fields[c_v])) {
      throw ParseError("row " + std::to_string(row) + ": V may not be missing");
    }
    data.v[i] = parse_double(fields[c_v], row, schema.v);
    load_cell(c_y, data.y[i], data.y_obs[i], schema.y);
    for (int k = 0; k < kOccasions; ++k) {
      load_cell(c_l1[k], data.l1[k][i], data.l1_obs[k][i], schema.l1[k]);
      load_cell(c_l2[k], data.l2[k][i], data.l2_obs[k][i], schema.l2[k]);
      double a_val = 0.0;
      std::uint8_t a_flag = 1;
      load_cell(c_a[k], a_val, a_flag, schema.a[k]);
      if (a_flag && a_val != 0.0 && a_val != 1.0) {
        throw ValidationError("row " + std::to_string(row) + ": " + schema.a[k] +
                              " must be 0/1");
      }
      data.a[k][i] = static_cast<std::uint8_t>(a_val);
      data.a_obs[k][i] = a_flag;
    }
  }

  validate_panel(data, level);
  return data;
}

PanelDataset load_panel_csv_file(const std::string& path, Validation level,
                                 const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return load_panel_csv(in, level, schema);
}

void write_panel_csv(const PanelDataset& data, std::ostream& out, const CsvSchema& schema) {
  out << schema.id << ',' << schema.v;
  for (int k = 0; k < kOccasions; ++k) out << ',' << schema.l1[k];
  for (int k = 0; k < kOccasions; ++k) out << ',' << schema.l2[k];
  for (int k = 0; k < kOccasions; ++k) out << ',' << schema.a[k];
  out << ',' << schema.y << '\n';

  auto cell = [&](double value, bool observed) {
    return observed ? fmt_double(value) : std::string("NA");
  };

  for (std::size_t i = 0; i < data.size(); ++i) {
    out << (i + 1) << ',' << fmt_double(data.v[i]);
    for (int k = 0; k < kOccasions; ++k) out << ',' << cell(data.l1[k][i], data.l1_obs[k][i]);
    for (int k = 0; k < kOccasions; ++k) out << ',' << cell(data.l2[k][i], data.l2_obs[k][i]);
    for (int k = 0; k < kOccasions; ++k) {
      out << ',' << cell(static_cast<double>(data.a[k][i]), data.a_obs[k][i]);
    }
    out << ',' << cell(data.y[i], data.y_obs[i]) << '\n';
  }
}

void write_panel_csv_file(const PanelDataset& data, const std::string& path,
                          const CsvSchema& schema) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_panel_csv(data, out, schema);
}

}  // namespace msmkit
