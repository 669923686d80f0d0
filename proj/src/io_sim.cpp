#include "io_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "error.hpp"
#include "rng.hpp"

namespace elgm::io {

size_t Column::size() const {
  switch (type) {
    case ColType::Real: return reals.size();
    case ColType::Integer: return ints.size();
    case ColType::Category: return codes.size();
  }
  return 0;
}

const Column& ColumnTable::column(const std::string& name) const {
  for (const auto& c : columns_) {
    if (c.name == name) return c;
  }
  throw Error(ErrorCode::InvalidArgument, "table: no column named '" + name + "'");
}

bool ColumnTable::has_column(const std::string& name) const {
  for (const auto& c : columns_) {
    if (c.name == name) return true;
  }
  return false;
}

void ColumnTable::add_column(Column col) {
  if (!columns_.empty() && static_cast<int64_t>(col.size()) != rows_) {
    throw Error(ErrorCode::InvalidArgument,
                "table: column '" + col.name + "' has mismatched length");
  }
  rows_ = static_cast<int64_t>(col.size());
  columns_.push_back(std::move(col));
}

VectorXd ColumnTable::as_reals(const std::string& name) const {
  const Column& c = column(name);
  VectorXd v(rows_);
  for (int64_t i = 0; i < rows_; ++i) {
    switch (c.type) {
      case ColType::Real: v[i] = c.reals[i]; break;
      case ColType::Integer: v[i] = static_cast<double>(c.ints[i]); break;
      case ColType::Category: v[i] = static_cast<double>(c.codes[i]); break;
    }
  }
  return v;
}

std::vector<long long> ColumnTable::as_ints(const std::string& name) const {
  const Column& c = column(name);
  std::vector<long long> v(rows_);
  for (int64_t i = 0; i < rows_; ++i) {
    switch (c.type) {
      case ColType::Real: v[i] = static_cast<long long>(std::llround(c.reals[i])); break;
      case ColType::Integer: v[i] = c.ints[i]; break;
      case ColType::Category: v[i] = c.codes[i]; break;
    }
  }
  return v;
}

std::vector<int> ColumnTable::as_codes(const std::string& name) const {
  auto v = as_ints(name);
  std::vector<int> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = static_cast<int>(v[i]);
  return out;
}

std::vector<SchemaField> parse_schema(const std::string& schema) {
  std::vector<SchemaField> fields;
  std::stringstream ss(schema);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto pos = item.find(':');
    if (pos == std::string::npos) {
      throw Error(ErrorCode::Parse, "schema: expected name:type, got '" + item + "'");
    }
    SchemaField f;
    f.name = item.substr(0, pos);
    std::string type = item.substr(pos + 1);
    if (type == "real") {
      f.type = ColType::Real;
    } else if (type == "int" || type == "integer") {
      f.type = ColType::Integer;
    } else if (type == "category") {
      f.type = ColType::Category;
    } else {
      throw Error(ErrorCode::Parse, "schema: unknown type '" + type + "'");
    }
    fields.push_back(std::move(f));
  }
  if (fields.empty()) {
    throw Error(ErrorCode::Parse, "schema: empty");
  }
  return fields;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

std::string strip(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

ColumnTable read_csv(const std::string& path, const std::vector<SchemaField>& schema) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::Io, "read_csv: cannot open '" + path + "'");
  }
  std::string header;
  bool has_header = static_cast<bool>(std::getline(in, header));

  std::vector<int> field_pos(schema.size(), -1);
  if (has_header) {
    auto names = split_csv_line(strip(header));
    for (size_t f = 0; f < schema.size(); ++f) {
      for (size_t c = 0; c < names.size(); ++c) {
        if (strip(names[c]) == schema[f].name) {
          field_pos[f] = static_cast<int>(c);
          break;
        }
      }
      if (field_pos[f] < 0) {
        throw Error(ErrorCode::Parse,
                    "read_csv: missing column '" + schema[f].name + "' in " + path);
      }
    }
  }

  std::vector<Column> cols(schema.size());
  std::vector<std::map<std::string, int>> level_map(schema.size());
  for (size_t f = 0; f < schema.size(); ++f) {
    cols[f].name = schema[f].name;
    cols[f].type = schema[f].type;
  }

  std::string line;
  int64_t row = 0;
  while (std::getline(in, line)) {
    std::string stripped = strip(line);
    if (stripped.empty()) continue;
    auto cells = split_csv_line(stripped);
    ++row;
    for (size_t f = 0; f < schema.size(); ++f) {
      if (field_pos[f] >= static_cast<int>(cells.size())) {
        throw Error(ErrorCode::Parse,
                    "read_csv: row " + std::to_string(row) + " is too short for column '" +
                        schema[f].name + "'");
      }
      std::string cell = strip(cells[field_pos[f]]);
      Column& col = cols[f];
      try {
        switch (schema[f].type) {
          case ColType::Real: {
            size_t used = 0;
            double v = std::stod(cell, &used);
            if (used != cell.size()) throw std::invalid_argument("trailing");
            col.reals.push_back(v);
            break;
          }
          case ColType::Integer: {
            size_t used = 0;
            long long v = std::stoll(cell, &used);
            if (used != cell.size()) throw std::invalid_argument("trailing");
            col.ints.push_back(v);
            break;
          }
          case ColType::Category: {
            auto [it, inserted] =
                level_map[f].try_emplace(cell, static_cast<int>(col.levels.size()));
            if (inserted) col.levels.push_back(cell);
            col.codes.push_back(it->second);
            break;
          }
        }
      } catch (const std::exception&) {
        throw Error(ErrorCode::Parse, "read_csv: cannot parse cell '" + cell +
                                          "' at row " + std::to_string(row) +
                                          ", column " + schema[f].name);
      }
    }
  }

  ColumnTable table;
  for (auto& c : cols) table.add_column(std::move(c));
  return table;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_csv(const ColumnTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCode::Io, "write_csv: cannot open '" + path + "' for writing");
  }
  const auto& cols = table.columns();
  for (size_t c = 0; c < cols.size(); ++c) {
    out << cols[c].name << (c + 1 < cols.size() ? "," : "\n");
  }
  for (int64_t r = 0; r < table.rows(); ++r) {
    for (size_t c = 0; c < cols.size(); ++c) {
      switch (cols[c].type) {
        case ColType::Real: out << format_double(cols[c].reals[r]); break;
        case ColType::Integer: out << cols[c].ints[r]; break;
        case ColType::Category: out << cols[c].levels[cols[c].codes[r]]; break;
      }
      out << (c + 1 < cols.size() ? "," : "\n");
    }
  }
  if (!out) {
    throw Error(ErrorCode::Io, "write_csv: write failed for '" + path + "'");
  }
}

KvDoc parse_kv_text(const std::string& text) {
  KvDoc doc;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    std::string s = strip(line);
    if (s.empty() || s[0] == '#') continue;
    auto pos = s.find('=');
    if (pos == std::string::npos) {
      throw Error(ErrorCode::Parse,
                  "kv: line " + std::to_string(lineno) + " has no '='");
    }
    doc.emplace_back(strip(s.substr(0, pos)), strip(s.substr(pos + 1)));
  }
  return doc;
}

KvDoc read_kv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::Io, "read_kv: cannot open '" + path + "'");
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_kv_text(ss.str());
}

std::string format_kv(const KvDoc& doc) {
  std::string out;
  for (const auto& [k, v] : doc) {
    out += k;
    out += " = ";
    out += v;
    out += "\n";
  }
  return out;
}

void write_kv(const KvDoc& doc, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCode::Io, "write_kv: cannot open '" + path + "' for writing");
  }
  out << format_kv(doc);
  if (!out) {
    throw Error(ErrorCode::Io, "write_kv: write failed for '" + path + "'");
  }
}

std::optional<std::string> kv_get(const KvDoc& doc, const std::string& key) {
  for (const auto& [k, v] : doc) {
    if (k == key) return v;
  }
  return std::nullopt;
}

namespace {

// Streams inside a simulation; each consumer owns one so adding a column
// never shifts another column's draws.
enum SimStream : uint64_t {
  kStreamCovariates = 0,
  kStreamGroup1 = 1,
  kStreamGroup2 = 2,
  kStreamEffects1 = 3,
  kStreamEffects2 = 4,
  kStreamResponse = 5,
};

void push_truth(KvDoc& doc, const std::string& key, double v) {
  doc.emplace_back(key, format_double(v));
}

}  // namespace

SimTruth simulate_conjugate(int64_t n, double ybar) {
  SimTruth sim;
  sim.generator = "conjugate";
  sim.seed = 0;
  push_truth(sim.truth, "truth.ybar", ybar);
  Column y;
  y.name = "y";
  y.type = ColType::Real;
  y.reals.assign(static_cast<size_t>(n), ybar);
  sim.table.add_column(std::move(y));
  return sim;
}

SimTruth simulate_bernoulli_glmm(uint64_t seed, int64_t n, int d1, int d2,
                                 const VectorXd& beta, double sigma1, double sigma2) {
  if (n < 1 || d1 < 1 || d2 < 1 || beta.size() < 1) {
    throw Error(ErrorCode::InvalidArgument, "simulate_bernoulli_glmm: bad arguments");
  }
  const int p = static_cast<int>(beta.size());
  SimTruth sim;
  sim.generator = "bernoulli-glmm";
  sim.seed = seed;
  for (int j = 0; j < p; ++j) push_truth(sim.truth, "truth.beta" + std::to_string(j), beta[j]);
  push_truth(sim.truth, "truth.sigma1", sigma1);
  push_truth(sim.truth, "truth.sigma2", sigma2);

  std::vector<double> u1(d1), u2(d2);
  for (int j = 0; j < d1; ++j) u1[j] = sigma1 * rng::normal(seed, kStreamEffects1, j);
  for (int j = 0; j < d2; ++j) u2[j] = sigma2 * rng::normal(seed, kStreamEffects2, j);

  Column cy{"y", ColType::Integer, {}, {}, {}, {}};
  Column cg1{"g1", ColType::Integer, {}, {}, {}, {}};
  Column cg2{"g2", ColType::Integer, {}, {}, {}, {}};
  std::vector<Column> cx(p);
  for (int j = 0; j < p; ++j) {
    cx[j].name = "x" + std::to_string(j);
    cx[j].type = ColType::Real;
  }

  for (int64_t i = 0; i < n; ++i) {
    int g1 = static_cast<int>(rng::uniform_index(seed, kStreamGroup1, i, d1));
    int g2 = static_cast<int>(rng::uniform_index(seed, kStreamGroup2, i, d2));
    double eta = u1[g1] + u2[g2];
    for (int j = 0; j < p; ++j) {
      double x = (j == 0) ? 1.0 : rng::normal(seed, kStreamCovariates, i * (p - 1) + (j - 1));
      cx[j].reals.push_back(x);
      eta += beta[j] * x;
    }
    int y = rng::uniform01(seed, kStreamResponse, i) < expit(eta) ? 1 : 0;
    cy.ints.push_back(y);
    cg1.ints.push_back(g1);
    cg2.ints.push_back(g2);
  }

  sim.table.add_column(std::move(cy));
  for (auto& c : cx) sim.table.add_column(std::move(c));
  sim.table.add_column(std::move(cg1));
  sim.table.add_column(std::move(cg2));
  return sim;
}

SimTruth simulate_cox(uint64_t seed, int64_t n, const VectorXd& beta, double frailty_sd,
                      int d, double censor_q) {
  if (n < 1 || d < 1 || !(censor_q > 0.0) || censor_q > 1.0) {
    throw Error(ErrorCode::InvalidArgument, "simulate_cox: bad arguments");
  }
  const int p = static_cast<int>(beta.size());
  SimTruth sim;
  sim.generator = "cox";
  sim.seed = seed;
  for (int j = 0; j < p; ++j) push_truth(sim.truth, "truth.beta" + std::to_string(j), beta[j]);
  push_truth(sim.truth, "truth.frailty_sd", frailty_sd);
  push_truth(sim.truth, "truth.censor_q", censor_q);

  std::vector<double> u(d);
  for (int g = 0; g < d; ++g) u[g] = frailty_sd * rng::normal(seed, kStreamEffects1, g);

  std::vector<double> times(n);
  std::vector<int> groups(n);
  MatrixXd x(n, p);
  for (int64_t i = 0; i < n; ++i) {
    groups[i] = static_cast<int>(rng::uniform_index(seed, kStreamGroup1, i, d));
    double eta = u[groups[i]];
    for (int j = 0; j < p; ++j) {
      x(i, j) = rng::normal(seed, kStreamCovariates, i * p + j);
      eta += beta[j] * x(i, j);
    }
    times[i] = rng::exponential(seed, kStreamResponse, i) / std::exp(eta);
  }

  double censor_time = std::numeric_limits<double>::infinity();
  if (censor_q < 1.0) {
    std::vector<double> sorted = times;
    std::sort(sorted.begin(), sorted.end());
    auto idx = static_cast<size_t>(censor_q * (n - 1));
    censor_time = sorted[idx];
  }

  Column ct{"time", ColType::Real, {}, {}, {}, {}};
  Column cc{"censored", ColType::Integer, {}, {}, {}, {}};
  Column cg{"g", ColType::Integer, {}, {}, {}, {}};
  std::vector<Column> cx(p);
  for (int j = 0; j < p; ++j) {
    cx[j].name = "x" + std::to_string(j);
    cx[j].type = ColType::Real;
  }
  for (int64_t i = 0; i < n; ++i) {
    bool cen = times[i] > censor_time;
    ct.reals.push_back(cen ? censor_time : times[i]);
    cc.ints.push_back(cen ? 1 : 0);
    cg.ints.push_back(groups[i]);
    for (int j = 0; j < p; ++j) cx[j].reals.push_back(x(i, j));
  }
  sim.table.add_column(std::move(ct));
  sim.table.add_column(std::move(cc));
  for (auto& c : cx) sim.table.add_column(std::move(c));
  sim.table.add_column(std::move(cg));
  return sim;
}

SimTruth simulate_poisson_aggregate(uint64_t seed, int regions, int cells_per_region,
                                    const VectorXd& beta, double sigma, int cells_total) {
  if (regions < 1 || cells_per_region < 1) {
    throw Error(ErrorCode::InvalidArgument, "simulate_poisson_aggregate: bad arguments");
  }
  const int p = static_cast<int>(beta.size());
  int t = (cells_total > 0) ? cells_total : regions + cells_per_region - 1;
  SimTruth sim;
  sim.generator = "poisson-aggregate";
  sim.seed = seed;
  for (int j = 0; j < p; ++j) push_truth(sim.truth, "truth.beta" + std::to_string(j), beta[j]);
  push_truth(sim.truth, "truth.sigma", sigma);
  sim.truth.emplace_back("truth.cells_total", std::to_string(t));

  std::vector<double> u(t);
  MatrixXd x = MatrixXd::Zero(t, p);
  for (int c = 0; c < t; ++c) {
    u[c] = sigma * rng::normal(seed, kStreamEffects1, c);
    for (int j = 0; j < p; ++j) {
      x(c, j) = (j == 0) ? 1.0 : rng::normal(seed, kStreamCovariates, c * (p - 1) + (j - 1));
    }
  }

  Column cy{"y", ColType::Integer, {}, {}, {}, {}};
  Column creg{"region", ColType::Integer, {}, {}, {}, {}};
  Column ccell{"cell", ColType::Integer, {}, {}, {}, {}};
  Column cpop{"pop", ColType::Real, {}, {}, {}, {}};
  std::vector<Column> cx(p);
  for (int j = 0; j < p; ++j) {
    cx[j].name = "x" + std::to_string(j);
    cx[j].type = ColType::Real;
  }

  // One row per (region, cell) pair; y repeats within a region.
  for (int i = 0; i < regions; ++i) {
    double mu = 0.0;
    std::vector<int> cells(cells_per_region);
    for (int c = 0; c < cells_per_region; ++c) {
      cells[c] = (i + c) % t;
      double eta = u[cells[c]];
      for (int j = 0; j < p; ++j) eta += beta[j] * x(cells[c], j);
      mu += std::exp(eta);
    }
    // Poisson by inversion: deterministic given the seed.
    double uu = rng::uniform01(seed, kStreamResponse, i);
    int y = 0;
    double cdf = std::exp(-mu);
    double pmf = cdf;
    while (uu > cdf && y < 100000) {
      ++y;
      pmf *= mu / y;
      cdf += pmf;
    }
    for (int c = 0; c < cells_per_region; ++c) {
      cy.ints.push_back(y);
      creg.ints.push_back(i);
      ccell.ints.push_back(cells[c]);
      cpop.reals.push_back(1.0);
      for (int j = 0; j < p; ++j) cx[j].reals.push_back(x(cells[c], j));
    }
  }
  sim.table.add_column(std::move(cy));
  sim.table.add_column(std::move(creg));
  sim.table.add_column(std::move(ccell));
  sim.table.add_column(std::move(cpop));
  for (auto& c : cx) sim.table.add_column(std::move(c));
  return sim;
}

SimTruth simulate_gaussian_scale(uint64_t seed, int64_t n, double theta_true) {
  if (n < 1) {
    throw Error(ErrorCode::InvalidArgument, "simulate_gaussian_scale: n must be >= 1");
  }
  SimTruth sim;
  sim.generator = "gaussian-scale";
  sim.seed = seed;
  push_truth(sim.truth, "truth.theta", theta_true);
  Column y{"y", ColType::Real, {}, {}, {}, {}};
  double sd = std::exp(0.5 * theta_true);
  for (int64_t i = 0; i < n; ++i) {
    y.reals.push_back(sd * rng::normal(seed, kStreamResponse, i));
  }
  sim.table.add_column(std::move(y));
  return sim;
}

}  // namespace elgm::io
