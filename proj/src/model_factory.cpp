#include "model_factory.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "error.hpp"

namespace elgm::model {

namespace {

int count_x_columns(const io::ColumnTable& table) {
  int p = 0;
  while (table.has_column("x" + std::to_string(p))) ++p;
  return p;
}

MatrixXd x_matrix(const io::ColumnTable& table, int p) {
  MatrixXd x(table.rows(), p);
  for (int j = 0; j < p; ++j) x.col(j) = table.as_reals("x" + std::to_string(j));
  return x;
}

int code_cardinality(const std::vector<int>& codes) {
  int d = 0;
  for (int c : codes) d = std::max(d, c + 1);
  return d;
}

std::map<std::string, std::string> parse_params(const std::string& params) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(params);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto pos = item.find('=');
    if (pos == std::string::npos) {
      throw Error(ErrorCode::Parse, "simulate spec: expected key=value, got '" + item + "'");
    }
    kv[item.substr(0, pos)] = item.substr(pos + 1);
  }
  return kv;
}

double get_real(const std::map<std::string, std::string>& kv, const std::string& key,
                double fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  return std::stod(it->second);
}

int64_t get_int(const std::map<std::string, std::string>& kv, const std::string& key,
                int64_t fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  return std::stoll(it->second);
}

VectorXd get_vector(const std::map<std::string, std::string>& kv, const std::string& key,
                    const VectorXd& fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  std::vector<double> vals;
  std::stringstream ss(it->second);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (!item.empty()) vals.push_back(std::stod(item));
  }
  VectorXd v(vals.size());
  for (size_t i = 0; i < vals.size(); ++i) v[i] = vals[i];
  return v;
}

}  // namespace

std::unique_ptr<ElgmModel> make_model(const std::string& name,
                                      const io::ColumnTable& table) {
  if (name == "conjugate") {
    return conjugate_gaussian(table.as_reals("y"));
  }
  if (name == "gaussian-scale") {
    return gaussian_scale(table.as_reals("y"));
  }
  if (name == "bernoulli-glmm") {
    int p = count_x_columns(table);
    if (p == 0) {
      throw Error(ErrorCode::InvalidArgument, "bernoulli-glmm: needs x0.. columns");
    }
    auto yr = table.as_ints("y");
    Eigen::VectorXi y(yr.size());
    for (size_t i = 0; i < yr.size(); ++i) y[i] = static_cast<int>(yr[i]);
    auto g1 = table.as_codes("g1");
    auto g2 = table.as_codes("g2");
    return bernoulli_glmm(y, x_matrix(table, p), g1, code_cardinality(g1), g2,
                          code_cardinality(g2));
  }
  if (name == "cox-ph") {
    int p = count_x_columns(table);
    VectorXd time = table.as_reals("time");
    auto cen = table.as_codes("censored");
    std::optional<std::vector<int>> group;
    int d = 0;
    if (table.has_column("g")) {
      group = table.as_codes("g");
      d = code_cardinality(*group);
      if (d <= 1) {
        group.reset();  // constant frailty column carries no grouping
        d = 0;
      }
    }
    return cox_ph_partial(time, cen, x_matrix(table, p), group, d);
  }
  if (name == "poisson-aggregate") {
    int p = count_x_columns(table);
    auto region = table.as_codes("region");
    auto cell = table.as_codes("cell");
    VectorXd pop = table.has_column("pop")
                       ? table.as_reals("pop")
                       : VectorXd::Ones(table.rows());
    int n_regions = code_cardinality(region);
    int n_cells = code_cardinality(cell);
    Eigen::VectorXi y = Eigen::VectorXi::Zero(n_regions);
    std::vector<std::vector<int>> cells(n_regions);
    std::vector<std::vector<double>> pops(n_regions);
    MatrixXd x_cells = MatrixXd::Zero(n_cells, p);
    auto yr = table.as_ints("y");
    for (int64_t r = 0; r < table.rows(); ++r) {
      int i = region[r];
      y[i] = static_cast<int>(yr[r]);
      cells[i].push_back(cell[r]);
      pops[i].push_back(pop[r]);
      for (int j = 0; j < p; ++j) {
        x_cells(cell[r], j) = table.as_reals("x" + std::to_string(j))[r];
      }
    }
    return poisson_aggregate(y, cells, pops, n_cells, x_cells);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown model '" + name + "'");
}

io::SimTruth run_simulator(const std::string& name, const std::string& params,
                           uint64_t seed) {
  auto kv = parse_params(params);
  if (name == "conjugate") {
    return io::simulate_conjugate(get_int(kv, "n", 4), get_real(kv, "ybar", 1.0));
  }
  if (name == "gaussian-scale") {
    return io::simulate_gaussian_scale(seed, get_int(kv, "n", 100),
                                       get_real(kv, "theta", 0.0));
  }
  if (name == "bernoulli-glmm") {
    VectorXd beta = get_vector(kv, "beta", VectorXd::Zero(1));
    return io::simulate_bernoulli_glmm(seed, get_int(kv, "n", 1000),
                                       static_cast<int>(get_int(kv, "d1", 5)),
                                       static_cast<int>(get_int(kv, "d2", 10)), beta,
                                       get_real(kv, "sigma1", 0.5),
                                       get_real(kv, "sigma2", 0.5));
  }
  if (name == "cox" || name == "cox-ph") {
    VectorXd beta = get_vector(kv, "beta", VectorXd::Zero(1));
    return io::simulate_cox(seed, get_int(kv, "n", 100), beta,
                            get_real(kv, "frailty_sd", 0.0),
                            static_cast<int>(get_int(kv, "d", 1)),
                            get_real(kv, "censor_q", 0.8));
  }
  if (name == "poisson-aggregate") {
    VectorXd beta = get_vector(kv, "beta", VectorXd(0));
    return io::simulate_poisson_aggregate(
        seed, static_cast<int>(get_int(kv, "regions", 30)),
        static_cast<int>(get_int(kv, "cells", 2)), beta, get_real(kv, "sigma", 0.5),
        static_cast<int>(get_int(kv, "cells_total", -1)));
  }
  throw Error(ErrorCode::InvalidArgument, "unknown simulator '" + name + "'");
}

}  // namespace elgm::model
