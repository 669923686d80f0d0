#pragma once

#include <Eigen/Core>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "util.hpp"

namespace elgm::io {

enum class ColType { Real, Integer, Category };

struct Column {
  std::string name;
  ColType type = ColType::Real;
  std::vector<double> reals;
  std::vector<long long> ints;
  std::vector<int> codes;               // category: contiguous codes 0..L-1
  std::vector<std::string> levels;      // category: level dictionary

  size_t size() const;
};

class ColumnTable {
 public:
  ColumnTable() = default;

  int64_t rows() const { return rows_; }
  int cols() const { return static_cast<int>(columns_.size()); }
  const std::vector<Column>& columns() const { return columns_; }
  const Column& column(const std::string& name) const;
  bool has_column(const std::string& name) const;
  void add_column(Column col);

  // Typed accessors (category columns read as codes through as_ints).
  VectorXd as_reals(const std::string& name) const;
  std::vector<long long> as_ints(const std::string& name) const;
  std::vector<int> as_codes(const std::string& name) const;

 private:
  int64_t rows_ = 0;
  std::vector<Column> columns_;
};

struct SchemaField {
  std::string name;
  ColType type = ColType::Real;
};

// Parse "y:real,x:real,g:category" (types: real | int | category).
std::vector<SchemaField> parse_schema(const std::string& schema);

// UTF-8, header row, comma separated; category levels assigned by first
// appearance. Cell or structure problems report the row and column.
ColumnTable read_csv(const std::string& path, const std::vector<SchemaField>& schema);
void write_csv(const ColumnTable& table, const std::string& path);

// Ordered key-value document: one "key = value" per line, '#' comments, keys
// namespaced with dots. Used for configs, manifests, fit metadata, and
// simulation truth files. Doubles print with 17 significant digits so they
// round-trip exactly.
using KvDoc = std::vector<std::pair<std::string, std::string>>;

KvDoc parse_kv_text(const std::string& text);
KvDoc read_kv(const std::string& path);
std::string format_kv(const KvDoc& doc);
void write_kv(const KvDoc& doc, const std::string& path);
std::optional<std::string> kv_get(const KvDoc& doc, const std::string& key);
std::string format_double(double v);  // %.17g

// Synthetic data with recorded ground truth; regeneration with the same seed
// reproduces the table bit-exactly (counter-based generator).
struct SimTruth {
  std::string generator;
  uint64_t seed = 0;
  KvDoc truth;  // true parameter values and structural settings
  ColumnTable table;
};

// y_i = ybar for all i: the conjugate posterior depends on the data through
// the mean, which makes expected values exact.
SimTruth simulate_conjugate(int64_t n, double ybar);

// logit p = x^T beta + u1(g1) + u2(g2); x has an intercept column followed by
// standard normal covariates, groups assigned uniformly.
SimTruth simulate_bernoulli_glmm(uint64_t seed, int64_t n, int d1, int d2,
                                 const VectorXd& beta, double sigma1, double sigma2);

// Exponential baseline hazard (rate e^eta) with administrative censoring at
// the empirical `censor_q` quantile of the drawn times (1 disables it).
SimTruth simulate_cox(uint64_t seed, int64_t n, const VectorXd& beta,
                      double frailty_sd, int d, double censor_q = 0.8);

// Aggregated counts over shared cells. Default layout chains regions so
// consecutive regions share one cell; passing cells_total > 0 wraps the
// chain onto that many cells instead (small latent dimensions for oracle
// checks). Populations are 1.
SimTruth simulate_poisson_aggregate(uint64_t seed, int regions, int cells_per_region,
                                    const VectorXd& beta, double sigma,
                                    int cells_total = -1);

// y_i ~ N(0, e^theta_true)
SimTruth simulate_gaussian_scale(uint64_t seed, int64_t n, double theta_true);

}  // namespace elgm::io
