#include "elgm/elgm.h"

#include <chrono>
#include <cstring>
#include <memory>
#include <string>

#include "error.hpp"
#include "inference.hpp"
#include "io_sim.hpp"
#include "model_factory.hpp"
#include "results.hpp"
#include "validation.hpp"

// Handle definitions. Each wraps the corresponding core object; fits keep
// the model alive because summaries need its transform and names.
struct elgm_table {
  elgm::io::ColumnTable table;
};

struct elgm_model {
  std::shared_ptr<const elgm::model::ElgmModel> model;
};

struct elgm_fit {
  elgm::infer::FitResult fit;
  std::shared_ptr<const elgm::model::ElgmModel> model;
  double elapsed_seconds = 0.0;
};

struct elgm_samples {
  elgm::infer::SampleBatch batch;
};

namespace {

thread_local std::string g_last_error;

elgm_status status_from_code(elgm::ErrorCode code) {
  using elgm::ErrorCode;
  switch (code) {
    case ErrorCode::InvalidArgument: return ELGM_ERR_INVALID_ARGUMENT;
    case ErrorCode::InvalidOrder: return ELGM_ERR_INVALID_ORDER;
    case ErrorCode::Capacity: return ELGM_ERR_CAPACITY;
    case ErrorCode::NotPositiveDefinite: return ELGM_ERR_NOT_POSITIVE_DEFINITE;
    case ErrorCode::InvalidStart: return ELGM_ERR_INVALID_START;
    case ErrorCode::NoConvergence: return ELGM_ERR_NO_CONVERGENCE;
    case ErrorCode::DegeneratePosterior: return ELGM_ERR_DEGENERATE_POSTERIOR;
    case ErrorCode::Domain: return ELGM_ERR_DOMAIN;
    case ErrorCode::Parse: return ELGM_ERR_PARSE;
    case ErrorCode::Io: return ELGM_ERR_IO;
    case ErrorCode::Internal: return ELGM_ERR_INTERNAL;
  }
  return ELGM_ERR_INTERNAL;
}

template <typename Fn>
elgm_status guarded(Fn&& fn) {
  try {
    fn();
    return ELGM_OK;
  } catch (const elgm::Error& e) {
    g_last_error = e.what();
    return status_from_code(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return ELGM_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return ELGM_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

elgm_status require(bool cond, const char* message) {
  if (cond) return ELGM_OK;
  g_last_error = message;
  return ELGM_ERR_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* elgm_version(void) { return "0.1.0"; }

const char* elgm_last_error(void) { return g_last_error.c_str(); }

const char* elgm_status_name(elgm_status status) {
  switch (status) {
    case ELGM_OK: return "ok";
    case ELGM_ERR_INVALID_ARGUMENT: return "invalid-argument";
    case ELGM_ERR_INVALID_ORDER: return "invalid-order";
    case ELGM_ERR_CAPACITY: return "capacity";
    case ELGM_ERR_NOT_POSITIVE_DEFINITE: return "not-positive-definite";
    case ELGM_ERR_INVALID_START: return "invalid-start";
    case ELGM_ERR_NO_CONVERGENCE: return "no-convergence";
    case ELGM_ERR_DEGENERATE_POSTERIOR: return "degenerate-posterior";
    case ELGM_ERR_DOMAIN: return "domain";
    case ELGM_ERR_PARSE: return "parse";
    case ELGM_ERR_IO: return "io";
    case ELGM_ERR_INTERNAL: return "internal";
  }
  return "internal";
}

elgm_status elgm_table_read_csv(const char* path, const char* schema, elgm_table** out) {
  if (auto st = require(path && schema && out, "null argument"); st != ELGM_OK) return st;
  return guarded([&] {
    auto fields = elgm::io::parse_schema(schema);
    auto t = std::make_unique<elgm_table>();
    t->table = elgm::io::read_csv(path, fields);
    *out = t.release();
  });
}

elgm_status elgm_table_write_csv(const elgm_table* table, const char* path) {
  if (auto st = require(table && path, "null argument"); st != ELGM_OK) return st;
  return guarded([&] { elgm::io::write_csv(table->table, path); });
}

int64_t elgm_table_rows(const elgm_table* table) { return table ? table->table.rows() : 0; }

int elgm_table_cols(const elgm_table* table) { return table ? table->table.cols() : 0; }

const char* elgm_table_col_name(const elgm_table* table, int col) {
  if (!table || col < 0 || col >= table->table.cols()) return nullptr;
  return table->table.columns()[col].name.c_str();
}

elgm_status elgm_table_col_reals(const elgm_table* table, const char* name, double* buf) {
  if (auto st = require(table && name && buf, "null argument"); st != ELGM_OK) return st;
  return guarded([&] {
    Eigen::VectorXd v = table->table.as_reals(name);
    std::memcpy(buf, v.data(), sizeof(double) * v.size());
  });
}

int elgm_table_col_is_text(const elgm_table* table, int col) {
  if (!table || col < 0 || col >= table->table.cols()) return 0;
  return table->table.columns()[col].type == elgm::io::ColType::Category ? 1 : 0;
}

const char* elgm_table_cell_text(const elgm_table* table, int col, int64_t row) {
  if (!elgm_table_col_is_text(table, col)) return nullptr;
  const auto& c = table->table.columns()[col];
  if (row < 0 || row >= static_cast<int64_t>(c.codes.size())) return nullptr;
  return c.levels[c.codes[row]].c_str();
}

void elgm_table_free(elgm_table* table) { delete table; }

elgm_status elgm_simulate(const char* name, const char* params, uint64_t seed,
                          elgm_table** table_out, char** truth_kv) {
  if (auto st = require(name && table_out, "null argument"); st != ELGM_OK) return st;
  return guarded([&] {
    elgm::io::SimTruth sim =
        elgm::model::run_simulator(name, params ? params : "", seed);
    auto t = std::make_unique<elgm_table>();
    t->table = std::move(sim.table);
    if (truth_kv) {
      elgm::io::KvDoc doc;
      doc.emplace_back("generator", sim.generator);
      doc.emplace_back("seed", std::to_string(sim.seed));
      for (auto& kv : sim.truth) doc.push_back(kv);
      *truth_kv = dup_string(elgm::io::format_kv(doc));
    }
    *table_out = t.release();
  });
}

void elgm_string_free(char* s) { delete[] s; }

elgm_status elgm_model_create(const char* name, const elgm_table* data, elgm_model** out) {
  if (auto st = require(name && data && out, "null argument"); st != ELGM_OK) return st;
  return guarded([&] {
    auto m = std::make_unique<elgm_model>();
    m->model = elgm::model::make_model(name, data->table);
    *out = m.release();
  });
}

int elgm_model_latent_dim(const elgm_model* model) {
  return model ? model->model->latent_dim() : -1;
}

int elgm_model_hyper_dim(const elgm_model* model) {
  return model ? model->model->hyper_dim() : -1;
}

void elgm_model_free(elgm_model* model) { delete model; }

void elgm_fit_config_default(elgm_fit_config* config) {
  if (!config) return;
  config->k = 3;
  config->tol_inner = 1e-8;
  config->tol_outer = 1e-6;
  config->max_iter = 100;
  config->seed = 0;
  config->threads = 1;
}

namespace {

elgm::infer::Config to_core_config(const elgm_fit_config* config) {
  elgm::infer::Config c;
  if (config) {
    c.k = config->k;
    c.tol_inner = config->tol_inner;
    c.tol_outer = config->tol_outer;
    c.max_outer = config->max_iter;
    c.seed = config->seed;
    c.threads = config->threads;
  }
  return c;
}

}  // namespace

elgm_status elgm_fit_run(const elgm_model* model, const elgm_fit_config* config,
                         elgm_fit** out) {
  if (auto st = require(model && out, "null argument"); st != ELGM_OK) return st;
  return guarded([&] {
    auto f = std::make_unique<elgm_fit>();
    f->model = model->model;
    auto t0 = std::chrono::steady_clock::now();
    f->fit = elgm::infer::fit(model->model, to_core_config(config));
    f->elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    *out = f.release();
  });
}

int elgm_fit_converged(const elgm_fit* fit) {
  return (fit && fit->fit.converged) ? 1 : 0;
}

double elgm_fit_log_evidence(const elgm_fit* fit) {
  return fit ? fit->fit.log_evidence : 0.0;
}

int elgm_fit_hyper_dim(const elgm_fit* fit) {
  return fit ? static_cast<int>(fit->fit.theta_hat.size()) : -1;
}

int elgm_fit_latent_dim(const elgm_fit* fit) {
  return fit ? fit->fit.problem->latent_dim() : -1;
}

int64_t elgm_fit_num_nodes(const elgm_fit* fit) {
  return fit ? fit->fit.grid.lambda.size() : 0;
}

elgm_status elgm_fit_theta_hat(const elgm_fit* fit, double* buf) {
  if (auto st = require(fit && buf, "null argument"); st != ELGM_OK) return st;
  std::memcpy(buf, fit->fit.theta_hat.data(), sizeof(double) * fit->fit.theta_hat.size());
  return ELGM_OK;
}

elgm_status elgm_fit_lambda(const elgm_fit* fit, double* buf) {
  if (auto st = require(fit && buf, "null argument"); st != ELGM_OK) return st;
  std::memcpy(buf, fit->fit.grid.lambda.data(),
              sizeof(double) * fit->fit.grid.lambda.size());
  return ELGM_OK;
}

elgm_status elgm_fit_nodes(const elgm_fit* fit, double* buf) {
  if (auto st = require(fit && buf, "null argument"); st != ELGM_OK) return st;
  const auto& nodes = fit->fit.grid.nodes;
  for (int64_t i = 0; i < nodes.rows(); ++i) {
    for (int j = 0; j < nodes.cols(); ++j) buf[i * nodes.cols() + j] = nodes(i, j);
  }
  return ELGM_OK;
}

elgm_status elgm_fit_summaries(const elgm_fit* fit, elgm_table** out) {
  if (auto st = require(fit && out, "null argument"); st != ELGM_OK) return st;
  return guarded([&] {
    auto t = std::make_unique<elgm_table>();
    t->table = elgm::io::summaries_table(fit->fit, *fit->model);
    *out = t.release();
  });
}

elgm_status elgm_fit_metadata_kv(const elgm_fit* fit, const char* config_echo_kv,
                                 char** out) {
  if (auto st = require(fit && out, "null argument"); st != ELGM_OK) return st;
  return guarded([&] {
    elgm::io::KvDoc echo;
    if (config_echo_kv) echo = elgm::io::parse_kv_text(config_echo_kv);
    auto doc = elgm::io::fit_metadata(fit->fit, *fit->model, echo, fit->elapsed_seconds);
    *out = dup_string(elgm::io::format_kv(doc));
  });
}

elgm_status elgm_fit_log_density(const elgm_fit* fit, const double* w, int m, double* out) {
  if (auto st = require(fit && w && out, "null argument"); st != ELGM_OK) return st;
  return guarded([&] {
    Eigen::VectorXd wv = Eigen::Map<const Eigen::VectorXd>(w, m);
    *out = elgm::infer::log_mixture_density(fit->fit, wv);
  });
}

void elgm_fit_free(elgm_fit* fit) { delete fit; }

elgm_status elgm_sample(const elgm_fit* fit, int64_t count, uint64_t seed,
                        elgm_samples** out) {
  if (auto st = require(fit && out, "null argument"); st != ELGM_OK) return st;
  return guarded([&] {
    auto s = std::make_unique<elgm_samples>();
    s->batch = elgm::infer::sample_posterior(fit->fit, count, seed);
    *out = s.release();
  });
}

int64_t elgm_samples_count(const elgm_samples* samples) {
  return samples ? samples->batch.count : 0;
}

int elgm_samples_dim(const elgm_samples* samples) {
  return samples ? static_cast<int>(samples->batch.draws.cols()) : 0;
}

elgm_status elgm_samples_draws(const elgm_samples* samples, double* buf) {
  if (auto st = require(samples && buf, "null argument"); st != ELGM_OK) return st;
  const auto& d = samples->batch.draws;
  for (int64_t i = 0; i < d.rows(); ++i) {
    for (int j = 0; j < d.cols(); ++j) buf[i * d.cols() + j] = d(i, j);
  }
  return ELGM_OK;
}

elgm_status elgm_samples_nodes(const elgm_samples* samples, int64_t* buf) {
  if (auto st = require(samples && buf, "null argument"); st != ELGM_OK) return st;
  for (size_t i = 0; i < samples->batch.node_choice.size(); ++i) {
    buf[i] = samples->batch.node_choice[i];
  }
  return ELGM_OK;
}

elgm_status elgm_samples_to_table(const elgm_samples* samples, elgm_table** out) {
  if (auto st = require(samples && out, "null argument"); st != ELGM_OK) return st;
  return guarded([&] {
    auto t = std::make_unique<elgm_table>();
    t->table = elgm::io::samples_table(samples->batch);
    *out = t.release();
  });
}

void elgm_samples_free(elgm_samples* samples) { delete samples; }

elgm_status elgm_validate(const elgm_model* model, const elgm_fit_config* config,
                          int64_t count, uint64_t seed, elgm_table** ks_out) {
  if (auto st = require(model && ks_out, "null argument"); st != ELGM_OK) return st;
  return guarded([&] {
    const auto& m = *model->model;
    elgm::infer::FitResult fit = elgm::infer::fit(model->model, to_core_config(config));
    auto problem = elgm::infer::model_problem(model->model);
    auto axes = elgm::validation::axes_from_fit(fit);
    const int joint = m.latent_dim() + m.hyper_dim();
    int threads = config ? std::max(1, config->threads) : 1;

    elgm::io::Column name{"name", elgm::io::ColType::Category, {}, {}, {}, {}};
    elgm::io::Column ks{"ks", elgm::io::ColType::Real, {}, {}, {}, {}};
    auto oracles = elgm::validation::brute_force_marginals(*problem, axes, threads);
    for (int d = 0; d < joint; ++d) {
      auto res = elgm::validation::compare_fit_to_oracle(fit, oracles[d], count, seed);
      std::string label = res[0].name;
      if (d >= m.latent_dim()) {
        label = m.theta_names()[d - m.latent_dim()];
      }
      name.codes.push_back(static_cast<int>(name.levels.size()));
      name.levels.push_back(label);
      ks.reals.push_back(res[0].ks);
    }
    auto t = std::make_unique<elgm_table>();
    t->table.add_column(std::move(name));
    t->table.add_column(std::move(ks));
    *ks_out = t.release();
  });
}

elgm_status elgm_ks_two_sample(const double* a, int64_t na, const double* b, int64_t nb,
                               double* out) {
  if (auto st = require(a && b && out, "null argument"); st != ELGM_OK) return st;
  return guarded([&] {
    std::vector<double> va(a, a + na), vb(b, b + nb);
    *out = elgm::validation::ks_statistic(va, vb);
  });
}

}  // extern "C"
