#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "elgm/elgm.h"

namespace {

struct Fit {
  elgm_table* table = nullptr;
  elgm_model* model = nullptr;
  elgm_fit* fit = nullptr;
  ~Fit() {
    if (fit) elgm_fit_free(fit);
    if (model) elgm_model_free(model);
    if (table) elgm_table_free(table);
  }
};

void make_conjugate_fit(Fit& out) {
  REQUIRE(elgm_simulate("conjugate", "n=4,ybar=1", 0, &out.table, nullptr) == ELGM_OK);
  REQUIRE(elgm_model_create("conjugate", out.table, &out.model) == ELGM_OK);
  elgm_fit_config cfg;
  elgm_fit_config_default(&cfg);
  REQUIRE(elgm_fit_run(out.model, &cfg, &out.fit) == ELGM_OK);
}

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::string(elgm_version()) == "0.1.0");
  CHECK(std::string(elgm_status_name(ELGM_OK)) == "ok");
  CHECK(std::string(elgm_status_name(ELGM_ERR_PARSE)) == "parse");
}

TEST_CASE("conjugate fit through the C surface") {
  Fit f;
  make_conjugate_fit(f);
  CHECK(elgm_fit_converged(f.fit) == 1);
  CHECK(elgm_fit_hyper_dim(f.fit) == 0);
  CHECK(elgm_fit_latent_dim(f.fit) == 1);
  CHECK(elgm_fit_num_nodes(f.fit) == 1);

  double lambda = 0.0;
  REQUIRE(elgm_fit_lambda(f.fit, &lambda) == ELGM_OK);
  CHECK(lambda == doctest::Approx(1.0));

  // Exact evidence of the normal-normal model with y = (1,1,1,1).
  double expect = -2.0 * std::log(2.0 * 3.14159265358979323846) -
                  0.5 * std::log(5.0) - 0.4;
  CHECK(elgm_fit_log_evidence(f.fit) == doctest::Approx(expect).epsilon(1e-8));

  double w = 0.8;
  double logd = 0.0;
  REQUIRE(elgm_fit_log_density(f.fit, &w, 1, &logd) == ELGM_OK);
  double peak = 1.0 / std::sqrt(2.0 * 3.14159265358979323846 * 0.2);
  CHECK(std::exp(logd) == doctest::Approx(peak).epsilon(1e-9));
}

TEST_CASE("summaries and metadata round through tables and kv text") {
  elgm_table* table = nullptr;
  REQUIRE(elgm_simulate("gaussian-scale", "n=50,theta=0", 5, &table, nullptr) == ELGM_OK);
  elgm_model* model = nullptr;
  REQUIRE(elgm_model_create("gaussian-scale", table, &model) == ELGM_OK);
  elgm_fit_config cfg;
  elgm_fit_config_default(&cfg);
  cfg.k = 7;
  elgm_fit* fit = nullptr;
  REQUIRE(elgm_fit_run(model, &cfg, &fit) == ELGM_OK);

  elgm_table* summ = nullptr;
  REQUIRE(elgm_fit_summaries(fit, &summ) == ELGM_OK);
  CHECK(elgm_table_rows(summ) == 2);  // theta + variance rows
  CHECK(elgm_table_cols(summ) == 6);
  CHECK(std::string(elgm_table_col_name(summ, 0)) == "name");
  std::vector<double> means(elgm_table_rows(summ));
  REQUIRE(elgm_table_col_reals(summ, "mean", means.data()) == ELGM_OK);
  CHECK(std::fabs(means[0]) < 1.0);  // log-variance posterior mean near truth 0

  char* kv = nullptr;
  REQUIRE(elgm_fit_metadata_kv(fit, "model = gaussian-scale\nk = 7\n", &kv) == ELGM_OK);
  std::string text(kv);
  elgm_string_free(kv);
  CHECK(text.find("format.version = 1") != std::string::npos);
  CHECK(text.find("config.model = gaussian-scale") != std::string::npos);
  CHECK(text.find("fit.theta_hat.0 = ") != std::string::npos);
  CHECK(text.find("fit.log_evidence = ") != std::string::npos);

  elgm_table_free(summ);
  elgm_fit_free(fit);
  elgm_model_free(model);
  elgm_table_free(table);
}

TEST_CASE("sampling is deterministic per seed") {
  Fit f;
  make_conjugate_fit(f);
  elgm_samples* s1 = nullptr;
  elgm_samples* s2 = nullptr;
  elgm_samples* s3 = nullptr;
  REQUIRE(elgm_sample(f.fit, 1000, 42, &s1) == ELGM_OK);
  REQUIRE(elgm_sample(f.fit, 1000, 42, &s2) == ELGM_OK);
  REQUIRE(elgm_sample(f.fit, 1000, 43, &s3) == ELGM_OK);
  REQUIRE(elgm_samples_count(s1) == 1000);
  REQUIRE(elgm_samples_dim(s1) == 1);
  std::vector<double> a(1000), b(1000), c(1000);
  REQUIRE(elgm_samples_draws(s1, a.data()) == ELGM_OK);
  REQUIRE(elgm_samples_draws(s2, b.data()) == ELGM_OK);
  REQUIRE(elgm_samples_draws(s3, c.data()) == ELGM_OK);
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * 1000) == 0);
  CHECK(std::memcmp(a.data(), c.data(), sizeof(double) * 1000) != 0);

  elgm_table* t = nullptr;
  REQUIRE(elgm_samples_to_table(s1, &t) == ELGM_OK);
  CHECK(elgm_table_rows(t) == 1000);
  CHECK(elgm_table_cols(t) == 2);  // w0, node_choice
  elgm_table_free(t);
  elgm_samples_free(s1);
  elgm_samples_free(s2);
  elgm_samples_free(s3);
}

TEST_CASE("error paths set codes and messages") {
  elgm_table* table = nullptr;
  CHECK(elgm_table_read_csv("/nonexistent/file.csv", "y:real", &table) == ELGM_ERR_IO);
  CHECK(std::strlen(elgm_last_error()) > 0);

  REQUIRE(elgm_simulate("conjugate", "n=4,ybar=1", 0, &table, nullptr) == ELGM_OK);
  elgm_model* model = nullptr;
  CHECK(elgm_model_create("no-such-model", table, &model) == ELGM_ERR_INVALID_ARGUMENT);
  CHECK(std::string(elgm_last_error()).find("no-such-model") != std::string::npos);

  REQUIRE(elgm_model_create("conjugate", table, &model) == ELGM_OK);
  elgm_fit_config cfg;
  elgm_fit_config_default(&cfg);
  cfg.k = 0;
  elgm_fit* fit = nullptr;
  CHECK(elgm_fit_run(model, &cfg, &fit) == ELGM_ERR_INVALID_ORDER);

  CHECK(elgm_fit_run(nullptr, &cfg, &fit) == ELGM_ERR_INVALID_ARGUMENT);
  elgm_model_free(model);
  elgm_table_free(table);
}

TEST_CASE("two-sample KS through the C surface") {
  std::vector<double> a = {1.0, 2.0, 3.0};
  double d = -1.0;
  REQUIRE(elgm_ks_two_sample(a.data(), 3, a.data(), 3, &d) == ELGM_OK);
  CHECK(d == 0.0);
  std::vector<double> b = {10.0, 11.0};
  REQUIRE(elgm_ks_two_sample(a.data(), 3, b.data(), 2, &d) == ELGM_OK);
  CHECK(d == 1.0);
}

TEST_CASE("validate on the conjugate model") {
  elgm_table* table = nullptr;
  REQUIRE(elgm_simulate("conjugate", "n=4,ybar=1", 0, &table, nullptr) == ELGM_OK);
  elgm_model* model = nullptr;
  REQUIRE(elgm_model_create("conjugate", table, &model) == ELGM_OK);
  elgm_fit_config cfg;
  elgm_fit_config_default(&cfg);
  elgm_table* ks = nullptr;
  REQUIRE(elgm_validate(model, &cfg, 100000, 7, &ks) == ELGM_OK);
  REQUIRE(elgm_table_rows(ks) == 1);
  double v = 0.0;
  REQUIRE(elgm_table_col_reals(ks, "ks", &v) == ELGM_OK);
  CHECK(v <= 0.01);
  elgm_table_free(ks);
  elgm_model_free(model);
  elgm_table_free(table);
}
