// elgm command-line interface: fit, sample, summarize, validate, simulate,
// bench. Talks to the library exclusively through the C API in elgm/elgm.h.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "elgm/elgm.h"

namespace {

struct CliError {
  std::string cls;
  std::string message;
  int exit_code;
};

[[noreturn]] void fail(const std::string& cls, const std::string& message,
                       int exit_code = 1) {
  throw CliError{cls, message, exit_code};
}

void check(elgm_status st) {
  if (st == ELGM_OK) return;
  int code = 1;
  if (st == ELGM_ERR_PARSE) code = 2;
  if (st == ELGM_ERR_IO) code = 3;
  fail(elgm_status_name(st), elgm_last_error(), code);
}

// RAII wrappers over the opaque handles.
struct Table {
  elgm_table* p = nullptr;
  ~Table() { elgm_table_free(p); }
};
struct Model {
  elgm_model* p = nullptr;
  ~Model() { elgm_model_free(p); }
};
struct FitHandle {
  elgm_fit* p = nullptr;
  ~FitHandle() { elgm_fit_free(p); }
};
struct Samples {
  elgm_samples* p = nullptr;
  ~Samples() { elgm_samples_free(p); }
};

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---- flat dotted-key config documents ---------------------------------

using KvDoc = std::vector<std::pair<std::string, std::string>>;

std::string strip(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

KvDoc read_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("io", "cannot open '" + path + "'", 3);
  KvDoc doc;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = strip(line);
    if (s.empty() || s[0] == '#') continue;
    auto pos = s.find('=');
    if (pos == std::string::npos) {
      fail("parse", path + ": line " + std::to_string(lineno) + " has no '='", 2);
    }
    doc.emplace_back(strip(s.substr(0, pos)), strip(s.substr(pos + 1)));
  }
  return doc;
}

void write_kv_file(const KvDoc& doc, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("io", "cannot open '" + path + "' for writing", 3);
  for (const auto& [k, v] : doc) out << k << " = " << v << "\n";
  if (!out) fail("io", "write failed for '" + path + "'", 3);
}

// ---- run configuration -------------------------------------------------

struct RunConfig {
  std::string model;
  std::string data;
  std::string simulate;
  int k = 3;
  double tol_inner = 1e-8;
  double tol_outer = 1e-6;
  int64_t num_samples = 10000;  // --B
  uint64_t seed = 0;
  std::string out;
  int threads = 1;
  std::string format = "csv";
  // bench / validate extras
  std::string n_list = "1000,10000";
  int reps = 3;
  double threshold = 0.05;
};

// Apply a config document; unknown keys and bad values are all collected so
// the error lists every offending key at once.
void apply_config(const KvDoc& doc, RunConfig& cfg) {
  std::vector<std::string> bad;
  for (const auto& [key, value] : doc) {
    std::string k = key;
    if (k.rfind("config.", 0) == 0) k = k.substr(7);  // accept manifests
    try {
      if (k == "model") cfg.model = value;
      else if (k == "data") cfg.data = value;
      else if (k == "simulate") cfg.simulate = value;
      else if (k == "k") cfg.k = std::stoi(value);
      else if (k == "tol-inner") cfg.tol_inner = std::stod(value);
      else if (k == "tol-outer") cfg.tol_outer = std::stod(value);
      else if (k == "B") cfg.num_samples = std::stoll(value);
      else if (k == "seed") cfg.seed = std::stoull(value);
      else if (k == "out") cfg.out = value;
      else if (k == "threads") cfg.threads = std::stoi(value);
      else if (k == "format") cfg.format = value;
      else if (k == "n") cfg.n_list = value;
      else if (k == "reps") cfg.reps = std::stoi(value);
      else if (k == "threshold") cfg.threshold = std::stod(value);
      else if (k.rfind("manifest.", 0) == 0 || k.rfind("elgm.", 0) == 0 ||
               k == "command") { /* manifest bookkeeping keys */
      } else {
        bad.push_back(k);
      }
    } catch (const std::exception&) {
      bad.push_back(k);
    }
  }
  if (!bad.empty()) {
    std::string list;
    for (size_t i = 0; i < bad.size(); ++i) {
      list += bad[i];
      if (i + 1 < bad.size()) list += ", ";
    }
    fail("parse", "invalid config keys: " + list, 2);
  }
}

KvDoc config_echo(const RunConfig& cfg, const std::string& command) {
  KvDoc doc;
  doc.emplace_back("model", cfg.model);
  if (!cfg.data.empty()) doc.emplace_back("data", cfg.data);
  if (!cfg.simulate.empty()) doc.emplace_back("simulate", cfg.simulate);
  doc.emplace_back("k", std::to_string(cfg.k));
  doc.emplace_back("tol-inner", format_double(cfg.tol_inner));
  doc.emplace_back("tol-outer", format_double(cfg.tol_outer));
  doc.emplace_back("B", std::to_string(cfg.num_samples));
  doc.emplace_back("seed", std::to_string(cfg.seed));
  doc.emplace_back("threads", std::to_string(cfg.threads));
  doc.emplace_back("format", cfg.format);
  if (command == "bench") {
    doc.emplace_back("n", cfg.n_list);
    doc.emplace_back("reps", std::to_string(cfg.reps));
  }
  if (command == "validate") {
    doc.emplace_back("threshold", format_double(cfg.threshold));
  }
  return doc;
}

void write_manifest(const RunConfig& cfg, const std::string& command) {
  if (cfg.out.empty()) return;
  std::filesystem::create_directories(cfg.out);
  KvDoc doc;
  doc.emplace_back("manifest.version", "1");
  doc.emplace_back("elgm.version", elgm_version());
  doc.emplace_back("command", command);
  for (const auto& [k, v] : config_echo(cfg, command)) doc.emplace_back("config." + k, v);
  write_kv_file(doc, cfg.out + "/manifest.kv");
}

// ---- data loading -------------------------------------------------------

// Infer a read schema from the CSV header: known structural columns get
// their natural types, everything else (x0, x1, time, pop, ...) is real.
std::string schema_from_header(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("io", "cannot open '" + path + "'", 3);
  std::string header;
  if (!std::getline(in, header)) fail("parse", "'" + path + "' is empty", 2);
  std::stringstream ss(strip(header));
  std::string name;
  std::string schema;
  while (std::getline(ss, name, ',')) {
    name = strip(name);
    std::string type = "real";
    if (name == "y" || name == "censored" || name == "node_choice" || name == "g" ||
        name == "g1" || name == "g2" || name == "region" || name == "cell") {
      type = "int";
    }
    if (!schema.empty()) schema += ",";
    schema += name + ":" + type;
  }
  return schema;
}

void build_model(const RunConfig& cfg, Table& table, Model& model) {
  if (cfg.model.empty()) fail("parse", "--model is required", 2);
  if (cfg.format != "csv") fail("parse", "unsupported format '" + cfg.format + "'", 2);
  if (!cfg.simulate.empty()) {
    check(elgm_simulate(cfg.model.c_str(), cfg.simulate.c_str(), cfg.seed, &table.p,
                        nullptr));
  } else if (!cfg.data.empty()) {
    std::string schema = schema_from_header(cfg.data);
    check(elgm_table_read_csv(cfg.data.c_str(), schema.c_str(), &table.p));
  } else {
    fail("parse", "either --data or --simulate is required", 2);
  }
  check(elgm_model_create(cfg.model.c_str(), table.p, &model.p));
}

elgm_fit_config fit_config(const RunConfig& cfg) {
  elgm_fit_config c;
  elgm_fit_config_default(&c);
  c.k = cfg.k;
  c.tol_inner = cfg.tol_inner;
  c.tol_outer = cfg.tol_outer;
  c.seed = cfg.seed;
  c.threads = cfg.threads;
  return c;
}

void run_fit(const RunConfig& cfg, Table& table, Model& model, FitHandle& fit) {
  build_model(cfg, table, model);
  elgm_fit_config c = fit_config(cfg);
  check(elgm_fit_run(model.p, &c, &fit.p));
}

std::string kv_text(const KvDoc& doc) {
  std::string out;
  for (const auto& [k, v] : doc) out += k + " = " + v + "\n";
  return out;
}

void write_fit_outputs(const RunConfig& cfg, const FitHandle& fit) {
  if (cfg.out.empty()) return;
  std::filesystem::create_directories(cfg.out);

  char* kv = nullptr;
  check(elgm_fit_metadata_kv(fit.p, kv_text(config_echo(cfg, "fit")).c_str(), &kv));
  {
    std::ofstream out(cfg.out + "/fit.kv");
    out << kv;
  }
  elgm_string_free(kv);

  Table summ;
  check(elgm_fit_summaries(fit.p, &summ.p));
  check(elgm_table_write_csv(summ.p, (cfg.out + "/summaries.csv").c_str()));

  // Grid nodes with their mixture weights, for external plotting.
  const int s = elgm_fit_hyper_dim(fit.p);
  const int64_t nodes = elgm_fit_num_nodes(fit.p);
  std::vector<double> lambda(nodes), coords(std::max<int64_t>(1, nodes * s));
  check(elgm_fit_lambda(fit.p, lambda.data()));
  if (s > 0) check(elgm_fit_nodes(fit.p, coords.data()));
  std::ofstream out(cfg.out + "/nodes.csv");
  for (int j = 0; j < s; ++j) out << "theta" << j << ",";
  out << "lambda\n";
  for (int64_t i = 0; i < nodes; ++i) {
    for (int j = 0; j < s; ++j) out << format_double(coords[i * s + j]) << ",";
    out << format_double(lambda[i]) << "\n";
  }
}

void print_fit_summary(const FitHandle& fit) {
  const int s = elgm_fit_hyper_dim(fit.p);
  std::printf("converged: %s\n", elgm_fit_converged(fit.p) ? "true" : "false");
  if (s > 0) {
    std::vector<double> theta(s);
    check(elgm_fit_theta_hat(fit.p, theta.data()));
    std::printf("theta_hat:");
    for (double t : theta) std::printf(" %.8g", t);
    std::printf("\n");
  }
  std::printf("log_evidence: %.10g\n", elgm_fit_log_evidence(fit.p));
  std::printf("nodes: %lld\n", static_cast<long long>(elgm_fit_num_nodes(fit.p)));
}

void print_table(const elgm_table* table) {
  const int cols = elgm_table_cols(table);
  const int64_t rows = elgm_table_rows(table);
  for (int c = 0; c < cols; ++c) {
    std::printf("%s%s", elgm_table_col_name(table, c), c + 1 < cols ? "," : "\n");
  }
  std::vector<std::vector<double>> data(cols, std::vector<double>(rows));
  for (int c = 0; c < cols; ++c) {
    if (elgm_table_col_is_text(table, c)) continue;
    check(elgm_table_col_reals(table, elgm_table_col_name(table, c), data[c].data()));
  }
  for (int64_t r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (elgm_table_col_is_text(table, c)) {
        std::printf("%s", elgm_table_cell_text(table, c, r));
      } else {
        std::printf("%.8g", data[c][r]);
      }
      std::printf("%s", c + 1 < cols ? "," : "\n");
    }
  }
}

// ---- subcommands ---------------------------------------------------------

int cmd_fit(const RunConfig& cfg) {
  Table table;
  Model model;
  FitHandle fit;
  run_fit(cfg, table, model, fit);
  write_manifest(cfg, "fit");
  write_fit_outputs(cfg, fit);
  print_fit_summary(fit);
  if (cfg.out.empty()) {
    Table summ;
    check(elgm_fit_summaries(fit.p, &summ.p));
    print_table(summ.p);
  }
  return 0;
}

RunConfig config_from_run_dir(const std::string& dir) {
  RunConfig cfg;
  apply_config(read_kv_file(dir + "/manifest.kv"), cfg);
  return cfg;
}

int cmd_sample(const RunConfig& given, const std::string& fit_dir) {
  RunConfig cfg = given;
  if (!fit_dir.empty()) {
    cfg = config_from_run_dir(fit_dir);
    cfg.out = given.out.empty() ? fit_dir : given.out;
    cfg.num_samples = given.num_samples;
  }
  Table table;
  Model model;
  FitHandle fit;
  run_fit(cfg, table, model, fit);

  Samples samples;
  check(elgm_sample(fit.p, cfg.num_samples, given.seed, &samples.p));
  Table stab;
  check(elgm_samples_to_table(samples.p, &stab.p));
  if (!cfg.out.empty()) {
    std::filesystem::create_directories(cfg.out);
    check(elgm_table_write_csv(stab.p, (cfg.out + "/samples.csv").c_str()));
    RunConfig manifest_cfg = cfg;
    manifest_cfg.seed = given.seed;
    write_manifest(manifest_cfg, "sample");
    std::printf("wrote %lld draws to %s/samples.csv\n",
                static_cast<long long>(cfg.num_samples), cfg.out.c_str());
  } else {
    print_table(stab.p);
  }
  return 0;
}

int cmd_summarize(const RunConfig& given, const std::string& fit_dir) {
  RunConfig cfg = given;
  if (!fit_dir.empty()) {
    cfg = config_from_run_dir(fit_dir);
    cfg.out = given.out;
  }
  Table table;
  Model model;
  FitHandle fit;
  run_fit(cfg, table, model, fit);
  Table summ;
  check(elgm_fit_summaries(fit.p, &summ.p));
  if (!cfg.out.empty()) {
    std::filesystem::create_directories(cfg.out);
    check(elgm_table_write_csv(summ.p, (cfg.out + "/summaries.csv").c_str()));
  }
  print_table(summ.p);
  return 0;
}

int cmd_validate(const RunConfig& cfg) {
  Table table;
  Model model;
  build_model(cfg, table, model);
  elgm_fit_config c = fit_config(cfg);
  Table ks;
  check(elgm_validate(model.p, &c, cfg.num_samples, cfg.seed, &ks.p));
  write_manifest(cfg, "validate");
  if (!cfg.out.empty()) {
    check(elgm_table_write_csv(ks.p, (cfg.out + "/ks_report.csv").c_str()));
  }
  print_table(ks.p);

  const int64_t rows = elgm_table_rows(ks.p);
  std::vector<double> values(rows);
  check(elgm_table_col_reals(ks.p, "ks", values.data()));
  double worst = 0.0;
  for (double v : values) worst = std::max(worst, v);
  if (worst > cfg.threshold) {
    fail("validation-failed",
         "worst marginal KS " + format_double(worst) + " exceeds threshold " +
             format_double(cfg.threshold),
         4);
  }
  return 0;
}

int cmd_simulate(const RunConfig& cfg) {
  if (cfg.model.empty()) fail("parse", "--model is required", 2);
  if (cfg.out.empty()) fail("parse", "--out is required for simulate", 2);
  Table table;
  char* truth = nullptr;
  check(elgm_simulate(cfg.model.c_str(), cfg.simulate.c_str(), cfg.seed, &table.p,
                      &truth));
  std::filesystem::create_directories(cfg.out);
  check(elgm_table_write_csv(table.p, (cfg.out + "/data.csv").c_str()));
  {
    std::ofstream out(cfg.out + "/truth.kv");
    out << truth;
  }
  elgm_string_free(truth);
  write_manifest(cfg, "simulate");
  std::printf("wrote %lld rows to %s/data.csv\n",
              static_cast<long long>(elgm_table_rows(table.p)), cfg.out.c_str());
  return 0;
}

int cmd_bench(const RunConfig& cfg) {
  if (cfg.model.empty()) fail("parse", "--model is required", 2);
  std::vector<int64_t> sizes;
  {
    std::stringstream ss(cfg.n_list);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        sizes.push_back(std::stoll(item));
      } catch (const std::exception&) {
        fail("parse", "bad --n entry '" + item + "'", 2);
      }
    }
  }
  if (sizes.empty()) fail("parse", "--n list is empty", 2);
  write_manifest(cfg, "bench");

  std::printf("n,mean_s,sd_s\n");
  std::vector<std::string> lines;
  for (size_t idx = 0; idx < sizes.size(); ++idx) {
    std::string params = "n=" + std::to_string(sizes[idx]);
    if (!cfg.simulate.empty()) params = cfg.simulate + "," + params;
    Table table;
    check(elgm_simulate(cfg.model.c_str(), params.c_str(), cfg.seed + idx, &table.p,
                        nullptr));
    Model model;
    check(elgm_model_create(cfg.model.c_str(), table.p, &model.p));
    elgm_fit_config c = fit_config(cfg);

    std::vector<double> times;
    for (int rep = 0; rep < cfg.reps; ++rep) {
      auto t0 = std::chrono::steady_clock::now();
      FitHandle fit;
      check(elgm_fit_run(model.p, &c, &fit.p));
      times.push_back(
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    double mean = 0.0;
    for (double t : times) mean += t;
    mean /= static_cast<double>(times.size());
    double var = 0.0;
    for (double t : times) var += (t - mean) * (t - mean);
    double sd = times.size() > 1 ? std::sqrt(var / (times.size() - 1)) : 0.0;
    std::printf("%lld,%.4f,%.4f\n", static_cast<long long>(sizes[idx]), mean, sd);
    lines.push_back(std::to_string(sizes[idx]) + "," + format_double(mean) + "," +
                    format_double(sd));
  }
  if (!cfg.out.empty()) {
    std::filesystem::create_directories(cfg.out);
    std::ofstream out(cfg.out + "/timings.csv");
    out << "n,mean_s,sd_s\n";
    for (const auto& l : lines) out << l << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"approximate Bayesian inference for extended latent Gaussian models"};
  app.require_subcommand(1);

  RunConfig cfg;
  if (const char* env = std::getenv("ELGM_THREADS")) {
    try {
      cfg.threads = std::stoi(env);
    } catch (const std::exception&) {
      std::fprintf(stderr, "elgm-error: parse: bad ELGM_THREADS value '%s'\n", env);
      return 2;
    }
  }
  std::string config_path;
  std::string fit_dir;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "config file of flat dotted keys");
    sub->add_option("--model", cfg.model, "model name");
    sub->add_option("--data", cfg.data, "input CSV path");
    sub->add_option("--simulate", cfg.simulate, "simulator spec key=value,...");
    sub->add_option("--k", cfg.k, "quadrature points per dimension");
    sub->add_option("--tol-inner", cfg.tol_inner, "inner gradient tolerance");
    sub->add_option("--tol-outer", cfg.tol_outer, "outer gradient tolerance");
    sub->add_option("--B", cfg.num_samples, "number of posterior draws");
    sub->add_option("--seed", cfg.seed, "random seed");
    sub->add_option("--out", cfg.out, "output directory");
    sub->add_option("--threads", cfg.threads, "worker threads for node solves");
    sub->add_option("--format", cfg.format, "output format (csv)");
  };

  CLI::App* fit = app.add_subcommand("fit", "fit a model and write the results");
  add_common(fit);
  CLI::App* sample = app.add_subcommand("sample", "draw from a fitted posterior");
  add_common(sample);
  sample->add_option("--fit", fit_dir, "run directory holding manifest.kv");
  CLI::App* summarize = app.add_subcommand("summarize", "print posterior summaries");
  add_common(summarize);
  summarize->add_option("--fit", fit_dir, "run directory holding manifest.kv");
  CLI::App* validate =
      app.add_subcommand("validate", "compare the fit against a brute-force oracle");
  add_common(validate);
  std::string validate_n;
  validate->add_option("--n", validate_n, "shorthand for simulate n=<value>");
  validate->add_option("--threshold", cfg.threshold, "KS pass threshold");
  CLI::App* simulate = app.add_subcommand("simulate", "write synthetic data and truth");
  add_common(simulate);
  CLI::App* bench = app.add_subcommand("bench", "timing table over sample sizes");
  add_common(bench);
  bench->add_option("--n", cfg.n_list, "comma-separated sample sizes");
  bench->add_option("--reps", cfg.reps, "repetitions per size");

  CLI11_PARSE(app, argc, argv);

  try {
    // Config file first, then flags override it.
    if (!config_path.empty()) {
      RunConfig file_cfg;
      if (const char* env = std::getenv("ELGM_THREADS")) {
        file_cfg.threads = std::stoi(env);
      }
      apply_config(read_kv_file(config_path), file_cfg);
      auto merge = [&](const CLI::App* sub) {
        RunConfig flags = cfg;
        cfg = file_cfg;
        auto used = [&](const std::string& name) { return sub->count(name) > 0; };
        if (used("--model")) cfg.model = flags.model;
        if (used("--data")) cfg.data = flags.data;
        if (used("--simulate")) cfg.simulate = flags.simulate;
        if (used("--k")) cfg.k = flags.k;
        if (used("--tol-inner")) cfg.tol_inner = flags.tol_inner;
        if (used("--tol-outer")) cfg.tol_outer = flags.tol_outer;
        if (used("--B")) cfg.num_samples = flags.num_samples;
        if (used("--seed")) cfg.seed = flags.seed;
        if (used("--out")) cfg.out = flags.out;
        if (used("--threads")) cfg.threads = flags.threads;
        if (used("--format")) cfg.format = flags.format;
        if (sub->get_option_no_throw("--reps") && used("--reps")) cfg.reps = flags.reps;
        if (sub->get_option_no_throw("--threshold") && used("--threshold")) {
          cfg.threshold = flags.threshold;
        }
        if (sub == bench && used("--n")) cfg.n_list = flags.n_list;
      };
      for (CLI::App* sub : {fit, sample, summarize, validate, simulate, bench}) {
        if (sub->parsed()) merge(sub);
      }
    }
    if (validate->parsed() && !validate_n.empty()) {
      cfg.simulate = cfg.simulate.empty() ? ("n=" + validate_n)
                                          : (cfg.simulate + ",n=" + validate_n);
    }

    if (fit->parsed()) return cmd_fit(cfg);
    if (sample->parsed()) return cmd_sample(cfg, fit_dir);
    if (summarize->parsed()) return cmd_summarize(cfg, fit_dir);
    if (validate->parsed()) return cmd_validate(cfg);
    if (simulate->parsed()) return cmd_simulate(cfg);
    if (bench->parsed()) return cmd_bench(cfg);
  } catch (const CliError& e) {
    std::fprintf(stderr, "elgm-error: %s: %s\n", e.cls.c_str(), e.message.c_str());
    return e.exit_code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "elgm-error: internal: %s\n", e.what());
    return 1;
  }
  return 0;
}
