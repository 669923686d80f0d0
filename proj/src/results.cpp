#include "results.hpp"

#include <cmath>


namespace elgm::io {

namespace {

double constrain_coord(const model::ParameterTransform& tr, int j, double v) {
  return tr.map(j) == model::CoordMap::Log ? std::exp(v) : v;
}

}  // namespace

ColumnTable summaries_table(const infer::FitResult& fit, const model::ElgmModel& model) {
  infer::ThetaSummaries ts = infer::theta_summaries(fit);
  const int s = model.hyper_dim();
  auto u_names = model.theta_names();
  auto n_names = model.theta_natural_names();
  const auto& tr = model.transform();

  Column name{"name", ColType::Category, {}, {}, {}, {}};
  Column mean{"mean", ColType::Real, {}, {}, {}, {}};
  Column sd{"sd", ColType::Real, {}, {}, {}, {}};
  Column q025{"q2.5", ColType::Real, {}, {}, {}, {}};
  Column q50{"q50", ColType::Real, {}, {}, {}, {}};
  Column q975{"q97.5", ColType::Real, {}, {}, {}, {}};

  auto push = [&](const std::string& n, double m, double v, double a, double b, double c) {
    name.codes.push_back(static_cast<int>(name.levels.size()));
    name.levels.push_back(n);
    mean.reals.push_back(m);
    sd.reals.push_back(v);
    q025.reals.push_back(a);
    q50.reals.push_back(b);
    q975.reals.push_back(c);
  };

  const double nan = std::numeric_limits<double>::quiet_NaN();

  // Latent coordinates first: moments of the Gaussian mixture, quantiles by
  // bisection on its marginal CDF.
  const int m = model.latent_dim();
  if (m > 0) {
    VectorXd w_mean;
    Eigen::MatrixXd w_cov;
    infer::mixture_moments(fit, w_mean, w_cov);
    std::vector<Eigen::MatrixXd> node_cov;
    node_cov.reserve(fit.inner.size());
    for (const auto& node : fit.inner) {
      node_cov.push_back(node.hessian_factor.inverse_dense());
    }
    auto mix_cdf = [&](int j, double x) {
      double acc = 0.0;
      for (size_t i = 0; i < fit.inner.size(); ++i) {
        double sd_i = std::sqrt(node_cov[i](j, j));
        acc += fit.grid.lambda[i] *
               std_normal_cdf((x - fit.inner[i].w_hat[j]) / sd_i);
      }
      return acc;
    };
    auto mix_quantile = [&](int j, double p) {
      double sd_j = std::sqrt(w_cov(j, j));
      double lo = w_mean[j] - 10.0 * sd_j, hi = w_mean[j] + 10.0 * sd_j;
      for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        (mix_cdf(j, mid) < p ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    };
    for (int j = 0; j < m; ++j) {
      push("w" + std::to_string(j), w_mean[j], std::sqrt(w_cov(j, j)),
           mix_quantile(j, 0.025), mix_quantile(j, 0.5), mix_quantile(j, 0.975));
    }
  }

  for (int j = 0; j < s; ++j) {
    push(u_names[j], ts.mean[j], ts.sd[j], ts.quantiles(j, 0), ts.quantiles(j, 1),
         ts.quantiles(j, 2));
  }
  for (int j = 0; j < s; ++j) {
    if (tr.map(j) == model::CoordMap::Identity && n_names[j] == u_names[j]) continue;
    // Natural-scale moments are lambda-weighted sums of the transformed
    // nodes; quantiles transform directly (the map is monotone).
    double m1 = 0.0, m2 = 0.0;
    for (int64_t i = 0; i < fit.grid.nodes.rows(); ++i) {
      double v = constrain_coord(tr, j, fit.grid.nodes(i, j));
      m1 += fit.grid.lambda[i] * v;
      m2 += fit.grid.lambda[i] * v * v;
    }
    double nsd = ts.spread_available ? std::sqrt(std::max(0.0, m2 - m1 * m1)) : nan;
    if (ts.spread_available) {
      push(n_names[j], m1, nsd, constrain_coord(tr, j, ts.quantiles(j, 0)),
           constrain_coord(tr, j, ts.quantiles(j, 1)),
           constrain_coord(tr, j, ts.quantiles(j, 2)));
    } else {
      push(n_names[j], m1, nan, nan, nan, nan);
    }
  }

  ColumnTable t;
  t.add_column(std::move(name));
  t.add_column(std::move(mean));
  t.add_column(std::move(sd));
  t.add_column(std::move(q025));
  t.add_column(std::move(q50));
  t.add_column(std::move(q975));
  return t;
}

ColumnTable samples_table(const infer::SampleBatch& batch) {
  ColumnTable t;
  const int m = static_cast<int>(batch.draws.cols());
  for (int j = 0; j < m; ++j) {
    Column c{"w" + std::to_string(j), ColType::Real, {}, {}, {}, {}};
    c.reals.resize(batch.count);
    for (int64_t i = 0; i < batch.count; ++i) c.reals[i] = batch.draws(i, j);
    t.add_column(std::move(c));
  }
  Column nc{"node_choice", ColType::Integer, {}, {}, {}, {}};
  nc.ints.assign(batch.node_choice.begin(), batch.node_choice.end());
  t.add_column(std::move(nc));
  return t;
}

KvDoc fit_metadata(const infer::FitResult& fit, const model::ElgmModel& model,
                   const KvDoc& config_echo, double elapsed_seconds) {
  KvDoc doc;
  doc.emplace_back("format.version", "1");
  doc.emplace_back("elgm.version", "0.1.0");
  for (const auto& [k, v] : config_echo) doc.emplace_back("config." + k, v);
  doc.emplace_back("model.name", model.name());
  doc.emplace_back("model.n", std::to_string(model.n_obs()));
  doc.emplace_back("model.latent_dim", std::to_string(model.latent_dim()));
  doc.emplace_back("model.hyper_dim", std::to_string(model.hyper_dim()));
  doc.emplace_back("fit.converged", fit.converged ? "true" : "false");
  doc.emplace_back("fit.outer_iterations", std::to_string(fit.outer_iterations));
  doc.emplace_back("fit.k", std::to_string(fit.config.k));
  doc.emplace_back("fit.tol_inner", format_double(fit.config.tol_inner));
  doc.emplace_back("fit.tol_outer", format_double(fit.config.tol_outer));
  doc.emplace_back("fit.seed", std::to_string(fit.config.seed));
  doc.emplace_back("fit.log_evidence", format_double(fit.log_evidence));
  const int s = model.hyper_dim();
  for (int j = 0; j < s; ++j) {
    doc.emplace_back("fit.theta_hat." + std::to_string(j), format_double(fit.theta_hat[j]));
  }
  for (int a = 0; a < s; ++a) {
    for (int b = 0; b < s; ++b) {
      doc.emplace_back("fit.hessian." + std::to_string(a) + "." + std::to_string(b),
                       format_double(fit.hessian_out(a, b)));
    }
  }
  for (int64_t i = 0; i < fit.grid.lambda.size(); ++i) {
    doc.emplace_back("fit.lambda." + std::to_string(i), format_double(fit.grid.lambda[i]));
  }
  for (size_t i = 0; i < fit.warnings.size(); ++i) {
    doc.emplace_back("fit.warnings." + std::to_string(i), fit.warnings[i]);
  }
  doc.emplace_back("fit.timings.total_s", format_double(elapsed_seconds));
  return doc;
}

}  // namespace elgm::io
