#pragma once

#include <string>

#include "inference.hpp"
#include "io_sim.hpp"
#include "model_core.hpp"

namespace elgm::io {

// Summary rows: unconstrained coordinates first, then the natural-scale
// coordinates obtained by pushing nodes and quantiles through the monotone
// transform. Columns: name,mean,sd,q2.5,q50,q97.5 (nan when k == 1 leaves
// spread undefined).
ColumnTable summaries_table(const infer::FitResult& fit, const model::ElgmModel& model);

// Sample draws as a table: w0..w{m-1} plus the chosen grid node per draw.
ColumnTable samples_table(const infer::SampleBatch& batch);

// Fit metadata document: format version, echoed configuration, theta_hat,
// outer Hessian, log evidence, per-node lambda, timings, warnings. Doubles at
// 17 significant digits round-trip exactly.
KvDoc fit_metadata(const infer::FitResult& fit, const model::ElgmModel& model,
                   const KvDoc& config_echo, double elapsed_seconds);

}  // namespace elgm::io
