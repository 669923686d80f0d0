#pragma once

#include <memory>
#include <string>

#include "io_sim.hpp"
#include "models_builtin.hpp"

namespace elgm::model {

// Construct a built-in model from a column table. Expected columns:
//   conjugate:         y
//   gaussian-scale:    y
//   bernoulli-glmm:    y, x0..x{p-1}, g1, g2
//   cox-ph:            time, censored, x0..x{p-1}, optional g
//   poisson-aggregate: y, region, cell, pop, x0..x{p-1}
// Group and region/cell columns may be integer codes or categories.
std::unique_ptr<ElgmModel> make_model(const std::string& name,
                                      const io::ColumnTable& table);

// Run a named simulator from a kv parameter spec (e.g. "n=100,d1=5,...").
// Vector-valued parameters use ';' between entries: beta=1.0;-0.5.
io::SimTruth run_simulator(const std::string& name, const std::string& params,
                           uint64_t seed);

}  // namespace elgm::model
