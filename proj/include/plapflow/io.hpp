// CSV/JSON serialization: trajectories, sampled matrices, signal vectors,
// schedules. All floating-point output uses shortest-round-trip formatting
// (17 significant digits), so identical inputs give byte-identical files.
#pragma once

#include <json.hpp>

#include <string>
#include <vector>

#include "plapflow/core.hpp"

namespace plapflow {

// %.17g rendering; round-trips any finite double exactly.
std::string format_double(double v);

// One row per state: k, t^k, energy, inner_iterations (0 for k=0), values.
void write_trajectory_csv(const Trajectory& traj, const std::string& path);

// Schedule, final norms (L1/L2/Linf of the last state), and the fitted
// exponential decay constant of the energy gap (when computable).
nlohmann::json trajectory_summary_json(const Trajectory& traj);

nlohmann::json schedule_json(const Schedule& sched);

// Sparse triplet list (i, j, weight), upper triangle only, preceded by a
// single JSON header line prefixed with '#'.
void write_matrix_triplets_csv(const KernelMatrix& kmat, const std::string& path);

// Single-column CSV of decimal doubles in row-major cell order.
std::vector<double> read_signal_csv(const std::string& path);
void write_signal_csv(const std::vector<double>& values, const std::string& path);

}  // namespace plapflow
