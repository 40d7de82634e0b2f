#pragma once

#include <string>
#include <vector>

#include "dip/problem.hpp"

namespace dip {

/// Loads a partitioned QP instance from a pnlp-v1 JSON document:
///
/// {
///   "format": "pnlp-v1",
///   "n_c": <coupling dimension>,
///   "b": [<n_c reals>],
///   "subsystems": [
///     {
///       "n_x": <int>,
///       "objective": {"H": [[...]], "c": [...], "c0": 0.0},
///       "eq":   {"G": [[...]], "rhs": [...]},      // optional: G x - rhs = 0
///       "ineq": {"G": [[...]], "rhs": [...]},      // optional: G x - rhs <= 0
///       "A": [[row, col, value], ...],             // coupling triplets
///       "x0": [...]                                // optional initial guess
///     }, ...
///   ]
/// }
///
/// Structure-only documents (no "objective") describe dimensions and coupling
/// for debugging exports and are rejected here with a clear message.
struct PnlpInstance {
  PartitionedNlp problem;
  std::vector<Vector> x0;  // per subsystem; zero when the file has none
};

PnlpInstance load_pnlp_json(const std::string& text);
PnlpInstance load_pnlp_file(const std::string& path);

/// Serializes a quadratic instance back to pnlp-v1.
std::string save_pnlp_json(const PartitionedNlp& problem, const std::vector<Vector>* x0 = nullptr);

/// Structure-only export (dimensions, coupling triplets, b) for instances
/// whose evaluators are general callbacks; loadable for inspection only.
std::string export_pnlp_structure_json(const PartitionedNlp& problem);

}  // namespace dip
