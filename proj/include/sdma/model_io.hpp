#pragma once

#include "sdma/fitting.hpp"
#include "sdma/functions.hpp"
#include "sdma/sp_export.hpp"

#include <optional>
#include <string>
#include <vector>

namespace sdma {

inline constexpr int kModelFormatVersion = 1;
inline constexpr int kConstraintFormatVersion = 1;

/// Fit diagnostics carried alongside a saved model. Informational only.
struct FitSummary {
  double rms_error = 0.0;
  std::size_t restarts = 0;
  std::size_t best_restart_index = 0;
  std::uint64_t rng_seed = 0;
  Termination termination = Termination::MaxIter;
};

struct ModelFile {
  ModelParams params;
  std::optional<FitSummary> fit;
};

// Model files are JSON objects:
//   {"format": "sdma-model", "version": 1, "function_class": "sdma",
//    "n_dims": N, "k_terms": K, "m_terms": M,
//    "gamma_layout": ["b", "a", "log_alpha", "h", "g", "log_beta"],
//    "gamma": [...], "fit": {...}}
// Doubles are written in shortest round-trip form, so load(save(p)) == p
// bit for bit.

std::string model_to_json(const ModelFile& model);
ModelFile model_from_json(const std::string& text);
void save_model(const ModelFile& model, const std::string& path);
ModelFile load_model(const std::string& path);

// Constraint files:
//   {"format": "sdma-constraints", "version": 1, "kind": "sp" | "gp",
//    "n_dims": N, "alpha": a, "beta": b | null,
//    "convex_terms": [{"coefficient": c, "exponents": [...]}, ...],
//    "concave_terms": [...],
//    "original_operator": "<=",
//    "operators": {"w": "<=", "p_convex": ">=", "p_concave": "<="},
//    "var_names": ["u1", ...]}

std::string constraints_to_json(const SpConstraintSet& cs, const std::vector<std::string>& var_names);
SpConstraintSet constraints_from_json(const std::string& text, std::vector<std::string>* var_names = nullptr);
void save_constraints(const SpConstraintSet& cs, const std::vector<std::string>& var_names,
                      const std::string& path);
SpConstraintSet load_constraints(const std::string& path, std::vector<std::string>* var_names = nullptr);

}  // namespace sdma
