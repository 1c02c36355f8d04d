#pragma once

#include "sdma/dataset.hpp"
#include "sdma/functions.hpp"
#include "sdma/lm.hpp"

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace sdma {

using Rng = std::mt19937_64;

/// Independent stream for restart `index` of a fit seeded with `seed`.
Rng restart_rng(std::uint64_t seed, std::size_t index);

struct FitSpec {
  FunctionClass function_class = FunctionClass::SDMA;
  std::size_t k_terms = 5;
  std::size_t m_terms = 5;  // ignored for MA/SMA
  std::size_t restarts = 30;
  std::uint64_t rng_seed = 0;
  LmConfig lm{};
  /// Worker threads for restarts; 0 picks the hardware concurrency. The
  /// result does not depend on this value.
  std::size_t threads = 0;

  /// Sets K = M = order.
  static FitSpec with_order(FunctionClass cls, std::size_t order);
};

void validate(const FitSpec& spec);

struct FitResult {
  ModelParams params;
  double rms_error = 0.0;
  std::vector<double> restart_costs;
  std::size_t best_restart_index = 0;
  LmReport lm_report;
  std::vector<std::string> warnings;
};

/// Sum of squared log-space residuals.
double sum_squared_error(const ModelParams& params, const DataSet& data);

/// sqrt(mean squared log-space residual); 0.00149 reads as 0.149%.
double rms_error(const ModelParams& params, const DataSet& data);

/// K planes from a nearest-anchor partition of the data, one least-squares
/// plane per cell (minimum-norm when a cell is underdetermined). Cells that
/// end up empty get the global plane plus a small perturbation.
MaBlock init_ma(const DataSet& data, std::size_t k, Rng& rng);

/// Everything a single restart needs besides the data and orders.
struct RestartOptions {
  LmConfig lm{};
  /// Restarts other than the first randomize their seeds: offsets get
  /// N(0, 0.1 * var(y)) noise and slopes N(0, 0.1).
  bool perturb = false;
};

MaBlock fit_ma(const DataSet& data, std::size_t k, Rng& rng, const RestartOptions& opts = {});
SmaModel fit_sma(const DataSet& data, std::size_t k, Rng& rng, const RestartOptions& opts = {});
DmaModel fit_dma(const DataSet& data, std::size_t k, std::size_t m, Rng& rng,
                 const RestartOptions& opts = {});
SdmaModel fit_sdma(const DataSet& data, std::size_t k, std::size_t m, Rng& rng,
                   const RestartOptions& opts = {});

/// Runs `spec.restarts` independent restarts and keeps the lowest-cost one
/// (lowest index on ties). Deterministic in (data, spec minus threads).
FitResult fit(const DataSet& data, const FitSpec& spec);

/// Softness used to seed SMA/SDMA from their hard counterparts.
inline constexpr double kInitialSoftness = 10.0;

}  // namespace sdma
