#include "sdma/fitting.hpp"

#include "sdma/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <optional>
#include <thread>

namespace sdma {

namespace {

constexpr std::size_t kMaxPartitionSweeps = 50;
constexpr double kEmptyCellNoise = 1e-3;
constexpr double kConcaveInitNoise = 1e-3;
constexpr double kRestartVarianceScale = 0.1;

struct Fitted {
  ModelParams params;
  LmReport report;
};

double sample_stddev(const Eigen::VectorXd& y) {
  if (y.size() < 2) return 0.0;
  const double mean = y.mean();
  return std::sqrt((y.array() - mean).square().sum() / static_cast<double>(y.size() - 1));
}

// Minimum-norm least-squares plane through the listed rows.
void fit_plane(const DataSet& data, const std::vector<std::size_t>& rows, MaBlock& blk,
               std::size_t k) {
  const auto n = static_cast<Eigen::Index>(data.n_dims());
  Eigen::MatrixXd design(static_cast<Eigen::Index>(rows.size()), n + 1);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto rr = static_cast<Eigen::Index>(r);
    design(rr, 0) = 1.0;
    design.row(rr).tail(n) = data.x().row(static_cast<Eigen::Index>(rows[r]));
    rhs[rr] = data.value(rows[r]);
  }
  const Eigen::VectorXd coef = design.completeOrthogonalDecomposition().solve(rhs);
  const auto kk = static_cast<Eigen::Index>(k);
  blk.b[kk] = coef[0];
  blk.a.row(kk) = coef.tail(n).transpose();
}

MaBlock global_plane(const DataSet& data) {
  std::vector<std::size_t> all(data.n_points());
  std::iota(all.begin(), all.end(), std::size_t{0});
  MaBlock blk = MaBlock::zeros(1, data.n_dims());
  fit_plane(data, all, blk, 0);
  return blk;
}

void perturb_block(MaBlock& blk, double offset_sd, double slope_sd, Rng& rng) {
  std::normal_distribution<double> offset(0.0, offset_sd > 0.0 ? offset_sd : 1.0);
  std::normal_distribution<double> slope(0.0, slope_sd);
  for (Eigen::Index k = 0; k < blk.b.size(); ++k) {
    if (offset_sd > 0.0) blk.b[k] += offset(rng);
    for (Eigen::Index d = 0; d < blk.a.cols(); ++d) blk.a(k, d) += slope(rng);
  }
}

double restart_offset_sd(const DataSet& data) {
  return sample_stddev(data.y()) * std::sqrt(kRestartVarianceScale);
}

double restart_slope_sd() { return std::sqrt(kRestartVarianceScale); }

Fitted run_lm(const DataSet& data, const ModelParams& start, const LmConfig& cfg) {
  const ParamLayout layout = layout_of(start);
  const std::size_t p = layout.size();

  const auto residuals = [&](const Eigen::VectorXd& gamma, Eigen::VectorXd& r) {
    r = eval_batch(unpack(layout, {gamma.data(), p}), data.x()) - data.y();
  };
  const auto jacobian_rows = [&](const Eigen::VectorXd& gamma, Eigen::MatrixXd& jac) {
    jacobian_batch(unpack(layout, {gamma.data(), p}), data.x(), jac);
  };

  LmResult res = lm_minimize(residuals, jacobian_rows, pack(start), cfg);
  return {unpack(layout, {res.gamma.data(), p}), std::move(res.report)};
}

// Alternating partition/refit: assign each point to its active plane, refit
// each non-empty cell, repeat until the assignment settles. Returns the best
// block seen, which is never worse than the input.
MaBlock refine_partition(const DataSet& data, MaBlock blk) {
  const std::size_t k = blk.terms();
  const ModelParams start = MaModel{blk};
  double best_cost = sum_squared_error(start, data);
  MaBlock best = blk;

  std::vector<std::size_t> assignment(data.n_points(), k);
  for (std::size_t sweep = 0; sweep < kMaxPartitionSweeps; ++sweep) {
    std::vector<std::vector<std::size_t>> cells(k);
    bool changed = false;
    for (std::size_t j = 0; j < data.n_points(); ++j) {
      const std::size_t active = eval_ma_argmax(blk, data.point(j));
      changed = changed || active != assignment[j];
      assignment[j] = active;
      cells[active].push_back(j);
    }
    if (!changed) break;
    for (std::size_t c = 0; c < k; ++c) {
      if (!cells[c].empty()) fit_plane(data, cells[c], blk, c);
    }
    const double cost = sum_squared_error(MaModel{blk}, data);
    if (cost < best_cost) {
      best_cost = cost;
      best = blk;
    }
  }
  return best;
}

Fitted fit_ma_stage(const DataSet& data, std::size_t k, Rng& rng, const RestartOptions& opts) {
  MaBlock blk = init_ma(data, k, rng);
  if (opts.perturb) perturb_block(blk, restart_offset_sd(data), restart_slope_sd(), rng);
  blk = refine_partition(data, std::move(blk));
  return run_lm(data, MaModel{std::move(blk)}, opts.lm);
}

Fitted fit_sma_stage(const DataSet& data, std::size_t k, Rng& rng, const RestartOptions& opts) {
  Fitted ma = fit_ma_stage(data, k, rng, opts);
  SmaModel start{std::get<MaModel>(ma.params).convex, SoftParam::from_alpha(kInitialSoftness)};
  return run_lm(data, start, opts.lm);
}

Fitted fit_dma_stage(const DataSet& data, std::size_t k, std::size_t m, Rng& rng,
                     const RestartOptions& opts) {
  Fitted ma = fit_ma_stage(data, k, rng, opts);
  MaBlock concave = MaBlock::zeros(m, data.n_dims());
  std::uniform_real_distribution<double> jitter(-kConcaveInitNoise, kConcaveInitNoise);
  for (Eigen::Index i = 0; i < concave.b.size(); ++i) {
    concave.b[i] = jitter(rng);
    for (Eigen::Index d = 0; d < concave.a.cols(); ++d) concave.a(i, d) = jitter(rng);
  }
  if (opts.perturb) perturb_block(concave, restart_offset_sd(data), restart_slope_sd(), rng);
  DmaModel start{std::get<MaModel>(ma.params).convex, std::move(concave)};
  return run_lm(data, start, opts.lm);
}

Fitted fit_sdma_stage(const DataSet& data, std::size_t k, std::size_t m, Rng& rng,
                      const RestartOptions& opts) {
  Fitted dma = fit_dma_stage(data, k, m, rng, opts);
  auto& seed = std::get<DmaModel>(dma.params);
  SdmaModel start{seed.convex, SoftParam::from_alpha(kInitialSoftness), seed.concave,
                  SoftParam::from_alpha(kInitialSoftness)};
  return run_lm(data, start, opts.lm);
}

Fitted fit_one(const DataSet& data, const FitSpec& spec, Rng& rng, const RestartOptions& opts) {
  switch (spec.function_class) {
    case FunctionClass::MA: return fit_ma_stage(data, spec.k_terms, rng, opts);
    case FunctionClass::SMA: return fit_sma_stage(data, spec.k_terms, rng, opts);
    case FunctionClass::DMA: return fit_dma_stage(data, spec.k_terms, spec.m_terms, rng, opts);
    case FunctionClass::SDMA: return fit_sdma_stage(data, spec.k_terms, spec.m_terms, rng, opts);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown function class");
}

std::size_t parameter_count(const FitSpec& spec, std::size_t n) {
  const bool diff = spec.function_class == FunctionClass::DMA || spec.function_class == FunctionClass::SDMA;
  return ParamLayout{spec.function_class, spec.k_terms, diff ? spec.m_terms : 0, n}.size();
}

}  // namespace

Rng restart_rng(std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(index) >> 32)};
  return Rng(seq);
}

FitSpec FitSpec::with_order(FunctionClass cls, std::size_t order) {
  FitSpec spec;
  spec.function_class = cls;
  spec.k_terms = order;
  spec.m_terms = order;
  return spec;
}

void validate(const FitSpec& spec) {
  if (spec.k_terms < 1) throw Error(ErrorCode::InvalidArgument, "K must be at least 1");
  const bool diff = spec.function_class == FunctionClass::DMA || spec.function_class == FunctionClass::SDMA;
  if (diff && spec.m_terms < 1) throw Error(ErrorCode::InvalidArgument, "M must be at least 1");
  if (spec.restarts < 1) throw Error(ErrorCode::InvalidArgument, "restarts must be at least 1");
  validate(spec.lm);
}

double sum_squared_error(const ModelParams& params, const DataSet& data) {
  if (model_dims(params) != data.n_dims()) {
    throw Error(ErrorCode::DimensionMismatch,
                "model has " + std::to_string(model_dims(params)) + " inputs, data has " +
                    std::to_string(data.n_dims()));
  }
  return (eval_batch(params, data.x()) - data.y()).squaredNorm();
}

double rms_error(const ModelParams& params, const DataSet& data) {
  return std::sqrt(sum_squared_error(params, data) / static_cast<double>(data.n_points()));
}

MaBlock init_ma(const DataSet& data, std::size_t k, Rng& rng) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "K must be at least 1");
  const std::size_t m = data.n_points();
  const std::size_t n_anchors = std::min(k, m);

  // Partial Fisher-Yates for n_anchors distinct rows.
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < n_anchors; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, m - 1);
    std::swap(order[i], order[pick(rng)]);
  }

  std::vector<std::vector<std::size_t>> cells(k);
  for (std::size_t j = 0; j < m; ++j) {
    std::size_t nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n_anchors; ++c) {
      const double dist = (data.x().row(static_cast<Eigen::Index>(j)) -
                           data.x().row(static_cast<Eigen::Index>(order[c])))
                              .squaredNorm();
      if (dist < best) {
        best = dist;
        nearest = c;
      }
    }
    cells[nearest].push_back(j);
  }

  const MaBlock global = global_plane(data);
  MaBlock blk = MaBlock::zeros(k, data.n_dims());
  std::normal_distribution<double> noise(0.0, kEmptyCellNoise);
  for (std::size_t c = 0; c < k; ++c) {
    if (!cells[c].empty()) {
      fit_plane(data, cells[c], blk, c);
      continue;
    }
    const auto cc = static_cast<Eigen::Index>(c);
    blk.b[cc] = global.b[0] + noise(rng);
    for (Eigen::Index d = 0; d < blk.a.cols(); ++d) blk.a(cc, d) = global.a(0, d) + noise(rng);
  }
  return blk;
}

MaBlock fit_ma(const DataSet& data, std::size_t k, Rng& rng, const RestartOptions& opts) {
  return std::get<MaModel>(fit_ma_stage(data, k, rng, opts).params).convex;
}

SmaModel fit_sma(const DataSet& data, std::size_t k, Rng& rng, const RestartOptions& opts) {
  return std::get<SmaModel>(fit_sma_stage(data, k, rng, opts).params);
}

DmaModel fit_dma(const DataSet& data, std::size_t k, std::size_t m, Rng& rng,
                 const RestartOptions& opts) {
  if (m < 1) throw Error(ErrorCode::InvalidArgument, "M must be at least 1");
  return std::get<DmaModel>(fit_dma_stage(data, k, m, rng, opts).params);
}

SdmaModel fit_sdma(const DataSet& data, std::size_t k, std::size_t m, Rng& rng,
                   const RestartOptions& opts) {
  if (m < 1) throw Error(ErrorCode::InvalidArgument, "M must be at least 1");
  return std::get<SdmaModel>(fit_sdma_stage(data, k, m, rng, opts).params);
}

FitResult fit(const DataSet& data, const FitSpec& spec) {
  validate(spec);

  std::vector<std::string> warnings;
  const std::size_t n_params = parameter_count(spec, data.n_dims());
  if (data.n_points() < 3 * n_params) {
    warnings.push_back(std::to_string(data.n_points()) + " points for " +
                       std::to_string(n_params) +
                       " parameters; fewer than 3 points per parameter");
  }

  struct Slot {
    std::optional<Fitted> fitted;
    double cost = std::numeric_limits<double>::infinity();
    std::exception_ptr error;
  };
  std::vector<Slot> slots(spec.restarts);

  const auto run = [&](std::size_t r) {
    try {
      Rng rng = restart_rng(spec.rng_seed, r);
      RestartOptions opts{spec.lm, r != 0};
      Fitted f = fit_one(data, spec, rng, opts);
      slots[r].cost = f.report.final_cost;
      slots[r].fitted = std::move(f);
    } catch (...) {
      slots[r].error = std::current_exception();
    }
  };

  std::size_t workers = spec.threads != 0 ? spec.threads : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, spec.restarts);
  if (workers == 1) {
    for (std::size_t r = 0; r < spec.restarts; ++r) run(r);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t r = next++; r < spec.restarts; r = next++) run(r);
      });
    }
  }

  std::optional<std::size_t> best;
  for (std::size_t r = 0; r < slots.size(); ++r) {
    if (!slots[r].fitted) continue;
    if (!best || slots[r].cost < slots[*best].cost) best = r;
  }
  if (!best) std::rethrow_exception(slots.front().error);

  FitResult result{std::move(slots[*best].fitted->params), 0.0, {}, *best,
                   std::move(slots[*best].fitted->report), std::move(warnings)};
  result.restart_costs.reserve(slots.size());
  for (const auto& s : slots) result.restart_costs.push_back(s.cost);
  result.rms_error = std::sqrt(result.restart_costs[*best] / static_cast<double>(data.n_points()));
  return result;
}

}  // namespace sdma
