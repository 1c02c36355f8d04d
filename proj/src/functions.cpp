#include "sdma/functions.hpp"

#include "sdma/error.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <optional>
#include <vector>

namespace sdma {

namespace {

void check_dims(const MaBlock& p, std::span<const double> x) {
  if (x.size() != p.dims()) {
    throw Error(ErrorCode::DimensionMismatch,
                "point has " + std::to_string(x.size()) + " coordinates, model expects " +
                    std::to_string(p.dims()));
  }
}

void check_grad(std::span<double> grad, std::size_t expected) {
  if (grad.size() != expected) {
    throw Error(ErrorCode::DimensionMismatch,
                "gradient buffer has length " + std::to_string(grad.size()) + ", expected " +
                    std::to_string(expected));
  }
}

double plane(const MaBlock& p, std::size_t k, std::span<const double> x) {
  const auto kk = static_cast<Eigen::Index>(k);
  double z = p.b[kk];
  for (std::size_t i = 0; i < x.size(); ++i) z += p.a(kk, static_cast<Eigen::Index>(i)) * x[i];
  return z;
}

// Softmax weights of alpha*z and the smoothed maximum (1/alpha) LSE(alpha z).
struct SoftMax {
  std::vector<double> weights;
  std::vector<double> z;
  double value;
};

SoftMax soft_max(const MaBlock& p, double alpha, std::span<const double> x) {
  const std::size_t k = p.terms();
  SoftMax out{std::vector<double>(k), std::vector<double>(k), 0.0};
  double zmax = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i) {
    out.z[i] = plane(p, i, x);
    zmax = std::max(zmax, out.z[i]);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    out.weights[i] = std::exp(alpha * (out.z[i] - zmax));
    sum += out.weights[i];
  }
  for (double& w : out.weights) w /= sum;
  out.value = zmax + std::log(sum) / alpha;
  return out;
}

// Writes d(LSE)/d(b, a, log alpha) scaled by `sign` starting at `offset`.
void write_soft_block(const SoftMax& sm, std::span<const double> x, double sign,
                      std::span<double> grad, std::size_t b_off, std::size_t a_off,
                      std::size_t log_off) {
  const std::size_t k = sm.weights.size();
  const std::size_t n = x.size();
  double weighted = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double w = sm.weights[i];
    grad[b_off + i] = sign * w;
    for (std::size_t d = 0; d < n; ++d) grad[a_off + i * n + d] = sign * w * x[d];
    weighted += w * sm.z[i];
  }
  grad[log_off] = sign * (weighted - sm.value);
}

void write_hard_block(const MaBlock& p, std::span<const double> x, double sign,
                      std::span<double> grad, std::size_t b_off, std::size_t a_off) {
  const std::size_t k = p.terms();
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < k; ++i) {
    grad[b_off + i] = 0.0;
    for (std::size_t d = 0; d < n; ++d) grad[a_off + i * n + d] = 0.0;
  }
  const std::size_t active = eval_ma_argmax(p, x);
  grad[b_off + active] = sign;
  for (std::size_t d = 0; d < n; ++d) grad[a_off + active * n + d] = sign * x[d];
}

void validate_block(const MaBlock& p, const char* name) {
  if (p.b.size() < 1) {
    throw Error(ErrorCode::InvalidArgument, std::string(name) + " block needs at least one term");
  }
  if (p.a.rows() != p.b.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(name) + " block: slope rows do not match offset count");
  }
  if (p.a.cols() < 1) {
    throw Error(ErrorCode::DimensionMismatch, std::string(name) + " block has no input dimensions");
  }
  if (!p.b.allFinite() || !p.a.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, std::string(name) + " block has non-finite entries");
  }
}

void validate_soft(SoftParam s, const char* name) {
  if (!std::isfinite(s.log_alpha)) {
    throw Error(ErrorCode::InvalidArgument, std::string("log ") + name + " is not finite");
  }
}

MaBlock read_block(std::span<const double> gamma, std::size_t b_off, std::size_t a_off,
                   std::size_t k, std::size_t n) {
  MaBlock blk = MaBlock::zeros(k, n);
  for (std::size_t i = 0; i < k; ++i) {
    blk.b[static_cast<Eigen::Index>(i)] = gamma[b_off + i];
    for (std::size_t d = 0; d < n; ++d) {
      blk.a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = gamma[a_off + i * n + d];
    }
  }
  return blk;
}

void write_block(const MaBlock& blk, Eigen::VectorXd& gamma, std::size_t b_off, std::size_t a_off) {
  const std::size_t k = blk.terms();
  const std::size_t n = blk.dims();
  for (std::size_t i = 0; i < k; ++i) {
    gamma[static_cast<Eigen::Index>(b_off + i)] = blk.b[static_cast<Eigen::Index>(i)];
    for (std::size_t d = 0; d < n; ++d) {
      gamma[static_cast<Eigen::Index>(a_off + i * n + d)] =
          blk.a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d));
    }
  }
}

}  // namespace

const char* to_string(FunctionClass cls) {
  switch (cls) {
    case FunctionClass::MA: return "ma";
    case FunctionClass::SMA: return "sma";
    case FunctionClass::DMA: return "dma";
    case FunctionClass::SDMA: return "sdma";
  }
  return "?";
}

FunctionClass parse_function_class(const std::string& name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "ma") return FunctionClass::MA;
  if (lower == "sma") return FunctionClass::SMA;
  if (lower == "dma") return FunctionClass::DMA;
  if (lower == "sdma") return FunctionClass::SDMA;
  throw Error(ErrorCode::InvalidArgument, "unknown function class '" + name + "'");
}

FunctionClass function_class(const ModelParams& p) {
  return static_cast<FunctionClass>(p.index());
}

std::size_t model_dims(const ModelParams& p) {
  return std::visit([](const auto& m) { return m.convex.dims(); }, p);
}

std::size_t convex_terms(const ModelParams& p) {
  return std::visit([](const auto& m) { return m.convex.terms(); }, p);
}

std::size_t concave_terms(const ModelParams& p) {
  if (const auto* d = std::get_if<DmaModel>(&p)) return d->concave.terms();
  if (const auto* s = std::get_if<SdmaModel>(&p)) return s->concave.terms();
  return 0;
}

ParamLayout layout_of(const ModelParams& p) {
  return {function_class(p), convex_terms(p), concave_terms(p), model_dims(p)};
}

void validate(const ModelParams& p) {
  std::visit(
      [](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        validate_block(m.convex, "convex");
        if constexpr (std::is_same_v<T, SmaModel>) validate_soft(m.alpha, "alpha");
        if constexpr (std::is_same_v<T, DmaModel> || std::is_same_v<T, SdmaModel>) {
          validate_block(m.concave, "concave");
          if (m.concave.dims() != m.convex.dims()) {
            throw Error(ErrorCode::DimensionMismatch,
                        "convex and concave blocks have different input dimensions");
          }
        }
        if constexpr (std::is_same_v<T, SdmaModel>) {
          validate_soft(m.alpha, "alpha");
          validate_soft(m.beta, "beta");
        }
      },
      p);
}

Eigen::VectorXd pack(const ModelParams& p) {
  const ParamLayout l = layout_of(p);
  Eigen::VectorXd gamma(static_cast<Eigen::Index>(l.size()));
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        write_block(m.convex, gamma, l.b_offset(), l.a_offset());
        if constexpr (std::is_same_v<T, SmaModel> || std::is_same_v<T, SdmaModel>) {
          gamma[static_cast<Eigen::Index>(l.log_alpha_offset())] = m.alpha.log_alpha;
        }
        if constexpr (std::is_same_v<T, DmaModel> || std::is_same_v<T, SdmaModel>) {
          write_block(m.concave, gamma, l.h_offset(), l.g_offset());
        }
        if constexpr (std::is_same_v<T, SdmaModel>) {
          gamma[static_cast<Eigen::Index>(l.log_beta_offset())] = m.beta.log_alpha;
        }
      },
      p);
  return gamma;
}

ModelParams unpack(const ParamLayout& l, std::span<const double> gamma) {
  if (l.k < 1 || l.n < 1 || (l.difference() && l.m < 1)) {
    throw Error(ErrorCode::InvalidArgument, "parameter layout needs K >= 1, N >= 1 and M >= 1");
  }
  if (gamma.size() != l.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "parameter vector has length " + std::to_string(gamma.size()) + ", layout needs " +
                    std::to_string(l.size()));
  }
  MaBlock convex = read_block(gamma, l.b_offset(), l.a_offset(), l.k, l.n);
  switch (l.cls) {
    case FunctionClass::MA:
      return MaModel{std::move(convex)};
    case FunctionClass::SMA:
      return SmaModel{std::move(convex), {gamma[l.log_alpha_offset()]}};
    case FunctionClass::DMA:
      return DmaModel{std::move(convex), read_block(gamma, l.h_offset(), l.g_offset(), l.m, l.n)};
    case FunctionClass::SDMA:
      return SdmaModel{std::move(convex), {gamma[l.log_alpha_offset()]},
                       read_block(gamma, l.h_offset(), l.g_offset(), l.m, l.n),
                       {gamma[l.log_beta_offset()]}};
  }
  throw Error(ErrorCode::InvalidArgument, "unknown function class");
}

double eval_ma(const MaBlock& p, std::span<const double> x) {
  check_dims(p, x);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < p.terms(); ++k) best = std::max(best, plane(p, k, x));
  return best;
}

std::size_t eval_ma_argmax(const MaBlock& p, std::span<const double> x) {
  check_dims(p, x);
  std::size_t arg = 0;
  double best = plane(p, 0, x);
  for (std::size_t k = 1; k < p.terms(); ++k) {
    const double z = plane(p, k, x);
    if (z > best) {
      best = z;
      arg = k;
    }
  }
  return arg;
}

double eval_sma(const MaBlock& p, SoftParam s, std::span<const double> x) {
  check_dims(p, x);
  return soft_max(p, s.alpha(), x).value;
}

double eval_dma(const DmaModel& p, std::span<const double> x) {
  return eval_ma(p.convex, x) - eval_ma(p.concave, x);
}

double eval_sdma(const SdmaModel& p, std::span<const double> x) {
  return eval_sma(p.convex, p.alpha, x) - eval_sma(p.concave, p.beta, x);
}

double eval(const ModelParams& p, std::span<const double> x) {
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, MaModel>) return eval_ma(m.convex, x);
        if constexpr (std::is_same_v<T, SmaModel>) return eval_sma(m.convex, m.alpha, x);
        if constexpr (std::is_same_v<T, DmaModel>) return eval_dma(m, x);
        if constexpr (std::is_same_v<T, SdmaModel>) return eval_sdma(m, x);
      },
      p);
}

void jac_ma(const MaBlock& p, std::span<const double> x, std::span<double> grad) {
  check_dims(p, x);
  const ParamLayout l{FunctionClass::MA, p.terms(), 0, p.dims()};
  check_grad(grad, l.size());
  write_hard_block(p, x, 1.0, grad, l.b_offset(), l.a_offset());
}

void jac_sma(const MaBlock& p, SoftParam s, std::span<const double> x, std::span<double> grad) {
  check_dims(p, x);
  const ParamLayout l{FunctionClass::SMA, p.terms(), 0, p.dims()};
  check_grad(grad, l.size());
  write_soft_block(soft_max(p, s.alpha(), x), x, 1.0, grad, l.b_offset(), l.a_offset(),
                   l.log_alpha_offset());
}

void jac_dma(const DmaModel& p, std::span<const double> x, std::span<double> grad) {
  check_dims(p.convex, x);
  check_dims(p.concave, x);
  const ParamLayout l{FunctionClass::DMA, p.convex.terms(), p.concave.terms(), p.convex.dims()};
  check_grad(grad, l.size());
  write_hard_block(p.convex, x, 1.0, grad, l.b_offset(), l.a_offset());
  write_hard_block(p.concave, x, -1.0, grad, l.h_offset(), l.g_offset());
}

void jac_sdma(const SdmaModel& p, std::span<const double> x, std::span<double> grad) {
  check_dims(p.convex, x);
  check_dims(p.concave, x);
  const ParamLayout l{FunctionClass::SDMA, p.convex.terms(), p.concave.terms(), p.convex.dims()};
  check_grad(grad, l.size());
  write_soft_block(soft_max(p.convex, p.alpha.alpha(), x), x, 1.0, grad, l.b_offset(),
                   l.a_offset(), l.log_alpha_offset());
  write_soft_block(soft_max(p.concave, p.beta.alpha(), x), x, -1.0, grad, l.h_offset(),
                   l.g_offset(), l.log_beta_offset());
  for (double g : grad) {
    if (!std::isfinite(g)) throw Error(ErrorCode::NonFiniteGradient, "SDMA gradient is not finite");
  }
}

void jacobian(const ModelParams& p, std::span<const double> x, std::span<double> grad) {
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, MaModel>) jac_ma(m.convex, x, grad);
        if constexpr (std::is_same_v<T, SmaModel>) jac_sma(m.convex, m.alpha, x, grad);
        if constexpr (std::is_same_v<T, DmaModel>) jac_dma(m, x, grad);
        if constexpr (std::is_same_v<T, SdmaModel>) jac_sdma(m, x, grad);
      },
      p);
}

namespace {

struct BlockBatch {
  Eigen::MatrixXd z;        // m x K plane values
  Eigen::MatrixXd weights;  // m x K softmax weights, or one-hot for hard blocks
  Eigen::VectorXd value;    // m
};

Eigen::MatrixXd plane_values(const MaBlock& p, const RowMatrix& x) {
  if (static_cast<std::size_t>(x.cols()) != p.dims()) {
    throw Error(ErrorCode::DimensionMismatch,
                "points have " + std::to_string(x.cols()) + " coordinates, model expects " +
                    std::to_string(p.dims()));
  }
  Eigen::MatrixXd z = x * p.a.transpose();
  z.rowwise() += p.b.transpose();
  return z;
}

BlockBatch hard_batch(const MaBlock& p, const RowMatrix& x, bool with_weights) {
  BlockBatch out{plane_values(p, x), {}, Eigen::VectorXd(x.rows())};
  if (with_weights) out.weights = Eigen::MatrixXd::Zero(x.rows(), out.z.cols());
  for (Eigen::Index j = 0; j < x.rows(); ++j) {
    Eigen::Index arg = 0;
    for (Eigen::Index k = 1; k < out.z.cols(); ++k) {
      if (out.z(j, k) > out.z(j, arg)) arg = k;
    }
    out.value[j] = out.z(j, arg);
    if (with_weights) out.weights(j, arg) = 1.0;
  }
  return out;
}

BlockBatch soft_batch(const MaBlock& p, double alpha, const RowMatrix& x) {
  BlockBatch out{plane_values(p, x), {}, {}};
  const Eigen::VectorXd zmax = out.z.rowwise().maxCoeff();
  out.weights = (alpha * (out.z.colwise() - zmax)).array().exp().matrix();
  const Eigen::VectorXd sum = out.weights.rowwise().sum();
  out.weights.array().colwise() /= sum.array();
  out.value = zmax.array() + sum.array().log() / alpha;
  return out;
}

void write_batch_block(const BlockBatch& blk, const RowMatrix& x, double sign, Eigen::MatrixXd& jac,
                       std::size_t b_off, std::size_t a_off, std::optional<std::size_t> log_off) {
  const Eigen::Index k = blk.weights.cols();
  const Eigen::Index n = x.cols();
  const auto bo = static_cast<Eigen::Index>(b_off);
  const auto ao = static_cast<Eigen::Index>(a_off);
  jac.middleCols(bo, k) = sign * blk.weights;
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index d = 0; d < n; ++d) {
      jac.col(ao + i * n + d) = sign * blk.weights.col(i).cwiseProduct(x.col(d));
    }
  }
  if (log_off) {
    jac.col(static_cast<Eigen::Index>(*log_off)) =
        sign * (blk.weights.cwiseProduct(blk.z).rowwise().sum() - blk.value);
  }
}

}  // namespace

Eigen::VectorXd eval_batch(const ModelParams& p, const RowMatrix& x) {
  return std::visit(
      [&](const auto& m) -> Eigen::VectorXd {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, MaModel>) return hard_batch(m.convex, x, false).value;
        if constexpr (std::is_same_v<T, SmaModel>) return soft_batch(m.convex, m.alpha.alpha(), x).value;
        if constexpr (std::is_same_v<T, DmaModel>) {
          return hard_batch(m.convex, x, false).value - hard_batch(m.concave, x, false).value;
        }
        if constexpr (std::is_same_v<T, SdmaModel>) {
          return soft_batch(m.convex, m.alpha.alpha(), x).value -
                 soft_batch(m.concave, m.beta.alpha(), x).value;
        }
      },
      p);
}

void jacobian_batch(const ModelParams& p, const RowMatrix& x, Eigen::MatrixXd& jac) {
  const ParamLayout l = layout_of(p);
  jac.resize(x.rows(), static_cast<Eigen::Index>(l.size()));
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, MaModel>) {
          write_batch_block(hard_batch(m.convex, x, true), x, 1.0, jac, l.b_offset(), l.a_offset(),
                            std::nullopt);
        }
        if constexpr (std::is_same_v<T, SmaModel>) {
          write_batch_block(soft_batch(m.convex, m.alpha.alpha(), x), x, 1.0, jac, l.b_offset(),
                            l.a_offset(), l.log_alpha_offset());
        }
        if constexpr (std::is_same_v<T, DmaModel>) {
          write_batch_block(hard_batch(m.convex, x, true), x, 1.0, jac, l.b_offset(), l.a_offset(),
                            std::nullopt);
          write_batch_block(hard_batch(m.concave, x, true), x, -1.0, jac, l.h_offset(),
                            l.g_offset(), std::nullopt);
        }
        if constexpr (std::is_same_v<T, SdmaModel>) {
          write_batch_block(soft_batch(m.convex, m.alpha.alpha(), x), x, 1.0, jac, l.b_offset(),
                            l.a_offset(), l.log_alpha_offset());
          write_batch_block(soft_batch(m.concave, m.beta.alpha(), x), x, -1.0, jac, l.h_offset(),
                            l.g_offset(), l.log_beta_offset());
          if (!jac.allFinite()) {
            throw Error(ErrorCode::NonFiniteGradient, "SDMA gradient is not finite");
          }
        }
      },
      p);
}

Eigen::VectorXd jac_dma(const DmaModel& p, std::span<const double> x) {
  Eigen::VectorXd g(static_cast<Eigen::Index>(layout_of(p).size()));
  jac_dma(p, x, std::span<double>(g.data(), static_cast<std::size_t>(g.size())));
  return g;
}

Eigen::VectorXd jac_sdma(const SdmaModel& p, std::span<const double> x) {
  Eigen::VectorXd g(static_cast<Eigen::Index>(layout_of(p).size()));
  jac_sdma(p, x, std::span<double>(g.data(), static_cast<std::size_t>(g.size())));
  return g;
}

Eigen::VectorXd jacobian(const ModelParams& p, std::span<const double> x) {
  Eigen::VectorXd g(static_cast<Eigen::Index>(layout_of(p).size()));
  jacobian(p, x, std::span<double>(g.data(), static_cast<std::size_t>(g.size())));
  return g;
}

}  // namespace sdma
