#pragma once

#include "sdma/matrix.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <variant>

namespace sdma {

/// K affine planes b_k + a_k . x. Row k of `a` is the slope a_k.
struct MaBlock {
  Eigen::VectorXd b;
  Eigen::MatrixXd a;

  std::size_t terms() const { return static_cast<std::size_t>(b.size()); }
  std::size_t dims() const { return static_cast<std::size_t>(a.cols()); }

  static MaBlock zeros(std::size_t k, std::size_t n) {
    return {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k)),
            Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n))};
  }
};

/// Softening parameter, stored as its natural log so alpha > 0 by construction.
struct SoftParam {
  double log_alpha = 0.0;

  double alpha() const { return std::exp(log_alpha); }
  static SoftParam from_alpha(double alpha) { return {std::log(alpha)}; }
};

struct MaModel {
  MaBlock convex;
};

struct SmaModel {
  MaBlock convex;
  SoftParam alpha;
};

struct DmaModel {
  MaBlock convex;
  MaBlock concave;
};

struct SdmaModel {
  MaBlock convex;
  SoftParam alpha;
  MaBlock concave;
  SoftParam beta;
};

using ModelParams = std::variant<MaModel, SmaModel, DmaModel, SdmaModel>;

enum class FunctionClass { MA, SMA, DMA, SDMA };

const char* to_string(FunctionClass cls);
/// Accepts "ma", "sma", "dma", "sdma" in any case.
FunctionClass parse_function_class(const std::string& name);

FunctionClass function_class(const ModelParams& p);
std::size_t model_dims(const ModelParams& p);
/// Terms in the convex block (K) and in the concave block (M, 0 if none).
std::size_t convex_terms(const ModelParams& p);
std::size_t concave_terms(const ModelParams& p);

/// Shape of the stacked parameter vector gamma:
///   [b (K), a (K*N, row by row), log alpha, h (M), g (M*N), log beta]
/// with the log-softness entries present only for SMA/SDMA and the
/// concave entries only for DMA/SDMA.
struct ParamLayout {
  FunctionClass cls;
  std::size_t k;
  std::size_t m;
  std::size_t n;

  bool soft() const { return cls == FunctionClass::SMA || cls == FunctionClass::SDMA; }
  bool difference() const { return cls == FunctionClass::DMA || cls == FunctionClass::SDMA; }

  std::size_t b_offset() const { return 0; }
  std::size_t a_offset() const { return k; }
  std::size_t log_alpha_offset() const { return k + k * n; }
  std::size_t h_offset() const { return k + k * n + (soft() ? 1 : 0); }
  std::size_t g_offset() const { return h_offset() + m; }
  std::size_t log_beta_offset() const { return g_offset() + m * n; }
  std::size_t size() const {
    return k + k * n + (soft() ? 1 : 0) + (difference() ? m + m * n : 0) +
           (cls == FunctionClass::SDMA ? 1 : 0);
  }
};

ParamLayout layout_of(const ModelParams& p);
/// Checks shapes and finiteness; throws DimensionMismatch / InvalidArgument.
void validate(const ModelParams& p);

Eigen::VectorXd pack(const ModelParams& p);
ModelParams unpack(const ParamLayout& layout, std::span<const double> gamma);

// Evaluators. All throw DimensionMismatch when x does not have the block's N.

double eval_ma(const MaBlock& p, std::span<const double> x);
/// Index of the active plane; ties go to the lowest index.
std::size_t eval_ma_argmax(const MaBlock& p, std::span<const double> x);
double eval_sma(const MaBlock& p, SoftParam s, std::span<const double> x);
double eval_dma(const DmaModel& p, std::span<const double> x);
double eval_sdma(const SdmaModel& p, std::span<const double> x);
/// Dispatches on the variant.
double eval(const ModelParams& p, std::span<const double> x);

// Gradients of f with respect to gamma, written into `grad` (length
// layout.size()). The returning overloads allocate.

void jac_ma(const MaBlock& p, std::span<const double> x, std::span<double> grad);
void jac_sma(const MaBlock& p, SoftParam s, std::span<const double> x, std::span<double> grad);
void jac_dma(const DmaModel& p, std::span<const double> x, std::span<double> grad);
/// Throws NonFiniteGradient if any entry is not finite.
void jac_sdma(const SdmaModel& p, std::span<const double> x, std::span<double> grad);
void jacobian(const ModelParams& p, std::span<const double> x, std::span<double> grad);

// Whole-dataset versions used by the fitter: one row of `x` per sample.
// They agree with the pointwise functions up to summation order.

Eigen::VectorXd eval_batch(const ModelParams& p, const RowMatrix& x);
/// Row j of `jac` is the gradient at sample j.
void jacobian_batch(const ModelParams& p, const RowMatrix& x, Eigen::MatrixXd& jac);

Eigen::VectorXd jac_dma(const DmaModel& p, std::span<const double> x);
Eigen::VectorXd jac_sdma(const SdmaModel& p, std::span<const double> x);
Eigen::VectorXd jacobian(const ModelParams& p, std::span<const double> x);

}  // namespace sdma
