#pragma once

#include "sdma/functions.hpp"

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sdma {

enum class ConstraintOp { Eq, Leq, Geq };

const char* to_string(ConstraintOp op);  // "=", "<=", ">="
/// Accepts "eq", "leq", "geq" (any case) or "=", "<=", ">=".
ConstraintOp parse_constraint_op(const std::string& text);

struct Monomial {
  double coefficient;  // > 0
  std::vector<double> exponents;
};

/// Sum of monomials in the original (positive) variables u.
struct Posynomial {
  std::vector<Monomial> terms;

  std::size_t dims() const { return terms.empty() ? 0 : terms.front().exponents.size(); }
  double evaluate(std::span<const double> u) const;
};

/// Operators for (w, p_convex, p_concave), in that order.
using OperatorTriple = std::array<ConstraintOp, 3>;

/// Row of the operator table for an original constraint `w (op) f(u)`:
///   =  -> (=,  =,  =)
///   <= -> (<=, >=, <=)
///   >= -> (>=, <=, >=)
OperatorTriple operator_table(ConstraintOp original);

/// Three-constraint set equivalent to w (op) exp(f_SDMA(log u)):
///
///   p_convex  (op1) sum_k e^{alpha b_k} prod_i u_i^{alpha a_ik}
///   p_concave (op2) sum_m e^{beta h_m}  prod_i u_i^{beta g_im}
///   w         (op0) p_convex^{1/alpha} / p_concave^{1/beta}
///
/// Exponents are stored already multiplied by alpha (resp. beta); the outer
/// 1/alpha, 1/beta powers are kept as separate fields.
///
/// A GP-form set (exported from SMA) has no concave part: the single
/// constraint is  w^alpha (op) sum_k e^{alpha b_k} prod_i u_i^{alpha a_ik}.
struct SpConstraintSet {
  Posynomial p_convex;
  std::optional<Posynomial> p_concave;
  double inv_alpha = 1.0;
  double inv_beta = 1.0;
  ConstraintOp original = ConstraintOp::Eq;
  OperatorTriple operators{ConstraintOp::Eq, ConstraintOp::Eq, ConstraintOp::Eq};

  bool is_gp() const { return !p_concave.has_value(); }
  std::size_t dims() const { return p_convex.dims(); }

  /// The right-hand side for w, evaluated directly in original variables.
  double evaluate_ratio(std::span<const double> u) const;
};

/// Throws CoefficientOverflow if any e^{alpha b_k} or e^{beta h_m} is not a
/// finite positive double.
SpConstraintSet export_sp(const SdmaModel& params, ConstraintOp original);
SpConstraintSet export_gp(const SmaModel& params, ConstraintOp original);

/// Dispatches on the model class; MA and DMA models throw UnsupportedClass
/// because max-affine pieces have no posynomial form back in original space.
SpConstraintSet export_model(const ModelParams& params, ConstraintOp original);

/// Default names u1..uN.
std::vector<std::string> default_var_names(std::size_t n);

/// Human-readable algebra, one constraint per line, terms in stored order
/// and numbers with 17 significant digits:
///
///   p_convex ≥ 1·u1^1
///   p_concave ≤ 1·u1^2
///   w ≤ p_convex^1 / p_concave^1
///
/// GP form is a single line such as "w^2 = 1·u1^2 + 1·u1^-2". Throws
/// NameArityMismatch if var_names.size() != dims().
std::string render_constraints(const SpConstraintSet& cs, const std::vector<std::string>& var_names);

}  // namespace sdma
