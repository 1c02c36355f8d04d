#include "sdma/sp_export.hpp"

#include "numfmt.hpp"
#include "sdma/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace sdma {

namespace {

Posynomial to_posynomial(const MaBlock& blk, double scale, const char* block_name) {
  Posynomial poly;
  poly.terms.reserve(blk.terms());
  for (Eigen::Index k = 0; k < blk.b.size(); ++k) {
    const double coefficient = std::exp(scale * blk.b[k]);
    if (!std::isfinite(coefficient) || !(coefficient > 0.0)) {
      throw Error(ErrorCode::CoefficientOverflow,
                  std::string(block_name) + " term " + std::to_string(k + 1) + ": exp(" +
                      detail::format_double(scale * blk.b[k]) +
                      ") is outside the double range; rescale the data or refit");
    }
    Monomial term{coefficient, std::vector<double>(blk.dims())};
    for (std::size_t i = 0; i < blk.dims(); ++i) {
      term.exponents[i] = scale * blk.a(k, static_cast<Eigen::Index>(i));
    }
    poly.terms.push_back(std::move(term));
  }
  return poly;
}

const char* pretty(ConstraintOp op) {
  switch (op) {
    case ConstraintOp::Eq: return "=";
    case ConstraintOp::Leq: return "≤";
    case ConstraintOp::Geq: return "≥";
  }
  return "?";
}

std::string render_posynomial(const Posynomial& poly, const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t t = 0; t < poly.terms.size(); ++t) {
    if (t > 0) out += " + ";
    const Monomial& term = poly.terms[t];
    out += detail::format_double(term.coefficient);
    for (std::size_t i = 0; i < term.exponents.size(); ++i) {
      out += "·" + names[i] + "^" + detail::format_double(term.exponents[i]);
    }
  }
  return out;
}

}  // namespace

const char* to_string(ConstraintOp op) {
  switch (op) {
    case ConstraintOp::Eq: return "=";
    case ConstraintOp::Leq: return "<=";
    case ConstraintOp::Geq: return ">=";
  }
  return "?";
}

ConstraintOp parse_constraint_op(const std::string& text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "eq" || lower == "=" || lower == "==") return ConstraintOp::Eq;
  if (lower == "leq" || lower == "<=") return ConstraintOp::Leq;
  if (lower == "geq" || lower == ">=") return ConstraintOp::Geq;
  throw Error(ErrorCode::InvalidArgument, "unknown constraint operator '" + text + "'");
}

double Posynomial::evaluate(std::span<const double> u) const {
  if (u.size() != dims()) {
    throw Error(ErrorCode::DimensionMismatch,
                "point has " + std::to_string(u.size()) + " coordinates, posynomial has " +
                    std::to_string(dims()));
  }
  double total = 0.0;
  for (const Monomial& term : terms) {
    double value = term.coefficient;
    for (std::size_t i = 0; i < u.size(); ++i) value *= std::pow(u[i], term.exponents[i]);
    total += value;
  }
  return total;
}

OperatorTriple operator_table(ConstraintOp original) {
  switch (original) {
    case ConstraintOp::Eq: return {ConstraintOp::Eq, ConstraintOp::Eq, ConstraintOp::Eq};
    case ConstraintOp::Leq: return {ConstraintOp::Leq, ConstraintOp::Geq, ConstraintOp::Leq};
    case ConstraintOp::Geq: return {ConstraintOp::Geq, ConstraintOp::Leq, ConstraintOp::Geq};
  }
  throw Error(ErrorCode::InvalidArgument, "unknown constraint operator");
}

double SpConstraintSet::evaluate_ratio(std::span<const double> u) const {
  for (double v : u) {
    if (!(v > 0.0)) throw Error(ErrorCode::NonPositiveValue, "original-space inputs must be positive");
  }
  const double numerator = std::pow(p_convex.evaluate(u), inv_alpha);
  if (!p_concave) return numerator;
  return numerator / std::pow(p_concave->evaluate(u), inv_beta);
}

SpConstraintSet export_sp(const SdmaModel& params, ConstraintOp original) {
  validate(ModelParams{params});
  const double alpha = params.alpha.alpha();
  const double beta = params.beta.alpha();
  SpConstraintSet cs;
  cs.p_convex = to_posynomial(params.convex, alpha, "convex");
  cs.p_concave = to_posynomial(params.concave, beta, "concave");
  cs.inv_alpha = 1.0 / alpha;
  cs.inv_beta = 1.0 / beta;
  cs.original = original;
  cs.operators = operator_table(original);
  return cs;
}

SpConstraintSet export_gp(const SmaModel& params, ConstraintOp original) {
  validate(ModelParams{params});
  const double alpha = params.alpha.alpha();
  SpConstraintSet cs;
  cs.p_convex = to_posynomial(params.convex, alpha, "convex");
  cs.inv_alpha = 1.0 / alpha;
  cs.original = original;
  cs.operators = {original, original, original};
  return cs;
}

SpConstraintSet export_model(const ModelParams& params, ConstraintOp original) {
  if (const auto* s = std::get_if<SdmaModel>(&params)) return export_sp(*s, original);
  if (const auto* s = std::get_if<SmaModel>(&params)) return export_gp(*s, original);
  throw Error(ErrorCode::UnsupportedClass,
              std::string(to_string(function_class(params))) +
                  " models cannot be exported: a max-affine function has no logspace inverse as a "
                  "posynomial (only SMA and SDMA models are SP-compatible)");
}

std::vector<std::string> default_var_names(std::size_t n) {
  std::vector<std::string> names;
  names.reserve(n);
  for (std::size_t i = 0; i < n; ++i) names.push_back("u" + std::to_string(i + 1));
  return names;
}

std::string render_constraints(const SpConstraintSet& cs, const std::vector<std::string>& var_names) {
  if (var_names.size() != cs.dims()) {
    throw Error(ErrorCode::NameArityMismatch,
                std::to_string(var_names.size()) + " variable names given for " +
                    std::to_string(cs.dims()) + " inputs");
  }
  std::ostringstream out;
  if (cs.is_gp()) {
    out << "w^" << detail::format_double(1.0 / cs.inv_alpha) << ' ' << pretty(cs.original) << ' '
        << render_posynomial(cs.p_convex, var_names) << '\n';
    return out.str();
  }
  out << "p_convex " << pretty(cs.operators[1]) << ' ' << render_posynomial(cs.p_convex, var_names)
      << '\n';
  out << "p_concave " << pretty(cs.operators[2]) << ' '
      << render_posynomial(*cs.p_concave, var_names) << '\n';
  out << "w " << pretty(cs.operators[0]) << " p_convex^" << detail::format_double(cs.inv_alpha)
      << " / p_concave^" << detail::format_double(cs.inv_beta) << '\n';
  return out.str();
}

}  // namespace sdma
