#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <vector>

namespace sdma {

struct LmConfig {
  std::size_t max_iterations = 500;
  double lambda_init = 1e-3;
  double lambda_up = 10.0;
  double lambda_down = 0.1;
  double grad_tol = 1e-10;
  double step_tol = 1e-12;
  double cost_tol = 1e-14;
};

/// Throws InvalidArgument unless all fields are positive and
/// lambda_up > 1 > lambda_down.
void validate(const LmConfig& cfg);

enum class Termination { GradTol, StepTol, CostTol, MaxIter };

const char* to_string(Termination t);

struct LmReport {
  std::size_t iterations = 0;
  double final_cost = 0.0;
  Termination termination = Termination::MaxIter;
  double final_lambda = 0.0;
  /// Cost at gamma0 followed by the cost after every accepted step.
  std::vector<double> accepted_costs;
};

/// r(gamma), length m. Must size `r` itself.
using ResidualFn = std::function<void(const Eigen::VectorXd& gamma, Eigen::VectorXd& r)>;
/// dr/dgamma, m x |gamma|. Must size `jac` itself.
using JacobianFn = std::function<void(const Eigen::VectorXd& gamma, Eigen::MatrixXd& jac)>;

struct LmResult {
  Eigen::VectorXd gamma;
  LmReport report;
};

/// Levenberg-Marquardt on cost(gamma) = sum_i r_i(gamma)^2.
///
/// Each trial step solves (J^T J + lambda * D) delta = -J^T r where D is
/// diag(J^T J) with entries clamped below at 1e-14. Steps that lower the
/// cost are accepted and lambda shrinks by lambda_down; otherwise gamma is
/// kept and lambda grows by lambda_up. Trial points with non-finite
/// residuals count as rejections.
///
/// Terminates with:
///   CostTol  cost <= cost_tol, or an accepted step reduced the cost by a
///            relative amount below cost_tol;
///   GradTol  max |J^T r| <= grad_tol;
///   StepTol  |delta| <= step_tol * (|gamma| + step_tol);
///   MaxIter  max_iterations trial steps were taken.
///
/// Throws NonFiniteResidual if r(gamma0) or its squared norm is not finite, and
/// LinearSolveFailure if the damped system cannot be solved even once
/// lambda exceeds 1e12.
LmResult lm_minimize(const ResidualFn& residual_fn, const JacobianFn& jacobian_fn,
                     Eigen::VectorXd gamma0, const LmConfig& cfg = {});

}  // namespace sdma
