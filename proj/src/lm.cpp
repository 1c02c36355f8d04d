#include "sdma/lm.hpp"

#include "sdma/error.hpp"

#include <algorithm>
#include <cmath>

namespace sdma {

namespace {

constexpr double kMinDiagonal = 1e-14;
constexpr double kLambdaSolveLimit = 1e12;
constexpr double kLambdaCeiling = 1e300;

}  // namespace

const char* to_string(Termination t) {
  switch (t) {
    case Termination::GradTol: return "GradTol";
    case Termination::StepTol: return "StepTol";
    case Termination::CostTol: return "CostTol";
    case Termination::MaxIter: return "MaxIter";
  }
  return "?";
}

void validate(const LmConfig& cfg) {
  const bool ok = cfg.max_iterations > 0 && cfg.lambda_init > 0.0 && cfg.lambda_up > 1.0 &&
                  cfg.lambda_down > 0.0 && cfg.lambda_down < 1.0 && cfg.grad_tol > 0.0 &&
                  cfg.step_tol > 0.0 && cfg.cost_tol > 0.0;
  if (!ok) {
    throw Error(ErrorCode::InvalidArgument,
                "LM config needs positive tolerances, lambda_init > 0 and lambda_up > 1 > lambda_down > 0");
  }
}

LmResult lm_minimize(const ResidualFn& residual_fn, const JacobianFn& jacobian_fn,
                     Eigen::VectorXd gamma0, const LmConfig& cfg) {
  validate(cfg);
  if (!gamma0.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "initial parameter vector is not finite");
  }

  LmResult out{std::move(gamma0), {}};
  Eigen::VectorXd& gamma = out.gamma;
  LmReport& rep = out.report;

  Eigen::VectorXd r;
  residual_fn(gamma, r);
  if (!r.allFinite()) {
    throw Error(ErrorCode::NonFiniteResidual, "residuals are not finite at the starting point");
  }
  double cost = r.squaredNorm();
  if (!std::isfinite(cost)) {
    throw Error(ErrorCode::NonFiniteResidual, "sum of squared residuals overflows at the starting point");
  }
  rep.accepted_costs.push_back(cost);

  double lambda = cfg.lambda_init;
  rep.final_lambda = lambda;
  rep.final_cost = cost;
  if (cost <= cfg.cost_tol) {
    rep.termination = Termination::CostTol;
    return out;
  }

  const auto n = gamma.size();
  Eigen::MatrixXd jac;
  Eigen::MatrixXd normal(n, n);
  Eigen::VectorXd grad(n);
  Eigen::VectorXd scale(n);
  Eigen::VectorXd trial_r;

  const auto linearize = [&] {
    jacobian_fn(gamma, jac);
    if (jac.rows() != r.size() || jac.cols() != n) {
      throw Error(ErrorCode::DimensionMismatch, "Jacobian shape does not match residuals/parameters");
    }
    if (!jac.allFinite()) throw Error(ErrorCode::NonFiniteGradient, "Jacobian is not finite");
    normal.noalias() = jac.transpose() * jac;
    grad.noalias() = jac.transpose() * r;
    scale = normal.diagonal().cwiseMax(kMinDiagonal);
  };
  linearize();

  rep.termination = Termination::MaxIter;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(n);
  while (rep.iterations < cfg.max_iterations) {
    if (grad.lpNorm<Eigen::Infinity>() <= cfg.grad_tol) {
      rep.termination = Termination::GradTol;
      break;
    }
    ++rep.iterations;

    Eigen::MatrixXd damped = normal;
    damped.diagonal() += lambda * scale;
    ldlt.compute(damped);
    Eigen::VectorXd step;
    if (ldlt.info() == Eigen::Success) step = ldlt.solve(-grad);
    if (ldlt.info() != Eigen::Success || !step.allFinite()) {
      if (lambda > kLambdaSolveLimit) {
        throw Error(ErrorCode::LinearSolveFailure,
                    "damped normal equations are singular for lambda > 1e12");
      }
      lambda *= cfg.lambda_up;
      continue;
    }

    if (step.norm() <= cfg.step_tol * (gamma.norm() + cfg.step_tol)) {
      rep.termination = Termination::StepTol;
      break;
    }

    Eigen::VectorXd trial = gamma + step;
    residual_fn(trial, trial_r);
    const double trial_cost = trial_r.allFinite() ? trial_r.squaredNorm() : HUGE_VAL;

    if (trial_cost < cost) {
      const double relative_drop = (cost - trial_cost) / cost;
      gamma = std::move(trial);
      std::swap(r, trial_r);
      cost = trial_cost;
      rep.accepted_costs.push_back(cost);
      lambda = std::max(lambda * cfg.lambda_down, 1e-300);
      if (cost <= cfg.cost_tol || relative_drop <= cfg.cost_tol) {
        rep.termination = Termination::CostTol;
        break;
      }
      linearize();
    } else {
      lambda = std::min(lambda * cfg.lambda_up, kLambdaCeiling);
    }
  }

  rep.final_cost = cost;
  rep.final_lambda = lambda;
  return out;
}

}  // namespace sdma
