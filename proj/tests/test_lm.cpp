#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sdma/error.hpp"
#include "sdma/lm.hpp"

#include <cmath>
#include <limits>
#include <random>

using namespace sdma;

namespace {

struct LinearProblem {
  Eigen::MatrixXd a;
  Eigen::VectorXd y;

  ResidualFn residual() const {
    return [this](const Eigen::VectorXd& g, Eigen::VectorXd& r) { r = a * g - y; };
  }
  JacobianFn jacobian() const {
    return [this](const Eigen::VectorXd&, Eigen::MatrixXd& j) { j = a; };
  }
};

LinearProblem random_linear(std::uint64_t seed, int m, int n) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  LinearProblem p{Eigen::MatrixXd(m, n), Eigen::VectorXd(m)};
  for (int i = 0; i < m; ++i) {
    p.y[i] = nd(rng);
    for (int j = 0; j < n; ++j) p.a(i, j) = nd(rng);
  }
  return p;
}

bool nonincreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1]) return false;
  return true;
}

}  // namespace

TEST_CASE("linear least squares matches the QR solution") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto p = random_linear(seed, 50, 5);
    // Independent oracle: Householder QR on A directly, never forming A^T A.
    const Eigen::VectorXd exact = p.a.colPivHouseholderQr().solve(p.y);
    const auto res = lm_minimize(p.residual(), p.jacobian(), Eigen::VectorXd::Zero(5));
    CHECK((res.gamma - exact).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(nonincreasing(res.report.accepted_costs));
    CHECK(res.report.final_cost == doctest::Approx((p.a * exact - p.y).squaredNorm()).epsilon(1e-12));
    CHECK(res.report.termination != Termination::MaxIter);
  }
}

TEST_CASE("zero residual at the start") {
  const ResidualFn r = [](const Eigen::VectorXd& g, Eigen::VectorXd& out) { out = g - Eigen::VectorXd::Constant(2, 3.0); };
  const JacobianFn j = [](const Eigen::VectorXd&, Eigen::MatrixXd& out) { out = Eigen::MatrixXd::Identity(2, 2); };
  const Eigen::VectorXd g0 = Eigen::VectorXd::Constant(2, 3.0);
  const auto res = lm_minimize(r, j, g0);
  CHECK(res.gamma == g0);
  CHECK(res.report.termination == Termination::CostTol);
  CHECK(res.report.iterations <= 1);
  CHECK(res.report.final_cost == 0.0);
}

TEST_CASE("Rosenbrock residuals converge to (1, 1)") {
  const ResidualFn r = [](const Eigen::VectorXd& g, Eigen::VectorXd& out) {
    out.resize(2);
    out << 1.0 - g[0], 10.0 * (g[1] - g[0] * g[0]);
  };
  const JacobianFn j = [](const Eigen::VectorXd& g, Eigen::MatrixXd& out) {
    out.resize(2, 2);
    out << -1.0, 0.0, -20.0 * g[0], 10.0;
  };
  Eigen::VectorXd g0(2);
  g0 << -1.2, 1.0;
  const auto res = lm_minimize(r, j, g0);
  CHECK(std::abs(res.gamma[0] - 1.0) < 1e-6);
  CHECK(std::abs(res.gamma[1] - 1.0) < 1e-6);
  CHECK(nonincreasing(res.report.accepted_costs));
  CHECK(res.report.accepted_costs.front() == doctest::Approx(24.2));  // 2.2^2 + (10 * (1 - 1.44))^2
}

TEST_CASE("cost history starts at gamma0 and ends at the final cost") {
  const auto p = random_linear(9, 20, 3);
  const auto res = lm_minimize(p.residual(), p.jacobian(), Eigen::VectorXd::Ones(3));
  CHECK(res.report.accepted_costs.front() == doctest::Approx((p.a * Eigen::VectorXd::Ones(3) - p.y).squaredNorm()));
  CHECK(res.report.accepted_costs.back() == res.report.final_cost);
}

TEST_CASE("iteration cap") {
  const ResidualFn r = [](const Eigen::VectorXd& g, Eigen::VectorXd& out) {
    out.resize(2);
    out << 1.0 - g[0], 10.0 * (g[1] - g[0] * g[0]);
  };
  const JacobianFn j = [](const Eigen::VectorXd& g, Eigen::MatrixXd& out) {
    out.resize(2, 2);
    out << -1.0, 0.0, -20.0 * g[0], 10.0;
  };
  LmConfig cfg;
  cfg.max_iterations = 2;
  Eigen::VectorXd g0(2);
  g0 << -1.2, 1.0;
  const auto res = lm_minimize(r, j, g0, cfg);
  CHECK(res.report.termination == Termination::MaxIter);
  CHECK(res.report.iterations == 2);
}

TEST_CASE("gradient tolerance stops at a stationary point with nonzero cost") {
  // Inconsistent system: r = (g - 1, g + 1); minimum cost 2 at g = 0.
  const ResidualFn r = [](const Eigen::VectorXd& g, Eigen::VectorXd& out) {
    out.resize(2);
    out << g[0] - 1.0, g[0] + 1.0;
  };
  const JacobianFn j = [](const Eigen::VectorXd&, Eigen::MatrixXd& out) { out = Eigen::MatrixXd::Ones(2, 1); };
  const auto res = lm_minimize(r, j, Eigen::VectorXd::Zero(1));
  CHECK(res.report.termination == Termination::GradTol);
  CHECK(res.report.final_cost == 2.0);
}

TEST_CASE("scale: a tiny-valued problem is solved as well as a unit one") {
  auto p = random_linear(4, 30, 4);
  p.a *= 1e-6;
  const Eigen::VectorXd exact = p.a.colPivHouseholderQr().solve(p.y);
  LmConfig cfg;
  cfg.grad_tol = 1e-30;
  const auto res = lm_minimize(p.residual(), p.jacobian(), Eigen::VectorXd::Zero(4), cfg);
  CHECK(((res.gamma - exact).cwiseAbs().array() / exact.cwiseAbs().array().max(1.0)).maxCoeff() < 1e-6);
}

TEST_CASE("non-finite trial points are rejected, not fatal") {
  // r is undefined past g = 1.5; the unconstrained minimum sits at 3.
  const ResidualFn r = [](const Eigen::VectorXd& g, Eigen::VectorXd& out) {
    out.resize(1);
    out[0] = g[0] > 1.5 ? std::numeric_limits<double>::quiet_NaN() : g[0] - 3.0;
  };
  const JacobianFn j = [](const Eigen::VectorXd&, Eigen::MatrixXd& out) { out = Eigen::MatrixXd::Ones(1, 1); };
  const auto res = lm_minimize(r, j, Eigen::VectorXd::Zero(1));
  CHECK(res.gamma[0] <= 1.5);
  CHECK(res.gamma[0] > 0.0);
  CHECK(std::isfinite(res.report.final_cost));
  CHECK(nonincreasing(res.report.accepted_costs));
}

TEST_CASE("errors") {
  const auto p = random_linear(5, 10, 2);
  SUBCASE("non-finite start") {
    const ResidualFn r = [](const Eigen::VectorXd&, Eigen::VectorXd& out) {
      out = Eigen::VectorXd::Constant(1, std::numeric_limits<double>::infinity());
    };
    try {
      lm_minimize(r, p.jacobian(), Eigen::VectorXd::Zero(2));
      FAIL("expected NonFiniteResidual");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NonFiniteResidual);
    }
  }
  SUBCASE("overflowing cost at the start") {
    const ResidualFn r = [](const Eigen::VectorXd&, Eigen::VectorXd& out) { out = Eigen::VectorXd::Constant(3, 1e300); };
    CHECK_THROWS_AS(lm_minimize(r, p.jacobian(), Eigen::VectorXd::Zero(2)), Error);
  }
  SUBCASE("invalid configuration") {
    LmConfig bad;
    bad.lambda_up = 0.5;
    CHECK_THROWS_AS(validate(bad), Error);
    bad = LmConfig{};
    bad.lambda_down = 1.0;
    CHECK_THROWS_AS(validate(bad), Error);
    bad = LmConfig{};
    bad.max_iterations = 0;
    CHECK_THROWS_AS(lm_minimize(p.residual(), p.jacobian(), Eigen::VectorXd::Zero(2), bad), Error);
    CHECK_NOTHROW(validate(LmConfig{}));
  }
}

TEST_CASE("termination names") {
  CHECK(std::string(to_string(Termination::GradTol)) == "GradTol");
  CHECK(std::string(to_string(Termination::MaxIter)) == "MaxIter");
}
