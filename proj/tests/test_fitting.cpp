#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sdma/error.hpp"
#include "sdma/fitting.hpp"

#include <cmath>
#include <functional>
#include <limits>

using namespace sdma;

namespace {

DataSet grid_1d(const std::function<double(double)>& f, double lo, double hi, std::size_t count) {
  return sample_grid_2d(f, lo, hi, count);
}

DataSet grid_2d(const std::function<double(double, double)>& f, double lo, double hi, std::size_t per_side) {
  RowMatrix x(static_cast<Eigen::Index>(per_side * per_side), 2);
  Eigen::VectorXd y(x.rows());
  Eigen::Index j = 0;
  for (std::size_t a = 0; a < per_side; ++a) {
    for (std::size_t b = 0; b < per_side; ++b, ++j) {
      x(j, 0) = lo + (hi - lo) * static_cast<double>(a) / static_cast<double>(per_side - 1);
      x(j, 1) = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(per_side - 1);
      y[j] = f(x(j, 0), x(j, 1));
    }
  }
  return make_dataset(x, y, Space::Log);
}

// RMS of the max of tangent lines of x^2 at the given points, over the grid.
// Any such max is a feasible MA, so this bounds the optimal fit from above.
double tangent_ma_rms(const DataSet& d, const std::vector<double>& touch) {
  double sse = 0.0;
  for (std::size_t j = 0; j < d.n_points(); ++j) {
    const double x = d.point(j)[0];
    double best = -HUGE_VAL;
    for (double t : touch) best = std::max(best, 2.0 * t * x - t * t);
    sse += (best - d.value(j)) * (best - d.value(j));
  }
  return std::sqrt(sse / static_cast<double>(d.n_points()));
}

// Brute-force best symmetric five-tangent MA for y = x^2 on [-1, 1].
double best_five_tangent_rms(const DataSet& d) {
  double best = HUGE_VAL;
  for (int i = 1; i <= 100; ++i) {
    for (int k = i + 1; k <= 100; ++k) {
      const double t1 = 0.01 * i, t2 = 0.01 * k;
      best = std::min(best, tangent_ma_rms(d, {-t2, -t1, 0.0, t1, t2}));
    }
  }
  return best;
}

FitSpec spec_for(FunctionClass cls, std::size_t k, std::size_t m, std::size_t restarts, std::uint64_t seed = 0) {
  FitSpec s;
  s.function_class = cls;
  s.k_terms = k;
  s.m_terms = m;
  s.restarts = restarts;
  s.rng_seed = seed;
  return s;
}

}  // namespace

TEST_CASE("rms_error definition") {
  const auto d = grid_1d([](double x) { return 2.0 * x + 1.0; }, -1.0, 1.0, 11);
  MaBlock exact = MaBlock::zeros(1, 1);
  exact.b[0] = 1.0;
  exact.a(0, 0) = 2.0;
  CHECK(rms_error(MaModel{exact}, d) < 1e-15);
  MaBlock shifted = exact;
  shifted.b[0] -= 0.25;
  CHECK(rms_error(MaModel{shifted}, d) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(sum_squared_error(MaModel{shifted}, d) == doctest::Approx(11 * 0.0625).epsilon(1e-14));
  CHECK_THROWS_AS(rms_error(MaModel{MaBlock::zeros(1, 2)}, d), Error);
}

TEST_CASE("init_ma") {
  SUBCASE("one plane is the global least-squares fit") {
    const auto d = grid_2d([](double a, double b) { return a * a - 0.5 * b + std::sin(3 * a * b); }, -1, 1, 7);
    Rng rng(1);
    const MaBlock blk = init_ma(d, 1, rng);
    Eigen::MatrixXd design(d.n_points(), 3);
    design.col(0).setOnes();
    design.rightCols(2) = d.x();
    const Eigen::VectorXd ls = design.colPivHouseholderQr().solve(d.y());
    CHECK(std::abs(blk.b[0] - ls[0]) < 1e-12);
    CHECK(std::abs(blk.a(0, 0) - ls[1]) < 1e-12);
    CHECK(std::abs(blk.a(0, 1) - ls[2]) < 1e-12);
  }
  SUBCASE("one point per cell gives the minimum-norm interpolant") {
    RowMatrix x(4, 2);
    x << 0.5, 1.0, -1.0, 0.25, 2.0, -0.5, 0.0, 0.0;
    Eigen::VectorXd y(4);
    y << 1.0, -2.0, 0.5, 3.0;
    const auto d = make_dataset(x, y, Space::Log);
    Rng rng(2);
    const MaBlock blk = init_ma(d, 4, rng);
    // min ||(b, a)|| subject to b + a.x = y is (b, a) = y (1, x) / (1 + |x|^2).
    for (Eigen::Index j = 0; j < 4; ++j) {
      const double s = y[j] / (1.0 + x.row(j).squaredNorm());
      bool found = false;
      for (Eigen::Index k = 0; k < 4; ++k) {
        if (std::abs(blk.b[k] - s) < 1e-12 && (blk.a.row(k) - s * x.row(j)).cwiseAbs().maxCoeff() < 1e-12) found = true;
      }
      CHECK_MESSAGE(found, "no plane matches point ", j);
    }
  }
  SUBCASE("linear data: every plane is the line") {
    const auto d = grid_1d([](double x) { return 2.0 * x + 1.0; }, -3.0, 3.0, 61);
    for (std::size_t k : {1u, 2u, 4u, 7u}) {
      Rng rng(k);
      const MaBlock blk = init_ma(d, k, rng);
      for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(k); ++i) {
        CHECK(blk.b[i] == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(blk.a(i, 0) == doctest::Approx(2.0).epsilon(1e-9));
      }
    }
  }
  SUBCASE("more planes than points") {
    const auto d = grid_1d([](double x) { return x; }, 0.0, 1.0, 3);
    Rng rng(3);
    const MaBlock blk = init_ma(d, 6, rng);
    CHECK(blk.terms() == 6);
    CHECK(blk.b.allFinite());
    CHECK(blk.a.allFinite());
  }
}

TEST_CASE("fit_ma") {
  SUBCASE("constant data") {
    const auto d = grid_1d([](double) { return 2.5; }, -1.0, 1.0, 21);
    const auto r = fit(d, spec_for(FunctionClass::MA, 1, 1, 3));
    const auto& blk = std::get<MaModel>(r.params).convex;
    CHECK(blk.b[0] == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(std::abs(blk.a(0, 0)) < 1e-12);
    CHECK(r.rms_error < 1e-10);
  }
  SUBCASE("self recovery of a two-plane MA") {
    const auto d = grid_2d([](double a, double b) { return std::max(0.3 + 1.2 * a - 0.4 * b, -0.5 - 0.7 * a + 0.9 * b); },
                           -2, 2, 15);
    CHECK(fit(d, spec_for(FunctionClass::MA, 2, 1, 5)).rms_error < 1e-6);
  }
  SUBCASE("|x| with two planes") {
    const auto d = grid_1d([](double x) { return std::abs(x); }, -1.0, 1.0, 41);
    CHECK(fit(d, spec_for(FunctionClass::MA, 2, 1, 5)).rms_error < 1e-6);
  }
  SUBCASE("x^2 with five planes beats the best tangent construction") {
    const auto d = grid_1d([](double x) { return x * x; }, -1.0, 1.0, 101);
    const double bound = best_five_tangent_rms(d);
    CHECK(bound < 0.02);
    const double got = fit(d, spec_for(FunctionClass::MA, 5, 1, 10)).rms_error;
    CHECK(got <= bound);
  }
  SUBCASE("refinement never makes the start worse") {
    const auto d = grid_1d(demo2d_function, -2.0, 2.0, 101);
    for (std::uint64_t s = 0; s < 5; ++s) {
      Rng a = restart_rng(s, 0), b = restart_rng(s, 0);
      const MaBlock start = init_ma(d, 4, a);
      const MaBlock done = fit_ma(d, 4, b);
      CHECK(sum_squared_error(MaModel{done}, d) <= sum_squared_error(MaModel{start}, d));
    }
  }
}

TEST_CASE("convex classes on the demo curve sit near 44.6%") {
  const auto d = demo2d_dataset();
  const double ma = fit(d, spec_for(FunctionClass::MA, 5, 5, 30)).rms_error;
  const double sma = fit(d, spec_for(FunctionClass::SMA, 5, 5, 30)).rms_error;
  CHECK(std::abs(ma - 0.446) <= 0.10);
  CHECK(std::abs(sma - 0.446) <= 0.10);
}

TEST_CASE("fit_dma") {
  SUBCASE("self recovery of DMA(2, 2)") {
    const auto f = [](double a, double b) {
      return std::max(0.2 + 1.1 * a + 0.3 * b, -0.4 - 0.8 * a + 1.2 * b) -
             std::max(-0.1 + 0.6 * a - 0.9 * b, 0.5 - 1.3 * a - 0.2 * b);
    };
    CHECK(fit(grid_2d(f, -2, 2, 21), spec_for(FunctionClass::DMA, 2, 2, 10)).rms_error < 1e-4);
  }
  SUBCASE("concave parabola with one convex plane") {
    const auto d = grid_1d([](double x) { return -x * x; }, -1.0, 1.0, 101);
    // Mirror of the convex chord oracle: -max(tangents) is a feasible DMA with K = 1.
    const double bound = best_five_tangent_rms(grid_1d([](double x) { return x * x; }, -1.0, 1.0, 101));
    const double got = fit(d, spec_for(FunctionClass::DMA, 1, 5, 10)).rms_error;
    CHECK(bound < 0.02);
    CHECK(got <= bound);
  }
  SUBCASE("affine data is exact for any K, M") {
    const auto d = grid_2d([](double a, double b) { return 0.5 - 1.5 * a + 2.0 * b; }, -1, 1, 9);
    for (std::size_t k : {1u, 3u}) {
      for (std::size_t m : {1u, 2u}) {
        CAPTURE(k);
        CAPTURE(m);
        CHECK(fit(d, spec_for(FunctionClass::DMA, k, m, 3)).rms_error < 1e-8);
      }
    }
  }
}

TEST_CASE("fit_sdma") {
  SUBCASE("self recovery of SDMA(2, 2) with alpha = beta = 5") {
    MaBlock conv = MaBlock::zeros(2, 1), conc = MaBlock::zeros(2, 1);
    conv.b << 0.4, -0.3;
    conv.a << 1.1, -0.9;
    conc.b << -0.2, 0.6;
    conc.a << 0.7, -1.4;
    const SdmaModel truth{conv, SoftParam::from_alpha(5.0), conc, SoftParam::from_alpha(5.0)};
    const auto d = grid_1d([&](double x) { return eval_sdma(truth, std::vector<double>{x}); }, -2.0, 2.0, 101);
    CHECK(fit(d, spec_for(FunctionClass::SDMA, 2, 2, 10)).rms_error < 1e-4);
  }
  SUBCASE("softplus is representable with two soft planes") {
    const auto softplus = [](double x) { return std::log1p(std::exp(x)); };
    const auto d = grid_1d(softplus, -4.0, 4.0, 161);
    // Representability oracle: LSE over planes {0, x} with alpha = 1, minus a
    // zero concave plane, reproduces softplus on the whole grid.
    MaBlock conv = MaBlock::zeros(2, 1);
    conv.a(1, 0) = 1.0;
    const SdmaModel exact{conv, SoftParam::from_alpha(1.0), MaBlock::zeros(1, 1), SoftParam::from_alpha(1.0)};
    CHECK(rms_error(exact, d) < 1e-14);
    CHECK(fit(d, spec_for(FunctionClass::SDMA, 2, 1, 10)).rms_error < 1e-3);
  }
  SUBCASE("SDMA never ends worse than its DMA seed") {
    const auto d = demo2d_dataset();
    for (std::uint64_t s = 0; s < 4; ++s) {
      Rng a = restart_rng(s, 0), b = restart_rng(s, 0);
      const DmaModel seed = fit_dma(d, 3, 3, a);
      const SdmaModel seeded{seed.convex, SoftParam::from_alpha(kInitialSoftness), seed.concave,
                             SoftParam::from_alpha(kInitialSoftness)};
      const SdmaModel done = fit_sdma(d, 3, 3, b);
      CHECK(sum_squared_error(done, d) <= sum_squared_error(seeded, d));
    }
  }
  SUBCASE("the demo curve at order 5") {
    const auto r = fit(demo2d_dataset(), spec_for(FunctionClass::SDMA, 5, 5, 30));
    CHECK(r.rms_error <= 0.005);
  }
}

TEST_CASE("restart bookkeeping") {
  const auto d = demo2d_dataset(41);
  const auto r = fit(d, spec_for(FunctionClass::DMA, 3, 2, 7, 99));
  REQUIRE(r.restart_costs.size() == 7);
  std::size_t argmin = 0;
  for (std::size_t i = 1; i < 7; ++i)
    if (r.restart_costs[i] < r.restart_costs[argmin]) argmin = i;
  CHECK(r.best_restart_index == argmin);
  CHECK(std::abs(r.rms_error - std::sqrt(r.restart_costs[argmin] / 41.0)) < 1e-12);
  CHECK(std::abs(r.rms_error - rms_error(r.params, d)) < 1e-12);
  CHECK(r.lm_report.final_cost == r.restart_costs[argmin]);
}

TEST_CASE("determinism") {
  const auto d = demo2d_dataset(51);
  FitSpec s = spec_for(FunctionClass::SDMA, 3, 3, 6, 12345);
  s.threads = 1;
  const auto a = fit(d, s);
  s.threads = 4;
  const auto b = fit(d, s);
  const auto c = fit(d, s);
  CHECK(pack(a.params) == pack(b.params));
  CHECK(pack(b.params) == pack(c.params));
  CHECK(a.restart_costs == b.restart_costs);
  CHECK(a.rms_error == b.rms_error);
  CHECK(a.best_restart_index == b.best_restart_index);

  s.rng_seed = 54321;
  const auto other = fit(d, s);
  CHECK(other.restart_costs != a.restart_costs);
}

TEST_CASE("restart streams are independent of each other") {
  Rng a = restart_rng(7, 0), b = restart_rng(7, 1), c = restart_rng(8, 0), a2 = restart_rng(7, 0);
  const auto x = a();
  CHECK(x != b());
  CHECK(x != c());
  CHECK(x == a2());
}

TEST_CASE("FitSpec validation and warnings") {
  const auto d = demo2d_dataset(11);
  CHECK_THROWS_AS(fit(d, spec_for(FunctionClass::MA, 0, 1, 1)), Error);
  CHECK_THROWS_AS(fit(d, spec_for(FunctionClass::MA, 1, 1, 0)), Error);
  CHECK_THROWS_AS(fit(d, spec_for(FunctionClass::DMA, 1, 0, 1)), Error);
  CHECK_NOTHROW(validate(spec_for(FunctionClass::SMA, 2, 0, 1)));  // M is ignored for SMA

  // 11 points, 2 + 2 + 1 + 2 + 2 + 1 = 10 parameters: allowed, with a warning.
  const auto r = fit(d, spec_for(FunctionClass::SDMA, 2, 2, 1));
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].find("10 parameters") != std::string::npos);
  CHECK(fit(demo2d_dataset(101), spec_for(FunctionClass::MA, 2, 1, 1)).warnings.empty());

  const FitSpec o = FitSpec::with_order(FunctionClass::DMA, 4);
  CHECK(o.k_terms == 4);
  CHECK(o.m_terms == 4);
}

TEST_CASE("a single sample still fits") {
  RowMatrix x(1, 2);
  x << 0.3, -0.1;
  Eigen::VectorXd y(1);
  y << 1.7;
  const auto r = fit(make_dataset(x, y, Space::Log), spec_for(FunctionClass::SDMA, 2, 2, 2));
  CHECK(r.rms_error < 1e-8);
  CHECK_FALSE(r.warnings.empty());
}
