#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sdma/error.hpp"
#include "sdma/model_io.hpp"
#include "temp_dir.hpp"

#include <json.hpp>

#include <cmath>
#include <functional>
#include <random>

using namespace sdma;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an sdma::Error");
  return ErrorCode::InvalidArgument;
}

MaBlock random_block(std::mt19937_64& rng, std::size_t k, std::size_t n) {
  std::normal_distribution<double> nd(0.0, 1.0);
  MaBlock blk = MaBlock::zeros(k, n);
  for (Eigen::Index r = 0; r < blk.b.size(); ++r) {
    blk.b[r] = nd(rng) / 3.0;
    for (Eigen::Index i = 0; i < blk.a.cols(); ++i) blk.a(r, i) = nd(rng) * 1e-7 + nd(rng);
  }
  return blk;
}

}  // namespace

TEST_CASE("models round trip bit for bit") {
  std::mt19937_64 rng(3);
  const std::vector<ModelParams> models{
      MaModel{random_block(rng, 3, 2)},
      SmaModel{random_block(rng, 2, 4), {0.123456789012345}},
      DmaModel{random_block(rng, 4, 1), random_block(rng, 2, 1)},
      SdmaModel{random_block(rng, 5, 3), {std::log(10.0)}, random_block(rng, 5, 3), {-1.0 / 3.0}},
  };
  TempDir dir;
  for (const auto& p : models) {
    CAPTURE(to_string(function_class(p)));
    const ModelFile mf{p, FitSummary{0.00123, 30, 7, 42, Termination::GradTol}};
    const auto path = dir.file("m.json");
    save_model(mf, path);
    const ModelFile back = load_model(path);
    CHECK(function_class(back.params) == function_class(p));
    CHECK(pack(back.params) == pack(p));
    REQUIRE(back.fit.has_value());
    CHECK(back.fit->rms_error == 0.00123);
    CHECK(back.fit->best_restart_index == 7);
    CHECK(back.fit->rng_seed == 42);
    CHECK(back.fit->termination == Termination::GradTol);
    // Saving the loaded model gives the same bytes.
    CHECK(model_to_json(back) == read_file(path));
  }
}

TEST_CASE("model document fields") {
  MaBlock conv = MaBlock::zeros(2, 1), conc = MaBlock::zeros(1, 1);
  conv.b << 1.0, 2.0;
  conv.a << 3.0, 4.0;
  conc.b << 5.0;
  conc.a << 6.0;
  const auto doc = nlohmann::json::parse(model_to_json({DmaModel{conv, conc}, std::nullopt}));
  CHECK(doc["format"] == "sdma-model");
  CHECK(doc["version"] == 1);
  CHECK(doc["function_class"] == "dma");
  CHECK(doc["n_dims"] == 1);
  CHECK(doc["k_terms"] == 2);
  CHECK(doc["m_terms"] == 1);
  CHECK(doc["gamma"] == nlohmann::json({1.0, 2.0, 3.0, 4.0, 5.0, 6.0}));
  CHECK_FALSE(doc.contains("fit"));
}

TEST_CASE("malformed model files") {
  const std::string good = model_to_json({MaModel{MaBlock::zeros(2, 1)}, std::nullopt});
  auto doc = nlohmann::json::parse(good);

  CHECK(code_of([] { model_from_json("{not json"); }) == ErrorCode::Format);
  CHECK(code_of([] { model_from_json("[]"); }) == ErrorCode::Format);

  auto wrong_version = doc;
  wrong_version["version"] = 2;
  CHECK(code_of([&] { model_from_json(wrong_version.dump()); }) == ErrorCode::Format);

  auto wrong_format = doc;
  wrong_format["format"] = "sdma-constraints";
  CHECK(code_of([&] { model_from_json(wrong_format.dump()); }) == ErrorCode::Format);

  auto short_gamma = doc;
  short_gamma["gamma"].erase(0);
  CHECK(code_of([&] { model_from_json(short_gamma.dump()); }) == ErrorCode::Format);

  auto bad_class = doc;
  bad_class["function_class"] = "isdma";
  CHECK(code_of([&] { model_from_json(bad_class.dump()); }) == ErrorCode::Format);

  auto missing = doc;
  missing.erase("n_dims");
  CHECK(code_of([&] { model_from_json(missing.dump()); }) == ErrorCode::Format);

  TempDir dir;
  CHECK(code_of([&] { load_model(dir.file("absent.json")); }) == ErrorCode::Io);
}

TEST_CASE("constraint sets round trip") {
  std::mt19937_64 rng(5);
  TempDir dir;
  SUBCASE("SP") {
    const SdmaModel p{random_block(rng, 3, 2), {std::log(7.0)}, random_block(rng, 2, 2), {std::log(3.0)}};
    const auto cs = export_sp(p, ConstraintOp::Geq);
    const auto path = dir.file("c.json");
    save_constraints(cs, {"thrust", "mass"}, path);
    std::vector<std::string> names;
    const auto back = load_constraints(path, &names);
    CHECK(names == std::vector<std::string>{"thrust", "mass"});
    CHECK_FALSE(back.is_gp());
    CHECK(back.original == ConstraintOp::Geq);
    CHECK(back.operators == cs.operators);
    CHECK(back.inv_alpha == cs.inv_alpha);
    CHECK(back.inv_beta == cs.inv_beta);
    REQUIRE(back.p_convex.terms.size() == 3);
    for (std::size_t t = 0; t < 3; ++t) {
      CHECK(back.p_convex.terms[t].coefficient == cs.p_convex.terms[t].coefficient);
      CHECK(back.p_convex.terms[t].exponents == cs.p_convex.terms[t].exponents);
    }
    REQUIRE(back.p_concave->terms.size() == 2);
    CHECK(back.p_concave->terms[1].coefficient == cs.p_concave->terms[1].coefficient);

    const auto doc = nlohmann::json::parse(read_file(path));
    CHECK(doc["kind"] == "sp");
    CHECK(doc["operators"]["w"] == ">=");
    CHECK(doc["operators"]["p_convex"] == "<=");
    CHECK(doc["operators"]["p_concave"] == ">=");
    CHECK(doc["alpha"].get<double>() == doctest::Approx(7.0).epsilon(1e-14));
  }
  SUBCASE("GP") {
    const SmaModel p{random_block(rng, 2, 1), {std::log(2.0)}};
    const auto cs = export_gp(p, ConstraintOp::Leq);
    const auto text = constraints_to_json(cs, {"u1"});
    const auto back = constraints_from_json(text);
    CHECK(back.is_gp());
    CHECK(back.operators[0] == ConstraintOp::Leq);
    const auto doc = nlohmann::json::parse(text);
    CHECK(doc["kind"] == "gp");
    CHECK(doc["beta"].is_null());
    CHECK(doc["concave_terms"].empty());
  }
  SUBCASE("errors") {
    const SmaModel p{random_block(rng, 2, 1), {0.0}};
    const auto cs = export_gp(p, ConstraintOp::Eq);
    CHECK(code_of([&] { constraints_to_json(cs, {"a", "b"}); }) == ErrorCode::NameArityMismatch);
    auto doc = nlohmann::json::parse(constraints_to_json(cs, {"a"}));
    doc["convex_terms"][0]["coefficient"] = -1.0;
    CHECK(code_of([&] { constraints_from_json(doc.dump()); }) == ErrorCode::Format);
    CHECK(code_of([] { constraints_from_json("{}"); }) == ErrorCode::Format);
  }
}
