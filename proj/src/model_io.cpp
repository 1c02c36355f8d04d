#include "sdma/model_io.hpp"

#include "sdma/error.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace sdma {

namespace {

using nlohmann::json;

const json kLayoutNames = {"b", "a", "log_alpha", "h", "g", "log_beta"};

void write_text(const std::string& text, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write to '" + path + "' failed");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json parse(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, std::string(what) + " is not valid JSON: " + e.what());
  }
}

void expect_header(const json& doc, const char* format, int version) {
  if (!doc.is_object() || doc.value("format", "") != format) {
    throw Error(ErrorCode::Format, std::string("expected a '") + format + "' document");
  }
  if (doc.value("version", -1) != version) {
    throw Error(ErrorCode::Format, std::string(format) + ": unsupported version");
  }
}

json posynomial_json(const Posynomial& poly) {
  json terms = json::array();
  for (const auto& t : poly.terms) terms.push_back({{"coefficient", t.coefficient}, {"exponents", t.exponents}});
  return terms;
}

Posynomial posynomial_from(const json& terms, std::size_t n) {
  Posynomial poly;
  for (const auto& t : terms) {
    Monomial m{t.at("coefficient").get<double>(), t.at("exponents").get<std::vector<double>>()};
    if (m.exponents.size() != n) throw Error(ErrorCode::Format, "term exponent count differs from n_dims");
    if (!(m.coefficient > 0.0) || !std::isfinite(m.coefficient)) {
      throw Error(ErrorCode::Format, "posynomial coefficients must be finite and positive");
    }
    poly.terms.push_back(std::move(m));
  }
  if (poly.terms.empty()) throw Error(ErrorCode::Format, "posynomial has no terms");
  return poly;
}

}  // namespace

std::string model_to_json(const ModelFile& model) {
  validate(model.params);
  const ParamLayout l = layout_of(model.params);
  const Eigen::VectorXd gamma = pack(model.params);
  json doc;
  doc["format"] = "sdma-model";
  doc["version"] = kModelFormatVersion;
  doc["function_class"] = to_string(l.cls);
  doc["n_dims"] = l.n;
  doc["k_terms"] = l.k;
  doc["m_terms"] = l.m;
  doc["gamma_layout"] = kLayoutNames;
  doc["gamma"] = std::vector<double>(gamma.data(), gamma.data() + gamma.size());
  if (model.fit) {
    doc["fit"] = {{"rms_error", model.fit->rms_error},
                  {"restarts", model.fit->restarts},
                  {"best_restart_index", model.fit->best_restart_index},
                  {"rng_seed", model.fit->rng_seed},
                  {"termination", to_string(model.fit->termination)}};
  }
  return doc.dump(2) + "\n";
}

ModelFile model_from_json(const std::string& text) {
  const json doc = parse(text, "model file");
  expect_header(doc, "sdma-model", kModelFormatVersion);
  try {
    ParamLayout l{parse_function_class(doc.at("function_class").get<std::string>()),
                  doc.at("k_terms").get<std::size_t>(), doc.at("m_terms").get<std::size_t>(),
                  doc.at("n_dims").get<std::size_t>()};
    if (!l.difference()) l.m = 0;
    const auto gamma = doc.at("gamma").get<std::vector<double>>();
    ModelFile out{unpack(l, gamma), std::nullopt};
    validate(out.params);
    if (doc.contains("fit")) {
      const json& f = doc["fit"];
      FitSummary s;
      s.rms_error = f.value("rms_error", 0.0);
      s.restarts = f.value("restarts", std::size_t{0});
      s.best_restart_index = f.value("best_restart_index", std::size_t{0});
      s.rng_seed = f.value("rng_seed", std::uint64_t{0});
      const std::string term = f.value("termination", "MaxIter");
      for (auto t : {Termination::GradTol, Termination::StepTol, Termination::CostTol, Termination::MaxIter}) {
        if (term == to_string(t)) s.termination = t;
      }
      out.fit = s;
    }
    return out;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, std::string("model file: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::Format, std::string("model file: ") + e.what());
  }
}

void save_model(const ModelFile& model, const std::string& path) { write_text(model_to_json(model), path); }

ModelFile load_model(const std::string& path) { return model_from_json(read_text(path)); }

std::string constraints_to_json(const SpConstraintSet& cs, const std::vector<std::string>& var_names) {
  if (var_names.size() != cs.dims()) {
    throw Error(ErrorCode::NameArityMismatch,
                std::to_string(var_names.size()) + " variable names given for " +
                    std::to_string(cs.dims()) + " inputs");
  }
  json doc;
  doc["format"] = "sdma-constraints";
  doc["version"] = kConstraintFormatVersion;
  doc["kind"] = cs.is_gp() ? "gp" : "sp";
  doc["n_dims"] = cs.dims();
  doc["inv_alpha"] = cs.inv_alpha;
  doc["inv_beta"] = cs.is_gp() ? json(nullptr) : json(cs.inv_beta);
  doc["alpha"] = 1.0 / cs.inv_alpha;
  doc["beta"] = cs.is_gp() ? json(nullptr) : json(1.0 / cs.inv_beta);
  doc["convex_terms"] = posynomial_json(cs.p_convex);
  doc["concave_terms"] = cs.is_gp() ? json::array() : posynomial_json(*cs.p_concave);
  doc["original_operator"] = to_string(cs.original);
  doc["operators"] = {{"w", to_string(cs.operators[0])},
                      {"p_convex", to_string(cs.operators[1])},
                      {"p_concave", to_string(cs.operators[2])}};
  doc["var_names"] = var_names;
  return doc.dump(2) + "\n";
}

SpConstraintSet constraints_from_json(const std::string& text, std::vector<std::string>* var_names) {
  const json doc = parse(text, "constraint file");
  expect_header(doc, "sdma-constraints", kConstraintFormatVersion);
  try {
    const auto n = doc.at("n_dims").get<std::size_t>();
    SpConstraintSet cs;
    cs.p_convex = posynomial_from(doc.at("convex_terms"), n);
    cs.inv_alpha = doc.at("inv_alpha").get<double>();
    if (doc.at("kind").get<std::string>() == "sp") {
      cs.p_concave = posynomial_from(doc.at("concave_terms"), n);
      cs.inv_beta = doc.at("inv_beta").get<double>();
    }
    cs.original = parse_constraint_op(doc.at("original_operator").get<std::string>());
    const json& ops = doc.at("operators");
    cs.operators = {parse_constraint_op(ops.at("w").get<std::string>()),
                    parse_constraint_op(ops.at("p_convex").get<std::string>()),
                    parse_constraint_op(ops.at("p_concave").get<std::string>())};
    if (var_names) *var_names = doc.at("var_names").get<std::vector<std::string>>();
    return cs;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, std::string("constraint file: ") + e.what());
  }
}

void save_constraints(const SpConstraintSet& cs, const std::vector<std::string>& var_names,
                      const std::string& path) {
  write_text(constraints_to_json(cs, var_names), path);
}

SpConstraintSet load_constraints(const std::string& path, std::vector<std::string>* var_names) {
  return constraints_from_json(read_text(path), var_names);
}

}  // namespace sdma
