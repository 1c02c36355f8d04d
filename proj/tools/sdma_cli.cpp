// Command-line driver for the sdma library. Talks to the library only
// through the C interface in sdma/sdma.h.

#include "sdma/sdma.h"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

// Carries a library status up to main, which turns it into an exit code.
struct Failure {
  sdma_status status;
  std::string message;
};

void check(sdma_status st) {
  if (st != SDMA_OK) throw Failure{st, sdma_last_error()};
}

[[noreturn]] void input_error(const std::string& message) {
  throw Failure{SDMA_ERR_INVALID_ARGUMENT, message};
}

std::string fmt(double v, int digits = 17) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, digits);
  return std::string(buf, res.ptr);
}

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using DatasetPtr = std::unique_ptr<sdma_dataset, Deleter<sdma_dataset, sdma_dataset_free>>;
using ModelPtr = std::unique_ptr<sdma_model, Deleter<sdma_model, sdma_model_free>>;
using FitPtr = std::unique_ptr<sdma_fit_result, Deleter<sdma_fit_result, sdma_fit_result_free>>;
using ConstraintsPtr = std::unique_ptr<sdma_constraints, Deleter<sdma_constraints, sdma_constraints_free>>;

const std::map<std::string, sdma_space> kSpaces{{"linear", SDMA_SPACE_LINEAR}, {"log", SDMA_SPACE_LOG}};
const std::map<std::string, sdma_class> kClasses{
    {"ma", SDMA_CLASS_MA}, {"sma", SDMA_CLASS_SMA}, {"dma", SDMA_CLASS_DMA}, {"sdma", SDMA_CLASS_SDMA}};
const std::map<std::string, sdma_operator> kOps{{"eq", SDMA_OP_EQ}, {"leq", SDMA_OP_LEQ}, {"geq", SDMA_OP_GEQ}};

const char* class_name(sdma_class c) {
  for (const auto& [name, value] : kClasses)
    if (value == c) return name.c_str();
  return "?";
}

const char* op_symbol(sdma_operator op) {
  switch (op) {
    case SDMA_OP_EQ: return "=";
    case SDMA_OP_LEQ: return "<=";
    case SDMA_OP_GEQ: return ">=";
  }
  return "?";
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  if (!text.empty() && text.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& field) {
  std::string s = field;
  while (!s.empty() && (s.front() == ' ' || s.front() == '+')) s.erase(s.begin());
  while (!s.empty() && s.back() == ' ') s.pop_back();
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    input_error("not a number: '" + field + "'");
  return v;
}

// Options shared by `fit` and `demo2d`.
struct FitOptions {
  std::string cls = "sdma";
  std::size_t order = 5;
  std::optional<std::size_t> k;
  std::optional<std::size_t> m;
  std::size_t restarts = 30;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  std::optional<std::size_t> max_iter;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--class", cls, "Function class")
        ->check(CLI::IsMember({"ma", "sma", "dma", "sdma"}, CLI::ignore_case))
        ->capture_default_str();
    cmd->add_option("--order", order, "Fit order p (sets K = M = p)")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--k", k, "Convex terms K (overrides --order)")->check(CLI::PositiveNumber);
    cmd->add_option("--m", m, "Concave terms M (overrides --order; DMA/SDMA only)")->check(CLI::PositiveNumber);
    cmd->add_option("--restarts", restarts, "Random restarts")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--seed", seed, "RNG seed")->capture_default_str();
    cmd->add_option("--threads", threads, "Worker threads, 0 = all cores (does not change results)")
        ->capture_default_str();
    cmd->add_option("--max-iter", max_iter, "Levenberg-Marquardt iteration cap per stage")->check(CLI::PositiveNumber);
  }

  sdma_fit_spec spec() const {
    sdma_fit_spec s;
    sdma_fit_spec_init(&s);
    s.function_class = kClasses.at(cls);
    s.k_terms = k.value_or(order);
    s.m_terms = m.value_or(order);
    s.restarts = restarts;
    s.rng_seed = seed;
    s.threads = threads;
    if (max_iter) s.lm.max_iterations = *max_iter;
    return s;
  }
};

void print_fit_report(const sdma_fit_result* r, const sdma_fit_spec& spec) {
  const double rms = sdma_fit_result_rms(r);
  std::cout << "class: " << class_name(spec.function_class) << '\n';
  std::cout << "K: " << spec.k_terms << '\n';
  if (spec.function_class == SDMA_CLASS_DMA || spec.function_class == SDMA_CLASS_SDMA)
    std::cout << "M: " << spec.m_terms << '\n';
  std::cout << "restarts: " << sdma_fit_result_restarts(r) << '\n';
  std::cout << "best_restart: " << sdma_fit_result_best_index(r) << '\n';
  std::cout << "termination: " << sdma_termination_string(sdma_fit_result_termination(r)) << '\n';
  std::cout << "RMS: " << fmt(100.0 * rms, 4) << "%\n";
  std::cout << "rms_error: " << fmt(rms) << '\n';
  for (std::size_t i = 0; i < sdma_fit_result_warning_count(r); ++i)
    std::cerr << "warning: " << sdma_fit_result_warning(r, i) << '\n';
}

FitPtr run_fit(const sdma_dataset* data, const sdma_fit_spec& spec) {
  sdma_fit_result* raw = nullptr;
  check(sdma_fit(data, &spec, &raw));
  return FitPtr(raw);
}

ModelPtr load_model(const std::string& path) {
  sdma_model* raw = nullptr;
  check(sdma_model_load(path.c_str(), &raw));
  return ModelPtr(raw);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fit MA/SMA/DMA/SDMA surrogate models and export SP constraint sets."};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", std::string(sdma_version()));

  // fit
  std::string fit_input, fit_out, fit_space = "linear";
  FitOptions fit_opts;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a model to a CSV dataset and save it");
  fit_cmd->add_option("--input", fit_input, "CSV of u_1..u_N,w rows")->required();
  fit_cmd->add_option("--space", fit_space, "Space of the CSV values")
      ->check(CLI::IsMember({"linear", "log"}))
      ->capture_default_str();
  fit_cmd->add_option("--out", fit_out, "Model file to write")->required();
  fit_opts.add_to(fit_cmd);

  // eval
  std::string eval_model, eval_input, eval_point, eval_out = "-", eval_space = "linear";
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a saved model");
  eval_cmd->add_option("--model", eval_model, "Model file")->required();
  auto* eval_in_opt = eval_cmd->add_option("--input", eval_input, "CSV of inputs (an extra last column is ignored)");
  auto* eval_pt_opt = eval_cmd->add_option("--point", eval_point, "Single point, comma separated");
  eval_in_opt->excludes(eval_pt_opt);
  eval_cmd->add_option("--space", eval_space, "Space of inputs and predictions")
      ->check(CLI::IsMember({"linear", "log"}))
      ->capture_default_str();
  eval_cmd->add_option("--out", eval_out, "Prediction CSV, '-' for stdout")->capture_default_str();

  // rms
  std::string rms_model, rms_input, rms_space = "linear";
  auto* rms_cmd = app.add_subcommand("rms", "Log-space RMS error of a saved model on a CSV dataset");
  rms_cmd->add_option("--model", rms_model, "Model file")->required();
  rms_cmd->add_option("--input", rms_input, "CSV of u_1..u_N,w rows")->required();
  rms_cmd->add_option("--space", rms_space, "Space of the CSV values")
      ->check(CLI::IsMember({"linear", "log"}))
      ->capture_default_str();

  // export
  std::string exp_model, exp_out, exp_op = "eq", exp_names;
  auto* exp_cmd = app.add_subcommand("export", "Export an SDMA or SMA model as SP/GP constraints");
  exp_cmd->add_option("--model", exp_model, "Model file")->required();
  exp_cmd->add_option("--op", exp_op, "Operator of the original constraint w (op) f(u)")
      ->check(CLI::IsMember({"eq", "leq", "geq"}))
      ->capture_default_str();
  exp_cmd->add_option("--out", exp_out, "Constraint file to write");
  exp_cmd->add_option("--names", exp_names, "Variable names, comma separated (default u1..uN)");

  // demo2d
  std::string demo_out;
  std::size_t demo_points = 101;
  FitOptions demo_opts;
  auto* demo_cmd = app.add_subcommand("demo2d", "Fit the built-in curve max(-6x-6, x^4-3x^2) on [-2, 2]");
  demo_opts.add_to(demo_cmd);
  demo_cmd->add_option("--points", demo_points, "Number of samples")->check(CLI::Range(2, 1000000))->capture_default_str();
  demo_cmd->add_option("--out", demo_out, "Write x,y,prediction CSV for plotting");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (fit_cmd->parsed()) {
      const sdma_fit_spec spec = fit_opts.spec();
      sdma_dataset* raw = nullptr;
      check(sdma_dataset_load_csv(fit_input.c_str(), kSpaces.at(fit_space), &raw));
      DatasetPtr data(raw);
      FitPtr result = run_fit(data.get(), spec);
      sdma_model* model_raw = nullptr;
      check(sdma_fit_result_model(result.get(), &model_raw));
      ModelPtr model(model_raw);
      check(sdma_model_save(model.get(), fit_out.c_str()));
      std::cout << "points: " << sdma_dataset_n_points(data.get()) << '\n';
      std::cout << "dims: " << sdma_dataset_n_dims(data.get()) << '\n';
      print_fit_report(result.get(), spec);
      std::cout << "model: " << fit_out << '\n';
    } else if (eval_cmd->parsed()) {
      ModelPtr model = load_model(eval_model);
      const sdma_space space = kSpaces.at(eval_space);
      if (!eval_input.empty()) {
        check(sdma_model_eval_csv(model.get(), eval_input.c_str(), space, eval_out.c_str()));
      } else if (!eval_point.empty()) {
        std::vector<double> u;
        for (const auto& f : split_commas(eval_point)) u.push_back(parse_number(f));
        const std::size_t n = sdma_model_n_dims(model.get());
        if (u.size() != n) {
          throw Failure{SDMA_ERR_DIMENSION_MISMATCH, "model expects " + std::to_string(n) + " inputs, --point has " +
                                                         std::to_string(u.size())};
        }
        std::vector<double> x(u);
        if (space == SDMA_SPACE_LINEAR) {
          for (double& v : x) {
            if (!(v > 0.0)) throw Failure{SDMA_ERR_NON_POSITIVE_VALUE, "--point values must be positive in linear space"};
            v = std::log(v);
          }
        }
        double f = 0.0;
        check(sdma_model_eval(model.get(), x.data(), x.size(), &f));
        std::string line;
        for (double v : u) line += fmt(v) + ",";
        line += fmt(space == SDMA_SPACE_LINEAR ? std::exp(f) : f);
        if (eval_out == "-") {
          std::cout << line << '\n';
        } else {
          std::ofstream os(eval_out, std::ios::binary);
          os << line << '\n';
          if (!os) throw Failure{SDMA_ERR_IO, "cannot write '" + eval_out + "'"};
        }
      } else {
        input_error("eval needs --input or --point");
      }
    } else if (rms_cmd->parsed()) {
      ModelPtr model = load_model(rms_model);
      sdma_dataset* raw = nullptr;
      check(sdma_dataset_load_csv(rms_input.c_str(), kSpaces.at(rms_space), &raw));
      DatasetPtr data(raw);
      double rms = 0.0;
      check(sdma_model_rms(model.get(), data.get(), &rms));
      std::cout << "points: " << sdma_dataset_n_points(data.get()) << '\n';
      std::cout << "RMS: " << fmt(100.0 * rms, 4) << "%\n";
      std::cout << "rms_error: " << fmt(rms) << '\n';
    } else if (exp_cmd->parsed()) {
      ModelPtr model = load_model(exp_model);
      sdma_constraints* raw = nullptr;
      check(sdma_export(model.get(), kOps.at(exp_op), &raw));
      ConstraintsPtr cs(raw);

      std::vector<std::string> names;
      if (!exp_names.empty()) names = split_commas(exp_names);
      std::vector<const char*> name_ptrs;
      for (const auto& s : names) name_ptrs.push_back(s.c_str());
      const char* const* np = names.empty() ? nullptr : name_ptrs.data();

      if (!exp_out.empty()) check(sdma_constraints_save(cs.get(), exp_out.c_str(), np, names.size()));

      std::size_t needed = 0;
      sdma_status st = sdma_constraints_render(cs.get(), np, names.size(), nullptr, 0, &needed);
      if (st != SDMA_ERR_BUFFER_TOO_SMALL) check(st);
      std::string text(needed, '\0');
      check(sdma_constraints_render(cs.get(), np, names.size(), text.data(), text.size(), &needed));
      text.resize(needed - 1);

      sdma_operator ops[3];
      check(sdma_constraints_operators(cs.get(), ops));
      std::cout << "kind: " << (sdma_constraints_is_gp(cs.get()) ? "gp" : "sp") << '\n';
      if (sdma_constraints_is_gp(cs.get())) {
        std::cout << "operators: w: " << op_symbol(ops[0]) << '\n';
      } else {
        std::cout << "operators: w: " << op_symbol(ops[0]) << ", p_convex: " << op_symbol(ops[1])
                  << ", p_concave: " << op_symbol(ops[2]) << '\n';
      }
      std::cout << text;
      if (!text.empty() && text.back() != '\n') std::cout << '\n';
      if (!exp_out.empty()) std::cout << "constraints: " << exp_out << '\n';
    } else if (demo_cmd->parsed()) {
      const sdma_fit_spec spec = demo_opts.spec();
      sdma_dataset* raw = nullptr;
      check(sdma_dataset_demo2d(demo_points, &raw));
      DatasetPtr data(raw);
      FitPtr result = run_fit(data.get(), spec);
      std::cout << "points: " << sdma_dataset_n_points(data.get()) << '\n';
      print_fit_report(result.get(), spec);
      if (!demo_out.empty()) {
        sdma_model* model_raw = nullptr;
        check(sdma_fit_result_model(result.get(), &model_raw));
        ModelPtr model(model_raw);
        std::ofstream os(demo_out, std::ios::binary);
        if (!os) throw Failure{SDMA_ERR_IO, "cannot write '" + demo_out + "'"};
        os << "x,y,prediction\n";
        for (std::size_t j = 0; j < sdma_dataset_n_points(data.get()); ++j) {
          double x = 0.0, y = 0.0, f = 0.0;
          check(sdma_dataset_point(data.get(), j, &x, &y));
          check(sdma_model_eval(model.get(), &x, 1, &f));
          os << fmt(x) << ',' << fmt(y) << ',' << fmt(f) << '\n';
        }
        if (!os) throw Failure{SDMA_ERR_IO, "write to '" + demo_out + "' failed"};
        std::cout << "plot_csv: " << demo_out << '\n';
      }
    }
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << '\n';
    return sdma_status_is_input_error(f.status) ? kExitInput : kExitNumerical;
  }
  return kExitOk;
}
