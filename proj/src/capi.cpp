#include "sdma/sdma.h"

#include "numfmt.hpp"
#include "sdma/dataset.hpp"
#include "sdma/error.hpp"
#include "sdma/fitting.hpp"
#include "sdma/functions.hpp"
#include "sdma/model_io.hpp"
#include "sdma/sp_export.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <memory>
#include <new>
#include <optional>
#include <span>
#include <string>
#include <vector>

struct sdma_dataset {
  sdma::DataSet data;
};

struct sdma_model {
  sdma::ModelFile file;
};

struct sdma_fit_result {
  sdma::FitResult result;
  sdma::FitSummary summary;
};

struct sdma_constraints {
  sdma::SpConstraintSet set;
  std::vector<std::string> var_names;  // empty unless loaded from a file that had them
};

namespace {

thread_local std::string g_last_error;

sdma_status code_to_status(sdma::ErrorCode code) {
  using sdma::ErrorCode;
  switch (code) {
    case ErrorCode::InvalidArgument: return SDMA_ERR_INVALID_ARGUMENT;
    case ErrorCode::Io: return SDMA_ERR_IO;
    case ErrorCode::MalformedRow: return SDMA_ERR_MALFORMED_ROW;
    case ErrorCode::NonPositiveValue: return SDMA_ERR_NON_POSITIVE_VALUE;
    case ErrorCode::EmptyFile: return SDMA_ERR_EMPTY_FILE;
    case ErrorCode::NonFiniteSample: return SDMA_ERR_NON_FINITE_SAMPLE;
    case ErrorCode::DimensionMismatch: return SDMA_ERR_DIMENSION_MISMATCH;
    case ErrorCode::NonFiniteResidual: return SDMA_ERR_NON_FINITE_RESIDUAL;
    case ErrorCode::LinearSolveFailure: return SDMA_ERR_LINEAR_SOLVE_FAILURE;
    case ErrorCode::NonFiniteGradient: return SDMA_ERR_NON_FINITE_GRADIENT;
    case ErrorCode::DegenerateData: return SDMA_ERR_DEGENERATE_DATA;
    case ErrorCode::CoefficientOverflow: return SDMA_ERR_COEFFICIENT_OVERFLOW;
    case ErrorCode::NameArityMismatch: return SDMA_ERR_NAME_ARITY_MISMATCH;
    case ErrorCode::UnsupportedClass: return SDMA_ERR_UNSUPPORTED_CLASS;
    case ErrorCode::Format: return SDMA_ERR_FORMAT;
  }
  return SDMA_ERR_INTERNAL;
}

sdma_status fail(sdma_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

// Runs `body`, translating exceptions into status codes.
template <class F>
sdma_status guarded(F&& body) {
  try {
    body();
    return SDMA_OK;
  } catch (const sdma::Error& e) {
    return fail(code_to_status(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(SDMA_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(SDMA_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(SDMA_ERR_INTERNAL, "unknown error");
  }
}

sdma_status null_arg(const char* what) {
  return fail(SDMA_ERR_INVALID_ARGUMENT, std::string("null argument: ") + what);
}

sdma::Space to_space(sdma_space s) {
  if (s == SDMA_SPACE_LINEAR) return sdma::Space::Linear;
  if (s == SDMA_SPACE_LOG) return sdma::Space::Log;
  throw sdma::Error(sdma::ErrorCode::InvalidArgument, "unknown space");
}

sdma::FunctionClass to_class(sdma_class c) {
  switch (c) {
    case SDMA_CLASS_MA: return sdma::FunctionClass::MA;
    case SDMA_CLASS_SMA: return sdma::FunctionClass::SMA;
    case SDMA_CLASS_DMA: return sdma::FunctionClass::DMA;
    case SDMA_CLASS_SDMA: return sdma::FunctionClass::SDMA;
  }
  throw sdma::Error(sdma::ErrorCode::InvalidArgument, "unknown function class");
}

sdma::ConstraintOp to_op(sdma_operator op) {
  switch (op) {
    case SDMA_OP_EQ: return sdma::ConstraintOp::Eq;
    case SDMA_OP_LEQ: return sdma::ConstraintOp::Leq;
    case SDMA_OP_GEQ: return sdma::ConstraintOp::Geq;
  }
  throw sdma::Error(sdma::ErrorCode::InvalidArgument, "unknown constraint operator");
}

sdma_operator from_op(sdma::ConstraintOp op) {
  switch (op) {
    case sdma::ConstraintOp::Eq: return SDMA_OP_EQ;
    case sdma::ConstraintOp::Leq: return SDMA_OP_LEQ;
    case sdma::ConstraintOp::Geq: return SDMA_OP_GEQ;
  }
  return SDMA_OP_EQ;
}

sdma_termination from_termination(sdma::Termination t) {
  switch (t) {
    case sdma::Termination::GradTol: return SDMA_TERM_GRAD_TOL;
    case sdma::Termination::StepTol: return SDMA_TERM_STEP_TOL;
    case sdma::Termination::CostTol: return SDMA_TERM_COST_TOL;
    case sdma::Termination::MaxIter: return SDMA_TERM_MAX_ITER;
  }
  return SDMA_TERM_MAX_ITER;
}

sdma::LmConfig to_lm(const sdma_lm_config& c) {
  sdma::LmConfig cfg;
  cfg.max_iterations = c.max_iterations;
  cfg.lambda_init = c.lambda_init;
  cfg.lambda_up = c.lambda_up;
  cfg.lambda_down = c.lambda_down;
  cfg.grad_tol = c.grad_tol;
  cfg.step_tol = c.step_tol;
  cfg.cost_tol = c.cost_tol;
  return cfg;
}

std::vector<std::string> names_or_default(const char* const* names, std::size_t n_names,
                                          std::size_t dims) {
  if (names == nullptr) return sdma::default_var_names(dims);
  std::vector<std::string> out;
  out.reserve(n_names);
  for (std::size_t i = 0; i < n_names; ++i) {
    if (names[i] == nullptr) throw sdma::Error(sdma::ErrorCode::InvalidArgument, "null variable name");
    out.emplace_back(names[i]);
  }
  return out;
}

}  // namespace

extern "C" {

const char* sdma_version(void) { return "1.0.0"; }

const char* sdma_status_string(sdma_status status) {
  switch (status) {
    case SDMA_OK: return "ok";
    case SDMA_ERR_BUFFER_TOO_SMALL: return "buffer too small";
    case SDMA_ERR_INTERNAL: return "internal error";
    case SDMA_ERR_INVALID_ARGUMENT: return sdma::to_string(sdma::ErrorCode::InvalidArgument);
    case SDMA_ERR_IO: return sdma::to_string(sdma::ErrorCode::Io);
    case SDMA_ERR_MALFORMED_ROW: return sdma::to_string(sdma::ErrorCode::MalformedRow);
    case SDMA_ERR_NON_POSITIVE_VALUE: return sdma::to_string(sdma::ErrorCode::NonPositiveValue);
    case SDMA_ERR_EMPTY_FILE: return sdma::to_string(sdma::ErrorCode::EmptyFile);
    case SDMA_ERR_NON_FINITE_SAMPLE: return sdma::to_string(sdma::ErrorCode::NonFiniteSample);
    case SDMA_ERR_DIMENSION_MISMATCH: return sdma::to_string(sdma::ErrorCode::DimensionMismatch);
    case SDMA_ERR_NON_FINITE_RESIDUAL: return sdma::to_string(sdma::ErrorCode::NonFiniteResidual);
    case SDMA_ERR_LINEAR_SOLVE_FAILURE: return sdma::to_string(sdma::ErrorCode::LinearSolveFailure);
    case SDMA_ERR_NON_FINITE_GRADIENT: return sdma::to_string(sdma::ErrorCode::NonFiniteGradient);
    case SDMA_ERR_DEGENERATE_DATA: return sdma::to_string(sdma::ErrorCode::DegenerateData);
    case SDMA_ERR_COEFFICIENT_OVERFLOW: return sdma::to_string(sdma::ErrorCode::CoefficientOverflow);
    case SDMA_ERR_NAME_ARITY_MISMATCH: return sdma::to_string(sdma::ErrorCode::NameArityMismatch);
    case SDMA_ERR_UNSUPPORTED_CLASS: return sdma::to_string(sdma::ErrorCode::UnsupportedClass);
    case SDMA_ERR_FORMAT: return sdma::to_string(sdma::ErrorCode::Format);
  }
  return "unknown status";
}

const char* sdma_last_error(void) { return g_last_error.c_str(); }

int sdma_status_is_input_error(sdma_status status) {
  switch (status) {
    case SDMA_ERR_INVALID_ARGUMENT:
    case SDMA_ERR_IO:
    case SDMA_ERR_MALFORMED_ROW:
    case SDMA_ERR_NON_POSITIVE_VALUE:
    case SDMA_ERR_EMPTY_FILE:
    case SDMA_ERR_NON_FINITE_SAMPLE:
    case SDMA_ERR_DIMENSION_MISMATCH:
    case SDMA_ERR_NAME_ARITY_MISMATCH:
    case SDMA_ERR_UNSUPPORTED_CLASS:
    case SDMA_ERR_FORMAT:
      return 1;
    default:
      return 0;
  }
}

// ---- datasets

sdma_status sdma_dataset_load_csv(const char* path, sdma_space space, sdma_dataset** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  return guarded([&] { *out = new sdma_dataset{sdma::load_csv(path, to_space(space))}; });
}

sdma_status sdma_dataset_from_arrays(const double* x, const double* y, size_t n_points, size_t n_dims,
                                     sdma_space space, sdma_dataset** out) {
  if (!x) return null_arg("x");
  if (!y) return null_arg("y");
  if (!out) return null_arg("out");
  return guarded([&] {
    if (n_points == 0 || n_dims == 0)
      throw sdma::Error(sdma::ErrorCode::InvalidArgument, "dataset needs at least one point and one dimension");
    sdma::RowMatrix xm = Eigen::Map<const sdma::RowMatrix>(x, static_cast<Eigen::Index>(n_points),
                                                           static_cast<Eigen::Index>(n_dims));
    Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y, static_cast<Eigen::Index>(n_points));
    *out = new sdma_dataset{sdma::make_dataset(xm, yv, to_space(space))};
  });
}

sdma_status sdma_dataset_demo2d(size_t count, sdma_dataset** out) {
  if (!out) return null_arg("out");
  return guarded([&] { *out = new sdma_dataset{sdma::demo2d_dataset(count)}; });
}

sdma_status sdma_dataset_write_csv(const sdma_dataset* data, const char* path, sdma_space space) {
  if (!data) return null_arg("data");
  if (!path) return null_arg("path");
  return guarded([&] { sdma::write_csv(data->data, path, to_space(space)); });
}

size_t sdma_dataset_n_points(const sdma_dataset* data) { return data ? data->data.n_points() : 0; }
size_t sdma_dataset_n_dims(const sdma_dataset* data) { return data ? data->data.n_dims() : 0; }

sdma_status sdma_dataset_point(const sdma_dataset* data, size_t j, double* x_out, double* y_out) {
  if (!data) return null_arg("data");
  if (j >= data->data.n_points()) return fail(SDMA_ERR_INVALID_ARGUMENT, "point index out of range");
  if (x_out) {
    auto p = data->data.point(j);
    std::memcpy(x_out, p.data(), p.size() * sizeof(double));
  }
  if (y_out) *y_out = data->data.value(j);
  return SDMA_OK;
}

void sdma_dataset_free(sdma_dataset* data) { delete data; }

// ---- fitting

void sdma_fit_spec_init(sdma_fit_spec* spec) {
  if (!spec) return;
  const sdma::FitSpec d;
  spec->function_class = SDMA_CLASS_SDMA;
  spec->k_terms = d.k_terms;
  spec->m_terms = d.m_terms;
  spec->restarts = d.restarts;
  spec->rng_seed = d.rng_seed;
  spec->threads = d.threads;
  spec->lm.max_iterations = d.lm.max_iterations;
  spec->lm.lambda_init = d.lm.lambda_init;
  spec->lm.lambda_up = d.lm.lambda_up;
  spec->lm.lambda_down = d.lm.lambda_down;
  spec->lm.grad_tol = d.lm.grad_tol;
  spec->lm.step_tol = d.lm.step_tol;
  spec->lm.cost_tol = d.lm.cost_tol;
}

sdma_status sdma_fit(const sdma_dataset* data, const sdma_fit_spec* spec, sdma_fit_result** out) {
  if (!data) return null_arg("data");
  if (!spec) return null_arg("spec");
  if (!out) return null_arg("out");
  return guarded([&] {
    sdma::FitSpec s;
    s.function_class = to_class(spec->function_class);
    s.k_terms = spec->k_terms;
    s.m_terms = spec->m_terms;
    s.restarts = spec->restarts;
    s.rng_seed = spec->rng_seed;
    s.threads = spec->threads;
    s.lm = to_lm(spec->lm);
    auto r = std::make_unique<sdma_fit_result>();
    r->result = sdma::fit(data->data, s);
    r->summary.rms_error = r->result.rms_error;
    r->summary.restarts = s.restarts;
    r->summary.best_restart_index = r->result.best_restart_index;
    r->summary.rng_seed = s.rng_seed;
    r->summary.termination = r->result.lm_report.termination;
    *out = r.release();
  });
}

double sdma_fit_result_rms(const sdma_fit_result* r) { return r ? r->result.rms_error : NAN; }
size_t sdma_fit_result_restarts(const sdma_fit_result* r) { return r ? r->result.restart_costs.size() : 0; }
size_t sdma_fit_result_best_index(const sdma_fit_result* r) { return r ? r->result.best_restart_index : 0; }

sdma_termination sdma_fit_result_termination(const sdma_fit_result* r) {
  return r ? from_termination(r->result.lm_report.termination) : SDMA_TERM_MAX_ITER;
}

size_t sdma_fit_result_iterations(const sdma_fit_result* r) { return r ? r->result.lm_report.iterations : 0; }

sdma_status sdma_fit_result_restart_costs(const sdma_fit_result* r, double* costs, size_t capacity,
                                          size_t* count) {
  if (!r) return null_arg("result");
  const auto& c = r->result.restart_costs;
  if (count) *count = c.size();
  if (costs) {
    const std::size_t n = std::min(capacity, c.size());
    std::copy_n(c.begin(), n, costs);
  }
  return SDMA_OK;
}

size_t sdma_fit_result_warning_count(const sdma_fit_result* r) { return r ? r->result.warnings.size() : 0; }

const char* sdma_fit_result_warning(const sdma_fit_result* r, size_t index) {
  if (!r || index >= r->result.warnings.size()) return nullptr;
  return r->result.warnings[index].c_str();
}

sdma_status sdma_fit_result_model(const sdma_fit_result* r, sdma_model** out) {
  if (!r) return null_arg("result");
  if (!out) return null_arg("out");
  return guarded([&] { *out = new sdma_model{sdma::ModelFile{r->result.params, r->summary}}; });
}

void sdma_fit_result_free(sdma_fit_result* r) { delete r; }

const char* sdma_termination_string(sdma_termination t) {
  switch (t) {
    case SDMA_TERM_GRAD_TOL: return sdma::to_string(sdma::Termination::GradTol);
    case SDMA_TERM_STEP_TOL: return sdma::to_string(sdma::Termination::StepTol);
    case SDMA_TERM_COST_TOL: return sdma::to_string(sdma::Termination::CostTol);
    case SDMA_TERM_MAX_ITER: return sdma::to_string(sdma::Termination::MaxIter);
  }
  return "unknown";
}

// ---- models

sdma_status sdma_model_load(const char* path, sdma_model** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  return guarded([&] { *out = new sdma_model{sdma::load_model(path)}; });
}

sdma_status sdma_model_save(const sdma_model* model, const char* path) {
  if (!model) return null_arg("model");
  if (!path) return null_arg("path");
  return guarded([&] { sdma::save_model(model->file, path); });
}

sdma_status sdma_model_from_gamma(sdma_class cls, size_t k_terms, size_t m_terms, size_t n_dims,
                                  const double* gamma, size_t length, sdma_model** out) {
  if (!gamma) return null_arg("gamma");
  if (!out) return null_arg("out");
  return guarded([&] {
    sdma::ParamLayout layout{to_class(cls), k_terms, 0, n_dims};
    if (layout.difference()) layout.m = m_terms;
    if (k_terms == 0 || n_dims == 0 || (layout.difference() && m_terms == 0))
      throw sdma::Error(sdma::ErrorCode::InvalidArgument, "term counts and dimension must be positive");
    if (length != layout.size())
      throw sdma::Error(sdma::ErrorCode::DimensionMismatch,
                        "gamma has " + std::to_string(length) + " entries, expected " +
                            std::to_string(layout.size()));
    auto params = sdma::unpack(layout, std::span<const double>(gamma, length));
    sdma::validate(params);
    *out = new sdma_model{sdma::ModelFile{std::move(params), std::nullopt}};
  });
}

sdma_status sdma_model_gamma(const sdma_model* model, double* gamma, size_t capacity, size_t* length) {
  if (!model) return null_arg("model");
  return guarded([&] {
    const Eigen::VectorXd g = sdma::pack(model->file.params);
    const auto n = static_cast<std::size_t>(g.size());
    if (length) *length = n;
    if (gamma) {
      if (capacity < n) throw sdma::Error(sdma::ErrorCode::InvalidArgument, "gamma buffer too small");
      std::copy_n(g.data(), n, gamma);
    }
  });
}

sdma_class sdma_model_class(const sdma_model* model) {
  if (!model) return SDMA_CLASS_MA;
  switch (sdma::function_class(model->file.params)) {
    case sdma::FunctionClass::MA: return SDMA_CLASS_MA;
    case sdma::FunctionClass::SMA: return SDMA_CLASS_SMA;
    case sdma::FunctionClass::DMA: return SDMA_CLASS_DMA;
    case sdma::FunctionClass::SDMA: return SDMA_CLASS_SDMA;
  }
  return SDMA_CLASS_MA;
}

size_t sdma_model_n_dims(const sdma_model* m) { return m ? sdma::model_dims(m->file.params) : 0; }
size_t sdma_model_k_terms(const sdma_model* m) { return m ? sdma::convex_terms(m->file.params) : 0; }
size_t sdma_model_m_terms(const sdma_model* m) { return m ? sdma::concave_terms(m->file.params) : 0; }

sdma_status sdma_model_eval(const sdma_model* model, const double* x, size_t n_dims, double* y_out) {
  if (!model) return null_arg("model");
  if (!x) return null_arg("x");
  if (!y_out) return null_arg("y_out");
  return guarded([&] { *y_out = sdma::eval(model->file.params, std::span<const double>(x, n_dims)); });
}

sdma_status sdma_model_rms(const sdma_model* model, const sdma_dataset* data, double* rms_out) {
  if (!model) return null_arg("model");
  if (!data) return null_arg("data");
  if (!rms_out) return null_arg("rms_out");
  return guarded([&] {
    if (sdma::model_dims(model->file.params) != data->data.n_dims())
      throw sdma::Error(sdma::ErrorCode::DimensionMismatch,
                        "model has " + std::to_string(sdma::model_dims(model->file.params)) +
                            " inputs but the data has " + std::to_string(data->data.n_dims()));
    *rms_out = sdma::rms_error(model->file.params, data->data);
  });
}

sdma_status sdma_model_eval_csv(const sdma_model* model, const char* input_path, sdma_space space,
                                const char* output_path) {
  if (!model) return null_arg("model");
  if (!input_path) return null_arg("input_path");
  if (!output_path) return null_arg("output_path");
  return guarded([&] {
    const sdma::Space sp = to_space(space);
    const std::size_t n = sdma::model_dims(model->file.params);
    const sdma::RowMatrix x = sdma::load_inputs_csv(input_path, sp, n);
    std::string text;
    for (Eigen::Index j = 0; j < x.rows(); ++j) {
      std::span<const double> row(x.data() + j * x.cols(), n);
      const double f = sdma::eval(model->file.params, row);
      for (double v : row) {
        text += sdma::detail::format_double(sp == sdma::Space::Linear ? std::exp(v) : v);
        text += ',';
      }
      text += sdma::detail::format_double(sp == sdma::Space::Linear ? std::exp(f) : f);
      text += '\n';
    }
    if (std::strcmp(output_path, "-") == 0) {
      std::cout << text << std::flush;
      return;
    }
    std::ofstream os(output_path, std::ios::binary);
    if (!os) throw sdma::Error(sdma::ErrorCode::Io, std::string("cannot open ") + output_path + " for writing");
    os << text;
    if (!os) throw sdma::Error(sdma::ErrorCode::Io, std::string("write failed: ") + output_path);
  });
}

void sdma_model_free(sdma_model* model) { delete model; }

// ---- SP export

sdma_status sdma_export(const sdma_model* model, sdma_operator original, sdma_constraints** out) {
  if (!model) return null_arg("model");
  if (!out) return null_arg("out");
  return guarded([&] {
    *out = new sdma_constraints{sdma::export_model(model->file.params, to_op(original)), {}};
  });
}

sdma_status sdma_constraints_load(const char* path, sdma_constraints** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  return guarded([&] {
    auto cs = std::make_unique<sdma_constraints>();
    cs->set = sdma::load_constraints(path, &cs->var_names);
    *out = cs.release();
  });
}

sdma_status sdma_constraints_save(const sdma_constraints* cs, const char* path, const char* const* var_names,
                                  size_t n_names) {
  if (!cs) return null_arg("constraints");
  if (!path) return null_arg("path");
  return guarded([&] {
    auto names = var_names == nullptr && !cs->var_names.empty()
                     ? cs->var_names
                     : names_or_default(var_names, n_names, cs->set.dims());
    sdma::save_constraints(cs->set, names, path);
  });
}

sdma_status sdma_constraints_render(const sdma_constraints* cs, const char* const* var_names, size_t n_names,
                                    char* buf, size_t capacity, size_t* needed) {
  if (!cs) return null_arg("constraints");
  std::string text;
  const sdma_status st = guarded([&] {
    auto names = var_names == nullptr && !cs->var_names.empty()
                     ? cs->var_names
                     : names_or_default(var_names, n_names, cs->set.dims());
    text = sdma::render_constraints(cs->set, names);
  });
  if (st != SDMA_OK) return st;
  if (needed) *needed = text.size() + 1;
  if (!buf || capacity < text.size() + 1) return fail(SDMA_ERR_BUFFER_TOO_SMALL, "render buffer too small");
  std::memcpy(buf, text.c_str(), text.size() + 1);
  return SDMA_OK;
}

sdma_status sdma_constraints_operators(const sdma_constraints* cs, sdma_operator ops[3]) {
  if (!cs) return null_arg("constraints");
  if (!ops) return null_arg("ops");
  for (int i = 0; i < 3; ++i) ops[i] = from_op(cs->set.operators[static_cast<std::size_t>(i)]);
  return SDMA_OK;
}

int sdma_constraints_is_gp(const sdma_constraints* cs) { return cs && cs->set.is_gp() ? 1 : 0; }
size_t sdma_constraints_n_dims(const sdma_constraints* cs) { return cs ? cs->set.dims() : 0; }

sdma_status sdma_constraints_eval(const sdma_constraints* cs, const double* u, size_t n_dims, double* w_out) {
  if (!cs) return null_arg("constraints");
  if (!u) return null_arg("u");
  if (!w_out) return null_arg("w_out");
  return guarded([&] { *w_out = cs->set.evaluate_ratio(std::span<const double>(u, n_dims)); });
}

void sdma_constraints_free(sdma_constraints* cs) { delete cs; }

}  // extern "C"
