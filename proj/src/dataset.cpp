#include "sdma/dataset.hpp"

#include "numfmt.hpp"
#include "sdma/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace sdma {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

struct RawTable {
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based, for messages
};

// Parses every non-blank line into doubles. A first line that does not parse
// is taken as a header; any later unparsable field is a MalformedRow.
RawTable read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");

  RawTable table;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = detail::trim(line);
    if (line_no == 1 && view.substr(0, 3) == "\xEF\xBB\xBF") view.remove_prefix(3);
    if (view.empty()) continue;

    const auto fields = split_fields(view);
    std::vector<double> row;
    row.reserve(fields.size());
    bool numeric = true;
    for (auto f : fields) {
      auto v = detail::parse_double(f);
      if (!v) {
        numeric = false;
        break;
      }
      row.push_back(*v);
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;
      }
      throw Error(ErrorCode::MalformedRow,
                  path + ":" + std::to_string(line_no) + ": non-numeric field",
                  table.rows.size());
    }
    first = false;
    for (double v : row) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::MalformedRow,
                    path + ":" + std::to_string(line_no) + ": non-finite value",
                    table.rows.size());
      }
    }
    table.rows.push_back(std::move(row));
    table.line_numbers.push_back(line_no);
  }
  if (table.rows.empty()) throw Error(ErrorCode::EmptyFile, "'" + path + "' contains no data rows");
  return table;
}

double to_log(double v, Space space, const std::string& where, std::size_t row) {
  if (space == Space::Log) return v;
  if (!(v > 0.0)) {
    throw Error(ErrorCode::NonPositiveValue,
                where + ": value " + detail::format_double(v) +
                    " is not strictly positive (required for --space linear)",
                row);
  }
  return std::log(v);
}

}  // namespace

DataSet::DataSet(RowMatrix x, Eigen::VectorXd y, SpaceOrigin origin)
    : x_(std::move(x)), y_(std::move(y)), origin_(origin) {
  if (x_.rows() < 1) throw Error(ErrorCode::DegenerateData, "dataset has no points");
  if (x_.cols() < 1) throw Error(ErrorCode::DimensionMismatch, "dataset has no input dimensions");
  if (x_.rows() != y_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "input rows and output length differ");
  }
  if (!x_.allFinite() || !y_.allFinite()) {
    throw Error(ErrorCode::NonFiniteSample, "dataset contains non-finite values");
  }
}

DataSet make_dataset(const RowMatrix& inputs, const Eigen::VectorXd& outputs, Space space) {
  if (inputs.rows() != outputs.size()) {
    throw Error(ErrorCode::DimensionMismatch, "input rows and output length differ");
  }
  if (space == Space::Log) return DataSet(inputs, outputs, SpaceOrigin::AlreadyLog);

  RowMatrix x(inputs.rows(), inputs.cols());
  Eigen::VectorXd y(outputs.size());
  for (Eigen::Index j = 0; j < inputs.rows(); ++j) {
    const std::string where = "row " + std::to_string(j);
    for (Eigen::Index i = 0; i < inputs.cols(); ++i) {
      x(j, i) = to_log(inputs(j, i), space, where, static_cast<std::size_t>(j));
    }
    y[j] = to_log(outputs[j], space, where, static_cast<std::size_t>(j));
  }
  return DataSet(std::move(x), std::move(y), SpaceOrigin::LinearTransformed);
}

DataSet load_csv(const std::string& path, Space space) {
  const RawTable table = read_table(path);
  const std::size_t width = table.rows.front().size();
  if (width < 2) {
    throw Error(ErrorCode::MalformedRow,
                path + ":" + std::to_string(table.line_numbers.front()) +
                    ": need at least one input column and one output column",
                0);
  }
  const std::size_t n_dims = width - 1;
  const auto m = static_cast<Eigen::Index>(table.rows.size());

  RowMatrix x(m, static_cast<Eigen::Index>(n_dims));
  Eigen::VectorXd y(m);
  for (std::size_t j = 0; j < table.rows.size(); ++j) {
    const auto& row = table.rows[j];
    const std::string where = path + ":" + std::to_string(table.line_numbers[j]);
    if (row.size() != width) {
      throw Error(ErrorCode::MalformedRow,
                  where + ": expected " + std::to_string(width) + " fields, found " +
                      std::to_string(row.size()),
                  j);
    }
    const auto jj = static_cast<Eigen::Index>(j);
    for (std::size_t i = 0; i < n_dims; ++i) {
      x(jj, static_cast<Eigen::Index>(i)) = to_log(row[i], space, where, j);
    }
    y[jj] = to_log(row[n_dims], space, where, j);
  }
  const auto origin = space == Space::Linear ? SpaceOrigin::LinearTransformed : SpaceOrigin::AlreadyLog;
  return DataSet(std::move(x), std::move(y), origin);
}

void write_csv(const DataSet& data, const std::string& path, Space space) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
  const auto emit = [&](double v) {
    out << detail::format_double(space == Space::Linear ? std::exp(v) : v);
  };
  for (std::size_t j = 0; j < data.n_points(); ++j) {
    for (double v : data.point(j)) {
      emit(v);
      out << ',';
    }
    emit(data.value(j));
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write to '" + path + "' failed");
}

RowMatrix load_inputs_csv(const std::string& path, Space space, std::size_t n_dims) {
  const RawTable table = read_table(path);
  RowMatrix x(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(n_dims));
  for (std::size_t j = 0; j < table.rows.size(); ++j) {
    const auto& row = table.rows[j];
    const std::string where = path + ":" + std::to_string(table.line_numbers[j]);
    if (row.size() != n_dims && row.size() != n_dims + 1) {
      throw Error(ErrorCode::DimensionMismatch,
                  where + ": model expects " + std::to_string(n_dims) + " inputs, row has " +
                      std::to_string(row.size()) + " fields",
                  j);
    }
    for (std::size_t i = 0; i < n_dims; ++i) {
      x(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = to_log(row[i], space, where, j);
    }
  }
  return x;
}

DataSet sample_grid_2d(const std::function<double(double)>& f, double lo, double hi,
                       std::size_t count) {
  if (!(lo < hi)) throw Error(ErrorCode::InvalidArgument, "sample_grid_2d requires lo < hi");
  if (count < 2) throw Error(ErrorCode::InvalidArgument, "sample_grid_2d requires count >= 2");

  const auto m = static_cast<Eigen::Index>(count);
  RowMatrix x(m, 1);
  Eigen::VectorXd y(m);
  const double step = (hi - lo) / static_cast<double>(count - 1);
  for (Eigen::Index j = 0; j < m; ++j) {
    // Pin the last point to `hi` exactly instead of accumulating lo + j*step.
    const double xj = (j == m - 1) ? hi : lo + static_cast<double>(j) * step;
    const double yj = f(xj);
    if (!std::isfinite(yj)) {
      throw Error(ErrorCode::NonFiniteSample,
                  "f(" + detail::format_double(xj) + ") is not finite", static_cast<std::size_t>(j));
    }
    x(j, 0) = xj;
    y[j] = yj;
  }
  return DataSet(std::move(x), std::move(y), SpaceOrigin::AlreadyLog);
}

double demo2d_function(double x) {
  return std::max(-6.0 * x - 6.0, x * x * x * x - 3.0 * x * x);
}

DataSet demo2d_dataset(std::size_t count) { return sample_grid_2d(demo2d_function, -2.0, 2.0, count); }

}  // namespace sdma
