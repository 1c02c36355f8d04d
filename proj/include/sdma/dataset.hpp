#pragma once

#include "sdma/matrix.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <string>

namespace sdma {

/// How a value column relates to the log-space quantities the fitter uses.
enum class Space { Linear, Log };

enum class SpaceOrigin { LinearTransformed, AlreadyLog };

/// Immutable set of log-space samples (x_j, y_j).
///
/// Rows of `x()` are contiguous so a sample can be handed to the evaluators
/// as a span without copying. Construction validates that every entry is
/// finite and the shapes agree; a DataSet that exists is always usable.
class DataSet {
 public:
  DataSet(RowMatrix x, Eigen::VectorXd y, SpaceOrigin origin);

  std::size_t n_points() const { return static_cast<std::size_t>(x_.rows()); }
  std::size_t n_dims() const { return static_cast<std::size_t>(x_.cols()); }
  SpaceOrigin space_origin() const { return origin_; }

  const RowMatrix& x() const { return x_; }
  const Eigen::VectorXd& y() const { return y_; }

  std::span<const double> point(std::size_t j) const {
    return {x_.data() + j * n_dims(), n_dims()};
  }
  double value(std::size_t j) const { return y_[static_cast<Eigen::Index>(j)]; }

 private:
  RowMatrix x_;
  Eigen::VectorXd y_;
  SpaceOrigin origin_;
};

/// Builds a DataSet from values in the given space. Linear values must be
/// strictly positive and are log-transformed; log values are taken verbatim.
DataSet make_dataset(const RowMatrix& inputs, const Eigen::VectorXd& outputs, Space space);

/// Reads "u_1,...,u_N,w" rows. A non-numeric first line is treated as a header.
DataSet load_csv(const std::string& path, Space space);

/// Writes the samples back out, exponentiating first when `space` is Linear.
void write_csv(const DataSet& data, const std::string& path, Space space);

/// Reads an input-only table for prediction: rows with exactly `n_dims`
/// fields, or `n_dims + 1` fields whose last column is ignored. Returned
/// matrix is in log space.
RowMatrix load_inputs_csv(const std::string& path, Space space, std::size_t n_dims);

/// `count` evenly spaced samples of f on [lo, hi], endpoints included.
DataSet sample_grid_2d(const std::function<double(double)>& f, double lo, double hi,
                       std::size_t count);

/// max(-6x - 6, x^4 - 3x^2): nonconvex test curve with a kink near x = -1.
double demo2d_function(double x);

/// The standard 101-point sampling of demo2d_function on [-2, 2].
DataSet demo2d_dataset(std::size_t count = 101);

}  // namespace sdma
