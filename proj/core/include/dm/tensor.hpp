#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <vector>

#include "dm/error.hpp"

namespace dm::nn {

using EigenMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<EigenMatrix>;
using ConstMatMap = Eigen::Map<const EigenMatrix>;

/// Dense 2-D tensor of 64-bit reals, row-major. Vectors are 1xN rows and
/// scalars are 1x1; that is all the networks in this project need.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int64_t rows, int64_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols),
        data_(static_cast<size_t>(rows * cols), fill) {
    if (rows < 0 || cols < 0) throw ShapeMismatch("negative tensor dimension");
  }

  static Tensor scalar(double v) {
    Tensor t(1, 1);
    t.data_[0] = v;
    return t;
  }

  static Tensor row(std::initializer_list<double> vals) {
    Tensor t(1, static_cast<int64_t>(vals.size()));
    size_t i = 0;
    for (double v : vals) t.data_[i++] = v;
    return t;
  }

  static Tensor from(int64_t rows, int64_t cols, std::vector<double> vals) {
    if (static_cast<int64_t>(vals.size()) != rows * cols)
      throw ShapeMismatch("from(): value count does not match shape");
    Tensor t;
    t.rows_ = rows;
    t.cols_ = cols;
    t.data_ = std::move(vals);
    return t;
  }

  int64_t rows() const { return rows_; }
  int64_t cols() const { return cols_; }
  int64_t size() const { return rows_ * cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(int64_t r, int64_t c) {
    return data_[static_cast<size_t>(r * cols_ + c)];
  }
  double operator()(int64_t r, int64_t c) const {
    return data_[static_cast<size_t>(r * cols_ + c)];
  }
  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  double scalar_value() const {
    if (size() != 1) throw ShapeMismatch("scalar_value() on non-scalar");
    return data_[0];
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  const std::vector<double>& values() const { return data_; }

  MatMap mat() { return MatMap(data_.data(), rows_, cols_); }
  ConstMatMap mat() const { return ConstMatMap(data_.data(), rows_, cols_); }

  bool same_shape(const Tensor& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  int64_t rows_ = 0;
  int64_t cols_ = 0;
  std::vector<double> data_;
};

}  // namespace dm::nn
