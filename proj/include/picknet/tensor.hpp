#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "picknet/errors.hpp"

namespace picknet {

// Dense rank-1 or rank-2 tensor of doubles, row-major. A rank-1 tensor of
// length n is stored as n rows x 1 col but serializes with a single dim.
class Tensor {
 public:
  Tensor() = default;

  static Tensor vector(std::size_t n) {
    Tensor t;
    t.rank_ = 1;
    t.rows_ = n;
    t.cols_ = 1;
    t.data_.assign(n, 0.0);
    return t;
  }

  static Tensor matrix(std::size_t rows, std::size_t cols) {
    Tensor t;
    t.rank_ = 2;
    t.rows_ = rows;
    t.cols_ = cols;
    t.data_.assign(rows * cols, 0.0);
    return t;
  }

  static Tensor from(std::vector<double> values) {
    Tensor t = vector(values.size());
    t.data_ = std::move(values);
    return t;
  }

  int rank() const { return rank_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* begin() { return data_.data(); }
  double* end() { return data_.data() + data_.size(); }
  const double* begin() const { return data_.data(); }
  const double* end() const { return data_.data() + data_.size(); }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  void fill(double v) {
    for (double& x : data_) x = v;
  }

  bool same_shape(const Tensor& o) const {
    return rank_ == o.rank_ && rows_ == o.rows_ && cols_ == o.cols_;
  }

  bool all_finite() const {
    for (double x : data_)
      if (!std::isfinite(x)) return false;
    return true;
  }

  std::string shape_str() const {
    if (rank_ == 1) return "[" + std::to_string(rows_) + "]";
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

 private:
  int rank_ = 1;
  std::size_t rows_ = 0;
  std::size_t cols_ = 1;
  std::vector<double> data_;
};

// A learnable tensor paired with its gradient accumulator.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;

  Param() = default;
  Param(std::string n, Tensor init) : name(std::move(n)), value(std::move(init)) {
    grad = value.rank() == 1 ? Tensor::vector(value.rows())
                             : Tensor::matrix(value.rows(), value.cols());
  }

  void zero_grad() { grad.fill(0.0); }
};

inline void require_shape(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

}  // namespace picknet
