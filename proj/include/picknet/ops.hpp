#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "picknet/errors.hpp"
#include "picknet/rng.hpp"
#include "picknet/tensor.hpp"

namespace picknet {

// y = W x + b
inline Tensor affine(const Tensor& W, const Tensor& x, const Tensor& b) {
  if (W.cols() != x.size() || b.size() != W.rows()) {
    throw ShapeError("affine: W is " + W.shape_str() + ", x is " + x.shape_str() +
                     ", b is " + b.shape_str());
  }
  Tensor y = Tensor::vector(W.rows());
  const double* w = W.begin();
  for (std::size_t i = 0; i < W.rows(); ++i) {
    double acc = b[i];
    const double* row = w + i * W.cols();
    for (std::size_t j = 0; j < W.cols(); ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
  return y;
}

// y += W x
inline void matvec_add(const Tensor& W, const Tensor& x, Tensor& y) {
  if (W.cols() != x.size() || y.size() != W.rows()) {
    throw ShapeError("matvec_add: W is " + W.shape_str() + ", x is " + x.shape_str() +
                     ", y is " + y.shape_str());
  }
  const double* w = W.begin();
  for (std::size_t i = 0; i < W.rows(); ++i) {
    double acc = 0.0;
    const double* row = w + i * W.cols();
    for (std::size_t j = 0; j < W.cols(); ++j) acc += row[j] * x[j];
    y[i] += acc;
  }
}

// x += W^T y  (the usual pull-back of matvec through W)
inline void matvec_transpose_add(const Tensor& W, const Tensor& y, Tensor& x) {
  if (W.rows() != y.size() || x.size() != W.cols()) {
    throw ShapeError("matvec_transpose_add: W is " + W.shape_str() + ", y is " +
                     y.shape_str() + ", x is " + x.shape_str());
  }
  const double* w = W.begin();
  for (std::size_t i = 0; i < W.rows(); ++i) {
    const double yi = y[i];
    if (yi == 0.0) continue;
    const double* row = w + i * W.cols();
    for (std::size_t j = 0; j < W.cols(); ++j) x[j] += row[j] * yi;
  }
}

// dW += dy x^T
inline void outer_add(Tensor& dW, const Tensor& dy, const Tensor& x) {
  if (dW.rows() != dy.size() || dW.cols() != x.size()) {
    throw ShapeError("outer_add: dW is " + dW.shape_str() + ", dy is " + dy.shape_str() +
                     ", x is " + x.shape_str());
  }
  double* w = dW.begin();
  for (std::size_t i = 0; i < dW.rows(); ++i) {
    const double di = dy[i];
    if (di == 0.0) continue;
    double* row = w + i * dW.cols();
    for (std::size_t j = 0; j < dW.cols(); ++j) row[j] += di * x[j];
  }
}

inline void add_inplace(Tensor& a, const Tensor& b) {
  require_shape(a.same_shape(b), "add_inplace: " + a.shape_str() + " vs " + b.shape_str());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

inline double dot(const Tensor& a, const Tensor& b) {
  require_shape(a.size() == b.size(), "dot: " + a.shape_str() + " vs " + b.shape_str());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Tensor sigmoid(const Tensor& x) {
  Tensor y = Tensor::vector(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigmoid(x[i]);
  return y;
}

inline Tensor tanh_vec(const Tensor& x) {
  Tensor y = Tensor::vector(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
  return y;
}

inline Tensor relu(const Tensor& x) {
  Tensor y = Tensor::vector(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

// Numerically stable softmax: the max is subtracted before exponentiation, so
// the result is shift-invariant and overflow-free.
inline Tensor softmax_stable(const Tensor& s) {
  if (s.size() == 0) throw UsageError("softmax_stable: empty input");
  double m = s[0];
  for (std::size_t i = 1; i < s.size(); ++i) m = std::max(m, s[i]);
  Tensor p = Tensor::vector(s.size());
  double z = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    p[i] = std::exp(s[i] - m);
    z += p[i];
  }
  for (std::size_t i = 0; i < s.size(); ++i) p[i] /= z;
  return p;
}

// Draws index i with probability p[i]; consumes exactly one rng draw.
inline std::size_t sample_categorical(const Tensor& p, Rng& rng) {
  if (p.size() == 0) throw UsageError("sample_categorical: empty distribution");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0)) throw UsageError("sample_categorical: negative probability at " + std::to_string(i));
    sum += p[i];
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw UsageError("sample_categorical: probabilities sum to " + std::to_string(sum));
  double u = rng.next_double();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return i;
  }
  return p.size() - 1;
}

inline std::size_t argmax(const Tensor& x) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < x.size(); ++i)
    if (x[i] > x[best]) best = i;
  return best;
}

// Uniform Glorot init: a = sqrt(6 / (fan_in + fan_out)), biases stay zero.
inline void glorot_init(Tensor& t, Rng& rng) {
  double fan_in = t.rank() == 2 ? static_cast<double>(t.cols()) : static_cast<double>(t.size());
  double fan_out = t.rank() == 2 ? static_cast<double>(t.rows()) : 1.0;
  double a = std::sqrt(6.0 / (fan_in + fan_out));
  for (double& x : t.data()) x = rng.uniform(-a, a);
}

}  // namespace picknet
