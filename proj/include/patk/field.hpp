#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace patk {

/// Invalid arguments, inconsistent shapes and bad configuration values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite values, undefined metrics and other numerical breakdowns.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or truncated files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Files that cannot be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 2D real field, row-major with the first index (i, the x index) slowest.
class Image {
 public:
  Image() = default;
  Image(std::size_t nx, std::size_t ny, double value = 0.0)
      : nx_(nx), ny_(ny), data_(nx * ny, value) {}

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * ny_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * ny_ + j]; }
  double& operator[](std::size_t k) { return data_[k]; }
  double operator[](std::size_t k) const { return data_[k]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const Image& o) const { return nx_ == o.nx_ && ny_ == o.ny_; }
  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t nx_ = 0;
  std::size_t ny_ = 0;
  std::vector<double> data_;
};

/// Detector-by-time matrix of pressure samples, row s holds detector s.
class TimeSeries {
 public:
  TimeSeries() = default;
  TimeSeries(std::size_t n_det, std::size_t n_t, double value = 0.0)
      : n_det_(n_det), n_t_(n_t), data_(n_det * n_t, value) {}

  std::size_t n_det() const { return n_det_; }
  std::size_t n_t() const { return n_t_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t s, std::size_t j) { return data_[s * n_t_ + j]; }
  double operator()(std::size_t s, std::size_t j) const { return data_[s * n_t_ + j]; }
  double& operator[](std::size_t k) { return data_[k]; }
  double operator[](std::size_t k) const { return data_[k]; }

  std::span<double> row(std::size_t s) { return {data_.data() + s * n_t_, n_t_}; }
  std::span<const double> row(std::size_t s) const { return {data_.data() + s * n_t_, n_t_}; }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool same_shape(const TimeSeries& o) const { return n_det_ == o.n_det_ && n_t_ == o.n_t_; }
  friend bool operator==(const TimeSeries&, const TimeSeries&) = default;

 private:
  std::size_t n_det_ = 0;
  std::size_t n_t_ = 0;
  std::vector<double> data_;
};

/// Per-pixel forward-difference gradient (two components).
struct VectorField {
  VectorField() = default;
  VectorField(std::size_t nx, std::size_t ny) : x(nx, ny), y(nx, ny) {}

  std::size_t nx() const { return x.nx(); }
  std::size_t ny() const { return x.ny(); }

  Image x;
  Image y;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ConfigError("dot: size mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

inline bool all_finite(std::span<const double> a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

/// y += a * x
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw ConfigError("axpy: size mismatch");
  for (std::size_t k = 0; k < x.size(); ++k) y[k] += a * x[k];
}

inline double mean(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v;
  return a.empty() ? 0.0 : s / static_cast<double>(a.size());
}

}  // namespace patk
