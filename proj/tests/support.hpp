#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>

#include "patk/field.hpp"

namespace patk::test {

inline Image random_image(std::size_t nx, std::size_t ny, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Image f(nx, ny);
  for (auto& v : f.values()) v = u(rng);
  return f;
}

inline TimeSeries random_series(std::size_t n_det, std::size_t n_t, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  TimeSeries g(n_det, n_t);
  for (auto& v : g.values()) v = u(rng);
  return g;
}

/// ||a - b|| / ||b||
inline double rel_err(std::span<const double> a, std::span<const double> b) {
  double d = 0.0, n = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    d += (a[k] - b[k]) * (a[k] - b[k]);
    n += b[k] * b[k];
  }
  return std::sqrt(d / n);
}

/// Largest |a - b| / max(|b|, floor) over the components.
inline double max_rel_err(std::span<const double> a, std::span<const double> b, double floor) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]) / std::max(std::abs(b[k]), floor));
  return m;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("patk_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace patk::test
