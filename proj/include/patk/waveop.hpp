#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "patk/field.hpp"
#include "patk/geometry.hpp"

namespace patk {

/// Bilinear sampling weights of one detector on the padded grid.
struct Stencil {
  std::array<std::size_t, 4> index{};  // flat padded-grid indices
  std::array<double, 4> weight{};      // non-negative, sum to one
};

/// Forward operator of the constant-sound-speed wave problem with a
/// circular detector array.
///
/// The initial pressure is zero-padded by Grid::pad_factor and propagated
/// exactly on the periodic padded domain with the spectral multiplier
/// cos(c |k| t_j). Detector traces are bilinear samples of the propagated
/// field; inactive detectors read zero. adjoint() is the exact transpose of
/// forward() under the Euclidean inner products.
///
/// Immutable after construction and safe to share between threads. Copies
/// share the precomputed tables.
class ForwardOperator {
 public:
  /// Throws ConfigError if c*T exceeds the no-wraparound travel bound of the
  /// padded domain or a detector leaves the grid interior.
  ForwardOperator(const Grid& grid, const DetectorRing& ring, const TimeAxis& time);

  const Grid& grid() const;
  const DetectorRing& ring() const;
  const TimeAxis& time_axis() const;
  std::size_t padded_nx() const;
  std::size_t padded_ny() const;
  const std::vector<Stencil>& stencils() const;

  /// Zero-embeds f in the center of the padded domain.
  Image pad(const Image& f) const;
  /// Inverse of pad(): extracts the central nx x ny block.
  Image crop(const Image& padded) const;

  /// Padded field at time t_j.
  Image propagate(const Image& f, int j) const;

  /// Spectral multiplier cos(c |k| t_j) at padded frequency index (kx, ky),
  /// 0 <= ky <= padded_ny / 2.
  double multiplier(std::size_t kx, std::size_t ky, int j) const;

  TimeSeries forward(const Image& f) const;
  Image adjoint(const TimeSeries& g) const;

  /// Largest eigenvalue of A*A (power iteration, cached).
  double normal_norm_sq() const;
  /// Largest eigenvalue of A*A + grad* grad (power iteration, cached).
  double composite_norm_sq() const;

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

/// Applies x -> M x for a symmetric positive semidefinite M.
using NormalOperator = std::function<void(std::span<const double>, std::span<double>)>;

struct PowerIteration {
  double eigenvalue = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Power iteration from a seeded random start. Stops when the Rayleigh
/// quotient changes by at most rel_tol (relative) or after max_iter steps.
PowerIteration power_iteration(std::size_t n, const NormalOperator& normal, std::uint64_t seed = 0x5eedULL,
                               double rel_tol = 1e-6, int max_iter = 200);

struct OperatorNorm {
  double value = 0.0;  // sqrt of the largest eigenvalue
  int iterations = 0;
  bool converged = false;
};

/// ||A|| or, with composite_with_gradient, ||[A; grad]||.
OperatorNorm operator_norm(const ForwardOperator& op, bool composite_with_gradient);

enum class InverseMode { normalized_adjoint, time_reversal };

/// Initial reconstruction used to seed DIP.
///
/// normalized_adjoint: A*g / ||A||^2.
/// time_reversal: back-propagates the traces weighted by c t_j (the 2D
/// spreading compensation) and rescales to the least-squares amplitude.
Image approximate_inverse(const TimeSeries& g, const ForwardOperator& op,
                          InverseMode mode = InverseMode::normalized_adjoint);

/// Data generated on a finer grid for use with the coarse operator. The
/// operators must share ring, time axis and physical extent; the fine grid
/// must be an integer multiple (>= 2) of the coarse one.
TimeSeries simulate_data(const Image& f_fine, const ForwardOperator& fine_op, const ForwardOperator& coarse_op);

/// Cell average onto the grid factor times coarser with the same centering
/// (coarse pixel i sits on fine pixel factor * i); pixels beyond the image
/// count as zero.
Image downsample(const Image& fine, int factor);

}  // namespace patk
