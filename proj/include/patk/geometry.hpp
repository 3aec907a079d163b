#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace patk {

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Cartesian reconstruction grid. Pixel (i, j) sits at
/// ((i - nx/2) dx, (j - ny/2) dy), so the grid is centered on the origin.
struct Grid {
  int nx = 128;
  int ny = 128;
  double dx = 1e-4;     // m
  double c = 1500.0;    // m/s
  int pad_factor = 2;   // zero-padding multiple of the propagation domain

  /// Throws ConfigError when an invariant is violated.
  void validate() const;

  double x_of(int i) const { return (i - nx / 2) * dx; }
  double y_of(int j) const { return (j - ny / 2) * dx; }

  /// Largest radius at which a bilinear stencil stays inside the grid.
  double interior_radius() const;

  /// Longest travel distance c*T the zero-padded domain admits without
  /// periodic wraparound.
  double max_travel() const;

  friend bool operator==(const Grid&, const Grid&) = default;
};

/// Circular detector array with a contiguous active arc.
struct DetectorRing {
  double radius = 0.0;
  double device_arc = 0.0;  // rad, total arc covered by all n_total elements
  double arc_center = 0.0;  // rad
  std::vector<double> element_angles;  // rad, counterclockwise order
  std::vector<std::uint8_t> active;

  std::size_t n_total() const { return element_angles.size(); }
  std::size_t n_active() const;
  double pitch() const { return device_arc / static_cast<double>(n_total()); }

  /// Angular coverage of the active elements, n_active * pitch, in degrees.
  double coverage_deg() const;

  friend bool operator==(const DetectorRing&, const DetectorRing&) = default;
};

struct TimeAxis {
  int n_t = 2;
  double dt = 1.0;

  double duration() const { return (n_t - 1) * dt; }
  double time(int j) const { return j * dt; }
  void validate() const;

  friend bool operator==(const TimeAxis&, const TimeAxis&) = default;
};

/// Builds a ring of n_total elements evenly spaced over device_arc_deg and
/// centered on arc_center_deg. Element k sits at
/// arc_center + (k - (n_total - 1) / 2) * pitch. All elements start active.
DetectorRing make_ring(double radius, int n_total, double device_arc_deg, double arc_center_deg);

/// Keeps n_active contiguous elements centered on the arc center. When
/// n_total - n_active is odd, the run is shifted one element
/// counterclockwise. `offset` moves the run by whole elements
/// (positive = counterclockwise). Always derived from the full ring, so
/// nested subsampling equals direct subsampling.
DetectorRing subsample_arc(const DetectorRing& ring, int n_active, int offset = 0);

/// (x, y) of every element (active or not). Throws ConfigError when an
/// element falls outside the grid interior.
std::vector<std::pair<double, double>> detector_positions(const DetectorRing& ring, const Grid& grid);

/// Boundary sampling default: dt = dx / (2c) and the smallest n_t with
/// c*T >= 2 * ring radius (every source-detector path inside the ring).
TimeAxis default_time_axis(const Grid& grid, const DetectorRing& ring);

}  // namespace patk
