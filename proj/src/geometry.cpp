#include "patk/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "patk/field.hpp"

namespace patk {

void Grid::validate() const {
  if (nx < 8 || ny < 8 || nx % 2 != 0 || ny % 2 != 0)
    throw ConfigError("grid: nx and ny must be even and >= 8");
  if (!(dx > 0.0)) throw ConfigError("grid: dx must be positive");
  if (!(c > 0.0)) throw ConfigError("grid: sound speed must be positive");
  if (pad_factor < 1 || pad_factor > 4) throw ConfigError("grid: pad_factor must be in 1..4");
}

double Grid::interior_radius() const {
  // The bilinear stencil at x needs floor(x/dx) + 1 <= n/2 - 1 on the
  // positive side; the negative side is less restrictive.
  return (std::min(nx, ny) / 2 - 1) * dx;
}

double Grid::max_travel() const {
  const double extent = std::min(nx, ny) * dx;
  return (pad_factor - 1) * extent / 2.0 + extent / 2.0;
}

void TimeAxis::validate() const {
  if (n_t < 2) throw ConfigError("time axis: n_t must be >= 2");
  if (!(dt > 0.0)) throw ConfigError("time axis: dt must be positive");
}

std::size_t DetectorRing::n_active() const {
  return static_cast<std::size_t>(std::count(active.begin(), active.end(), std::uint8_t{1}));
}

double DetectorRing::coverage_deg() const {
  return static_cast<double>(n_active()) * rad2deg(device_arc) / static_cast<double>(n_total());
}

DetectorRing make_ring(double radius, int n_total, double device_arc_deg, double arc_center_deg) {
  if (!(radius > 0.0)) throw ConfigError("make_ring: radius must be positive");
  if (!(device_arc_deg > 0.0) || device_arc_deg > 360.0)
    throw ConfigError("make_ring: device arc must be in (0, 360] degrees");
  if (n_total < 4) throw ConfigError("make_ring: need at least 4 elements");

  DetectorRing ring;
  ring.radius = radius;
  ring.device_arc = deg2rad(device_arc_deg);
  ring.arc_center = deg2rad(arc_center_deg);
  ring.element_angles.resize(static_cast<std::size_t>(n_total));
  ring.active.assign(static_cast<std::size_t>(n_total), 1);
  const double pitch = device_arc_deg / n_total;
  const double half = (n_total - 1) / 2.0;
  for (int k = 0; k < n_total; ++k)
    ring.element_angles[static_cast<std::size_t>(k)] = deg2rad(arc_center_deg + (k - half) * pitch);
  return ring;
}

DetectorRing subsample_arc(const DetectorRing& ring, int n_active, int offset) {
  const int n_total = static_cast<int>(ring.n_total());
  if (n_active < 1 || n_active > n_total)
    throw ConfigError("subsample_arc: n_active must be in [1, " + std::to_string(n_total) + "]");
  const int spare = n_total - n_active;
  const int start = (spare + 1) / 2 + offset;
  if (start < 0 || start + n_active > n_total)
    throw ConfigError("subsample_arc: offset moves the active run off the ring");

  DetectorRing out = ring;
  std::fill(out.active.begin(), out.active.end(), std::uint8_t{0});
  std::fill(out.active.begin() + start, out.active.begin() + start + n_active, std::uint8_t{1});
  return out;
}

std::vector<std::pair<double, double>> detector_positions(const DetectorRing& ring, const Grid& grid) {
  grid.validate();
  if (ring.radius >= grid.interior_radius())
    throw ConfigError("detector ring radius " + std::to_string(ring.radius) +
                      " m exceeds the grid interior (" + std::to_string(grid.interior_radius()) + " m)");
  std::vector<std::pair<double, double>> pos;
  pos.reserve(ring.n_total());
  for (double a : ring.element_angles) pos.emplace_back(ring.radius * std::cos(a), ring.radius * std::sin(a));
  return pos;
}

TimeAxis default_time_axis(const Grid& grid, const DetectorRing& ring) {
  grid.validate();
  TimeAxis t;
  t.dt = grid.dx / (2.0 * grid.c);
  t.n_t = static_cast<int>(std::ceil(2.0 * ring.radius / (grid.c * t.dt))) + 1;
  return t;
}

}  // namespace patk
