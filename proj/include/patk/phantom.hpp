#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "patk/field.hpp"
#include "patk/geometry.hpp"

namespace patk {

enum class PhantomKind { disks, annulus_with_inclusions, shepp_like };

PhantomKind parse_phantom_kind(const std::string& s);
std::string to_string(PhantomKind k);

/// Constant-amplitude ellipse; amplitudes of overlapping shapes add.
struct Ellipse {
  double cx = 0.0, cy = 0.0;  // m
  double a = 0.0, b = 0.0;    // semi-axes, m
  double angle = 0.0;         // rad
  double amplitude = 0.0;

  bool contains(double x, double y) const;
  double area() const { return kPi * a * b; }
};

/// Shapes of a phantom whose support lies strictly inside a disk of radius
/// 0.9 * ring_radius. Deterministic per seed.
std::vector<Ellipse> phantom_shapes(PhantomKind kind, double ring_radius, std::uint64_t seed);

/// Samples the shapes at pixel centers and clips negative values.
Image rasterize(const Grid& grid, std::span<const Ellipse> shapes);

Image make_phantom(const Grid& grid, PhantomKind kind, std::uint64_t seed, double ring_radius);

/// g + delta with i.i.d. Gaussian delta on the active rows, scaled so that
/// ||delta|| = eta ||g|| exactly. An empty mask treats every nonzero row as
/// active. eta = 0 returns g unchanged.
TimeSeries add_relative_noise(const TimeSeries& g, double eta, std::uint64_t seed,
                              std::span<const std::uint8_t> active = {});

/// ||noisy - clean|| / ||clean||
double relative_noise_level(const TimeSeries& noisy, const TimeSeries& clean);

}  // namespace patk
