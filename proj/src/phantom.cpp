#include "patk/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace patk {
namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * std::generate_canonical<double, 53>(rng);
}

std::vector<Ellipse> disks(double support, std::mt19937_64& rng) {
  std::vector<Ellipse> out;
  const int target = 3 + static_cast<int>(rng() % 4);
  for (int attempt = 0; attempt < 2000 && static_cast<int>(out.size()) < target; ++attempt) {
    const double r = uniform(rng, 0.12, 0.3) * support;
    const double rho = (support - r) * std::sqrt(uniform(rng, 0.0, 0.98));
    const double phi = uniform(rng, 0.0, 2.0 * kPi);
    Ellipse e{rho * std::cos(phi), rho * std::sin(phi), r, r, 0.0, uniform(rng, 0.3, 1.0)};
    const bool clear = std::none_of(out.begin(), out.end(), [&](const Ellipse& o) {
      return std::hypot(o.cx - e.cx, o.cy - e.cy) < o.a + e.a + 0.05 * support;
    });
    if (clear) out.push_back(e);
  }
  return out;
}

std::vector<Ellipse> annulus(double support, std::mt19937_64& rng) {
  const double outer = 0.85 * support, inner = 0.65 * support;
  const double level = uniform(rng, 0.3, 0.5);
  std::vector<Ellipse> out{{0, 0, outer, outer, 0, level}, {0, 0, inner, inner, 0, -level}};
  const int target = 2 + static_cast<int>(rng() % 3);
  std::vector<Ellipse> inc;
  for (int attempt = 0; attempt < 2000 && static_cast<int>(inc.size()) < target; ++attempt) {
    const double r = uniform(rng, 0.1, 0.22) * support;
    const double rho = (inner - r - 0.03 * support) * std::sqrt(uniform(rng, 0.0, 1.0));
    const double phi = uniform(rng, 0.0, 2.0 * kPi);
    Ellipse e{rho * std::cos(phi), rho * std::sin(phi), r, r, 0.0, uniform(rng, 0.6, 1.0)};
    const bool clear = std::none_of(inc.begin(), inc.end(), [&](const Ellipse& o) {
      return std::hypot(o.cx - e.cx, o.cy - e.cy) < o.a + e.a + 0.04 * support;
    });
    if (clear) inc.push_back(e);
  }
  out.insert(out.end(), inc.begin(), inc.end());
  return out;
}

std::vector<Ellipse> shepp(double support, std::mt19937_64& rng) {
  // Modified Shepp-Logan table: amplitude, a, b, x0, y0, angle (deg).
  static constexpr double table[10][6] = {
      {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},        {-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0},
      {-0.2, 0.11, 0.31, 0.22, 0.0, -18.0},    {-0.2, 0.16, 0.41, -0.22, 0.0, 18.0},
      {0.1, 0.21, 0.25, 0.0, 0.35, 0.0},       {0.1, 0.046, 0.046, 0.0, 0.1, 0.0},
      {0.1, 0.046, 0.046, 0.0, -0.1, 0.0},     {0.1, 0.046, 0.023, -0.08, -0.605, 0.0},
      {0.1, 0.023, 0.023, 0.0, -0.606, 0.0},   {0.1, 0.023, 0.046, 0.06, -0.605, 0.0},
  };
  const double s = 0.95 * support;
  std::vector<Ellipse> out;
  for (const auto& row : table) {
    const double jitter = row[0] > 0.0 && std::abs(row[0]) < 1.0 ? uniform(rng, 0.8, 1.2) : 1.0;
    out.push_back({row[3] * s, row[4] * s, row[1] * s, row[2] * s, deg2rad(row[5]), row[0] * jitter});
  }
  return out;
}

}  // namespace

PhantomKind parse_phantom_kind(const std::string& s) {
  if (s == "disks") return PhantomKind::disks;
  if (s == "annulus_with_inclusions") return PhantomKind::annulus_with_inclusions;
  if (s == "shepp_like") return PhantomKind::shepp_like;
  throw ConfigError("unknown phantom kind '" + s + "'");
}

std::string to_string(PhantomKind k) {
  switch (k) {
    case PhantomKind::disks: return "disks";
    case PhantomKind::annulus_with_inclusions: return "annulus_with_inclusions";
    case PhantomKind::shepp_like: return "shepp_like";
  }
  return "disks";
}

bool Ellipse::contains(double x, double y) const {
  const double c = std::cos(angle), s = std::sin(angle);
  const double u = (x - cx) * c + (y - cy) * s;
  const double v = -(x - cx) * s + (y - cy) * c;
  return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
}

std::vector<Ellipse> phantom_shapes(PhantomKind kind, double ring_radius, std::uint64_t seed) {
  if (!(ring_radius > 0.0)) throw ConfigError("phantom: ring radius must be positive");
  std::mt19937_64 rng(seed);
  const double support = 0.9 * ring_radius;
  switch (kind) {
    case PhantomKind::disks: return disks(support, rng);
    case PhantomKind::annulus_with_inclusions: return annulus(support, rng);
    case PhantomKind::shepp_like: return shepp(support, rng);
  }
  return {};
}

Image rasterize(const Grid& grid, std::span<const Ellipse> shapes) {
  grid.validate();
  Image f(static_cast<std::size_t>(grid.nx), static_cast<std::size_t>(grid.ny));
  for (int i = 0; i < grid.nx; ++i)
    for (int j = 0; j < grid.ny; ++j) {
      double v = 0.0;
      for (const auto& e : shapes)
        if (e.contains(grid.x_of(i), grid.y_of(j))) v += e.amplitude;
      f(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = std::max(v, 0.0);
    }
  return f;
}

Image make_phantom(const Grid& grid, PhantomKind kind, std::uint64_t seed, double ring_radius) {
  const auto shapes = phantom_shapes(kind, ring_radius, seed);
  return rasterize(grid, shapes);
}

TimeSeries add_relative_noise(const TimeSeries& g, double eta, std::uint64_t seed,
                              std::span<const std::uint8_t> active) {
  if (!(eta >= 0.0 && eta < 1.0)) throw ConfigError("noise level must be in [0, 1)");
  if (eta == 0.0) return g;
  if (!active.empty() && active.size() != g.n_det()) throw ConfigError("noise: active mask does not match the data");

  std::vector<bool> use(g.n_det());
  for (std::size_t s = 0; s < g.n_det(); ++s) {
    if (!active.empty()) {
      use[s] = active[s] != 0;
    } else {
      const auto row = g.row(s);
      use[s] = std::any_of(row.begin(), row.end(), [](double v) { return v != 0.0; });
    }
  }

  const double gnorm = norm2(g.values());
  if (gnorm == 0.0) throw NumericalError("noise: relative noise on zero data is undefined");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  TimeSeries delta(g.n_det(), g.n_t());
  for (std::size_t s = 0; s < g.n_det(); ++s)
    if (use[s])
      for (auto& v : delta.row(s)) v = normal(rng);
  const double dnorm = norm2(delta.values());
  if (dnorm == 0.0) throw NumericalError("noise: no active rows to perturb");

  const double scale = eta * gnorm / dnorm;
  TimeSeries out = g;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += scale * delta[k];
  return out;
}

double relative_noise_level(const TimeSeries& noisy, const TimeSeries& clean) {
  if (!noisy.same_shape(clean)) throw ConfigError("noise level: shape mismatch");
  double d = 0.0;
  for (std::size_t k = 0; k < noisy.size(); ++k) d += (noisy[k] - clean[k]) * (noisy[k] - clean[k]);
  const double n = norm2(clean.values());
  if (n == 0.0) throw NumericalError("noise level: zero reference data");
  return std::sqrt(d) / n;
}

}  // namespace patk
