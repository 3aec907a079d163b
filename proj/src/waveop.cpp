#include "patk/waveop.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <string>

#include "patk/parallel.hpp"
#include "patk/variational.hpp"

namespace patk {
namespace {

// FFTW's planner is not thread-safe; execution with new-array calls is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

template <typename T>
struct FftwFree {
  void operator()(T* p) const { fftw_free(p); }
};

template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwFree<T>>;

FftwBuffer<double> alloc_real(std::size_t n) {
  return FftwBuffer<double>(fftw_alloc_real(n));
}

FftwBuffer<fftw_complex> alloc_complex(std::size_t n) {
  return FftwBuffer<fftw_complex>(fftw_alloc_complex(n));
}

// Time samples per adjoint reduction block. Fixed so that the summation
// order does not depend on the thread count.
constexpr std::size_t kTimeBlock = 8;

// Precomputed multiplier tables above this size are replaced by on-the-fly
// evaluation of the same expression.
constexpr std::size_t kMaxTableBytes = std::size_t{256} << 20;

std::uint64_t splitmix(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

struct ForwardOperator::Impl {
  Grid grid;
  DetectorRing ring;
  TimeAxis time;
  std::size_t px = 0, py = 0;    // padded sizes
  std::size_t ox = 0, oy = 0;    // embedding offsets
  std::size_t nspec = 0;         // px * (py / 2 + 1)
  std::vector<double> ck;        // c |k| per spectral index
  std::vector<double> table;     // cos(c|k|t_j) / N, empty if too large
  std::vector<Stencil> stencils;
  std::vector<std::size_t> active_rows;
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
  // Separable pieces for the per-time-step transforms: detectors only touch
  // the padded rows in node_rows, so the row transforms skip all others.
  std::vector<std::size_t> node_rows;
  fftw_plan col_bwd = nullptr;  // in place, along the first axis, every column
  fftw_plan col_fwd = nullptr;  // out of place, same layout
  fftw_plan row_c2r = nullptr;  // one row
  fftw_plan row_r2c = nullptr;

  std::once_flag normal_once, composite_once;
  double normal_sq = 0.0, composite_sq = 0.0;

  ~Impl() {
    std::lock_guard lock(planner_mutex());
    for (fftw_plan p : {r2c, c2r, col_bwd, col_fwd, row_c2r, row_r2c})
      if (p) fftw_destroy_plan(p);
  }

  double scale() const { return 1.0 / static_cast<double>(px * py); }

  // Fills m[k] = cos(c|k|t_j) / N.
  void multipliers(int j, std::span<double> m) const {
    if (!table.empty()) {
      std::copy_n(table.begin() + static_cast<std::ptrdiff_t>(j * nspec), nspec, m.begin());
      return;
    }
    const double t = time.time(j), s = scale();
    for (std::size_t k = 0; k < nspec; ++k) m[k] = std::cos(ck[k] * t) * s;
  }

  // `padded` must come from fftw_alloc so its alignment matches the plan.
  void spectrum(double* padded, fftw_complex* out) const { fftw_execute_dft_r2c(r2c, padded, out); }

  void pad_into(const Image& f, double* buf) const {
    if (f.nx() != static_cast<std::size_t>(grid.nx) || f.ny() != static_cast<std::size_t>(grid.ny))
      throw ConfigError("image does not match the operator grid");
    std::fill_n(buf, px * py, 0.0);
    for (std::size_t i = 0; i < f.nx(); ++i) std::copy_n(f.data() + i * f.ny(), f.ny(), buf + (i + ox) * py + oy);
  }
};

ForwardOperator::ForwardOperator(const Grid& grid, const DetectorRing& ring, const TimeAxis& time)
    : impl_(std::make_shared<Impl>()) {
  grid.validate();
  time.validate();
  if (ring.n_total() == 0) throw ConfigError("forward operator: empty detector ring");
  const double travel = grid.c * time.duration();
  if (travel > grid.max_travel() * (1.0 + 1e-12))
    throw ConfigError("forward operator: c*T = " + std::to_string(travel) +
                      " m exceeds the no-wraparound bound " + std::to_string(grid.max_travel()) +
                      " m; raise pad_factor or shorten the time axis");

  auto& d = *impl_;
  d.grid = grid;
  d.ring = ring;
  d.time = time;
  d.px = static_cast<std::size_t>(grid.pad_factor * grid.nx);
  d.py = static_cast<std::size_t>(grid.pad_factor * grid.ny);
  d.ox = (d.px - static_cast<std::size_t>(grid.nx)) / 2;
  d.oy = (d.py - static_cast<std::size_t>(grid.ny)) / 2;
  const std::size_t nyh = d.py / 2 + 1;
  d.nspec = d.px * nyh;

  const double dkx = 2.0 * kPi / (static_cast<double>(d.px) * grid.dx);
  const double dky = 2.0 * kPi / (static_cast<double>(d.py) * grid.dx);
  d.ck.resize(d.nspec);
  for (std::size_t ix = 0; ix < d.px; ++ix) {
    const double mx = ix < d.px / 2 ? static_cast<double>(ix) : static_cast<double>(ix) - static_cast<double>(d.px);
    for (std::size_t iy = 0; iy < nyh; ++iy) {
      const double kx = mx * dkx, ky = static_cast<double>(iy) * dky;
      d.ck[ix * nyh + iy] = grid.c * std::sqrt(kx * kx + ky * ky);
    }
  }

  const auto n_t = static_cast<std::size_t>(time.n_t);
  if (n_t * d.nspec * sizeof(double) <= kMaxTableBytes) {
    d.table.resize(n_t * d.nspec);
    const double s = d.scale();
    for (std::size_t j = 0; j < n_t; ++j) {
      const double t = time.time(static_cast<int>(j));
      for (std::size_t k = 0; k < d.nspec; ++k) d.table[j * d.nspec + k] = std::cos(d.ck[k] * t) * s;
    }
  }

  const auto pos = detector_positions(ring, grid);
  d.stencils.resize(pos.size());
  for (std::size_t s = 0; s < pos.size(); ++s) {
    const double fx = pos[s].first / grid.dx + static_cast<double>(d.px) / 2.0;
    const double fy = pos[s].second / grid.dx + static_cast<double>(d.py) / 2.0;
    const double ix0 = std::floor(fx), iy0 = std::floor(fy);
    const double wx = fx - ix0, wy = fy - iy0;
    const auto i0 = static_cast<std::size_t>(ix0), j0 = static_cast<std::size_t>(iy0);
    Stencil& st = d.stencils[s];
    st.index = {i0 * d.py + j0, (i0 + 1) * d.py + j0, i0 * d.py + j0 + 1, (i0 + 1) * d.py + j0 + 1};
    st.weight = {(1 - wx) * (1 - wy), wx * (1 - wy), (1 - wx) * wy, wx * wy};
    if (ring.active[s]) {
      d.active_rows.push_back(s);
      d.node_rows.push_back(i0);
      d.node_rows.push_back(i0 + 1);
    }
  }
  std::sort(d.node_rows.begin(), d.node_rows.end());
  d.node_rows.erase(std::unique(d.node_rows.begin(), d.node_rows.end()), d.node_rows.end());

  std::lock_guard lock(planner_mutex());
  auto in = alloc_real(d.px * d.py);
  auto out = alloc_complex(d.nspec);
  const int n0 = static_cast<int>(d.px), n1 = static_cast<int>(d.py);
  d.r2c = fftw_plan_dft_r2c_2d(n0, n1, in.get(), out.get(), FFTW_ESTIMATE);
  d.c2r = fftw_plan_dft_c2r_2d(n0, n1, out.get(), in.get(), FFTW_ESTIMATE);
  auto out2 = alloc_complex(d.nspec);
  const int cols = static_cast<int>(nyh);
  d.col_bwd = fftw_plan_many_dft(1, &n0, cols, out.get(), nullptr, cols, 1, out.get(), nullptr, cols, 1, FFTW_BACKWARD,
                                 FFTW_ESTIMATE);
  d.col_fwd = fftw_plan_many_dft(1, &n0, cols, out.get(), nullptr, cols, 1, out2.get(), nullptr, cols, 1, FFTW_FORWARD,
                                 FFTW_ESTIMATE);
  d.row_c2r = fftw_plan_dft_c2r_1d(n1, out.get(), in.get(), FFTW_ESTIMATE | FFTW_UNALIGNED);
  d.row_r2c = fftw_plan_dft_r2c_1d(n1, in.get(), out.get(), FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!d.r2c || !d.c2r || !d.col_bwd || !d.col_fwd || !d.row_c2r || !d.row_r2c)
    throw NumericalError("forward operator: FFTW planning failed");
}

const Grid& ForwardOperator::grid() const { return impl_->grid; }
const DetectorRing& ForwardOperator::ring() const { return impl_->ring; }
const TimeAxis& ForwardOperator::time_axis() const { return impl_->time; }
std::size_t ForwardOperator::padded_nx() const { return impl_->px; }
std::size_t ForwardOperator::padded_ny() const { return impl_->py; }
const std::vector<Stencil>& ForwardOperator::stencils() const { return impl_->stencils; }

Image ForwardOperator::pad(const Image& f) const {
  const auto& d = *impl_;
  Image p(d.px, d.py);
  d.pad_into(f, p.data());
  return p;
}

Image ForwardOperator::crop(const Image& padded) const {
  const auto& d = *impl_;
  if (padded.nx() != d.px || padded.ny() != d.py) throw ConfigError("crop: not a padded field");
  Image f(static_cast<std::size_t>(d.grid.nx), static_cast<std::size_t>(d.grid.ny));
  for (std::size_t i = 0; i < f.nx(); ++i)
    std::copy_n(padded.data() + (i + d.ox) * d.py + d.oy, f.ny(), f.data() + i * f.ny());
  return f;
}

double ForwardOperator::multiplier(std::size_t kx, std::size_t ky, int j) const {
  const auto& d = *impl_;
  if (kx >= d.px || ky > d.py / 2 || j < 0 || j >= d.time.n_t) throw ConfigError("multiplier: index out of range");
  return std::cos(d.ck[kx * (d.py / 2 + 1) + ky] * d.time.time(j));
}

Image ForwardOperator::propagate(const Image& f, int j) const {
  const auto& d = *impl_;
  if (j < 0 || j >= d.time.n_t) throw ConfigError("propagate: time index out of range");
  auto spec = alloc_complex(d.nspec);
  auto field = alloc_real(d.px * d.py);
  std::vector<double> m(d.nspec);
  d.pad_into(f, field.get());
  d.spectrum(field.get(), spec.get());
  d.multipliers(j, m);
  for (std::size_t k = 0; k < d.nspec; ++k) {
    spec[k][0] *= m[k];
    spec[k][1] *= m[k];
  }
  fftw_execute_dft_c2r(d.c2r, spec.get(), field.get());
  Image out(d.px, d.py);
  std::copy_n(field.get(), d.px * d.py, out.data());
  return out;
}

TimeSeries ForwardOperator::forward(const Image& f) const {
  const auto& d = *impl_;
  if (!all_finite(f.values())) throw NumericalError("forward: non-finite input");
  const std::size_t n_t = static_cast<std::size_t>(d.time.n_t);
  TimeSeries g(d.ring.n_total(), n_t);
  if (d.active_rows.empty()) return g;

  auto fhat = alloc_complex(d.nspec);
  {
    auto p = alloc_real(d.px * d.py);
    d.pad_into(f, p.get());
    d.spectrum(p.get(), fhat.get());
  }

  const std::size_t nyh = d.py / 2 + 1;
  const std::size_t n_blocks = (n_t + kTimeBlock - 1) / kTimeBlock;
  parallel_for(n_blocks, [&](std::size_t b) {
    auto spec = alloc_complex(d.nspec);
    auto field = alloc_real(d.px * d.py);
    std::vector<double> m(d.nspec);
    for (std::size_t j = b * kTimeBlock; j < std::min(n_t, (b + 1) * kTimeBlock); ++j) {
      d.multipliers(static_cast<int>(j), m);
      for (std::size_t k = 0; k < d.nspec; ++k) {
        spec[k][0] = fhat[k][0] * m[k];
        spec[k][1] = fhat[k][1] * m[k];
      }
      fftw_execute_dft(d.col_bwd, spec.get(), spec.get());
      for (std::size_t r : d.node_rows) fftw_execute_dft_c2r(d.row_c2r, spec.get() + r * nyh, field.get() + r * d.py);
      for (std::size_t s : d.active_rows) {
        const Stencil& st = d.stencils[s];
        double v = 0.0;
        for (int q = 0; q < 4; ++q) v += st.weight[q] * field[st.index[q]];
        g(s, j) = v;
      }
    }
  });
  return g;
}

Image ForwardOperator::adjoint(const TimeSeries& g) const {
  const auto& d = *impl_;
  const std::size_t n_t = static_cast<std::size_t>(d.time.n_t);
  if (g.n_det() != d.ring.n_total() || g.n_t() != n_t)
    throw ConfigError("adjoint: time series shape does not match the operator");
  if (!all_finite(g.values())) throw NumericalError("adjoint: non-finite input");
  if (d.active_rows.empty()) return Image(static_cast<std::size_t>(d.grid.nx), static_cast<std::size_t>(d.grid.ny));

  const std::size_t n_blocks = (n_t + kTimeBlock - 1) / kTimeBlock;
  const std::size_t nyh = d.py / 2 + 1;
  std::vector<std::vector<std::complex<double>>> partial(n_blocks);
  parallel_for(n_blocks, [&](std::size_t b) {
    auto spread = alloc_real(d.px * d.py);
    auto rows = alloc_complex(d.nspec);  // row transforms; rows without nodes stay zero
    std::fill_n(&rows[0][0], 2 * d.nspec, 0.0);
    auto spec = alloc_complex(d.nspec);
    std::vector<double> m(d.nspec);
    auto& acc = partial[b];
    acc.assign(d.nspec, {0.0, 0.0});
    std::fill_n(spread.get(), d.px * d.py, 0.0);
    for (std::size_t j = b * kTimeBlock; j < std::min(n_t, (b + 1) * kTimeBlock); ++j) {
      for (std::size_t s : d.active_rows) {
        const Stencil& st = d.stencils[s];
        for (int q = 0; q < 4; ++q) spread[st.index[q]] += st.weight[q] * g(s, j);
      }
      for (std::size_t r : d.node_rows) fftw_execute_dft_r2c(d.row_r2c, spread.get() + r * d.py, rows.get() + r * nyh);
      fftw_execute_dft(d.col_fwd, rows.get(), spec.get());
      for (std::size_t s : d.active_rows)
        for (std::size_t q : d.stencils[s].index) spread[q] = 0.0;
      d.multipliers(static_cast<int>(j), m);
      for (std::size_t k = 0; k < d.nspec; ++k) acc[k] += m[k] * std::complex<double>(spec[k][0], spec[k][1]);
    }
  });

  auto total = alloc_complex(d.nspec);
  for (std::size_t k = 0; k < d.nspec; ++k) {
    std::complex<double> s{0.0, 0.0};
    for (const auto& acc : partial) s += acc[k];
    total[k][0] = s.real();
    total[k][1] = s.imag();
  }
  auto field = alloc_real(d.px * d.py);
  fftw_execute_dft_c2r(d.c2r, total.get(), field.get());
  Image padded(d.px, d.py);
  std::copy_n(field.get(), d.px * d.py, padded.data());
  return crop(padded);
}

double ForwardOperator::normal_norm_sq() const {
  auto& d = *impl_;
  std::call_once(d.normal_once, [&] { d.normal_sq = operator_norm(*this, false).value; });
  return d.normal_sq * d.normal_sq;
}

double ForwardOperator::composite_norm_sq() const {
  auto& d = *impl_;
  std::call_once(d.composite_once, [&] { d.composite_sq = operator_norm(*this, true).value; });
  return d.composite_sq * d.composite_sq;
}

PowerIteration power_iteration(std::size_t n, const NormalOperator& normal, std::uint64_t seed, double rel_tol,
                               int max_iter) {
  if (n == 0) throw ConfigError("power_iteration: empty domain");
  std::vector<double> x(n), y(n);
  std::uint64_t state = seed;
  for (auto& v : x) v = static_cast<double>(splitmix(state) >> 11) * 0x1.0p-53 + 0.5;

  PowerIteration result;
  double nrm = norm2(x);
  for (auto& v : x) v /= nrm;
  double previous = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    normal(x, y);
    const double rayleigh = dot(x, y);
    result.eigenvalue = rayleigh;
    result.iterations = it;
    nrm = norm2(y);
    if (nrm == 0.0) {
      result.converged = true;
      break;
    }
    if (it > 1 && std::abs(rayleigh - previous) <= rel_tol * std::abs(rayleigh)) {
      result.converged = true;
      break;
    }
    previous = rayleigh;
    for (std::size_t k = 0; k < n; ++k) x[k] = y[k] / nrm;
  }
  return result;
}

OperatorNorm operator_norm(const ForwardOperator& op, bool composite_with_gradient) {
  const auto nx = static_cast<std::size_t>(op.grid().nx), ny = static_cast<std::size_t>(op.grid().ny);
  auto normal = [&](std::span<const double> in, std::span<double> out) {
    Image f(nx, ny);
    std::copy(in.begin(), in.end(), f.values().begin());
    Image r = op.adjoint(op.forward(f));
    if (composite_with_gradient) {
      const Image t = neg_div(grad(f));
      axpy(1.0, t.values(), r.values());
    }
    std::copy(r.values().begin(), r.values().end(), out.begin());
  };
  const PowerIteration p = power_iteration(nx * ny, normal);
  return {std::sqrt(std::max(p.eigenvalue, 0.0)), p.iterations, p.converged};
}

Image approximate_inverse(const TimeSeries& g, const ForwardOperator& op, InverseMode mode) {
  if (mode == InverseMode::normalized_adjoint) {
    Image z = op.adjoint(g);
    const double rho = op.normal_norm_sq();
    if (rho > 0.0)
      for (auto& v : z.values()) v /= rho;
    return z;
  }

  const TimeAxis& t = op.time_axis();
  TimeSeries weighted = g;
  for (std::size_t s = 0; s < g.n_det(); ++s)
    for (std::size_t j = 0; j < g.n_t(); ++j) weighted(s, j) *= op.grid().c * t.time(static_cast<int>(j));
  Image z = op.adjoint(weighted);
  const TimeSeries az = op.forward(z);
  const double den = dot(az.values(), az.values());
  if (den > 0.0) {
    const double s = dot(az.values(), g.values()) / den;
    for (auto& v : z.values()) v *= s;
  }
  return z;
}

Image downsample(const Image& fine, int factor) {
  if (factor < 1 || fine.nx() % static_cast<std::size_t>(factor) || fine.ny() % static_cast<std::size_t>(factor))
    throw ConfigError("downsample: image size is not a multiple of the factor");
  // Coarse pixel i is centered on fine pixel factor * i. Its cell covers
  // factor fine pixels, split in half at both ends when factor is even.
  const int half = factor / 2;
  std::vector<double> w(static_cast<std::size_t>(2 * half + 1), 1.0 / factor);
  if (factor % 2 == 0) w.front() = w.back() = 0.5 / factor;
  const auto f = static_cast<std::size_t>(factor);
  Image out(fine.nx() / f, fine.ny() / f);
  const auto fnx = static_cast<long>(fine.nx()), fny = static_cast<long>(fine.ny());
  for (std::size_t i = 0; i < out.nx(); ++i)
    for (std::size_t j = 0; j < out.ny(); ++j) {
      double s = 0.0;
      for (int a = -half; a <= half; ++a) {
        const long fi = static_cast<long>(i * f) + a;
        if (fi < 0 || fi >= fnx) continue;
        for (int b = -half; b <= half; ++b) {
          const long fj = static_cast<long>(j * f) + b;
          if (fj < 0 || fj >= fny) continue;
          s += w[static_cast<std::size_t>(a + half)] * w[static_cast<std::size_t>(b + half)] *
               fine(static_cast<std::size_t>(fi), static_cast<std::size_t>(fj));
        }
      }
      out(i, j) = s;
    }
  return out;
}

TimeSeries simulate_data(const Image& f_fine, const ForwardOperator& fine_op, const ForwardOperator& coarse_op) {
  const Grid& fg = fine_op.grid();
  const Grid& cg = coarse_op.grid();
  if (fg.nx % cg.nx != 0 || fg.ny % cg.ny != 0 || fg.nx / cg.nx < 2 || fg.nx / cg.nx != fg.ny / cg.ny)
    throw ConfigError("simulate_data: fine grid must be an integer multiple (>= 2) of the coarse grid");
  const double rel = std::abs(fg.nx * fg.dx - cg.nx * cg.dx) / (cg.nx * cg.dx);
  if (rel > 1e-12) throw ConfigError("simulate_data: fine and coarse grids cover different extents");
  if (fg.c != cg.c) throw ConfigError("simulate_data: sound speed differs between operators");
  const DetectorRing& fr = fine_op.ring();
  const DetectorRing& cr = coarse_op.ring();
  if (fr.radius != cr.radius || fr.element_angles != cr.element_angles || fr.active != cr.active)
    throw ConfigError("simulate_data: operators use different detector rings");
  if (!(fine_op.time_axis() == coarse_op.time_axis()))
    throw ConfigError("simulate_data: operators use different time axes");
  return fine_op.forward(f_fine);
}

}  // namespace patk
