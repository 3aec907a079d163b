#include "patk/variational.hpp"

#include <algorithm>
#include <cmath>

namespace patk {

VectorField grad(const Image& f) {
  const std::size_t nx = f.nx(), ny = f.ny();
  VectorField v(nx, ny);
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j) {
      if (i + 1 < nx) v.x(i, j) = f(i + 1, j) - f(i, j);
      if (j + 1 < ny) v.y(i, j) = f(i, j + 1) - f(i, j);
    }
  return v;
}

Image neg_div(const VectorField& v) {
  const std::size_t nx = v.nx(), ny = v.ny();
  Image out(nx, ny);
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j) {
      double s = 0.0;
      if (i + 1 < nx) s -= v.x(i, j);
      if (i > 0) s += v.x(i - 1, j);
      if (j + 1 < ny) s -= v.y(i, j);
      if (j > 0) s += v.y(i, j - 1);
      out(i, j) = s;
    }
  return out;
}

double tv(const Image& f) {
  const VectorField g = grad(f);
  double s = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) s += std::hypot(g.x[k], g.y[k]);
  return s;
}

double tv_smoothed(const Image& f, double eps) {
  if (!(eps > 0.0)) throw ConfigError("tv_smoothed: eps must be positive");
  const VectorField g = grad(f);
  double s = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k)
    s += std::sqrt(g.x[k] * g.x[k] + g.y[k] * g.y[k] + eps * eps) - eps;
  return s;
}

Image tv_smoothed_grad(const Image& f, double eps) {
  if (!(eps > 0.0)) throw ConfigError("tv_smoothed_grad: eps must be positive");
  VectorField g = grad(f);
  for (std::size_t k = 0; k < f.size(); ++k) {
    const double r = std::sqrt(g.x[k] * g.x[k] + g.y[k] * g.y[k] + eps * eps);
    g.x[k] /= r;
    g.y[k] /= r;
  }
  return neg_div(g);
}

TimeSeries prox_l2_dual(const TimeSeries& y, double sigma, const TimeSeries& g) {
  if (!(sigma > 0.0)) throw ConfigError("prox_l2_dual: sigma must be positive");
  if (!y.same_shape(g)) throw ConfigError("prox_l2_dual: shape mismatch");
  TimeSeries out(y.n_det(), y.n_t());
  const double inv = 1.0 / (1.0 + sigma);
  for (std::size_t k = 0; k < y.size(); ++k) out[k] = (y[k] - sigma * g[k]) * inv;
  return out;
}

VectorField project_dual_ball(const VectorField& v, double alpha) {
  if (alpha < 0.0) throw ConfigError("project_dual_ball: alpha must be non-negative");
  VectorField out = v;
  for (std::size_t k = 0; k < v.x.size(); ++k) {
    const double n = std::hypot(v.x[k], v.y[k]);
    if (n > alpha) {
      const double s = alpha / n;
      out.x[k] *= s;
      out.y[k] *= s;
    }
  }
  return out;
}

Image prox_primal(const Image& f, double tau, const PrimalConstraint& variant) {
  if (!(tau > 0.0)) throw ConfigError("prox_primal: tau must be positive");
  if (std::holds_alternative<NonNegative>(variant)) {
    Image out = f;
    for (auto& v : out.values()) v = std::max(v, 0.0);
    return out;
  }
  const auto& p = std::get<MeanPenalty>(variant);
  if (p.mu < 0.0) throw ConfigError("prox_primal: mean penalty weight must be non-negative");
  // Only the constant component moves: minimize N/2 c^2 + tau mu (m + c - m0)^2.
  const double n = static_cast<double>(f.size());
  const double m = mean(f.values());
  const double w = 2.0 * tau * p.mu;
  const double shifted = (n * m + w * p.target) / (n + w);
  Image out = f;
  for (auto& v : out.values()) v += shifted - m;
  return out;
}

double primal_penalty(const Image& f, const PrimalConstraint& variant) {
  if (const auto* p = std::get_if<MeanPenalty>(&variant)) {
    const double d = mean(f.values()) - p->target;
    return p->mu * d * d;
  }
  return 0.0;
}

}  // namespace patk
