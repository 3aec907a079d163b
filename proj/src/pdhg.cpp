#include "patk/pdhg.hpp"

#include <cmath>
#include <limits>

namespace patk {

void PdhgConfig::validate() const {
  if (alpha < 0.0) throw ConfigError("pdhg: alpha must be non-negative");
  if (!(tol > 0.0)) throw ConfigError("pdhg: tol must be positive");
  if (max_iter < 1) throw ConfigError("pdhg: max_iter must be >= 1");
  if (!(step_ratio > 0.0)) throw ConfigError("pdhg: step_ratio must be positive");
  if (record_metrics_every < 1) throw ConfigError("pdhg: record_metrics_every must be >= 1");
  if (norm_safety < 1.0) throw ConfigError("pdhg: norm_safety must be >= 1");
  if (const auto* p = std::get_if<MeanPenalty>(&variant); p && p->mu < 0.0)
    throw ConfigError("pdhg: mean penalty weight must be non-negative");
}

double objective(const Image& f, const TimeSeries& g, const ForwardOperator& op, double alpha) {
  TimeSeries r = op.forward(f);
  if (!r.same_shape(g)) throw ConfigError("objective: data shape mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < r.size(); ++k) {
    const double d = r[k] - g[k];
    s += d * d;
  }
  return 0.5 * s + alpha * tv(f);
}

PdhgResult pdhg_solve(const TimeSeries& g, const ForwardOperator& op, const PdhgConfig& config,
                      const std::optional<Image>& gt) {
  config.validate();
  const auto nx = static_cast<std::size_t>(op.grid().nx), ny = static_cast<std::size_t>(op.grid().ny);
  if (g.n_det() != op.ring().n_total() || g.n_t() != static_cast<std::size_t>(op.time_axis().n_t))
    throw ConfigError("pdhg: data shape does not match the operator");
  if (gt && (gt->nx() != nx || gt->ny() != ny)) throw ConfigError("pdhg: ground truth shape mismatch");

  PdhgResult out;
  out.norm = std::sqrt(op.composite_norm_sq()) * config.norm_safety;
  out.tau = config.step_ratio / out.norm;
  out.sigma = 1.0 / (config.step_ratio * out.norm);
  const double tau = out.tau, sigma = out.sigma;

  // Inactive rows carry no information; the dual of the data term only
  // sees active detectors.
  TimeSeries data = g;
  for (std::size_t s = 0; s < data.n_det(); ++s)
    if (!op.ring().active[s])
      for (auto& v : data.row(s)) v = 0.0;

  Image f(nx, ny), f_bar(nx, ny), f_prev(nx, ny);
  TimeSeries y(g.n_det(), g.n_t());
  VectorField v(nx, ny);
  Image average(nx, ny);
  const std::optional<RoiMask> full = gt ? std::optional<RoiMask>(RoiMask::full(*gt)) : std::nullopt;
  auto& rec = out.record;
  // A f and A f_prev; A f_bar follows by linearity.
  TimeSeries af(g.n_det(), g.n_t()), af_prev(g.n_det(), g.n_t());
  const double tv_weight = config.alpha;

  for (int k = 1; k <= config.max_iter; ++k) {
    // Dual ascent on both blocks of K = [A; grad].
    TimeSeries dual = y;
    for (std::size_t q = 0; q < y.size(); ++q) dual[q] += sigma * (2.0 * af[q] - af_prev[q]);
    y = prox_l2_dual(dual, sigma, data);

    VectorField gf = grad(f_bar);
    for (std::size_t q = 0; q < gf.x.size(); ++q) {
      gf.x[q] = v.x[q] + sigma * gf.x[q];
      gf.y[q] = v.y[q] + sigma * gf.y[q];
    }
    v = project_dual_ball(gf, config.alpha);

    // Primal descent.
    Image kty = op.adjoint(y);
    const Image div = neg_div(v);
    f_prev = f;
    Image step = f;
    for (std::size_t q = 0; q < step.size(); ++q) step[q] -= tau * (kty[q] + div[q]);
    f = prox_primal(step, tau, config.variant);
    for (std::size_t q = 0; q < f.size(); ++q) f_bar[q] = 2.0 * f[q] - f_prev[q];

    if (!all_finite(f.values())) throw NumericalError("pdhg: iterate became non-finite");

    double diff = 0.0;
    for (std::size_t q = 0; q < f.size(); ++q) diff += (f[q] - f_prev[q]) * (f[q] - f_prev[q]);
    const double nf = norm2(f.values());
    const double change = nf > 0.0 ? std::sqrt(diff) / nf : std::numeric_limits<double>::quiet_NaN();

    af_prev = std::move(af);
    af = op.forward(f);
    double misfit = 0.0;
    for (std::size_t q = 0; q < af.size(); ++q) misfit += (af[q] - data[q]) * (af[q] - data[q]);
    rec.objective.push_back(0.5 * misfit + tv_weight * tv(f) + primal_penalty(f, config.variant));
    rec.rel_change.push_back(change);
    if (config.track_ergodic) {
      const double w = 1.0 / k;
      for (std::size_t q = 0; q < f.size(); ++q) average[q] += w * (f[q] - average[q]);
      rec.ergodic_objective.push_back(objective(average, data, op, config.alpha) +
                                      primal_penalty(average, config.variant));
    }
    if (full) {
      const bool due = (k - 1) % config.record_metrics_every == 0;
      rec.psnr.push_back(due ? psnr(f, *gt, *full) : std::numeric_limits<double>::quiet_NaN());
      rec.ssim.push_back(due ? ssim(f, *gt, *full) : std::numeric_limits<double>::quiet_NaN());
    }
    rec.iterations_run = k;
    if (nf > 0.0 && change <= config.tol) {
      rec.converged = true;
      break;
    }
  }
  out.image = std::move(f);
  return out;
}

}  // namespace patk
