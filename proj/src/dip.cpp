#include "patk/dip.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "patk/iqa.hpp"
#include "patk/variational.hpp"

namespace patk {

void DipConfig::validate() const {
  if (lambda < 0.0) throw ConfigError("dip: lambda must be non-negative");
  if (!(lr0 > 0.0)) throw ConfigError("dip: lr0 must be positive");
  if (max_iter < 1) throw ConfigError("dip: max_iter must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("dip: Adam betas must be in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("dip: adam_eps must be positive");
  if (burn_in < 0 || burn_in >= max_iter) throw ConfigError("dip: burn_in must be in [0, max_iter)");
  if (record_metrics_every < 1) throw ConfigError("dip: record_metrics_every must be >= 1");
  if (mean_penalty && mean_penalty->mu < 0.0) throw ConfigError("dip: mean penalty weight must be non-negative");
}

double cosine_lr(int t, int T, double lr0) {
  if (T < 1 || t < 0 || t > T) throw ConfigError("cosine_lr: iteration out of range");
  if (t == T) return 0.0;
  return lr0 * 0.5 * (1.0 + std::cos(kPi * static_cast<double>(t) / static_cast<double>(T)));
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr, double beta1,
               double beta2, double eps) {
  if (params.size() != grads.size()) throw ConfigError("adam_step: size mismatch");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
    state.step = 0;
  }
  if (state.m.size() != params.size()) throw ConfigError("adam_step: state does not match parameters");
  ++state.step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    state.m[k] = beta1 * state.m[k] + (1.0 - beta1) * grads[k];
    state.v[k] = beta2 * state.v[k] + (1.0 - beta2) * grads[k] * grads[k];
    const double mhat = state.m[k] / c1;
    const double vhat = state.v[k] / c2;
    params[k] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

DipLossTerms resolve_loss_terms(const DipConfig& config, const Image& z) {
  DipLossTerms t;
  t.lambda = config.lambda;
  if (config.tv_eps > 0.0) {
    t.tv_eps = config.tv_eps;
  } else {
    const auto [lo, hi] = std::minmax_element(z.values().begin(), z.values().end());
    const double range = z.empty() ? 0.0 : *hi - *lo;
    t.tv_eps = 1e-6 * (range > 0.0 ? range : 1.0);
  }
  if (config.mean_penalty) {
    t.mean_mu = config.mean_penalty->mu;
    t.mean_target = config.mean_penalty->target.value_or(mean(z.values()));
  }
  return t;
}

DipLossParts dip_loss_of(const Image& output, const TimeSeries& g, const ForwardOperator& op,
                         const DipLossTerms& terms) {
  const TimeSeries a = op.forward(output);
  if (!a.same_shape(g)) throw ConfigError("dip: data shape mismatch");
  DipLossParts p;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double r = a[k] - g[k];
    p.data += r * r;
  }
  if (terms.lambda > 0.0) p.tv = terms.lambda * tv_smoothed(output, terms.tv_eps);
  if (terms.mean_mu > 0.0) {
    const double d = mean(output.values()) - terms.mean_target;
    p.mean = terms.mean_mu * d * d;
  }
  return p;
}

namespace {

Image upstream_from_residual(const Image& output, TimeSeries residual, const ForwardOperator& op,
                             const DipLossTerms& terms) {
  for (auto& v : residual.values()) v *= 2.0;
  Image u = op.adjoint(residual);
  if (terms.lambda > 0.0) axpy(terms.lambda, tv_smoothed_grad(output, terms.tv_eps).values(), u.values());
  if (terms.mean_mu > 0.0) {
    const double n = static_cast<double>(output.size());
    const double c = 2.0 * terms.mean_mu * (mean(output.values()) - terms.mean_target) / n;
    for (auto& v : u.values()) v += c;
  }
  return u;
}

TimeSeries residual_of(const Image& output, const TimeSeries& g, const ForwardOperator& op) {
  TimeSeries r = op.forward(output);
  if (!r.same_shape(g)) throw ConfigError("dip: data shape mismatch");
  for (std::size_t k = 0; k < r.size(); ++k) r[k] -= g[k];
  return r;
}

}  // namespace

Image dip_upstream(const Image& output, const TimeSeries& g, const ForwardOperator& op, const DipLossTerms& terms) {
  return upstream_from_residual(output, residual_of(output, g, op), op, terms);
}

double dip_loss(const NetworkParams& params, const UNetConfig& unet, const Image& z, const TimeSeries& g,
                const ForwardOperator& op, const DipConfig& config) {
  return dip_loss_of(unet_forward(params, unet, z), g, op, resolve_loss_terms(config, z)).total();
}

std::vector<double> dip_loss_grad(const NetworkParams& params, const UNetConfig& unet, const Image& z,
                                  const TimeSeries& g, const ForwardOperator& op, const DipConfig& config) {
  const UNetPass pass(params, unet, z);
  const Image u = dip_upstream(pass.output(), g, op, resolve_loss_terms(config, z));
  return pass.vjp(u).params;
}

std::size_t select_iterate(const RunRecord& history, Selection mode, int burn_in) {
  const std::size_t n = history.objective.size();
  if (n == 0) throw ConfigError("select_iterate: empty history");
  if (mode == Selection::fixed_cutoff) return n - 1;
  if (history.psnr.size() != n) throw ConfigError("select_iterate: PSNR selection needs a ground-truth PSNR history");
  const std::size_t first = mode == Selection::converged_psnr ? static_cast<std::size_t>(std::max(burn_in, 0)) : 0;
  if (first >= n) throw ConfigError("select_iterate: burn-in discards the whole history");
  std::size_t best = first;
  for (std::size_t k = first; k < n; ++k)
    if (history.psnr[k] > history.psnr[best] || std::isnan(history.psnr[best])) best = k;
  return best;
}

DipResult dip_reconstruct(const TimeSeries& g, const Image& z, const ForwardOperator& op, const DipConfig& config,
                          const UNetConfig& unet, const std::optional<Image>& gt) {
  config.validate();
  if (config.selection != Selection::fixed_cutoff && !gt)
    throw ConfigError("dip: PSNR-based selection requires a ground truth");
  if (gt && !gt->same_shape(z)) throw ConfigError("dip: ground truth shape mismatch");

  const DipLossTerms terms = resolve_loss_terms(config, z);
  NetworkParams params = unet_init(unet, z.nx(), z.ny());
  AdamState adam;
  const std::optional<RoiMask> full = gt ? std::optional<RoiMask>(RoiMask::full(*gt)) : std::nullopt;
  const auto burn_in = static_cast<std::size_t>(config.burn_in);

  DipResult res;
  auto& rec = res.record;
  double best_all = -std::numeric_limits<double>::infinity();
  double best_late = best_all;

  for (int t = 0; t <= config.max_iter; ++t) {
    const UNetPass pass(params, unet, z);
    const Image& phi = pass.output();
    const TimeSeries r = residual_of(phi, g, op);

    DipLossParts parts;
    for (double v : r.values()) parts.data += v * v;
    if (terms.lambda > 0.0) parts.tv = terms.lambda * tv_smoothed(phi, terms.tv_eps);
    if (terms.mean_mu > 0.0) {
      const double d = mean(phi.values()) - terms.mean_target;
      parts.mean = terms.mean_mu * d * d;
    }
    if (!std::isfinite(parts.total())) throw NumericalError("dip: loss became non-finite");
    rec.objective.push_back(parts.total());
    rec.rel_change.push_back(std::numeric_limits<double>::quiet_NaN());
    res.data_residual.push_back(std::sqrt(parts.data));

    const auto idx = static_cast<std::size_t>(t);
    if (full) {
      // PSNR is needed every iteration for selection; SSIM follows the
      // recording stride.
      const double p = psnr(phi, *gt, *full);
      rec.psnr.push_back(p);
      const bool due = t % config.record_metrics_every == 0 || t == config.max_iter;
      rec.ssim.push_back(due ? ssim(phi, *gt, *full) : std::numeric_limits<double>::quiet_NaN());
      if (p > best_all) {
        best_all = p;
        res.early_stop = phi;
        res.early_index = idx;
      }
      if (idx >= burn_in && p > best_late) {
        best_late = p;
        res.converged = phi;
        res.converged_index = idx;
      }
    }
    if (t == config.max_iter) {
      res.cutoff = phi;
      break;
    }

    const Image u = upstream_from_residual(phi, r, op, terms);
    const std::vector<double> grads = pass.vjp(u).params;
    adam_step(params.values, grads, adam, cosine_lr(t, config.max_iter, config.lr0), config.beta1, config.beta2,
              config.adam_eps);
  }

  rec.iterations_run = config.max_iter;
  res.selected = select_iterate(rec, config.selection, config.burn_in);
  switch (config.selection) {
    case Selection::early_stop_psnr: res.image = *res.early_stop; break;
    case Selection::converged_psnr: res.image = *res.converged; break;
    case Selection::fixed_cutoff: res.image = res.cutoff; break;
  }
  res.final_params = std::move(params);
  return res;
}

}  // namespace patk
