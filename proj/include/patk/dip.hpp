#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "patk/field.hpp"
#include "patk/pdhg.hpp"
#include "patk/unet.hpp"
#include "patk/waveop.hpp"

namespace patk {

enum class Selection {
  early_stop_psnr,  // global PSNR maximum
  converged_psnr,   // PSNR maximum after the burn-in
  fixed_cutoff,     // last iterate
};

/// mu * (mean(output) - target)^2; target defaults to mean(z).
struct DipMeanPenalty {
  double mu = 1.0;
  std::optional<double> target;
};

struct DipConfig {
  double lambda = 1e-3;
  double lr0 = 5e-4;
  int max_iter = 400;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double tv_eps = 0.0;  // <= 0: 1e-6 times the dynamic range of z
  std::optional<DipMeanPenalty> mean_penalty;
  Selection selection = Selection::early_stop_psnr;
  int burn_in = 40;
  int record_metrics_every = 1;

  void validate() const;
};

/// lr0 * (1 + cos(pi t / T)) / 2 for 0 <= t <= T.
double cosine_lr(int t, int T, double lr0);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

/// Resolved loss weights for one problem (tv_eps and the mean target fixed
/// from z).
struct DipLossTerms {
  double lambda = 0.0;
  double tv_eps = 1e-6;
  double mean_mu = 0.0;
  double mean_target = 0.0;
};

DipLossTerms resolve_loss_terms(const DipConfig& config, const Image& z);

struct DipLossParts {
  double data = 0.0;   // ||A phi - g||^2
  double tv = 0.0;     // lambda * smoothed TV
  double mean = 0.0;   // mean penalty
  double total() const { return data + tv + mean; }
};

/// Loss of a network output.
DipLossParts dip_loss_of(const Image& output, const TimeSeries& g, const ForwardOperator& op,
                         const DipLossTerms& terms);

/// Image-space gradient of the loss at a network output:
/// 2 A*(A phi - g) + lambda grad TV_eps(phi) + mean-penalty term.
Image dip_upstream(const Image& output, const TimeSeries& g, const ForwardOperator& op, const DipLossTerms& terms);

double dip_loss(const NetworkParams& params, const UNetConfig& unet, const Image& z, const TimeSeries& g,
                const ForwardOperator& op, const DipConfig& config);

/// Parameter gradient of dip_loss: the network pullback of dip_upstream.
std::vector<double> dip_loss_grad(const NetworkParams& params, const UNetConfig& unet, const Image& z,
                                  const TimeSeries& g, const ForwardOperator& op, const DipConfig& config);

/// Index chosen by `mode`. PSNR modes need a PSNR history.
std::size_t select_iterate(const RunRecord& history, Selection mode, int burn_in = 40);

struct DipResult {
  Image image;              // iterate chosen by DipConfig::selection
  std::size_t selected = 0;
  RunRecord record;         // entries 0..max_iter; objective = loss
  std::vector<double> data_residual;  // ||A phi - g|| per entry
  // Iterates for every mode the available information supports.
  std::optional<Image> early_stop;
  std::optional<Image> converged;
  Image cutoff;
  std::size_t early_index = 0;
  std::size_t converged_index = 0;
  NetworkParams final_params;
};

/// Optimizes the network weights with Adam and a cosine-annealed step size.
/// Entry t of the record holds the output after t updates, so entry 0 is the
/// freshly initialized network and entry max_iter the cutoff iterate.
DipResult dip_reconstruct(const TimeSeries& g, const Image& z, const ForwardOperator& op, const DipConfig& config,
                          const UNetConfig& unet, const std::optional<Image>& gt = std::nullopt);

}  // namespace patk
