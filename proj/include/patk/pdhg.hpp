#pragma once

#include <optional>
#include <vector>

#include "patk/field.hpp"
#include "patk/iqa.hpp"
#include "patk/variational.hpp"
#include "patk/waveop.hpp"

namespace patk {

/// Per-iteration history of an iterative reconstruction.
struct RunRecord {
  std::vector<double> objective;
  std::vector<double> rel_change;  // NaN where undefined
  std::vector<double> psnr;        // empty without ground truth
  std::vector<double> ssim;        // empty without ground truth
  std::vector<double> ergodic_objective;  // PDHG only, when tracked
  int iterations_run = 0;
  bool converged = false;
};

struct PdhgConfig {
  double alpha = 1e-3;
  int max_iter = 1000;
  double tol = 1e-4;
  double step_ratio = 1.0;  // tau / sigma
  PrimalConstraint variant = NonNegative{};
  int record_metrics_every = 1;
  bool track_ergodic = false;
  /// Multiplier on the power-iteration operator norm; keeps tau sigma L^2 < 1.
  double norm_safety = 1.01;

  void validate() const;
};

/// 1/2 ||A f - g||^2 + alpha TV(f)
double objective(const Image& f, const TimeSeries& g, const ForwardOperator& op, double alpha);

struct PdhgResult {
  Image image;
  RunRecord record;
  double tau = 0.0;
  double sigma = 0.0;
  double norm = 0.0;  // ||[A; grad]|| after the safety factor
};

/// Chambolle-Pock iterations for min_f 1/2 ||A f - g||^2 + alpha TV(f) + G(f),
/// G the non-negativity constraint or the mean-intensity penalty. Starts
/// from zero primal and dual variables, over-relaxation 1. Stops once
/// ||f_k - f_{k-1}|| / ||f_k|| <= tol or at max_iter (converged = false).
PdhgResult pdhg_solve(const TimeSeries& g, const ForwardOperator& op, const PdhgConfig& config,
                      const std::optional<Image>& gt = std::nullopt);

}  // namespace patk
