#pragma once

#include <variant>

#include "patk/field.hpp"

namespace patk {

/// Forward differences with a zero last row / column (Neumann boundary).
VectorField grad(const Image& f);

/// Exact transpose of grad, i.e. the negative discrete divergence.
Image neg_div(const VectorField& v);

/// Isotropic total variation, sum of per-pixel gradient magnitudes.
double tv(const Image& f);

/// sum sqrt(|grad f|^2 + eps^2) - N eps. Zero on constant images and within
/// N eps of tv(f).
double tv_smoothed(const Image& f, double eps);
Image tv_smoothed_grad(const Image& f, double eps);

/// Conjugate prox of u -> 1/2 ||u - g||^2: (y - sigma g) / (1 + sigma).
TimeSeries prox_l2_dual(const TimeSeries& y, double sigma, const TimeSeries& g);

/// Pointwise projection onto the l2 ball of radius alpha.
VectorField project_dual_ball(const VectorField& v, double alpha);

struct NonNegative {};

/// mu * (mean(f) - target)^2
struct MeanPenalty {
  double mu = 1.0;
  double target = 0.0;
};

using PrimalConstraint = std::variant<NonNegative, MeanPenalty>;

/// Proximal map of tau * G for the chosen constraint / penalty G.
Image prox_primal(const Image& f, double tau, const PrimalConstraint& variant);

/// Value of the penalty part of the constraint (0 for NonNegative).
double primal_penalty(const Image& f, const PrimalConstraint& variant);

}  // namespace patk
