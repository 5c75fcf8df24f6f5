#pragma once

#include "drmel/likelihood.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

namespace drmel {

struct FitResult {
  Vec psi;          // internal scale
  Vec psi_natural;  // reported scale
  Vec theta;
  MultiplierPoint multipliers;
  Vec weights;
  double loglik = 0.0;
  Mat cov_eta;  // J^{-1}/n on the internal scale; empty if not requested
  bool converged = false;
  int iterations = 0;
  double grad_norm = 0.0;
  double residual = 0.0;
  int clamped = 0;
  std::string message;

  Vec eta() const;
};

struct FitOptions {
  Vec init;                // full eta = (psi, theta) on the internal scale
  std::vector<int> fixed;  // coordinates of eta held at their init values
  Vec u0;                  // multiplier warm start
  double gtol = 1e-7;
  int max_iter = 500;
  bool covariance = true;
};

// Dual MELE: maximizes the EE-free dual likelihood by Newton's method.
FitResult fit_drm(const Design& des);

// Profile MELE with estimating equations (BFGS on eta).
FitResult fit_drm_ee(const Design& des, const EstimatingEquations& ees,
                     const FitOptions& opt = {});

// Best converged fit over `starts` starting points: the default one and
// random perturbations of it.
FitResult fit_multistart(const Design& des, const EstimatingEquations& ees, int starts,
                         std::uint64_t seed = 1, const FitOptions& opt = {});

// Default starting point: dual MELE for theta, psi fitted to the weighted
// equations at that theta.
Vec default_init(const Design& des, const EstimatingEquations& ees,
                 const FitResult& dual);

struct Constraint {
  int q = 0;
  std::function<Vec(const Vec& eta)> H;
  std::function<Mat(const Vec& eta)> jac;  // optional, q x dim(eta)
  bool linear = false;
};

// Maximizes the profile log-EL subject to H(eta) = 0 by Newton steps on the
// Lagrangian system.
FitResult fit_constrained(const Design& des, const EstimatingEquations& ees,
                          const Constraint& c, const FitOptions& opt = {});

// Weighted F-hat pieces used by several modules.
void fill_fit(const Design& des, const EstimatingEquations& ees, FitResult& fit,
              bool covariance);

}  // namespace drmel
