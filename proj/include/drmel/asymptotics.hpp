#pragma once

#include "drmel/estimation.hpp"

namespace drmel {

struct AsymptoticMatrices {
  Mat A_tt, A_tu, A_pu, A_uu;
  Mat U, V, J, Jinv, W;
  Vec C;
  double lambda_star = 0.0;
  double v_condition = 0.0;
  double j_condition = 0.0;
  double orthogonality = 0.0;  // max |U V^{-1} C|
  int p = 0, r = 0, dq = 0;
};

// E0 is replaced by the weighted sum over the pooled sample.
AsymptoticMatrices estimate_matrices(const Design& des, const EstimatingEquations& ees,
                                     const Vec& psi, const Vec& theta,
                                     const Vec& weights);

// A_tt^{-1} - e e'/(lambda*(1-lambda*)): the EE-free covariance of sqrt(n) theta.
Mat drm_theta_covariance(const Design& des, const Vec& theta, const Vec& weights);

struct CdfInfluence {
  Vec B0_theta, B0_u, B1_theta, B1_u;
};

CdfInfluence cdf_influence(const Design& des, const EstimatingEquations& ees,
                           const FitResult& fit, double x);

// Sigma_ls(x, y): covariance of sqrt(n)(F_l(x), F_s(y)).
Mat cdf_covariance(const Design& des, const EstimatingEquations& ees,
                   const FitResult& fit, const AsymptoticMatrices& mats, int l, int s,
                   double x, double y);

// Closed form valid when r = p (including r = 0).
Mat cdf_covariance_reduced(const Design& des, const FitResult& fit, int l, int s,
                           double x, double y);

// Gaussian kernel density of F_i-hat at t, Silverman bandwidth.
double density_estimate(const Design& des, const FitResult& fit, int group, double t);

Mat quantile_covariance(const Design& des, const EstimatingEquations& ees,
                        const FitResult& fit, const AsymptoticMatrices& mats, int l,
                        int s, double xi_l, double xi_s, double f_l, double f_s);

}  // namespace drmel
