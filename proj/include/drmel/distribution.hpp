#pragma once

#include "drmel/inference.hpp"

#include <string>
#include <vector>

namespace drmel {

// F-hat_0 puts mass p_k on x_k; F-hat_1 puts mass p_k omega_k.
Vec cdf_masses(const Design& des, const FitResult& fit, int group);
double cdf_estimate(const Design& des, const FitResult& fit, int group, double x);
double quantile_estimate(const Design& des, const FitResult& fit, int group, double tau);

// inf{x : sum of masses at points <= x >= tau}; ties accumulate.
double weighted_quantile(const std::vector<double>& x, const std::vector<double>& w,
                         double tau);
// Type-1 sample quantile.
double empirical_quantile(std::vector<double> x, double tau);

// One-sample EL for a mean: log of the EL ratio at mu (-inf outside the hull).
// `w` receives the EL weights when non-null.
double el_mean_logratio(const std::vector<double>& x, double mu,
                        std::vector<double>* w = nullptr);

// Two-sample EL under a common mean, profiled over the mean.
struct CommonMeanEL {
  double mu = 0.0;
  double logratio = 0.0;
  std::vector<double> w0, w1;
};
CommonMeanEL common_mean_el(const std::vector<double>& x0, const std::vector<double>& x1);

// Mean ratio mu1/mu0 from two independent samples.
Interval emp_el_ratio_ci(const std::vector<double>& x0, const std::vector<double>& x1,
                         double level);
Interval emp_na_ratio_ci(const std::vector<double>& x0, const std::vector<double>& x1,
                         double level);

// One-sample ELR interval for a quantile; endpoints are sample values, the
// upper one being the supremum of the region.
Interval emp_quantile_ci(const std::vector<double>& x, double tau, double level);

struct EstimatorRow {
  std::string method;  // EMP, EL, DRM, DRM-EE
  int group = 0;
  double tau = 0.0;
  double estimate = 0.0;
  bool has_ci = false;
  Interval ci;
};

std::vector<EstimatorRow> compare_estimators(const TwoSampleData& data,
                                             const DrmBasis& basis,
                                             const EstimatingEquations& ees,
                                             const std::vector<double>& taus,
                                             double level, bool with_ci);

}  // namespace drmel
