#pragma once

#include "drmel/model.hpp"

#include <string>
#include <vector>

namespace drmel::ee {

// delta*x - x*omega; psi = delta.
EstimatingEquations mean_ratio(int col = 0);

// z - kappa*mu on covariate column `col`.
EstimatingEquations aux_mean(int col, double mu, double kappa = 1.0);

// I(a_{l-1} < y <= a_l) [pi/(1-pi) omega - phi_l/(1-phi_l)], psi = pi (logit).
EstimatingEquations prevalence_bins(const std::vector<double>& breaks,
                                    const std::vector<double>& phis, int col = 0);

// External logistic model h(y) = expit(gamma0 + gamma'y) on columns `ycols`.
EstimatingEquations external_logistic_prospective(const std::vector<double>& gamma,
                                                  const std::vector<int>& ycols);
EstimatingEquations external_logistic_retrospective(const std::vector<double>& gamma,
                                                    const std::vector<int>& ycols,
                                                    double pi_e);

// x*omega - x.
EstimatingEquations common_mean(int col = 0);

// psi = (mu0, mu1, var0, var1).
EstimatingEquations moments(int col = 0);

// psi = (mu0, mu1, GE0, GE1) for the generalized entropy index of order xi.
EstimatingEquations entropy_ge(double xi, int col = 0);

// psi = (zeta0, zeta1) = (F0(x0), F1(x1)).
EstimatingEquations cdf_points(double x0, double x1, int col = 0);

// No free parameter: I(x <= xi0) - tau0 and omega I(x <= xi1) - tau1.
EstimatingEquations quantile_points(double tau0, double xi0, double tau1,
                                    double xi1, int col = 0);

// Single-group pieces used by ELR intervals. group 0: I(x<=t) - level,
// group 1: omega I(x<=t) - level.
EstimatingEquations cdf_at(int group, double t, double level, int col = 0);

// Parses "name(key=value,...)+name(...)". Empty string or "none" gives r = 0.
EstimatingEquations parse(const std::string& spec);

}  // namespace drmel::ee
