#pragma once

#include "drmel/estimation.hpp"

#include <string>
#include <vector>

namespace drmel {

enum class TestKind { GeneralH, PsiFixed, ValidityFull, ValidityPartial, CdfPoint, QuantilePoint };
const char* to_string(TestKind k);

struct TestReport {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  TestKind kind = TestKind::GeneralH;
  bool clamped = false;  // a slightly negative statistic was set to 0
};

// Upper tail and quantile of chi-square with df degrees of freedom.
double chi2_sf(double x, int df);
double chi2_quantile(double prob, int df);

// Builds a report from 2 * (loglik difference), clamping values in (-1e-8, 0).
TestReport make_report(double statistic, int df, TestKind kind);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  double estimate = 0.0;
  int fits = 0;
  double length() const { return upper - lower; }
};

// R_n for H(eta) = 0. `full` may hold a converged unconstrained fit.
TestReport elr_test_H(const Design& des, const EstimatingEquations& ees,
                      const Constraint& c, const FitResult* full = nullptr);

// R*_n(psi_k = value), all other coordinates profiled. `value` is on the
// internal scale of psi_k.
double psi_profile_statistic(const Design& des, const EstimatingEquations& ees,
                             const FitResult& full, int k, double value);

// Interval for psi_k on the natural scale.
Interval elr_ci_psi(const Design& des, const EstimatingEquations& ees, int k,
                    double level, const FitResult* full = nullptr);

// W_n = 2{l_nd(theta~) - l_n(psi^, theta^)}, df = r - p.
TestReport validity_test(const Design& des, const EstimatingEquations& ees,
                         const FitResult* full = nullptr);

// Tests the trailing blocks of `ees` holding m equations; the remaining
// blocks form g1.
TestReport partial_validity_test(const Design& des, const EstimatingEquations& ees,
                                 int m);

// R_n1(zeta) for F_group(x0) = zeta.
double cdf_statistic(const Design& des, const EstimatingEquations& ees,
                     const FitResult& full, int group, double x0, double zeta);
Interval elr_ci_cdf(const Design& des, const EstimatingEquations& ees, int group,
                    double x0, double level, const FitResult* full = nullptr);

// R_n2(xi) for the tau-quantile of F_group at xi.
double quantile_statistic(const Design& des, const EstimatingEquations& ees,
                          const FitResult& full, int group, double tau, double xi);

enum class ScanMode { Full, Outward };

// Candidates are pooled order statistics; the upper end is the next order
// statistic after the last candidate inside the region. Full evaluates every candidate;
// Outward bisects over candidate indices on each side of the estimate.
Interval elr_ci_quantile(const Design& des, const EstimatingEquations& ees, int group,
                         double tau, double level, const FitResult* full = nullptr,
                         ScanMode mode = ScanMode::Full);

// One-sample Kolmogorov-Smirnov test against U(0,1).
struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};
KsResult ks_uniform(std::vector<double> u);

}  // namespace drmel
