#include "drmel/inference.hpp"

#include "drmel/distribution.hpp"
#include "drmel/eelib.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace drmel {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

FitResult fit_any(const Design& des, const EstimatingEquations& ees, bool cov = true) {
  if (ees.empty()) return fit_drm(des);
  FitOptions o;
  o.covariance = cov;
  return fit_drm_ee(des, ees, o);
}

}  // namespace

const char* to_string(TestKind k) {
  switch (k) {
    case TestKind::GeneralH: return "general-H";
    case TestKind::PsiFixed: return "psi-fixed";
    case TestKind::ValidityFull: return "validity-full";
    case TestKind::ValidityPartial: return "validity-partial";
    case TestKind::CdfPoint: return "cdf-point";
    case TestKind::QuantilePoint: return "quantile-point";
  }
  return "unknown";
}

double chi2_sf(double x, int df) {
  if (x <= 0.0) return 1.0;
  if (!std::isfinite(x)) return 0.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

double chi2_quantile(double prob, int df) {
  if (prob <= 0.0) return 0.0;
  return boost::math::quantile(boost::math::chi_squared(df), prob);
}

TestReport make_report(double statistic, int df, TestKind kind) {
  TestReport t;
  t.kind = kind;
  t.df = df;
  if (statistic < 0.0) {
    if (statistic < -1e-8)
      throw Error(ErrorKind::NonConvergence,
                  "negative likelihood ratio statistic; the unrestricted fit is not a maximum");
    statistic = 0.0;
    t.clamped = true;
  }
  t.statistic = statistic;
  t.p_value = chi2_sf(statistic, df);
  return t;
}

TestReport elr_test_H(const Design& des, const EstimatingEquations& ees, const Constraint& c,
                      const FitResult* full) {
  FitResult own;
  if (!full) {
    own = fit_any(des, ees, false);
    full = &own;
  }
  if (!full->converged)
    throw Error(ErrorKind::NonConvergence, "unrestricted fit: " + full->message);
  FitOptions o;
  o.init = full->eta();
  FitResult con = fit_constrained(des, ees, c, o);
  if (!con.converged) throw Error(ErrorKind::NonConvergence, "restricted fit: " + con.message);
  return make_report(2.0 * (full->loglik - con.loglik), c.q, TestKind::GeneralH);
}

double psi_profile_statistic(const Design& des, const EstimatingEquations& ees,
                             const FitResult& full, int k, double value) {
  FitOptions o;
  o.init = full.eta();
  o.init[k] = value;
  o.fixed = {k};
  o.covariance = false;
  try {
    const FitResult f = fit_drm_ee(des, ees, o);
    return std::max(0.0, 2.0 * (full.loglik - f.loglik));
  } catch (const Error&) {
    return kInf;
  }
}

Interval elr_ci_psi(const Design& des, const EstimatingEquations& ees, int k, double level,
                    const FitResult* full) {
  if (ees.p() == 0 || k < 0 || k >= ees.p())
    throw Error(ErrorKind::InvalidArgument, "no such psi coordinate");
  FitResult own;
  if (!full) {
    own = fit_any(des, ees);
    full = &own;
  }
  const double crit = chi2_quantile(level, 1);
  const double hat = full->psi[k];
  double se = full->cov_eta.rows() > k ? std::sqrt(full->cov_eta(k, k)) : 0.0;
  if (!(se > 0.0) || !std::isfinite(se)) se = 0.1 * (1.0 + std::fabs(hat));
  Interval out;
  auto natural = [&](double v) {
    Vec ps = full->psi;
    ps[k] = v;
    return ees.to_natural(ps)[k];
  };
  auto stat = [&](double v) {
    ++out.fits;
    return psi_profile_statistic(des, ees, *full, k, v);
  };
  double ends[2];
  for (int side = 0; side < 2; ++side) {
    const double sgn = side == 0 ? -1.0 : 1.0;
    double inside = hat, step = 0.5 * se, outside = hat + sgn * step;
    double r = stat(outside);
    while (r <= crit) {
      inside = outside;
      step *= 2.0;
      if (step > 50.0 * se) throw Error(ErrorKind::BracketFailure, "psi interval is unbounded");
      outside = hat + sgn * step;
      r = stat(outside);
    }
    for (int it = 0; it < 200; ++it) {
      if (std::fabs(outside - inside) < 1e-9 * (1.0 + std::fabs(hat))) break;
      const double mid = 0.5 * (inside + outside);
      r = stat(mid);
      if (r <= crit) inside = mid;
      else outside = mid;
      if (std::fabs(r - crit) < 1e-6) {
        inside = outside = mid;
        break;
      }
    }
    ends[side] = natural(0.5 * (inside + outside));
  }
  out.lower = std::min(ends[0], ends[1]);
  out.upper = std::max(ends[0], ends[1]);
  out.estimate = full->psi_natural[k];
  return out;
}

TestReport validity_test(const Design& des, const EstimatingEquations& ees,
                         const FitResult* full) {
  if (ees.r() <= ees.p()) throw Error(ErrorKind::DegenerateDf, "r must exceed p");
  FitResult own;
  if (!full) {
    own = fit_any(des, ees, false);
    full = &own;
  }
  if (!full->converged) throw Error(ErrorKind::NonConvergence, "EE fit: " + full->message);
  const FitResult dual = fit_drm(des);
  if (!dual.converged) throw Error(ErrorKind::NonConvergence, "dual fit: " + dual.message);
  return make_report(2.0 * (dual.loglik - full->loglik), ees.r() - ees.p(),
                     TestKind::ValidityFull);
}

TestReport partial_validity_test(const Design& des, const EstimatingEquations& ees, int m) {
  const auto& blocks = ees.blocks();
  int tail = 0, split = static_cast<int>(blocks.size());
  while (tail < m && split > 0) tail += blocks[--split].r;
  if (tail != m)
    throw Error(ErrorKind::InvalidArgument, "m does not match a trailing set of EE blocks");
  std::vector<int> head;
  for (int b = 0; b < split; ++b) head.push_back(b);
  const EstimatingEquations g1 = ees.subset(head);
  if (ees.r() - m < ees.p())
    throw Error(ErrorKind::InvalidArgument, "g1 must identify psi (r - m >= p)");
  const FitResult f1 = fit_any(des, g1, false);
  const FitResult f = fit_any(des, ees, false);
  if (!f1.converged || !f.converged)
    throw Error(ErrorKind::NonConvergence, !f1.converged ? "g1 fit" : "full fit");
  return make_report(2.0 * (f1.loglik - f.loglik), m, TestKind::ValidityPartial);
}

double cdf_statistic(const Design& des, const EstimatingEquations& ees, const FitResult& full,
                     int group, double x0, double zeta) {
  const EstimatingEquations aug = ees + ee::cdf_at(group, x0, zeta);
  FitOptions o;
  o.init = full.eta();
  o.covariance = false;
  try {
    const FitResult f = fit_drm_ee(des, aug, o);
    return std::max(0.0, 2.0 * (full.loglik - f.loglik));
  } catch (const Error&) {
    return kInf;
  }
}

Interval elr_ci_cdf(const Design& des, const EstimatingEquations& ees, int group, double x0,
                    double level, const FitResult* full) {
  FitResult own;
  if (!full) {
    own = fit_any(des, ees, false);
    full = &own;
  }
  const double crit = chi2_quantile(level, 1);
  Interval out;
  out.estimate = cdf_estimate(des, *full, group, x0);
  const double z = out.estimate;
  if (z <= 1e-12 || z >= 1.0 - 1e-12) {
    out.lower = out.upper = std::clamp(z, 0.0, 1.0);
    return out;
  }
  auto stat = [&](double v) {
    ++out.fits;
    return cdf_statistic(des, ees, *full, group, x0, v);
  };
  auto solve = [&](double inside, double outside) {
    for (int it = 0; it < 200 && std::fabs(outside - inside) > 1e-9; ++it) {
      const double mid = 0.5 * (inside + outside);
      if (stat(mid) <= crit) inside = mid;
      else outside = mid;
    }
    return 0.5 * (inside + outside);
  };
  out.lower = solve(z, 0.0);
  out.upper = solve(z, 1.0);
  return out;
}

double quantile_statistic(const Design& des, const EstimatingEquations& ees,
                          const FitResult& full, int group, double tau, double xi) {
  return cdf_statistic(des, ees, full, group, xi, tau);
}

Interval elr_ci_quantile(const Design& des, const EstimatingEquations& ees, int group,
                         double tau, double level, const FitResult* full, ScanMode mode) {
  FitResult own;
  if (!full) {
    own = fit_any(des, ees, false);
    full = &own;
  }
  const double crit = chi2_quantile(level, 1);
  std::vector<double> all = des.data.column(0);
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  // at the largest value the indicator is identically 1: never feasible
  const std::vector<double> cand(all.begin(), all.end() - 1);
  Interval out;
  out.estimate = quantile_estimate(des, *full, group, tau);
  const int m = static_cast<int>(cand.size());
  std::vector<double> memo(m, -1.0);
  auto stat = [&](int i) {
    if (memo[i] < 0.0) {
      ++out.fits;
      memo[i] = quantile_statistic(des, ees, *full, group, tau, cand[i]);
    }
    return memo[i];
  };
  int lo = -1, hi = -1;
  const int ihat = static_cast<int>(std::lower_bound(cand.begin(), cand.end(), out.estimate) -
                                    cand.begin());
  if (mode == ScanMode::Outward && ihat < m && stat(ihat) <= crit) {
    // largest inside index above ihat, smallest below, assuming one crossing per side
    int a = ihat, b = m - 1;
    if (stat(b) <= crit) a = b;
    while (b - a > 1) {
      const int mid = (a + b) / 2;
      (stat(mid) <= crit ? a : b) = mid;
    }
    hi = a;
    a = ihat;
    b = 0;
    if (stat(b) <= crit) a = b;
    while (a - b > 1) {
      const int mid = (a + b) / 2;
      (stat(mid) <= crit ? a : b) = mid;
    }
    lo = a;
  } else {
    for (int i = 0; i < m; ++i) {
      if (stat(i) <= crit) {
        if (lo < 0) lo = i;
        hi = i;
      }
    }
  }
  if (lo < 0) throw Error(ErrorKind::EmptyInterval, "no order statistic inside the region");
  // R_n2 is constant on [x_(i), x_(i+1)), so the region's supremum is the next value
  out.lower = all[lo];
  out.upper = all[hi + 1];
  return out;
}

KsResult ks_uniform(std::vector<double> u) {
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    d = std::max(d, (i + 1) / n - u[i]);
    d = std::max(d, u[i] - i / n);
  }
  const double sn = std::sqrt(n);
  const double t = (sn + 0.12 + 0.11 / sn) * d;
  double p = 0.0;
  if (t < 0.2) {
    p = 1.0;
  } else {
    for (int j = 1; j <= 100; ++j) {
      const double term = std::exp(-2.0 * j * j * t * t);
      p += (j % 2 ? 2.0 : -2.0) * term;
      if (term < 1e-16) break;
    }
  }
  return {d, std::clamp(p, 0.0, 1.0)};
}

}  // namespace drmel
