#include "drmel/distribution.hpp"

#include "drmel/eelib.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace drmel {

Vec cdf_masses(const Design& des, const FitResult& fit, int group) {
  if (group == 0) return fit.weights;
  Vec omega;
  tilt(des, fit.theta, omega);
  return fit.weights.cwiseProduct(omega);
}

double cdf_estimate(const Design& des, const FitResult& fit, int group, double x) {
  const Vec m = cdf_masses(des, fit, group);
  double s = 0.0;
  for (int k = 0; k < des.n; ++k)
    if (des.data.x(k) <= x) s += m[k];
  return s;
}

double weighted_quantile(const std::vector<double>& x, const std::vector<double>& w,
                         double tau) {
  std::vector<int> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return x[a] < x[b]; });
  double s = 0.0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    s += w[idx[i]];
    const bool last_of_tie = i + 1 == idx.size() || x[idx[i + 1]] > x[idx[i]];
    if (last_of_tie && s >= tau - 1e-12) return x[idx[i]];
  }
  return x[idx.back()];
}

double quantile_estimate(const Design& des, const FitResult& fit, int group, double tau) {
  const Vec m = cdf_masses(des, fit, group);
  return weighted_quantile(des.data.column(0), std::vector<double>(m.data(), m.data() + m.size()),
                           tau);
}

double empirical_quantile(std::vector<double> x, double tau) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  std::size_t k = static_cast<std::size_t>(std::ceil(n * tau - 1e-12));
  k = std::clamp<std::size_t>(k, 1, x.size());
  return x[k - 1];
}

double el_mean_logratio(const std::vector<double>& x, double mu, std::vector<double>* w) {
  const int n = static_cast<int>(x.size());
  double zmin = std::numeric_limits<double>::infinity(), zmax = -zmin;
  for (double v : x) {
    zmin = std::min(zmin, v - mu);
    zmax = std::max(zmax, v - mu);
  }
  if (!(zmin < 0.0 && zmax > 0.0)) return -std::numeric_limits<double>::infinity();
  // t solves sum z/(1+tz) = 0 on (-1/zmax, -1/zmin); the sum is decreasing in t
  double lo = -1.0 / zmax, hi = -1.0 / zmin;
  const double shrink = 1e-12 * (hi - lo);
  lo += shrink;
  hi -= shrink;
  auto score = [&](double t, double& d) {
    double s = 0.0;
    d = 0.0;
    for (double v : x) {
      const double z = v - mu, den = 1.0 + t * z;
      s += z / den;
      d -= z * z / (den * den);
    }
    return s;
  };
  double t = 0.0;
  for (int it = 0; it < 200; ++it) {
    double d;
    const double s = score(t, d);
    if (s > 0) lo = t;
    else hi = t;
    if (std::fabs(s) < 1e-12 * n) break;
    double tn = t - s / d;
    if (!(tn > lo && tn < hi)) tn = 0.5 * (lo + hi);
    if (std::fabs(tn - t) < 1e-15 * (1.0 + std::fabs(t))) {
      t = tn;
      break;
    }
    t = tn;
  }
  double lr = 0.0;
  if (w) w->resize(n);
  for (int i = 0; i < n; ++i) {
    const double den = 1.0 + t * (x[i] - mu);
    lr -= std::log(den);
    if (w) (*w)[i] = 1.0 / (n * den);
  }
  return lr;
}

namespace {

std::pair<double, double> range_of(const std::vector<double>& x) {
  const auto [a, b] = std::minmax_element(x.begin(), x.end());
  return {*a, *b};
}

double mean_of(const std::vector<double>& x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

// max over mu0 of the two-sample log EL ratio with mu1 = delta mu0.
double ratio_profile(const std::vector<double>& x0, const std::vector<double>& x1,
                     double delta) {
  const auto [a0, b0] = range_of(x0);
  const auto [a1, b1] = range_of(x1);
  const double lo = std::max(a0, a1 / delta), hi = std::min(b0, b1 / delta);
  if (!(lo < hi)) return -std::numeric_limits<double>::infinity();
  auto f = [&](double m) { return -(el_mean_logratio(x0, m) + el_mean_logratio(x1, delta * m)); };
  const double eps = 1e-10 * (hi - lo);
  const auto r = boost::math::tools::brent_find_minima(f, lo + eps, hi - eps, 50);
  return -r.second;
}

}  // namespace

CommonMeanEL common_mean_el(const std::vector<double>& x0, const std::vector<double>& x1) {
  const auto [a0, b0] = range_of(x0);
  const auto [a1, b1] = range_of(x1);
  const double lo = std::max(a0, a1), hi = std::min(b0, b1);
  if (!(lo < hi)) throw Error(ErrorKind::Infeasible, "sample ranges do not overlap");
  auto f = [&](double m) { return -(el_mean_logratio(x0, m) + el_mean_logratio(x1, m)); };
  const double eps = 1e-10 * (hi - lo);
  const auto r = boost::math::tools::brent_find_minima(f, lo + eps, hi - eps, 50);
  CommonMeanEL out;
  out.mu = r.first;
  out.logratio = -r.second;
  el_mean_logratio(x0, out.mu, &out.w0);
  el_mean_logratio(x1, out.mu, &out.w1);
  return out;
}

Interval emp_el_ratio_ci(const std::vector<double>& x0, const std::vector<double>& x1,
                         double level) {
  const double crit = chi2_quantile(level, 1);
  const double dhat = mean_of(x1) / mean_of(x0);
  const auto [a0, b0] = range_of(x0);
  const auto [a1, b1] = range_of(x1);
  auto stat = [&](double d) { return -2.0 * ratio_profile(x0, x1, d); };
  Interval out;
  out.estimate = dhat;
  auto solve = [&](double inside, double outside) {
    for (int it = 0; it < 200 && std::fabs(outside - inside) > 1e-9 * (1.0 + dhat); ++it) {
      const double mid = 0.5 * (inside + outside);
      if (stat(mid) <= crit) inside = mid;
      else outside = mid;
    }
    return 0.5 * (inside + outside);
  };
  out.lower = solve(dhat, a1 / b0);
  out.upper = solve(dhat, b1 / a0);
  return out;
}

Interval emp_na_ratio_ci(const std::vector<double>& x0, const std::vector<double>& x1,
                         double level) {
  auto var_of = [](const std::vector<double>& x, double m) {
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size() - 1);
  };
  const double m0 = mean_of(x0), m1 = mean_of(x1);
  const double se = std::sqrt(var_of(x0, m0) / (x0.size() * m0 * m0) +
                              var_of(x1, m1) / (x1.size() * m1 * m1));
  const double z = boost::math::quantile(boost::math::normal(), 0.5 + 0.5 * level);
  Interval out;
  out.estimate = m1 / m0;
  out.lower = out.estimate * std::exp(-z * se);
  out.upper = out.estimate * std::exp(z * se);
  return out;
}

Interval emp_quantile_ci(const std::vector<double>& x, double tau, double level) {
  std::vector<double> s = x;
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  const double crit = chi2_quantile(level, 1);
  auto xlogx = [](double a, double b) { return a > 0 ? a * std::log(a / b) : 0.0; };
  Interval out;
  out.estimate = empirical_quantile(x, tau);
  bool any = false;
  // the statistic is constant on [s_i, s_{i+1}); report the region's infimum and supremum
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    if (s[i + 1] == s[i]) continue;
    const double k = static_cast<double>(i + 1);
    const double r = 2.0 * (xlogx(k, n * tau) + xlogx(n - k, n * (1.0 - tau)));
    if (r <= crit) {
      if (!any) out.lower = s[i];
      out.upper = s[i + 1];
      any = true;
    }
  }
  if (!any) throw Error(ErrorKind::EmptyInterval, "no order statistic inside the region");
  return out;
}

std::vector<EstimatorRow> compare_estimators(const TwoSampleData& data,
                                             const DrmBasis& basis,
                                             const EstimatingEquations& ees,
                                             const std::vector<double>& taus,
                                             double level, bool with_ci) {
  const Design des = make_design(data, basis);
  const FitResult drm = fit_drm(des);
  FitOptions fo;
  fo.covariance = false;
  const FitResult dee = ees.empty() ? drm : fit_drm_ee(des, ees, fo);
  const std::vector<double> x0 = data.column(0, 0), x1 = data.column(0, 1);
  const CommonMeanEL el = common_mean_el(x0, x1);
  const EstimatingEquations none;
  std::vector<EstimatorRow> rows;
  auto row = [](const char* m, int g, double tau, double est) {
    EstimatorRow r;
    r.method = m;
    r.group = g;
    r.tau = tau;
    r.estimate = est;
    return r;
  };
  for (double tau : taus) {
    for (int grp = 0; grp < 2; ++grp) {
      const auto& xs = grp == 0 ? x0 : x1;
      EstimatorRow emp = row("EMP", grp, tau, empirical_quantile(xs, tau));
      if (with_ci) {
        emp.ci = emp_quantile_ci(xs, tau, level);
        emp.has_ci = true;
      }
      EstimatorRow elr = row("EL", grp, tau, weighted_quantile(xs, grp == 0 ? el.w0 : el.w1, tau));
      EstimatorRow drow = row("DRM", grp, tau, quantile_estimate(des, drm, grp, tau));
      EstimatorRow erow = row("DRM-EE", grp, tau, quantile_estimate(des, dee, grp, tau));
      if (with_ci) {
        drow.ci = elr_ci_quantile(des, none, grp, tau, level, &drm);
        drow.has_ci = true;
        erow.ci = elr_ci_quantile(des, ees, grp, tau, level, &dee);
        erow.has_ci = true;
      }
      rows.push_back(emp);
      rows.push_back(elr);
      rows.push_back(drow);
      rows.push_back(erow);
    }
  }
  return rows;
}

}  // namespace drmel
