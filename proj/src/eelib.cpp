#include "drmel/eelib.hpp"

#include <cmath>
#include <map>
#include <sstream>

namespace drmel::ee {

namespace {

EstimatingEquations single(std::string name, int r, std::vector<ParamInfo> params,
                           decltype(EEBlock::fn) fn) {
  EEBlock b;
  b.name = std::move(name);
  b.r = r;
  b.params = std::move(params);
  b.fn = std::move(fn);
  return EstimatingEquations(std::move(b));
}

double expit(double t) { return 1.0 / (1.0 + std::exp(-t)); }

}  // namespace

EstimatingEquations mean_ratio(int col) {
  return single("mean_ratio", 1, {{"delta", ParamScale::Natural, 1.0}},
                [col](const EEArgs& a, const double* psi, double* g, double* dpsi,
                      double* dth) {
                  const double x = a.x[col];
                  g[0] = psi[0] * x - x * a.omega;
                  if (dpsi) dpsi[0] = x;
                  if (dth)
                    for (int j = 0; j < a.dq; ++j) dth[j] = -x * a.omega * a.Q[j];
                });
}

EstimatingEquations aux_mean(int col, double mu, double kappa) {
  const double target = kappa * mu;
  std::ostringstream nm;
  nm << "aux_mean[" << col << "]";
  return single(nm.str(), 1, {},
                [col, target](const EEArgs& a, const double*, double* g, double*,
                              double* dth) {
                  g[0] = a.x[col] - target;
                  if (dth)
                    for (int j = 0; j < a.dq; ++j) dth[j] = 0.0;
                });
}

EstimatingEquations prevalence_bins(const std::vector<double>& breaks,
                                    const std::vector<double>& phis, int col) {
  if (breaks.size() != phis.size() + 1 || phis.empty())
    throw Error(ErrorKind::InvalidArgument, "prevalence_bins needs k+1 breaks for k rates");
  std::vector<double> odds;
  for (double f : phis) odds.push_back(f / (1.0 - f));
  const int k = static_cast<int>(phis.size());
  return single("prevalence_bins", k, {{"pi", ParamScale::Logit}},
                [breaks, odds, k, col](const EEArgs& a, const double* psi, double* g,
                                       double* dpsi, double* dth) {
                  const double y = a.x[col];
                  const double e = std::exp(psi[0]);  // pi/(1-pi)
                  for (int l = 0; l < k; ++l) {
                    const double ind = (breaks[l] < y && y <= breaks[l + 1]) ? 1.0 : 0.0;
                    g[l] = ind * (e * a.omega - odds[l]);
                    if (dpsi) dpsi[l] = ind * e * a.omega;
                    if (dth)
                      for (int j = 0; j < a.dq; ++j)
                        dth[l * a.dq + j] = ind * e * a.omega * a.Q[j];
                  }
                });
}

namespace {

EstimatingEquations external_logistic(const std::vector<double>& gamma,
                                      const std::vector<int>& ycols, bool prospective,
                                      double pi_e) {
  if (gamma.size() != ycols.size() + 1)
    throw Error(ErrorKind::InvalidArgument,
                "external logistic needs one intercept plus one slope per column");
  const int r = static_cast<int>(ycols.size()) + 1;
  std::vector<ParamInfo> params;
  if (prospective) params.push_back({"pi", ParamScale::Logit});
  return single(prospective ? "external_prospective" : "external_retrospective", r,
                params,
                [gamma, ycols, prospective, pi_e, r](const EEArgs& a, const double* psi,
                                                    double* g, double* dpsi,
                                                    double* dth) {
                  double eta = gamma[0];
                  for (std::size_t j = 0; j < ycols.size(); ++j)
                    eta += gamma[j + 1] * a.x[ycols[j]];
                  const double h = expit(eta);
                  const double pi = prospective ? expit(psi[0]) : pi_e;
                  const double core = -(1.0 - pi) * h + pi * a.omega * (1.0 - h);
                  const double dcore_dpi = h + a.omega * (1.0 - h);
                  for (int l = 0; l < r; ++l) {
                    const double yl = l == 0 ? 1.0 : a.x[ycols[l - 1]];
                    g[l] = core * yl;
                    if (dpsi && prospective) dpsi[l] = dcore_dpi * pi * (1.0 - pi) * yl;
                    if (dth)
                      for (int j = 0; j < a.dq; ++j)
                        dth[l * a.dq + j] = pi * a.omega * (1.0 - h) * a.Q[j] * yl;
                  }
                });
}

}  // namespace

EstimatingEquations external_logistic_prospective(const std::vector<double>& gamma,
                                                  const std::vector<int>& ycols) {
  return external_logistic(gamma, ycols, true, 0.0);
}

EstimatingEquations external_logistic_retrospective(const std::vector<double>& gamma,
                                                    const std::vector<int>& ycols,
                                                    double pi_e) {
  return external_logistic(gamma, ycols, false, pi_e);
}

EstimatingEquations common_mean(int col) {
  return single("common_mean", 1, {},
                [col](const EEArgs& a, const double*, double* g, double*, double* dth) {
                  const double x = a.x[col];
                  g[0] = x * a.omega - x;
                  if (dth)
                    for (int j = 0; j < a.dq; ++j) dth[j] = x * a.omega * a.Q[j];
                });
}

EstimatingEquations moments(int col) {
  return single("moments", 4, {{"mu0"}, {"mu1"}, {"var0"}, {"var1"}},
                [col](const EEArgs& a, const double* psi, double* g, double* dpsi,
                      double* dth) {
                  const double x = a.x[col], w = a.omega;
                  g[0] = x - psi[0];
                  g[1] = x * w - psi[1];
                  g[2] = x * x - psi[0] * psi[0] - psi[2];
                  g[3] = x * x * w - psi[1] * psi[1] - psi[3];
                  if (dpsi) {
                    for (int i = 0; i < 16; ++i) dpsi[i] = 0.0;
                    dpsi[0 * 4 + 0] = -1.0;
                    dpsi[1 * 4 + 1] = -1.0;
                    dpsi[2 * 4 + 0] = -2.0 * psi[0];
                    dpsi[2 * 4 + 2] = -1.0;
                    dpsi[3 * 4 + 1] = -2.0 * psi[1];
                    dpsi[3 * 4 + 3] = -1.0;
                  }
                  if (dth)
                    for (int j = 0; j < a.dq; ++j) {
                      dth[0 * a.dq + j] = 0.0;
                      dth[1 * a.dq + j] = x * w * a.Q[j];
                      dth[2 * a.dq + j] = 0.0;
                      dth[3 * a.dq + j] = x * x * w * a.Q[j];
                    }
                });
}

EstimatingEquations entropy_ge(double xi, int col) {
  const int kind = xi == 0.0 ? 0 : (xi == 1.0 ? 1 : 2);
  return single(
      "entropy_ge", 4,
      {{"mu0", ParamScale::Natural, 1.0}, {"mu1", ParamScale::Natural, 1.0}, {"ge0"}, {"ge1"}},
      [xi, kind, col](const EEArgs& a, const double* psi, double* g, double* dpsi,
                      double* dth) {
        const double x = a.x[col], w = a.omega;
        const double m0 = psi[0], m1 = psi[1];
        g[0] = x - m0;
        g[1] = x * w - m1;
        // t(x; mu) and its mu-derivative, then g3 = t0 - c*GE0, g4 = t1*w - c1*GE1
        double t0, t1, dt0, dt1, c0, c1, dc0, dc1;
        if (kind == 1) {
          t0 = x * std::log(x / m0);
          t1 = x * std::log(x / m1);
          dt0 = -x / m0;
          dt1 = -x / m1;
          c0 = m0; c1 = m1; dc0 = 1.0; dc1 = 1.0;
        } else if (kind == 0) {
          t0 = -std::log(x / m0);
          t1 = -std::log(x / m1);
          dt0 = 1.0 / m0;
          dt1 = 1.0 / m1;
          c0 = c1 = 1.0; dc0 = dc1 = 0.0;
        } else {
          const double p0 = std::pow(x / m0, xi), p1 = std::pow(x / m1, xi);
          t0 = p0 - 1.0;
          t1 = p1 - 1.0;
          dt0 = -xi * p0 / m0;
          dt1 = -xi * p1 / m1;
          c0 = c1 = xi * xi - xi; dc0 = dc1 = 0.0;
        }
        g[2] = t0 - c0 * psi[2];
        g[3] = t1 * w - c1 * psi[3];
        if (dpsi) {
          for (int i = 0; i < 16; ++i) dpsi[i] = 0.0;
          dpsi[0 * 4 + 0] = -1.0;
          dpsi[1 * 4 + 1] = -1.0;
          dpsi[2 * 4 + 0] = dt0 - dc0 * psi[2];
          dpsi[2 * 4 + 2] = -c0;
          dpsi[3 * 4 + 1] = dt1 * w - dc1 * psi[3];
          dpsi[3 * 4 + 3] = -c1;
        }
        if (dth)
          for (int j = 0; j < a.dq; ++j) {
            dth[0 * a.dq + j] = 0.0;
            dth[1 * a.dq + j] = x * w * a.Q[j];
            dth[2 * a.dq + j] = 0.0;
            dth[3 * a.dq + j] = t1 * w * a.Q[j];
          }
      });
}

EstimatingEquations cdf_points(double x0, double x1, int col) {
  return single("cdf_points", 2, {{"zeta0"}, {"zeta1"}},
                [x0, x1, col](const EEArgs& a, const double* psi, double* g,
                              double* dpsi, double* dth) {
                  const double x = a.x[col];
                  const double i0 = x <= x0 ? 1.0 : 0.0, i1 = x <= x1 ? 1.0 : 0.0;
                  g[0] = i0 - psi[0];
                  g[1] = a.omega * i1 - psi[1];
                  if (dpsi) {
                    dpsi[0] = -1.0; dpsi[1] = 0.0;
                    dpsi[2] = 0.0; dpsi[3] = -1.0;
                  }
                  if (dth)
                    for (int j = 0; j < a.dq; ++j) {
                      dth[j] = 0.0;
                      dth[a.dq + j] = a.omega * i1 * a.Q[j];
                    }
                });
}

EstimatingEquations quantile_points(double tau0, double xi0, double tau1, double xi1,
                                    int col) {
  return single("quantile_points", 2, {},
                [=](const EEArgs& a, const double*, double* g, double*, double* dth) {
                  const double x = a.x[col];
                  const double i0 = x <= xi0 ? 1.0 : 0.0, i1 = x <= xi1 ? 1.0 : 0.0;
                  g[0] = i0 - tau0;
                  g[1] = a.omega * i1 - tau1;
                  if (dth)
                    for (int j = 0; j < a.dq; ++j) {
                      dth[j] = 0.0;
                      dth[a.dq + j] = a.omega * i1 * a.Q[j];
                    }
                });
}

EstimatingEquations cdf_at(int group, double t, double level, int col) {
  std::ostringstream nm;
  nm << "cdf_at[" << group << "]";
  return single(nm.str(), 1, {},
                [=](const EEArgs& a, const double*, double* g, double*, double* dth) {
                  const double ind = a.x[col] <= t ? 1.0 : 0.0;
                  const double w = group == 1 ? a.omega : 1.0;
                  g[0] = w * ind - level;
                  if (dth)
                    for (int j = 0; j < a.dq; ++j)
                      dth[j] = group == 1 ? a.omega * ind * a.Q[j] : 0.0;
                });
}

namespace {

std::vector<double> parse_list(const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ';'))
    if (!tok.empty()) out.push_back(std::stod(tok));
  return out;
}

EstimatingEquations parse_one(const std::string& term) {
  std::string name = term;
  std::map<std::string, std::string> kv;
  const auto lp = term.find('(');
  if (lp != std::string::npos) {
    const auto rp = term.rfind(')');
    if (rp == std::string::npos || rp < lp)
      throw Error(ErrorKind::UnknownEE, "unbalanced parentheses in '" + term + "'");
    name = term.substr(0, lp);
    std::stringstream ss(term.substr(lp + 1, rp - lp - 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos)
        throw Error(ErrorKind::UnknownEE, "expected key=value in '" + item + "'");
      kv[item.substr(0, eq)] = item.substr(eq + 1);
    }
  }
  auto num = [&](const char* k, double def) {
    auto it = kv.find(k);
    return it == kv.end() ? def : std::stod(it->second);
  };
  auto need = [&](const char* k) {
    auto it = kv.find(k);
    if (it == kv.end())
      throw Error(ErrorKind::UnknownEE, name + " needs '" + k + "'");
    return it->second;
  };
  const int col = static_cast<int>(num("col", 0));
  if (name == "mean_ratio") return mean_ratio(col);
  if (name == "common_mean") return common_mean(col);
  if (name == "aux_mean")
    return aux_mean(static_cast<int>(num("col", 1)), std::stod(need("mu")),
                    num("kappa", 1.0));
  if (name == "moments") return moments(col);
  if (name == "entropy_ge") return entropy_ge(num("xi", 1.0), col);
  if (name == "cdf_points")
    return cdf_points(std::stod(need("x0")), std::stod(need("x1")), col);
  if (name == "quantile_points")
    return quantile_points(std::stod(need("tau0")), std::stod(need("xi0")),
                           std::stod(need("tau1")), std::stod(need("xi1")), col);
  if (name == "prevalence_bins")
    return prevalence_bins(parse_list(need("breaks")), parse_list(need("phis")), col);
  if (name == "external_prospective" || name == "external_retrospective") {
    std::vector<int> ycols;
    for (double c : parse_list(need("ycols"))) ycols.push_back(static_cast<int>(c));
    const auto gamma = parse_list(need("gamma"));
    if (name == "external_prospective")
      return external_logistic_prospective(gamma, ycols);
    return external_logistic_retrospective(gamma, ycols, std::stod(need("pi_e")));
  }
  throw Error(ErrorKind::UnknownEE, name);
}

}  // namespace

EstimatingEquations parse(const std::string& spec) {
  EstimatingEquations out;
  if (spec.empty() || spec == "none") return out;
  int depth = 0;
  std::string cur;
  for (char c : spec) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == '+' && depth == 0) {
      out = out + parse_one(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  if (!cur.empty()) out = out + parse_one(cur);
  return out;
}

}  // namespace drmel::ee
