#include "drmel/simulation.hpp"

#include "drmel/distribution.hpp"
#include "drmel/eelib.hpp"

#include <json.hpp>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/lognormal.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace drmel {

using json = nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Target parse_target(const std::string& t) {
  if (t == "mean_ratio") return Target::MeanRatio;
  if (t == "quantile") return Target::Quantile;
  throw Error(ErrorKind::ParseError, "unknown target " + t);
}

void check_family(const std::string& f) {
  if (f != "lognormal" && f != "normal" && f != "gamma") throw Error(ErrorKind::UnknownFamily, f);
}

FamilyParams params_from(const json& j) {
  FamilyParams p;
  p.a = j.at(0).get<double>();
  p.b = j.at(1).get<double>();
  return p;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string kappa_label(double k) { return "DRM-EE k=" + fmt("%.2f", k); }

std::string quantile_label(double tau, int g) { return "q" + fmt("%.2f", tau) + "_g" + std::to_string(g); }

}  // namespace

Scenario scenario_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
  Scenario s;
  try {
    s.name = j.value("name", "scenario");
    s.family = j.at("family").get<std::string>();
    check_family(s.family);
    s.group0 = params_from(j.at("group0"));
    s.group1 = params_from(j.at("group1"));
    if (j.contains("aux")) {
      const auto& a = j["aux"];
      s.aux.enabled = true;
      s.aux.intercept = a.value("intercept", 1.0);
      s.aux.slope = a.value("slope", 0.5);
      s.aux.sd = a.value("sd", 1.0);
    }
    for (const auto& p : j.at("sizes")) s.sizes.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
    s.basis = j.at("basis").get<std::string>();
    make_basis(s.basis);
    s.target = parse_target(j.at("target").get<std::string>());
    if (j.contains("kappas")) s.kappas = j["kappas"].get<std::vector<double>>();
    if (j.contains("taus")) s.taus = j["taus"].get<std::vector<double>>();
    if (j.contains("groups")) s.groups = j["groups"].get<std::vector<int>>();
    if (j.contains("methods")) s.methods = j["methods"].get<std::vector<std::string>>();
    s.intervals = j.value("intervals", true);
    s.tests = j.value("tests", true);
    s.reps = j.value("reps", 500);
    s.seed = j.value("seed", std::uint64_t{1});
    s.level = j.value("level", 0.95);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
  if (s.reps < 1) throw Error(ErrorKind::InvalidArgument, "reps must be at least 1");
  if (s.target == Target::MeanRatio && !s.aux.enabled)
    s.kappas.clear();
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::ParseError, "cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return scenario_from_json(ss.str());
}

std::string scenario_to_json(const Scenario& s) {
  json j;
  j["name"] = s.name;
  j["family"] = s.family;
  j["group0"] = {s.group0.a, s.group0.b};
  j["group1"] = {s.group1.a, s.group1.b};
  if (s.aux.enabled) j["aux"] = {{"intercept", s.aux.intercept}, {"slope", s.aux.slope}, {"sd", s.aux.sd}};
  j["sizes"] = json::array();
  for (auto [a, b] : s.sizes) j["sizes"].push_back({a, b});
  j["basis"] = s.basis;
  j["target"] = s.target == Target::MeanRatio ? "mean_ratio" : "quantile";
  j["kappas"] = s.kappas;
  j["taus"] = s.taus;
  j["groups"] = s.groups;
  j["methods"] = s.methods;
  j["intervals"] = s.intervals;
  j["tests"] = s.tests;
  j["reps"] = s.reps;
  j["seed"] = s.seed;
  j["level"] = s.level;
  return j.dump(2);
}

double family_mean(const std::string& family, const FamilyParams& p) {
  if (family == "lognormal") return std::exp(p.a + 0.5 * p.b * p.b);
  if (family == "normal") return p.a;
  if (family == "gamma") return p.a * p.b;
  throw Error(ErrorKind::UnknownFamily, family);
}

double family_quantile(const std::string& family, const FamilyParams& p, double tau) {
  if (family == "lognormal") return boost::math::quantile(boost::math::lognormal(p.a, p.b), tau);
  if (family == "normal") return boost::math::quantile(boost::math::normal(p.a, p.b), tau);
  if (family == "gamma") return boost::math::quantile(boost::math::gamma_distribution<>(p.a, p.b), tau);
  throw Error(ErrorKind::UnknownFamily, family);
}

std::uint64_t replicate_stream(std::uint64_t seed, std::uint64_t rep) {
  return splitmix64(splitmix64(seed) ^ splitmix64(rep + 0x632be59bd9b4e019ULL));
}

TwoSampleData generate(const Scenario& s, int n0, int n1, std::uint64_t rep) {
  check_family(s.family);
  const std::uint64_t sizes_key = (static_cast<std::uint64_t>(n0) << 32) ^ static_cast<std::uint64_t>(n1);
  boost::random::mt19937_64 rng(replicate_stream(s.seed ^ splitmix64(sizes_key), rep));
  const int n = n0 + n1;
  Mat v(n, s.aux.enabled ? 2 : 1);
  std::vector<int> g(n);
  auto draw = [&](const FamilyParams& p) {
    if (s.family == "lognormal") return std::exp(boost::random::normal_distribution<double>(p.a, p.b)(rng));
    if (s.family == "normal") return boost::random::normal_distribution<double>(p.a, p.b)(rng);
    return boost::random::gamma_distribution<double>(p.a, p.b)(rng);
  };
  boost::random::normal_distribution<double> eps(0.0, s.aux.sd);
  for (int k = 0; k < n; ++k) {
    g[k] = k < n0 ? 0 : 1;
    v(k, 0) = draw(k < n0 ? s.group0 : s.group1);
    if (s.aux.enabled) v(k, 1) = s.aux.intercept + s.aux.slope * v(k, 0) + eps(rng);
  }
  return TwoSampleData(std::move(v), std::move(g));
}

std::vector<Cell> scenario_cells(const Scenario& s) {
  auto wanted = [&](const std::string& m) {
    if (s.methods.empty()) return true;
    for (const auto& w : s.methods)
      if (w == m || (w == "DRM-EE" && m.rfind("DRM-EE", 0) == 0)) return true;
    return false;
  };
  std::vector<Cell> cells;
  for (auto [n0, n1] : s.sizes) {
    if (s.target == Target::MeanRatio) {
      const double delta = family_mean(s.family, s.group1) / family_mean(s.family, s.group0);
      auto add = [&](const std::string& m, bool point, bool interval, bool test) {
        if (!wanted(m)) return;
        interval = interval && s.intervals;
        test = test && s.tests;
        if (!point && !interval) return;
        cells.push_back({n0, n1, "delta", m, delta, point, interval, test});
      };
      add("EMP", true, false, false);
      add("EMP-NA", false, true, false);
      add("EMP-EL", false, true, false);
      add("DRM", true, true, false);
      for (double k : s.kappas) add(kappa_label(k), true, true, true);
    } else {
      for (double tau : s.taus)
        for (int g : s.groups) {
          const double truth = family_quantile(s.family, g == 0 ? s.group0 : s.group1, tau);
          const std::string t = quantile_label(tau, g);
          for (const char* m : {"EMP", "EL", "DRM", "DRM-EE"}) {
            if (!wanted(m)) continue;
            const bool ci = std::string(m) != "EL";
            cells.push_back({n0, n1, t, m, truth, true, ci && s.intervals, false});
          }
        }
    }
  }
  return cells;
}

namespace {

template <class F>
void guarded(F&& f) {
  try {
    f();
  } catch (const std::exception&) {
  }
}

void run_mean_ratio(const Scenario& s, const TwoSampleData& data, const std::vector<Cell>& cells,
                    const std::vector<int>& idx, std::vector<CellOutcome>& out) {
  const Design des = make_design(data, make_basis(s.basis));
  const auto x0 = data.column(0, 0), x1 = data.column(0, 1);
  const double mu_z0 = s.aux.intercept + s.aux.slope * family_mean(s.family, s.group0);
  for (int i : idx) {
    const Cell& c = cells[i];
    CellOutcome& o = out[i];
    if (c.method == "EMP") {
      o.estimate = (std::accumulate(x1.begin(), x1.end(), 0.0) / x1.size()) /
                   (std::accumulate(x0.begin(), x0.end(), 0.0) / x0.size());
      o.ok = std::isfinite(o.estimate);
    } else if (c.method == "EMP-NA" || c.method == "EMP-EL") {
      guarded([&] {
        const Interval ci = c.method == "EMP-NA" ? emp_na_ratio_ci(x0, x1, s.level)
                                                 : emp_el_ratio_ci(x0, x1, s.level);
        o.lower = ci.lower;
        o.upper = ci.upper;
        o.ci_ok = std::isfinite(ci.lower) && std::isfinite(ci.upper);
        o.estimate = ci.estimate;
        o.ok = true;
      });
    } else {
      EstimatingEquations ees = ee::mean_ratio();
      if (c.method != "DRM") {
        const double kappa = std::stod(c.method.substr(c.method.find('=') + 1));
        ees = ees + ee::aux_mean(1, mu_z0, kappa);
      }
      guarded([&] {
        const FitResult f = fit_drm_ee(des, ees);
        if (!f.converged) return;
        o.estimate = f.psi_natural[0];
        o.ok = true;
        if (c.interval)
          guarded([&] {
            const Interval ci = elr_ci_psi(des, ees, 0, s.level, &f);
            o.lower = ci.lower;
            o.upper = ci.upper;
            o.ci_ok = true;
          });
        if (c.test)
          guarded([&] {
            o.p_value = validity_test(des, ees, &f).p_value;
            o.test_ok = true;
          });
      });
    }
  }
}

void run_quantiles(const Scenario& s, const TwoSampleData& data, const std::vector<Cell>& cells,
                   const std::vector<int>& idx, std::vector<CellOutcome>& out) {
  const Design des = make_design(data, make_basis(s.basis));
  const EstimatingEquations none, cm = ee::common_mean();
  FitResult drm, dee;
  bool drm_ok = false, dee_ok = false;
  guarded([&] {
    drm = fit_drm(des);
    drm_ok = drm.converged;
  });
  FitOptions fo;
  fo.covariance = false;
  guarded([&] {
    dee = fit_drm_ee(des, cm, fo);
    dee_ok = dee.converged;
  });
  const auto x0 = data.column(0, 0), x1 = data.column(0, 1);
  CommonMeanEL el;
  bool el_ok = false;
  guarded([&] {
    el = common_mean_el(x0, x1);
    el_ok = true;
  });
  for (int i : idx) {
    const Cell& c = cells[i];
    CellOutcome& o = out[i];
    const double tau = std::stod(c.target.substr(1, c.target.find('_') - 1));
    const int g = c.target.back() - '0';
    const auto& xs = g == 0 ? x0 : x1;
    if (c.method == "EMP") {
      o.estimate = empirical_quantile(xs, tau);
      o.ok = true;
      if (c.interval)
        guarded([&] {
          const Interval ci = emp_quantile_ci(xs, tau, s.level);
          o.lower = ci.lower;
          o.upper = ci.upper;
          o.ci_ok = true;
        });
    } else if (c.method == "EL") {
      if (!el_ok) continue;
      o.estimate = weighted_quantile(xs, g == 0 ? el.w0 : el.w1, tau);
      o.ok = true;
    } else {
      const bool is_drm = c.method == "DRM";
      if (!(is_drm ? drm_ok : dee_ok)) continue;
      const FitResult& f = is_drm ? drm : dee;
      o.estimate = quantile_estimate(des, f, g, tau);
      o.ok = true;
      if (c.interval)
        guarded([&] {
          const Interval ci =
              elr_ci_quantile(des, is_drm ? none : cm, g, tau, s.level, &f, ScanMode::Outward);
          o.lower = ci.lower;
          o.upper = ci.upper;
          o.ci_ok = true;
        });
    }
  }
}

}  // namespace

std::vector<CellOutcome> run_replicate(const Scenario& s, const std::vector<Cell>& cells,
                                       std::uint64_t rep) {
  std::vector<CellOutcome> out(cells.size());
  for (auto [n0, n1] : s.sizes) {
    std::vector<int> idx;
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (cells[i].n0 == n0 && cells[i].n1 == n1) idx.push_back(static_cast<int>(i));
    if (idx.empty()) continue;
    const TwoSampleData data = generate(s, n0, n1, rep);
    if (s.target == Target::MeanRatio) run_mean_ratio(s, data, cells, idx, out);
    else run_quantiles(s, data, cells, idx, out);
  }
  return out;
}

MetricTable aggregate(const Scenario& s, const std::vector<Cell>& cells,
                      const std::vector<std::vector<CellOutcome>>& per_rep) {
  MetricTable t;
  t.scenario = s.name;
  t.reps = static_cast<int>(per_rep.size());
  const int R = t.reps;
  auto mean_se = [](const std::vector<double>& v, double& m, double& se) {
    const double n = static_cast<double>(v.size());
    m = se = 0.0;
    if (v.empty()) return;
    for (double x : v) m += x;
    m /= n;
    if (v.size() < 2) return;
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    se = std::sqrt(ss / (n - 1) / n);
  };
  for (std::size_t i = 0; i < cells.size(); ++i) {
    CellSummary cs;
    cs.cell = cells[i];
    const Cell& c = cells[i];
    std::vector<double> rel, sq, cover, len, rej;
    for (const auto& rep : per_rep) {
      const CellOutcome& o = rep[i];
      if (c.point) {
        if (o.ok) {
          rel.push_back((o.estimate - c.truth) / c.truth * 100.0);
          sq.push_back((o.estimate - c.truth) * (o.estimate - c.truth) * 100.0);
        } else {
          ++cs.failed;
        }
      }
      if (c.interval) {
        if (o.ci_ok) {
          cover.push_back(o.lower <= c.truth && c.truth <= o.upper ? 100.0 : 0.0);
          len.push_back(o.upper - o.lower);
        } else {
          ++cs.ci_failed;
        }
      }
      if (c.test) {
        if (o.test_ok) {
          rej.push_back(o.p_value < 0.05 ? 100.0 : 0.0);
          cs.p_values.push_back(o.p_value);
        } else {
          ++cs.test_failed;
        }
      }
    }
    cs.used = static_cast<int>(rel.size());
    cs.ci_used = static_cast<int>(cover.size());
    cs.test_used = static_cast<int>(rej.size());
    mean_se(rel, cs.rb, cs.rb_se);
    mean_se(sq, cs.mse100, cs.mse100_se);
    mean_se(cover, cs.cp, cs.cp_se);
    mean_se(len, cs.al, cs.al_se);
    mean_se(rej, cs.reject, cs.reject_se);
    const int worst = std::max({cs.failed, cs.ci_failed, cs.test_failed});
    cs.flagged = worst > 0.02 * R;
    t.rows.push_back(std::move(cs));
  }
  return t;
}

MetricTable run_table(const Scenario& s, bool parallel) {
  const auto cells = scenario_cells(s);
  std::vector<std::vector<CellOutcome>> per_rep(s.reps);
  const auto t0 = std::chrono::steady_clock::now();
  int threads = 1;
  if (parallel) {
#ifdef _OPENMP
    threads = omp_get_max_threads();
#pragma omp parallel for schedule(dynamic)
#endif
    for (int r = 0; r < s.reps; ++r) per_rep[r] = run_replicate(s, cells, static_cast<std::uint64_t>(r));
  } else {
    for (int r = 0; r < s.reps; ++r) per_rep[r] = run_replicate(s, cells, static_cast<std::uint64_t>(r));
  }
  MetricTable t = aggregate(s, cells, per_rep);
  t.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  t.threads = threads;
  return t;
}

const CellSummary* MetricTable::find(int n0, int n1, const std::string& target,
                                     const std::string& method) const {
  for (const auto& r : rows)
    if (r.cell.n0 == n0 && r.cell.n1 == n1 && r.cell.target == target && r.cell.method == method)
      return &r;
  return nullptr;
}

std::string MetricTable::to_csv() const {
  std::ostringstream os;
  os << "n0,n1,target,method,truth,used,failed,flagged,rb,rb_se,mse100,mse100_se,"
        "ci_used,cp,cp_se,al,al_se,test_used,reject,reject_se\n";
  os << std::setprecision(10);
  for (const auto& r : rows) {
    os << r.cell.n0 << ',' << r.cell.n1 << ',' << r.cell.target << ',' << r.cell.method << ','
       << r.cell.truth << ',' << r.used << ',' << r.failed + r.ci_failed + r.test_failed << ','
       << (r.flagged ? 1 : 0) << ',';
    if (r.cell.point) os << r.rb << ',' << r.rb_se << ',' << r.mse100 << ',' << r.mse100_se << ',';
    else os << ",,,,";
    if (r.cell.interval) os << r.ci_used << ',' << r.cp << ',' << r.cp_se << ',' << r.al << ',' << r.al_se << ',';
    else os << ",,,,,";
    if (r.cell.test) os << r.test_used << ',' << r.reject << ',' << r.reject_se;
    else os << ",,";
    os << '\n';
  }
  return os.str();
}

std::string MetricTable::to_text() const {
  std::ostringstream os;
  os << "scenario " << scenario << "  reps " << reps << "  threads " << threads << "  seconds "
     << fmt("%.1f", seconds) << "\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-10s %-12s %-14s %15s %15s %15s %15s %15s %5s\n", "(n0,n1)",
                "target", "method", "RB% (se)", "MSEx100 (se)", "CP% (se)", "AL (se)",
                "reject% (se)", "fail");
  os << line;
  auto pair = [](bool on, double v, double se, const char* f) {
    if (!on) return std::string("-");
    return fmt(f, v) + " (" + fmt(f, se) + ")";
  };
  for (const auto& r : rows) {
    const std::string sz = "(" + std::to_string(r.cell.n0) + "," + std::to_string(r.cell.n1) + ")";
    std::snprintf(line, sizeof line, "%-10s %-12s %-14s %15s %15s %15s %15s %15s %4d%s\n", sz.c_str(),
                  r.cell.target.c_str(), r.cell.method.c_str(),
                  pair(r.cell.point, r.rb, r.rb_se, "%.2f").c_str(),
                  pair(r.cell.point, r.mse100, r.mse100_se, "%.2f").c_str(),
                  pair(r.cell.interval, r.cp, r.cp_se, "%.1f").c_str(),
                  pair(r.cell.interval, r.al, r.al_se, "%.3f").c_str(),
                  pair(r.cell.test, r.reject, r.reject_se, "%.2f").c_str(),
                  r.failed + r.ci_failed + r.test_failed, r.flagged ? "*" : "");
    os << line;
  }
  return os.str();
}

std::string MetricTable::to_json() const {
  json j;
  j["scenario"] = scenario;
  j["reps"] = reps;
  j["threads"] = threads;
  j["seconds"] = seconds;
  j["rows"] = json::array();
  for (const auto& r : rows) {
    json row = {{"n0", r.cell.n0}, {"n1", r.cell.n1}, {"target", r.cell.target},
                {"method", r.cell.method}, {"truth", r.cell.truth}, {"flagged", r.flagged},
                {"failed", r.failed + r.ci_failed + r.test_failed}};
    if (r.cell.point)
      row.update({{"used", r.used}, {"rb", r.rb}, {"rb_se", r.rb_se}, {"mse100", r.mse100},
                  {"mse100_se", r.mse100_se}});
    if (r.cell.interval)
      row.update({{"ci_used", r.ci_used}, {"cp", r.cp}, {"cp_se", r.cp_se}, {"al", r.al},
                  {"al_se", r.al_se}});
    if (r.cell.test)
      row.update({{"test_used", r.test_used}, {"reject", r.reject}, {"reject_se", r.reject_se}});
    j["rows"].push_back(row);
  }
  return j.dump(2);
}

}  // namespace drmel
