#include "drmel/asymptotics.hpp"
#include "drmel/datasets.hpp"
#include "drmel/distribution.hpp"
#include "drmel/eelib.hpp"
#include "drmel/inference.hpp"
#include "drmel/simulation.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace drmel;
using json = nlohmann::json;

namespace {

struct Common {
  std::string data = "cyclosporine";
  std::string basis = "log";
  std::string ee = "none";
  double level = 0.95;
  int starts = 1;
  bool as_json = false;
};

void add_common(CLI::App* c, Common& o) {
  c->add_option("--data", o.data, "CSV path, or `cyclosporine` for the embedded split");
  c->add_option("--basis", o.basis, "identity, log, log-log2, x-x2, x-log");
  c->add_option("--ee", o.ee, "estimating equations, e.g. mean_ratio()+aux_mean(col=1,mu=1.82)");
  c->add_option("--level", o.level, "confidence level")->check(CLI::Range(0.0, 1.0));
  c->add_option("--starts", o.starts, "starting points for the EE fit")->check(CLI::PositiveNumber);
  c->add_flag("--json", o.as_json, "structured output");
}

TwoSampleData load(const std::string& spec) {
  if (spec == "cyclosporine") return cyclosporine_split();
  return load_csv(spec);
}

json config_json(const Common& o) {
  return {{"data", o.data}, {"basis", o.basis}, {"ee", o.ee}, {"level", o.level},
          {"starts", o.starts}};
}

// key=value lines, or a JSON document when requested.
void emit(const Common& o, const json& j, const std::string& table = "") {
  if (o.as_json) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.value().is_object() || (it.value().is_array() && !it.value().empty() &&
                                   it.value().front().is_object()))
      continue;
    std::cout << it.key() << "=" << (it.value().is_string() ? it.value().get<std::string>()
                                                            : it.value().dump())
              << "\n";
  }
  if (!table.empty()) std::cout << "\n" << table;
}

std::vector<double> to_std(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

FitResult fit_any(const Design& des, const EstimatingEquations& ees, int starts) {
  return ees.empty() ? fit_drm(des) : fit_multistart(des, ees, starts);
}

int cmd_fit(const Common& o) {
  const TwoSampleData data = load(o.data);
  const DrmBasis basis = make_basis(o.basis);
  const EstimatingEquations ees = ee::parse(o.ee);
  const ValidationReport rep = validate(data, basis, ees);
  const Design des = make_design(data, basis);
  const FitResult f = fit_any(des, ees, o.starts);
  json j;
  j["config"] = config_json(o);
  j["n0"] = rep.n0;
  j["n1"] = rep.n1;
  j["lambda_star"] = rep.lambda_star;
  j["identification"] = rep.identification;
  j["warnings"] = rep.warnings;
  j["converged"] = f.converged;
  j["iterations"] = f.iterations;
  j["grad_norm"] = f.grad_norm;
  j["loglik"] = f.loglik;
  j["theta"] = to_std(f.theta);
  j["psi"] = to_std(f.psi_natural);
  std::vector<std::string> names;
  for (const auto& p : ees.params()) names.push_back(p.name);
  j["psi_names"] = names;
  const int p = ees.p();
  Vec se(p + des.dq());
  const Vec dnat = ees.natural_derivative(f.psi);
  for (int i = 0; i < se.size(); ++i) {
    const double s = f.cov_eta.rows() > i ? std::sqrt(std::max(0.0, f.cov_eta(i, i))) : NAN;
    se[i] = i < p ? s * std::fabs(dnat[i]) : s;
  }
  j["psi_se"] = to_std(se.head(p));
  j["theta_se"] = to_std(se.tail(des.dq()));
  j["weights_sum"] = f.weights.sum();
  if (!f.converged) j["message"] = f.message;
  std::ostringstream tab;
  char line[160];
  std::snprintf(line, sizeof line, "%-10s %14s %14s\n", "parameter", "estimate", "se");
  tab << line;
  for (int i = 0; i < p; ++i) {
    std::snprintf(line, sizeof line, "%-10s %14.6g %14.6g\n", names[i].c_str(), f.psi_natural[i], se[i]);
    tab << line;
  }
  for (int i = 0; i < des.dq(); ++i) {
    const std::string nm = i == 0 ? "alpha" : "beta" + std::to_string(i);
    std::snprintf(line, sizeof line, "%-10s %14.6g %14.6g\n", nm.c_str(), f.theta[i], se[p + i]);
    tab << line;
  }
  emit(o, j, tab.str());
  return f.converged ? 0 : 3;
}

json report_json(const TestReport& t) {
  return {{"kind", to_string(t.kind)}, {"statistic", t.statistic}, {"df", t.df},
          {"p_value", t.p_value}, {"clamped", t.clamped}};
}

int cmd_test(const Common& o, const std::string& kind, int m, int k, double value) {
  const Design des = make_design(load(o.data), make_basis(o.basis));
  const EstimatingEquations ees = ee::parse(o.ee);
  TestReport t;
  if (kind == "validity") {
    t = validity_test(des, ees);
  } else if (kind == "partial") {
    t = partial_validity_test(des, ees, m);
  } else if (kind == "psi") {
    const FitResult f = fit_multistart(des, ees, o.starts);
    Vec nat = f.psi_natural;
    nat[k] = value;
    const double v = ees.to_internal(nat)[k];
    t = make_report(psi_profile_statistic(des, ees, f, k, v), 1, TestKind::PsiFixed);
  } else {
    throw Error(ErrorKind::InvalidArgument, "unknown test kind " + kind);
  }
  json j = report_json(t);
  j["config"] = config_json(o);
  emit(o, j);
  return 0;
}

int cmd_ci(const Common& o, const std::string& target) {
  const Design des = make_design(load(o.data), make_basis(o.basis));
  const EstimatingEquations ees = ee::parse(o.ee);
  std::vector<std::string> parts;
  std::stringstream ss(target);
  for (std::string s; std::getline(ss, s, ':');) parts.push_back(s);
  const FitResult full = fit_any(des, ees, o.starts);
  Interval ci;
  if (parts.size() == 2 && parts[0] == "psi") {
    ci = elr_ci_psi(des, ees, std::stoi(parts[1]), o.level, &full);
  } else if (parts.size() == 3 && parts[0] == "cdf") {
    ci = elr_ci_cdf(des, ees, std::stoi(parts[1]), std::stod(parts[2]), o.level, &full);
  } else if (parts.size() == 3 && parts[0] == "quantile") {
    ci = elr_ci_quantile(des, ees, std::stoi(parts[1]), std::stod(parts[2]), o.level, &full);
  } else {
    throw Error(ErrorKind::InvalidArgument, "target must be psi:k, cdf:i:x0 or quantile:i:tau");
  }
  json j = {{"target", target}, {"estimate", ci.estimate}, {"lower", ci.lower},
            {"upper", ci.upper}, {"length", ci.length()}, {"fits", ci.fits}};
  j["config"] = config_json(o);
  emit(o, j);
  return 0;
}

int cmd_simulate(const std::string& path, int reps, long long seed, const std::string& out,
                 bool full, bool serial, bool as_json) {
  Scenario s = load_scenario(path);
  if (full) {
    s.reps = 2000;
    s.sizes = {{50, 50}, {50, 150}, {100, 100}, {200, 200}};
  }
  if (reps > 0) s.reps = reps;
  if (seed >= 0) s.seed = static_cast<std::uint64_t>(seed);
  const MetricTable t = run_table(s, !serial);
  if (!out.empty()) {
    std::ofstream(out + ".csv") << t.to_csv();
    std::ofstream(out + ".txt") << t.to_text();
    std::ofstream(out + ".json") << t.to_json();
    std::ofstream(out + ".scenario.json") << scenario_to_json(s);
  }
  if (as_json) {
    json j = json::parse(t.to_json());
    j["config"] = json::parse(scenario_to_json(s));
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "config=" << json::parse(scenario_to_json(s)).dump() << "\n\n" << t.to_text();
  }
  return 0;
}

int cmd_demo(bool as_json) {
  const TwoSampleData data = cyclosporine_split();
  const DrmBasis basis = make_basis("log-log2");
  const EstimatingEquations cm = ee::common_mean();
  const Design des = make_design(data, basis);
  const TestReport w = validity_test(des, cm);
  const std::vector<double> taus = {0.25, 0.5, 0.75};
  const auto rows = compare_estimators(data, basis, cm, taus, 0.95, true);
  json j;
  j["data"] = "cyclosporine (HPLC = group 0, RIA = group 1)";
  j["basis"] = basis.label;
  j["ee"] = cm.label();
  j["digest_ok"] = data_digest(data) == kCyclosporineDigest;
  j["validity_statistic"] = w.statistic;
  j["validity_df"] = w.df;
  j["validity_p_value"] = w.p_value;
  j["rows"] = json::array();
  std::ostringstream tab;
  char line[200];
  std::snprintf(line, sizeof line, "%-5s %-7s | %-8s %8s %8s %8s | %-8s %8s %8s %8s\n", "tau",
                "method", "HPLC", "LB", "UB", "length", "RIA", "LB", "UB", "length");
  tab << line;
  auto cell = [](const EstimatorRow& r, char* buf, std::size_t n) {
    if (r.has_ci)
      std::snprintf(buf, n, "%-8.4g %8.4g %8.4g %8.4g", r.estimate, r.ci.lower, r.ci.upper,
                    r.ci.length());
    else
      std::snprintf(buf, n, "%-8.4g %8s %8s %8s", r.estimate, "--", "--", "--");
  };
  for (double tau : taus)
    for (const char* m : {"EMP", "EL", "DRM", "DRM-EE"}) {
      const EstimatorRow* g[2] = {nullptr, nullptr};
      for (const auto& r : rows)
        if (r.tau == tau && r.method == m) g[r.group] = &r;
      char a[80], b[80];
      cell(*g[0], a, sizeof a);
      cell(*g[1], b, sizeof b);
      std::snprintf(line, sizeof line, "%-5.2f %-7s | %s | %s\n", tau, m, a, b);
      tab << line;
      for (int gi = 0; gi < 2; ++gi) {
        json r = {{"tau", tau}, {"method", m}, {"group", gi}, {"estimate", g[gi]->estimate}};
        if (g[gi]->has_ci) r.update({{"lower", g[gi]->ci.lower}, {"upper", g[gi]->ci.upper}});
        j["rows"].push_back(r);
      }
    }
  Common o;
  o.as_json = as_json;
  emit(o, j, tab.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-sample density ratio model empirical likelihood with estimating equations"};
  app.require_subcommand(1);

  Common fit_o, test_o, ci_o;
  auto* fit = app.add_subcommand("fit", "fit the model and print estimates");
  add_common(fit, fit_o);

  auto* test = app.add_subcommand("test", "likelihood ratio tests");
  add_common(test, test_o);
  std::string kind = "validity";
  int m = 1, k = 0;
  double value = 1.0;
  test->add_option("--kind", kind, "validity, partial, psi");
  test->add_option("--m", m, "trailing equations tested by --kind partial");
  test->add_option("--k", k, "psi coordinate for --kind psi");
  test->add_option("--value", value, "null value of psi_k (natural scale)");

  auto* ci = app.add_subcommand("ci", "likelihood ratio confidence intervals");
  add_common(ci, ci_o);
  std::string target = "psi:0";
  ci->add_option("--target", target, "psi:k | cdf:group:x0 | quantile:group:tau");

  auto* sim = app.add_subcommand("simulate", "Monte Carlo tables");
  std::string scenario, out;
  int reps = 0;
  long long seed = -1;
  bool full = false, serial = false, sim_json = false;
  sim->add_option("--scenario", scenario, "scenario JSON file")->required();
  sim->add_option("--reps", reps, "override replications");
  sim->add_option("--seed", seed, "override seed");
  sim->add_option("--out", out, "write <out>.csv, <out>.txt, <out>.json");
  sim->add_flag("--full", full, "2000 replications over all four size pairs");
  sim->add_flag("--serial", serial, "disable OpenMP");
  sim->add_flag("--json", sim_json, "structured output");

  auto* demo = app.add_subcommand("demo-cyclosporine", "quantile table for the cyclosporine split");
  bool demo_json = false;
  demo->add_flag("--json", demo_json, "structured output");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*fit) return cmd_fit(fit_o);
    if (*test) return cmd_test(test_o, kind, m, k, value);
    if (*ci) return cmd_ci(ci_o, target);
    if (*sim) return cmd_simulate(scenario, reps, seed, out, full, serial, sim_json);
    if (*demo) return cmd_demo(demo_json);
  } catch (const Error& e) {
    const std::string kind = to_string(e.kind());
    std::string msg = e.what();
    if (msg.rfind(kind + ": ", 0) == 0) msg.erase(0, kind.size() + 2);
    std::cerr << "error[" << kind << "]: " << msg << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
