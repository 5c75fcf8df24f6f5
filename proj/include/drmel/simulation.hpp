#pragma once

#include "drmel/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace drmel {

// lognormal: (mu, sigma) on the log scale; normal: (mean, sd);
// gamma: (shape, scale).
struct FamilyParams {
  double a = 0.0;
  double b = 1.0;
};

// Z = intercept + slope * X + N(0, sd^2), same in both groups.
struct AuxSpec {
  bool enabled = false;
  double intercept = 1.0;
  double slope = 0.5;
  double sd = 1.0;
};

enum class Target { MeanRatio, Quantile };

struct Scenario {
  std::string name;
  std::string family;  // lognormal, normal, gamma
  FamilyParams group0, group1;
  AuxSpec aux;
  std::vector<std::pair<int, int>> sizes;
  std::string basis;
  Target target = Target::MeanRatio;
  std::vector<double> kappas = {1.0};  // MeanRatio: DRM-EE variants
  std::vector<double> taus;            // Quantile
  std::vector<int> groups = {0, 1};    // Quantile
  std::vector<std::string> methods;    // empty: all
  bool intervals = true;
  bool tests = true;
  int reps = 500;
  std::uint64_t seed = 1;
  double level = 0.95;
};

Scenario scenario_from_json(const std::string& text);
Scenario load_scenario(const std::string& path);
std::string scenario_to_json(const Scenario& s);

// Population summaries of one group.
double family_mean(const std::string& family, const FamilyParams& p);
double family_quantile(const std::string& family, const FamilyParams& p, double tau);

std::uint64_t replicate_stream(std::uint64_t seed, std::uint64_t rep);

// Data for one replicate at one size pair; column 1 holds Z when enabled.
TwoSampleData generate(const Scenario& s, int n0, int n1, std::uint64_t rep);

// One table cell: method x target at one size pair.
struct Cell {
  int n0 = 0, n1 = 0;
  std::string target;  // "delta" or "q<tau>_g<group>"
  std::string method;
  double truth = 0.0;
  bool point = true;
  bool interval = false;
  bool test = false;
};

struct CellOutcome {
  bool ok = false;
  double estimate = 0.0;
  bool ci_ok = false;
  double lower = 0.0, upper = 0.0;
  bool test_ok = false;
  double p_value = 1.0;
};

struct CellSummary {
  Cell cell;
  int used = 0, failed = 0;
  bool flagged = false;  // failures above 2% of replicates
  double rb = 0.0, rb_se = 0.0;
  double mse100 = 0.0, mse100_se = 0.0;
  int ci_used = 0, ci_failed = 0;
  double cp = 0.0, cp_se = 0.0;
  double al = 0.0, al_se = 0.0;
  int test_used = 0, test_failed = 0;
  double reject = 0.0, reject_se = 0.0;
  std::vector<double> p_values;
};

struct MetricTable {
  std::string scenario;
  int reps = 0;
  std::vector<CellSummary> rows;
  double seconds = 0.0;
  int threads = 1;

  const CellSummary* find(int n0, int n1, const std::string& target,
                          const std::string& method) const;
  std::string to_csv() const;
  std::string to_text() const;
  std::string to_json() const;
};

std::vector<Cell> scenario_cells(const Scenario& s);

// All cells of one replicate, in scenario_cells order.
std::vector<CellOutcome> run_replicate(const Scenario& s, const std::vector<Cell>& cells,
                                       std::uint64_t rep);

MetricTable aggregate(const Scenario& s, const std::vector<Cell>& cells,
                      const std::vector<std::vector<CellOutcome>>& per_rep);

// parallel = false is the serial reference path.
MetricTable run_table(const Scenario& s, bool parallel = true);

}  // namespace drmel
