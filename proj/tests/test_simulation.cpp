#include "drmel/simulation.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace drmel;

namespace {

Scenario small_scenario() {
  Scenario s;
  s.name = "small";
  s.family = "lognormal";
  s.group0 = {0.0, 1.0};
  s.group1 = {0.5, 1.0};
  s.aux.enabled = true;
  s.sizes = {{40, 40}};
  s.basis = "log";
  s.kappas = {1.0};
  s.intervals = true;
  s.tests = true;
  s.reps = 6;
  s.seed = 99;
  return s;
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

TEST_CASE("generated samples follow the requested families") {
  Scenario s = small_scenario();
  const auto d = generate(s, 20000, 20000, 0);
  std::vector<double> l1;
  for (double x : d.column(0, 1)) l1.push_back(std::log(x));
  CHECK(mean(l1) == doctest::Approx(0.5).epsilon(0.05));
  CHECK(mean(d.column(1, 0)) == doctest::Approx(1.0 + 0.5 * std::exp(0.5)).epsilon(0.02));

  s.family = "gamma";
  s.group0 = {6.0, 1.5};
  s.aux.enabled = false;
  const auto g = generate(s, 20000, 10, 0);
  CHECK(mean(g.column(0, 0)) == doctest::Approx(9.0).epsilon(0.01));
  CHECK(g.dx() == 1);
  CHECK(family_mean("gamma", {6.0, 1.5}) == 9.0);
  CHECK(family_mean("lognormal", {0.0, 1.0}) == doctest::Approx(std::exp(0.5)));
  CHECK(family_quantile("normal", {18, 2}, 0.5) == doctest::Approx(18.0));
}

TEST_CASE("replicates are reproducible and independent of evaluation order") {
  const Scenario s = small_scenario();
  const auto a = generate(s, 40, 40, 3);
  const auto b = generate(s, 40, 40, 3);
  CHECK(a.values() == b.values());
  CHECK_FALSE(generate(s, 40, 40, 4).values() == a.values());
  CHECK_FALSE(generate(s, 50, 40, 3).values().topRows(5) == a.values().topRows(5));
  const auto cells = scenario_cells(s);
  run_replicate(s, cells, 1);
  const auto x = run_replicate(s, cells, 2);
  const auto y = run_replicate(s, cells, 2);
  REQUIRE(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(x[i].estimate == y[i].estimate);
    CHECK(x[i].lower == y[i].lower);
  }
}

TEST_CASE("parallel and serial tables are identical") {
  const Scenario s = small_scenario();
  const MetricTable a = run_table(s, false);
  const MetricTable b = run_table(s, true);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].mse100 == b.rows[i].mse100);
    CHECK(a.rows[i].cp == b.rows[i].cp);
    CHECK(a.rows[i].al == b.rows[i].al);
    CHECK(a.rows[i].p_values == b.rows[i].p_values);
  }
  CHECK(a.find(40, 40, "delta", "DRM") != nullptr);
  CHECK(a.find(40, 40, "delta", "DRM-EE k=1.00")->test_used == s.reps);
}

TEST_CASE("scenario JSON round trip and errors") {
  const Scenario s = small_scenario();
  const Scenario t = scenario_from_json(scenario_to_json(s));
  CHECK(t.name == s.name);
  CHECK(t.sizes == s.sizes);
  CHECK(t.seed == s.seed);
  CHECK(t.kappas == s.kappas);
  CHECK(t.aux.enabled);
  try {
    scenario_from_json(R"({"name":"x","family":"cauchy","group0":[0,1],"group1":[0,1]})");
    FAIL("expected UnknownFamily");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnknownFamily);
  }
}

TEST_CASE("quantile targets carry population truths") {
  Scenario s;
  s.name = "q";
  s.family = "normal";
  s.group0 = {18, 2};
  s.group1 = {18, 3};
  s.sizes = {{30, 30}};
  s.basis = "x-x2";
  s.target = Target::Quantile;
  s.taus = {0.5};
  s.groups = {1};
  s.intervals = false;
  s.tests = false;
  const auto cells = scenario_cells(s);
  CHECK(cells.size() == 4);
  for (const auto& c : cells) CHECK(c.truth == doctest::Approx(18.0));
}
