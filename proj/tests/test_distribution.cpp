#include "drmel/distribution.hpp"
#include "drmel/eelib.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace drmel;

TEST_CASE("fitted CDFs run from 0 to 1") {
  const Design des = make_design(testdata::lognormal_z(60, 80, 51), make_basis("log"));
  const auto f = fit_drm_ee(des, ee::mean_ratio() + ee::aux_mean(1, testdata::mu_z0()));
  for (int g = 0; g < 2; ++g) {
    CHECK(cdf_estimate(des, f, g, -1.0) == 0.0);
    CHECK(cdf_estimate(des, f, g, 1e9) == doctest::Approx(1.0).epsilon(1e-8));
    double prev = 0.0;
    for (double x = 0.05; x < 20; x *= 1.3) {
      const double c = cdf_estimate(des, f, g, x);
      CHECK(c >= prev);
      prev = c;
    }
  }
}

TEST_CASE("EE-free masses match the closed form") {
  const auto d = testdata::lognormal_z(40, 70, 52);
  const Design des = make_design(d, make_basis("log"));
  const auto f = fit_drm(des);
  const double n0 = 40, n1 = 70;
  for (int k = 0; k < des.n; ++k) {
    const double w = std::exp(f.theta[0] + f.theta[1] * std::log(d.x(k)));
    CHECK(f.weights[k] == doctest::Approx(1.0 / (n0 + n1 * w)).epsilon(1e-10));
  }
}

TEST_CASE("quantile and CDF round trip") {
  const Design des = make_design(testdata::lognormal_z(50, 50, 53), make_basis("log"));
  const auto f = fit_drm(des);
  for (int g = 0; g < 2; ++g) {
    for (double tau : {0.1, 0.33, 0.5, 0.9}) {
      const double q = quantile_estimate(des, f, g, tau);
      CHECK(cdf_estimate(des, f, g, q) >= tau - 1e-12);
      CHECK(cdf_estimate(des, f, g, std::nextafter(q, -1.0)) < tau);
    }
  }
}

TEST_CASE("weighted quantile with ties") {
  CHECK(weighted_quantile({3, 1, 2, 2}, {0.25, 0.25, 0.25, 0.25}, 0.5) == 2.0);
  CHECK(weighted_quantile({3, 1, 2, 2}, {0.25, 0.25, 0.25, 0.25}, 0.26) == 2.0);
  CHECK(weighted_quantile({3, 1, 2, 2}, {0.25, 0.25, 0.25, 0.25}, 0.76) == 3.0);
  CHECK(weighted_quantile({1, 2}, {0.5, 0.5}, 0.5) == 1.0);
}

TEST_CASE("type-1 sample quantile") {
  std::vector<double> x = {5, 1, 4, 2, 3};
  CHECK(empirical_quantile(x, 0.2) == 1.0);
  CHECK(empirical_quantile(x, 0.21) == 2.0);
  CHECK(empirical_quantile(x, 0.5) == 3.0);
  CHECK(empirical_quantile(x, 1.0) == 5.0);
  CHECK(empirical_quantile(x, 0.0) == 1.0);
}

TEST_CASE("one-sample mean EL") {
  std::vector<double> x = {1, 2, 4, 7};
  std::vector<double> w;
  CHECK(el_mean_logratio(x, 3.5, &w) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(el_mean_logratio(x, 0.5) == -std::numeric_limits<double>::infinity());
  const double lr = el_mean_logratio(x, 2.5, &w);
  CHECK(lr < 0.0);
  double s = 0, m = 0;
  for (int i = 0; i < 4; ++i) {
    s += w[i];
    m += w[i] * x[i];
  }
  CHECK(s == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(m == doctest::Approx(2.5).epsilon(1e-10));
  double direct = 0;
  for (double v : w) direct += std::log(4 * v);
  CHECK(lr == doctest::Approx(direct).epsilon(1e-10));
}

TEST_CASE("common-mean EL weights share one mean") {
  const auto d = testdata::normal2(30, 40, 54, 10, 2, 10.5, 3);
  const auto el = common_mean_el(d.column(0, 0), d.column(0, 1));
  double m0 = 0, m1 = 0;
  const auto x0 = d.column(0, 0), x1 = d.column(0, 1);
  for (std::size_t i = 0; i < x0.size(); ++i) m0 += el.w0[i] * x0[i];
  for (std::size_t i = 0; i < x1.size(); ++i) m1 += el.w1[i] * x1[i];
  CHECK(m0 == doctest::Approx(el.mu).epsilon(1e-9));
  CHECK(m1 == doctest::Approx(el.mu).epsilon(1e-9));
  // mu maximizes the profile
  for (double dm : {-0.05, 0.05})
    CHECK(el_mean_logratio(x0, el.mu + dm) + el_mean_logratio(x1, el.mu + dm) <= el.logratio);
}

TEST_CASE("mean ratio intervals") {
  const auto d = testdata::lognormal_z(100, 100, 55);
  const auto x0 = d.column(0, 0), x1 = d.column(0, 1);
  const Interval a = emp_el_ratio_ci(x0, x1, 0.95);
  const Interval b = emp_na_ratio_ci(x0, x1, 0.95);
  CHECK(a.lower < a.estimate);
  CHECK(a.upper > a.estimate);
  CHECK(b.estimate == a.estimate);
  CHECK(b.lower * b.upper == doctest::Approx(b.estimate * b.estimate).epsilon(1e-12));
  CHECK(a.length() / b.length() == doctest::Approx(1.0).epsilon(0.35));
}

TEST_CASE("one-sample EL quantile interval on a small sample") {
  std::vector<double> x;
  for (int i = 1; i <= 20; ++i) x.push_back(i);
  const Interval c = emp_quantile_ci(x, 0.5, 0.95);
  CHECK(c.estimate == 10.0);
  CHECK(c.lower < 10.0);
  CHECK(c.upper > 10.0);
  CHECK(c.lower == std::floor(c.lower));
  CHECK(c.upper == std::floor(c.upper));
  // symmetric for the median of 1..20 with the supremum convention
  CHECK(c.lower + c.upper == doctest::Approx(21.0));
}

TEST_CASE("estimators agree on identical samples") {
  std::vector<double> x = {1.1, 2.3, 0.7, 3.9, 1.8, 2.6, 0.4, 5.2, 1.3, 2.0};
  const auto d = TwoSampleData::from_groups(x, x);
  const auto rows = compare_estimators(d, make_basis("log"), ee::common_mean(), {0.25, 0.5, 0.75},
                                       0.95, false);
  CHECK(rows.size() == 24);
  for (std::size_t i = 0; i < rows.size(); i += 4)
    for (int j = 1; j < 4; ++j) CHECK(rows[i + j].estimate == rows[i].estimate);
}
