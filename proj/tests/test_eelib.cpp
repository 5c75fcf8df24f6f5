#include "drmel/eelib.hpp"
#include "drmel/likelihood.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace drmel;

namespace {

// Analytic Jacobians against central differences at random (psi, theta, x).
void check_jacobians(const EstimatingEquations& ees, const char* basis, int probes = 20) {
  const auto d = testdata::lognormal_z(15, 15, 61);
  const Design des = make_design(d, make_basis(basis));
  std::mt19937_64 rng(62);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  const int p = ees.p(), r = ees.r(), dq = des.dq();
  for (int t = 0; t < probes; ++t) {
    const int k = t % des.n;
    Vec theta(dq), psi(p);
    for (int j = 0; j < dq; ++j) theta[j] = u(rng);
    for (int j = 0; j < p; ++j) psi[j] = ees.params()[j].start + u(rng);
    Vec omega;
    tilt(des, theta, omega);
    std::vector<double> g(r);
    Mat jp, jt, fp, ft;
    ees.eval(des.args(k, omega[k], theta), psi, g.data(), &jp, &jt);
    ees.eval_fd(des.args(k, omega[k], theta), psi, &fp, &ft);
    const double scale = 1.0 + jt.cwiseAbs().maxCoeff() + (p ? jp.cwiseAbs().maxCoeff() : 0.0);
    CHECK((jt - ft).cwiseAbs().maxCoeff() < 1e-6 * scale);
    if (p > 0) CHECK((jp - fp).cwiseAbs().maxCoeff() < 1e-6 * scale);
    for (double v : g) CHECK(std::isfinite(v));
  }
}

}  // namespace

TEST_CASE("analytic Jacobians match finite differences") {
  check_jacobians(ee::mean_ratio(), "log");
  check_jacobians(ee::aux_mean(1, 2.0, 1.1), "log");
  check_jacobians(ee::common_mean(), "log-log2");
  check_jacobians(ee::moments(), "log");
  check_jacobians(ee::entropy_ge(2.0), "log");
  check_jacobians(ee::entropy_ge(1.0), "log");
  check_jacobians(ee::entropy_ge(0.0), "log");
  check_jacobians(ee::cdf_points(0.8, 1.3), "log");
  check_jacobians(ee::quantile_points(0.3, 0.8, 0.6, 1.5), "log");
  check_jacobians(ee::cdf_at(1, 1.1, 0.4), "log");
  check_jacobians(ee::prevalence_bins({-1e9, 0.7, 1.8, 1e9}, {0.2, 0.3, 0.5}), "log");
  check_jacobians(ee::external_logistic_prospective({-0.5, 0.8}, {1}), "log");
  check_jacobians(ee::external_logistic_retrospective({-0.5, 0.8}, {1}, 0.4), "log");
  check_jacobians(ee::mean_ratio() + ee::aux_mean(1, 1.8), "log-log2");
}

TEST_CASE("equations vanish where they should") {
  const auto d = testdata::lognormal_z(5, 5, 63);
  const Design des = make_design(d, make_basis("log"));
  const Vec theta = Vec::Zero(2);
  double g[4];
  Vec psi(1);
  psi << 1.0;
  for (int k = 0; k < des.n; ++k) {
    ee::mean_ratio().eval(des.args(k, 1.0, theta), psi, g, nullptr, nullptr);
    CHECK(g[0] == 0.0);
    ee::common_mean().eval(des.args(k, 1.0, theta), Vec(), g, nullptr, nullptr);
    CHECK(g[0] == 0.0);
  }
}

TEST_CASE("expectations under the true model are zero") {
  // group-0 draws from LN(0,1); E0[X w - delta X] = 0 at the true (theta, delta)
  std::mt19937_64 rng(64);
  std::normal_distribution<double> z;
  const int n = 400000;
  const Design des = make_design(testdata::lognormal_z(3, 3, 65), make_basis("log"));
  Vec theta(2);
  theta << -0.125, 0.5;
  Vec psi(1);
  psi << std::exp(0.5);
  const auto ees = ee::mean_ratio() + ee::aux_mean(1, testdata::mu_z0());
  double s0 = 0, s1 = 0, q[2];
  for (int i = 0; i < n; ++i) {
    const double x = std::exp(z(rng));
    const double row[2] = {x, 1.0 + 0.5 * x + z(rng)};
    q[0] = 1.0;
    q[1] = std::log(x);
    const double w = std::exp(theta[0] + theta[1] * q[1]);
    const EEArgs a{row, 2, q, 2, w, theta.data()};
    double g[2];
    ees.eval(a, psi, g, nullptr, nullptr);
    s0 += g[0];
    s1 += g[1];
  }
  (void)des;
  CHECK(std::fabs(s0 / n) < 0.03);
  CHECK(std::fabs(s1 / n) < 0.02);
}

TEST_CASE("kappa scales the auxiliary target") {
  const double row[2] = {1.0, 3.0}, q[2] = {1.0, 0.0}, th[2] = {0.0, 0.0};
  const EEArgs a{row, 2, q, 2, 1.0, th};
  double g;
  ee::aux_mean(1, 2.0, 1.0).eval(a, Vec(), &g, nullptr, nullptr);
  CHECK(g == 1.0);
  ee::aux_mean(1, 2.0, 1.1).eval(a, Vec(), &g, nullptr, nullptr);
  CHECK(g == doctest::Approx(0.8));
}

TEST_CASE("moments recover sample means under uniform tilt") {
  const double row[1] = {3.0}, q[2] = {1.0, 0.0}, th[2] = {0.0, 0.0};
  const EEArgs a{row, 1, q, 2, 1.0, th};
  Vec psi(4);
  psi << 3.0, 3.0, 0.0, 0.0;
  double g[4];
  ee::moments().eval(a, psi, g, nullptr, nullptr);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 0.0);
  CHECK(ee::moments().r() == 4);
  CHECK(ee::moments().p() == 4);
}

TEST_CASE("parsing") {
  const auto e = ee::parse("mean_ratio + aux_mean(col=1,mu=2.5,kappa=0.9)");
  CHECK(e.r() == 2);
  CHECK(e.p() == 1);
  CHECK(ee::parse("none").empty());
  CHECK(ee::parse("").empty());
  CHECK(ee::parse("prevalence_bins(breaks=0;1;2,phis=0.1;0.2)").r() == 2);
  CHECK(ee::parse("external_prospective(gamma=0.1;0.2,ycols=1)").p() == 1);
  try {
    ee::parse("bogus(x=1)");
    FAIL("expected UnknownEE");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::UnknownEE);
  }
  CHECK_THROWS_AS(ee::parse("aux_mean(col=1)"), Error);
}

TEST_CASE("shared parameters are merged by name") {
  const auto e = ee::mean_ratio() + ee::mean_ratio();
  CHECK(e.r() == 2);
  CHECK(e.p() == 1);
}
