#pragma once

#include "drmel/model.hpp"

#include <cmath>
#include <random>

namespace testdata {

// LN(0,1) / LN(mu1,1) with Z = 1 + 0.5 X + N(0,1) in column 1.
inline drmel::TwoSampleData lognormal_z(int n0, int n1, unsigned seed, double mu1 = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  drmel::Mat v(n0 + n1, 2);
  std::vector<int> g(n0 + n1);
  for (int k = 0; k < n0 + n1; ++k) {
    g[k] = k < n0 ? 0 : 1;
    v(k, 0) = std::exp(z(rng) + (k < n0 ? 0.0 : mu1));
    v(k, 1) = 1.0 + 0.5 * v(k, 0) + z(rng);
  }
  return drmel::TwoSampleData(v, g);
}

inline drmel::TwoSampleData normal2(int n0, int n1, unsigned seed, double m0, double s0,
                                    double m1, double s1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> a(n0), b(n1);
  for (auto& x : a) x = m0 + s0 * z(rng);
  for (auto& x : b) x = m1 + s1 * z(rng);
  return drmel::TwoSampleData::from_groups(a, b);
}

inline double mu_z0() { return 1.0 + 0.5 * std::exp(0.5); }

}  // namespace testdata
