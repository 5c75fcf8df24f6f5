#pragma once

#include "drmel/model.hpp"

namespace drmel {

// Data and basis evaluated once: Q(x) for every observation.
struct Design {
  TwoSampleData data;
  DrmBasis basis;
  RowMat Q;    // n x (d+1)
  Vec sumQ1;   // sum of Q over group 1
  double lam = 0.0;
  int n = 0;
  int dq() const { return static_cast<int>(Q.cols()); }
  EEArgs args(int k, double omega, const Vec& theta) const {
    return EEArgs{data.row(k), data.dx(), Q.data() + static_cast<Eigen::Index>(k) * Q.cols(),
                  dq(), omega, theta.data()};
  }
};

Design make_design(const TwoSampleData& data, const DrmBasis& basis);

// exp(theta'Q) with the exponent clamped at +-700; returns the clamp count.
int tilt(const Design& des, const Vec& theta, Vec& omega);

struct DualValue {
  double value = 0.0;
  Vec grad;
  Mat hess;
};
DualValue dual_loglik(const Design& des, const Vec& theta, bool derivs = true);

struct MultiplierPoint {
  double lambda = 0.0;
  Vec nu;
  Vec u() const;
  static MultiplierPoint from_u(const Vec& u);
};

struct InnerOptions {
  double tol = 1e-9;
  int max_iter = 200;
};

struct InnerResult {
  Vec u;
  double f = 0.0;         // -sum log D at u
  double residual = 0.0;  // max |sum G/D|
  int iterations = 0;
  bool ok = false;
  ErrorKind error = ErrorKind::Infeasible;
};

// Minimizes -sum log(1 + G_k'u) starting from u0 (or (lam, 0) if u0 is not
// feasible). G is n x (r+1) with first column omega - 1.
InnerResult solve_inner(const Mat& G, const Vec& u0, double lam,
                        const InnerOptions& opt = {});

// omega and G = (omega - 1, g) at eta; returns clamp count.
int stack_G(const Design& des, const EstimatingEquations& ees, const Vec& psi,
            const Vec& theta, Vec& omega, Mat& G);

MultiplierPoint solve_multipliers(const Design& des,
                                  const EstimatingEquations& ees,
                                  const Vec& psi, const Vec& theta,
                                  const InnerOptions& opt = {});

struct ProfileValue {
  bool ok = false;
  ErrorKind error = ErrorKind::Infeasible;
  double value = 0.0;
  Vec u;
  Vec grad;  // (psi, theta) envelope gradient
  double residual = 0.0;
  int clamped = 0;
  int inner_iterations = 0;
};

// eta = (psi, theta). `u0` is the warm start (may be empty).
ProfileValue profile_loglik(const Design& des, const EstimatingEquations& ees,
                            const Vec& eta, const Vec& u0, bool want_grad,
                            const InnerOptions& opt = {});

Vec weights(const Design& des, const EstimatingEquations& ees, const Vec& psi,
            const Vec& theta, const MultiplierPoint& mp);

}  // namespace drmel
