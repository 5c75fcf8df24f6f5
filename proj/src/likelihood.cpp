#include "drmel/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace drmel {

Design make_design(const TwoSampleData& data, const DrmBasis& basis) {
  Design des;
  des.data = data;
  des.basis = basis;
  des.n = data.n();
  des.lam = data.lambda_star();
  const int dq = basis.d + 1;
  des.Q.resize(des.n, dq);
  des.sumQ1 = Vec::Zero(dq);
  Vec q(dq);
  for (int k = 0; k < des.n; ++k) {
    q[0] = 1.0;
    basis.q(data.row(k), data.dx(), q.data() + 1);
    if (!q.allFinite())
      throw Error(ErrorKind::NonFiniteBasis,
                  "q(x) not finite at observation " + std::to_string(k + 1));
    des.Q.row(k) = q.transpose();
    if (data.group()[k] == 1) des.sumQ1 += q;
  }
  return des;
}

int tilt(const Design& des, const Vec& theta, Vec& omega) {
  omega.noalias() = des.Q * theta;
  int clamped = 0;
  for (Eigen::Index k = 0; k < omega.size(); ++k) {
    double e = omega[k];
    if (e > 700.0) { e = 700.0; ++clamped; }
    else if (e < -700.0) { e = -700.0; ++clamped; }
    omega[k] = std::exp(e);
  }
  return clamped;
}

DualValue dual_loglik(const Design& des, const Vec& theta, bool derivs) {
  Vec omega;
  tilt(des, theta, omega);
  const double lam = des.lam;
  DualValue out;
  out.value = theta.dot(des.sumQ1);
  if (derivs) {
    out.grad = des.sumQ1;
    out.hess = Mat::Zero(des.dq(), des.dq());
  }
  for (int k = 0; k < des.n; ++k) {
    const double h = 1.0 + lam * (omega[k] - 1.0);
    out.value -= std::log(h);
    if (derivs) {
      const auto Qk = des.Q.row(k).transpose();
      out.grad -= (lam * omega[k] / h) * Qk;
      out.hess.noalias() -= (lam * (1.0 - lam) * omega[k] / (h * h)) * Qk * Qk.transpose();
    }
  }
  return out;
}

Vec MultiplierPoint::u() const {
  Vec out(nu.size() + 1);
  out[0] = lambda;
  out.tail(nu.size()) = nu;
  return out;
}

MultiplierPoint MultiplierPoint::from_u(const Vec& u) {
  MultiplierPoint m;
  m.lambda = u[0];
  m.nu = u.tail(u.size() - 1);
  return m;
}

namespace {

// f = -sum log D; false if any D <= 0.
bool inner_value(const Mat& G, const Vec& u, Vec& D, double& f) {
  D.noalias() = G * u;
  f = 0.0;
  for (Eigen::Index k = 0; k < D.size(); ++k) {
    D[k] += 1.0;
    if (!(D[k] > 0.0)) return false;
    f -= std::log(D[k]);
  }
  return true;
}

}  // namespace

InnerResult solve_inner(const Mat& G, const Vec& u0, double lam,
                        const InnerOptions& opt) {
  const int m = static_cast<int>(G.cols());
  InnerResult res;
  Vec u = Vec::Zero(m);
  u[0] = lam;
  Vec D;
  double f;
  if (u0.size() == m && u0.allFinite()) {
    Vec D0;
    double f0;
    if (inner_value(G, u0, D0, f0)) u = u0;
  }
  if (!inner_value(G, u, D, f)) {
    res.error = ErrorKind::Infeasible;
    return res;
  }
  const double n = static_cast<double>(G.rows());
  const double tol = opt.tol * std::max(1.0, G.cwiseAbs().colwise().mean().maxCoeff());
  Vec grad(m), step(m), un(m), Dn;
  Mat H(m, m);
  for (int it = 0; it < opt.max_iter; ++it) {
    res.iterations = it + 1;
    Vec w = D.cwiseInverse();
    grad.noalias() = -(G.transpose() * w);
    res.residual = grad.cwiseAbs().maxCoeff();
    if (res.residual < tol) {
      // sum 1/D = n at a stationary point; it tends to 0 along an unbounded ray
      res.ok = std::fabs(w.sum() - n) < 1e-6 * n;
      if (!res.ok) {
        res.error = ErrorKind::Infeasible;
        res.u = u;
        return res;
      }
      break;
    }
    Mat Gw = G.array().colwise() * w.array();
    H.noalias() = Gw.transpose() * Gw;
    Eigen::LDLT<Mat> ldlt(H);
    step = -ldlt.solve(grad);
    if (!step.allFinite() || ldlt.info() != Eigen::Success) {
      res.error = ErrorKind::Infeasible;
      return res;
    }
    const double dec = -grad.dot(step);
    double a = 1.0;
    bool accepted = false;
    double fn = f;
    for (int hb = 0; hb < 60; ++hb) {
      un = u + a * step;
      if (inner_value(G, un, Dn, fn) && fn <= f - 1e-4 * a * dec + 1e-12 * std::fabs(f)) {
        accepted = true;
        break;
      }
      a *= 0.5;
    }
    if (!accepted) {
      // no further decrease is representable; accept if residual is tiny
      res.ok = res.residual < 1e3 * tol;
      res.error = ErrorKind::MaxIterations;
      break;
    }
    u = un;
    D = Dn;
    f = fn;
    // Unbounded below: zero is not inside the convex hull of the G rows.
    if (D.maxCoeff() > 1e12 * n) {
      res.error = ErrorKind::Infeasible;
      res.ok = false;
      res.u = u;
      return res;
    }
  }
  if (!res.ok && res.error != ErrorKind::Infeasible)
    res.error = ErrorKind::MaxIterations;
  res.u = u;
  res.f = f;
  return res;
}

int stack_G(const Design& des, const EstimatingEquations& ees, const Vec& psi,
            const Vec& theta, Vec& omega, Mat& G) {
  const int clamped = tilt(des, theta, omega);
  const int r = ees.r();
  G.resize(des.n, r + 1);
  G.col(0) = omega.array() - 1.0;
  if (r > 0) {
    std::vector<double> g(r);
    for (int k = 0; k < des.n; ++k) {
      ees.eval(des.args(k, omega[k], theta), psi, g.data(), nullptr, nullptr);
      for (int j = 0; j < r; ++j) G(k, j + 1) = g[j];
    }
  }
  return clamped;
}

MultiplierPoint solve_multipliers(const Design& des,
                                  const EstimatingEquations& ees,
                                  const Vec& psi, const Vec& theta,
                                  const InnerOptions& opt) {
  Vec omega;
  Mat G;
  stack_G(des, ees, psi, theta, omega, G);
  if (!G.allFinite())
    throw Error(ErrorKind::NonFiniteBasis, "non-finite estimating function");
  InnerResult ir = solve_inner(G, Vec(), des.lam, opt);
  if (!ir.ok) throw Error(ir.error, "multiplier equations not solved");
  return MultiplierPoint::from_u(ir.u);
}

ProfileValue profile_loglik(const Design& des, const EstimatingEquations& ees,
                            const Vec& eta, const Vec& u0, bool want_grad,
                            const InnerOptions& opt) {
  const int p = ees.p();
  const int dq = des.dq();
  const Vec psi = eta.head(p);
  const Vec theta = eta.tail(dq);
  ProfileValue out;
  Vec omega;
  Mat G;
  out.clamped = stack_G(des, ees, psi, theta, omega, G);
  if (!G.allFinite()) {
    out.error = ErrorKind::NonFiniteBasis;
    return out;
  }
  InnerResult ir = solve_inner(G, u0, des.lam, opt);
  out.inner_iterations = ir.iterations;
  out.residual = ir.residual;
  if (!ir.ok) {
    out.error = ir.error;
    return out;
  }
  out.ok = true;
  out.u = ir.u;
  out.value = ir.f + theta.dot(des.sumQ1);
  if (!want_grad) return out;

  const double lam = ir.u[0];
  const int r = ees.r();
  const Vec nu = ir.u.tail(r);
  out.grad = Vec::Zero(p + dq);
  Vec gth = des.sumQ1;
  Vec D = G * ir.u;
  D.array() += 1.0;
  Mat jpsi, jth;
  std::vector<double> g(r);
  for (int k = 0; k < des.n; ++k) {
    const auto Qk = des.Q.row(k).transpose();
    const double invD = 1.0 / D[k];
    gth -= (lam * omega[k] * invD) * Qk;
    if (r > 0) {
      ees.eval(des.args(k, omega[k], theta), psi, g.data(), p > 0 ? &jpsi : nullptr,
               &jth);
      gth.noalias() -= invD * (jth.transpose() * nu);
      if (p > 0) out.grad.head(p).noalias() -= invD * (jpsi.transpose() * nu);
    }
  }
  out.grad.tail(dq) = gth;
  return out;
}

Vec weights(const Design& des, const EstimatingEquations& ees, const Vec& psi,
            const Vec& theta, const MultiplierPoint& mp) {
  Vec omega;
  Mat G;
  stack_G(des, ees, psi, theta, omega, G);
  const Vec D = (G * mp.u()).array() + 1.0;
  if ((D.array() <= 0.0).any())
    throw Error(ErrorKind::NonPositiveWeight, "a weight denominator is not positive");
  return (D.array() * static_cast<double>(des.n)).inverse().matrix();
}

}  // namespace drmel
