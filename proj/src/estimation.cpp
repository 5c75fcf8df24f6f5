#include "drmel/estimation.hpp"

#include "drmel/asymptotics.hpp"

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace drmel {

Vec FitResult::eta() const {
  Vec e(psi.size() + theta.size());
  e << psi, theta;
  return e;
}

FitResult fit_drm(const Design& des) {
  const int dq = des.dq();
  Vec theta = Vec::Zero(dq);
  DualValue dv = dual_loglik(des, theta);
  const double tol = 1e-10 * (1.0 + des.sumQ1.cwiseAbs().maxCoeff());
  FitResult fit;
  int it = 0;
  for (; it < 200; ++it) {
    if (dv.grad.cwiseAbs().maxCoeff() < tol) {
      fit.converged = true;
      break;
    }
    const Vec step = (-dv.hess).ldlt().solve(dv.grad);
    double a = 1.0;
    bool ok = false;
    for (int hb = 0; hb < 60; ++hb) {
      const Vec tn = theta + a * step;
      DualValue dn = dual_loglik(des, tn);
      if (std::isfinite(dn.value) &&
          dn.value >= dv.value - 1e-13 * (1.0 + std::fabs(dv.value))) {
        theta = tn;
        dv = std::move(dn);
        ok = true;
        break;
      }
      a *= 0.5;
    }
    if (!ok) break;
  }
  fit.iterations = it;
  fit.grad_norm = dv.grad.cwiseAbs().maxCoeff();
  fit.theta = theta;
  fit.psi = Vec();
  fit.psi_natural = Vec();
  fit.loglik = dv.value;
  fit.multipliers.lambda = des.lam;
  fit.multipliers.nu = Vec();
  Vec omega;
  fit.clamped = tilt(des, theta, omega);
  fit.weights = (1.0 / (des.n * (1.0 + des.lam * (omega.array() - 1.0)))).matrix();
  fit.residual = std::fabs(((omega.array() - 1.0) / (1.0 + des.lam * (omega.array() - 1.0))).sum());
  fit.cov_eta = drm_theta_covariance(des, theta, fit.weights) / des.n;
  if (fit.clamped > 0) fit.converged = false;
  if (!fit.converged) fit.message = "dual Newton did not reach tolerance";
  return fit;
}

Vec default_init(const Design& des, const EstimatingEquations& ees,
                 const FitResult& dual) {
  const int p = ees.p(), r = ees.r(), dq = des.dq();
  Vec eta(p + dq);
  eta.tail(dq) = dual.theta;
  if (p == 0) return eta;
  Vec psi(p);
  for (int j = 0; j < p; ++j) psi[j] = ees.params()[j].start;
  Vec omega;
  tilt(des, dual.theta, omega);
  auto moment = [&](const Vec& ps, Mat* jac) {
    Vec m = Vec::Zero(r);
    if (jac) jac->setZero(r, p);
    std::vector<double> g(r);
    Mat jp, jt;
    for (int k = 0; k < des.n; ++k) {
      ees.eval(des.args(k, omega[k], dual.theta), ps, g.data(), jac ? &jp : nullptr,
               nullptr);
      for (int i = 0; i < r; ++i) m[i] += dual.weights[k] * g[i];
      if (jac) *jac += dual.weights[k] * jp;
    }
    return m;
  };
  Mat Jm;
  Vec m = moment(psi, &Jm);
  for (int it = 0; it < 50 && m.allFinite(); ++it) {
    const Vec step = -(Jm.transpose() * Jm + 1e-12 * Mat::Identity(p, p))
                          .ldlt()
                          .solve(Jm.transpose() * m);
    double a = 1.0;
    bool ok = false;
    for (int hb = 0; hb < 40; ++hb) {
      Mat Jn;
      const Vec pn = psi + a * step;
      const Vec mn = moment(pn, &Jn);
      if (mn.allFinite() && mn.squaredNorm() <= m.squaredNorm()) {
        psi = pn;
        m = mn;
        Jm = Jn;
        ok = true;
        break;
      }
      a *= 0.5;
    }
    if (!ok || step.cwiseAbs().maxCoeff() < 1e-12 * (1.0 + psi.cwiseAbs().maxCoeff()))
      break;
  }
  eta.head(p) = psi;
  return eta;
}

void fill_fit(const Design& des, const EstimatingEquations& ees, FitResult& fit,
              bool covariance) {
  fit.psi_natural = ees.to_natural(fit.psi);
  fit.weights = weights(des, ees, fit.psi, fit.theta, fit.multipliers);
  if (covariance) {
    AsymptoticMatrices mats = estimate_matrices(des, ees, fit.psi, fit.theta, fit.weights);
    fit.cov_eta = mats.Jinv / des.n;
  }
}

namespace {

struct Objective {
  const Design& des;
  const EstimatingEquations& ees;
  Vec base;                 // full eta; free coordinates overwritten
  std::vector<int> free;
  Vec u;                    // warm start, updated on every feasible call
  int calls = 0;

  Vec full(const Vec& x) const {
    Vec e = base;
    for (std::size_t j = 0; j < free.size(); ++j) e[free[j]] = x[j];
    return e;
  }
  // Negated profile log-EL and its gradient on the free coordinates.
  bool operator()(const Vec& x, double& F, Vec* g, ProfileValue* keep = nullptr) {
    ++calls;
    ProfileValue pv = profile_loglik(des, ees, full(x), u, g != nullptr);
    if (!pv.ok || pv.clamped > 0 || !std::isfinite(pv.value)) return false;
    u = pv.u;
    F = -pv.value;
    if (g) {
      g->resize(free.size());
      for (std::size_t j = 0; j < free.size(); ++j) (*g)[j] = -pv.grad[free[j]];
    }
    if (keep) *keep = std::move(pv);
    return true;
  }
};

// Central-difference Hessian of F from analytic gradients.
bool fd_hessian(Objective& obj, const Vec& x, Mat& H) {
  const int m = static_cast<int>(x.size());
  H.resize(m, m);
  const Vec u_save = obj.u;
  double F;
  Vec gp, gm, g0;
  if (!obj(x, F, &g0)) return false;
  for (int j = 0; j < m; ++j) {
    const double h = 1e-5 * (1.0 + std::fabs(x[j]));
    Vec xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    const bool okp = obj(xp, F, &gp);
    obj.u = u_save;
    const bool okm = obj(xm, F, &gm);
    obj.u = u_save;
    if (okp && okm) H.col(j) = (gp - gm) / (2 * h);
    else if (okp) H.col(j) = (gp - g0) / h;
    else if (okm) H.col(j) = (g0 - gm) / h;
    else return false;
  }
  H = 0.5 * (H + H.transpose()).eval();
  return H.allFinite();
}

// Gauss-Newton on sum_k w_k G_k(eta) = 0 with fixed dual weights w > 0; a
// zero puts the origin inside the hull of the G rows.
bool feasible_start(Objective& obj, Vec& x) {
  const Design& des = obj.des;
  const Vec w = fit_drm(des).weights;
  const int m = static_cast<int>(x.size());
  const int p = obj.ees.p(), dq = des.dq();
  auto resid = [&](const Vec& xx) {
    const Vec e = obj.full(xx);
    Vec omega;
    Mat G;
    stack_G(des, obj.ees, e.head(p), e.tail(dq), omega, G);
    return Vec(G.transpose() * w);
  };
  double F;
  Vec r = resid(x);
  for (int it = 0; it < 100; ++it) {
    if (!r.allFinite()) return false;
    Mat Jr(r.size(), m);
    for (int j = 0; j < m; ++j) {
      const double h = fd_step(x[j]);
      Vec xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      Jr.col(j) = (resid(xp) - resid(xm)) / (2 * h);
    }
    const Vec step = -Jr.completeOrthogonalDecomposition().solve(r);
    double a = 1.0;
    Vec xn, rn;
    for (int hb = 0; hb < 30; ++hb, a *= 0.5) {
      xn = x + a * step;
      rn = resid(xn);
      if (rn.allFinite() && rn.norm() < r.norm()) break;
    }
    if (!(rn.norm() < r.norm())) return false;
    x = xn;
    r = rn;
    obj.u = Vec();
    if (obj(x, F, nullptr)) return true;
  }
  return false;
}

Mat safe_inverse_hessian(const Mat& H, const Vec& g) {
  const int m = static_cast<int>(H.rows());
  Eigen::SelfAdjointEigenSolver<Mat> es(H);
  if (es.info() == Eigen::Success && es.eigenvalues().minCoeff() > 0.0) {
    return es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
           es.eigenvectors().transpose();
  }
  if (es.info() == Eigen::Success) {
    // flip and floor the spectrum
    Vec ev = es.eigenvalues().cwiseAbs();
    const double floor = std::max(1e-8, 1e-6 * ev.maxCoeff());
    for (int i = 0; i < m; ++i) ev[i] = std::max(ev[i], floor);
    return es.eigenvectors() * ev.cwiseInverse().asDiagonal() *
           es.eigenvectors().transpose();
  }
  const double s = 1.0 / std::max(1.0, g.cwiseAbs().maxCoeff());
  return s * Mat::Identity(m, m);
}

}  // namespace

FitResult fit_drm_ee(const Design& des, const EstimatingEquations& ees,
                     const FitOptions& opt) {
  const int p = ees.p(), dq = des.dq();
  const int dim = p + dq;
  Vec eta0;
  if (opt.init.size() == dim) {
    eta0 = opt.init;
  } else {
    FitResult dual = fit_drm(des);
    if (ees.empty()) {
      dual.psi_natural = Vec();
      dual.psi = Vec();
      return dual;
    }
    eta0 = default_init(des, ees, dual);
  }
  std::vector<bool> is_fixed(dim, false);
  for (int j : opt.fixed) is_fixed.at(j) = true;
  Objective obj{des, ees, eta0, {}, opt.u0};
  for (int j = 0; j < dim; ++j)
    if (!is_fixed[j]) obj.free.push_back(j);
  const int m = static_cast<int>(obj.free.size());
  Vec x(m);
  for (int j = 0; j < m; ++j) x[j] = eta0[obj.free[j]];

  FitResult fit;
  double F;
  Vec g;
  ProfileValue pv;
  if (!obj(x, F, &g, &pv)) {
    // retry from a cold multiplier start, then search for a feasible point
    obj.u = Vec();
    bool ok = obj(x, F, &g, &pv);
    if (!ok && feasible_start(obj, x)) ok = obj(x, F, &g, &pv);
    if (!ok)
      throw Error(pv.error == ErrorKind::NonFiniteBasis ? pv.error : ErrorKind::Infeasible,
                  "profile likelihood undefined at the starting point");
  }
  const double gtol = opt.gtol;
  Mat Hinv;
  bool fresh = false;
  auto refresh = [&]() {
    Mat H;
    const Vec u_keep = obj.u;
    if (m > 0 && fd_hessian(obj, x, H)) Hinv = safe_inverse_hessian(H, g);
    else Hinv = Mat::Identity(m, m) / std::max(1.0, g.cwiseAbs().maxCoeff());
    obj.u = u_keep;
    fresh = true;
  };
  if (m > 0) refresh();
  int it = 0;
  bool converged = m == 0;
  for (; it < opt.max_iter && m > 0; ++it) {
    const double gn = g.cwiseAbs().maxCoeff();
    if (gn < gtol) {
      converged = true;
      break;
    }
    Vec d = -Hinv * g;
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      refresh();
      d = -Hinv * g;
      slope = g.dot(d);
      if (!(slope < 0.0)) break;
    }
    // with coordinates held fixed only the value is wanted: stop once the
    // Newton decrement is negligible
    if (!opt.fixed.empty() && -0.5 * slope < 1e-12 * (1.0 + std::fabs(F)) &&
        gn < 1e4 * gtol) {
      if (!fresh) {
        refresh();
        continue;
      }
      converged = true;
      break;
    }
    double a = 1.0, Fn = F;
    Vec xn, gnv;
    ProfileValue pvn;
    bool accepted = false;
    const Vec u_keep = obj.u;
    for (int hb = 0; hb < 60; ++hb) {
      xn = x + a * d;
      obj.u = u_keep;
      if (obj(xn, Fn, &gnv, &pvn)) {
        const bool armijo = Fn <= F + 1e-4 * a * slope;
        const bool flat = std::fabs(Fn - F) <= 1e-12 * (1.0 + std::fabs(F)) &&
                          gnv.cwiseAbs().maxCoeff() < gn;
        if (armijo || flat) {
          accepted = true;
          break;
        }
      }
      a *= 0.5;
    }
    if (!accepted) {
      obj.u = u_keep;
      if (fresh) break;
      refresh();
      continue;
    }
    const Vec s = xn - x, y = gnv - g;
    x = xn;
    F = Fn;
    g = gnv;
    pv = std::move(pvn);
    fresh = false;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const Vec Hy = Hinv * y;
      const double rho = 1.0 / sy;
      Hinv += (rho * rho * y.dot(Hy) + rho) * s * s.transpose() -
              rho * (Hy * s.transpose() + s * Hy.transpose());
    }
  }
  fit.iterations = it;
  fit.grad_norm = m > 0 ? g.cwiseAbs().maxCoeff() : 0.0;
  fit.converged = converged;
  const Vec eta = obj.full(x);
  fit.psi = eta.head(p);
  fit.theta = eta.tail(dq);
  fit.loglik = -F;
  fit.multipliers = MultiplierPoint::from_u(pv.u);
  fit.residual = pv.residual;
  fit.clamped = pv.clamped;
  if (!fit.converged) {
    std::ostringstream os;
    os << "outer solver stopped with gradient " << fit.grad_norm;
    fit.message = os.str();
  }
  fill_fit(des, ees, fit, opt.covariance);
  return fit;
}

FitResult fit_multistart(const Design& des, const EstimatingEquations& ees, int starts,
                         std::uint64_t seed, const FitOptions& opt) {
  FitResult best = fit_drm_ee(des, ees, opt);
  if (starts <= 1 || ees.empty()) return best;
  const Vec base = best.eta();
  boost::random::mt19937_64 rng(seed);
  boost::random::normal_distribution<double> z;
  for (int s = 1; s < starts; ++s) {
    FitOptions o = opt;
    o.init = base;
    for (int j = 0; j < base.size(); ++j) {
      const double step = 0.2 * (1.0 + std::fabs(base[j])) * z(rng);
      if (std::find(opt.fixed.begin(), opt.fixed.end(), j) == opt.fixed.end()) o.init[j] += step;
    }
    try {
      FitResult f = fit_drm_ee(des, ees, o);
      if (f.converged && (!best.converged || f.loglik > best.loglik)) best = std::move(f);
    } catch (const Error&) {
    }
  }
  return best;
}

FitResult fit_constrained(const Design& des, const EstimatingEquations& ees,
                          const Constraint& c, const FitOptions& opt) {
  const int p = ees.p(), dq = des.dq();
  const int dim = p + dq;
  const int q = c.q;
  if (q > dim) throw Error(ErrorKind::RankDeficientConstraint, "more constraints than parameters");
  Vec eta;
  if (opt.init.size() == dim) {
    eta = opt.init;
  } else {
    FitOptions o2;
    o2.covariance = false;
    eta = fit_drm_ee(des, ees, o2).eta();
  }
  auto jacH = [&](const Vec& e) -> Mat {
    if (c.jac) return c.jac(e);
    Mat Jh(q, dim);
    for (int j = 0; j < dim; ++j) {
      const double h = fd_step(e[j]);
      Vec ep = e, em = e;
      ep[j] += h;
      em[j] -= h;
      Jh.col(j) = (c.H(ep) - c.H(em)) / (2 * h);
    }
    return Jh;
  };

  Objective obj{des, ees, Vec::Zero(dim), {}, opt.u0};
  for (int j = 0; j < dim; ++j) obj.free.push_back(j);
  double F;
  Vec g;
  ProfileValue pv;
  if (!obj(eta, F, &g, &pv)) {
    obj.u = Vec();
    if (!obj(eta, F, &g, &pv))
      throw Error(ErrorKind::Infeasible, "profile likelihood undefined at the start");
  }
  const double n = des.n;
  Vec v = Vec::Zero(q);
  FitResult fit;
  bool converged = false;
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    const Vec Hv = c.H(eta);
    const Mat Jh = jacH(eta);
    // g here is the gradient of F = -l; stationarity: -g + n Jh' v = 0
    const Vec stat = -g + n * Jh.transpose() * v;
    if (stat.cwiseAbs().maxCoeff() < opt.gtol && Hv.cwiseAbs().maxCoeff() < 1e-8 && it > 0) {
      converged = true;
      break;
    }
    Mat Hl;
    const Vec u_keep = obj.u;
    if (!fd_hessian(obj, eta, Hl)) break;
    obj.u = u_keep;
    Hl = -Hl;  // Hessian of l
    if (!c.linear && q > 0) {
      for (int j = 0; j < dim; ++j) {
        const double h = 1e-5 * (1.0 + std::fabs(eta[j]));
        Vec ep = eta, em = eta;
        ep[j] += h;
        em[j] -= h;
        Hl.col(j) += n * (jacH(ep) - jacH(em)).transpose() * v / (2 * h);
      }
      Hl = 0.5 * (Hl + Hl.transpose()).eval();
    }
    Mat K = Mat::Zero(dim + q, dim + q);
    K.topLeftCorner(dim, dim) = Hl;
    K.topRightCorner(dim, q) = n * Jh.transpose();
    K.bottomLeftCorner(q, dim) = Jh;
    Vec rhs(dim + q);
    rhs << g, -Hv;  // -grad l = g
    Eigen::FullPivLU<Mat> lu(K);
    if (lu.rank() < dim + q) {
      Eigen::JacobiSVD<Mat> svd(Jh);
      if (q > 0 && svd.singularValues().minCoeff() < 1e-8)
        throw Error(ErrorKind::RankDeficientConstraint, "constraint Jacobian is rank deficient");
    }
    const Vec sol = lu.solve(rhs);
    const Vec d = sol.head(dim);
    const Vec vn = sol.tail(q);
    const double mu = 2.0 * n * (q > 0 ? vn.cwiseAbs().maxCoeff() : 0.0) + 1.0;
    auto merit = [&](double Fv, const Vec& e) { return Fv + mu * c.H(e).cwiseAbs().sum(); };
    const double m0 = merit(F, eta);
    double a = 1.0, Fn;
    Vec gn;
    ProfileValue pvn;
    bool accepted = false;
    for (int hb = 0; hb < 60; ++hb) {
      const Vec en = eta + a * d;
      obj.u = u_keep;
      if (obj(en, Fn, &gn, &pvn)) {
        const double m1 = merit(Fn, en);
        if (m1 <= m0 - 1e-6 * a * std::fabs(g.dot(d)) ||
            std::fabs(m1 - m0) <= 1e-12 * (1.0 + std::fabs(m0)) || a * d.cwiseAbs().maxCoeff() < 1e-14) {
          eta = en;
          accepted = true;
          break;
        }
      }
      a *= 0.5;
    }
    if (!accepted) {
      obj.u = u_keep;
      break;
    }
    F = Fn;
    g = gn;
    pv = std::move(pvn);
    v = vn;
  }
  fit.iterations = it;
  fit.converged = converged;
  fit.grad_norm = (-g + n * jacH(eta).transpose() * v).cwiseAbs().maxCoeff();
  fit.psi = eta.head(p);
  fit.theta = eta.tail(dq);
  fit.loglik = -F;
  fit.multipliers = MultiplierPoint::from_u(pv.u);
  fit.residual = pv.residual;
  fit.clamped = pv.clamped;
  if (q > 0) {
    Eigen::JacobiSVD<Mat> svd(jacH(eta));
    if (svd.singularValues().minCoeff() < 1e-8)
      throw Error(ErrorKind::RankDeficientConstraint, "constraint Jacobian is rank deficient");
  }
  if (!converged) fit.message = "constrained Newton did not reach tolerance";
  fill_fit(des, ees, fit, false);
  return fit;
}

}  // namespace drmel
