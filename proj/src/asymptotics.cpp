#include "drmel/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace drmel {

namespace {

double condition(const Mat& S) {
  Eigen::SelfAdjointEigenSolver<Mat> es(S);
  const Vec ev = es.eigenvalues();
  if (ev.minCoeff() <= 0.0) return std::numeric_limits<double>::infinity();
  return ev.maxCoeff() / ev.minCoeff();
}

}  // namespace

AsymptoticMatrices estimate_matrices(const Design& des, const EstimatingEquations& ees,
                                     const Vec& psi, const Vec& theta,
                                     const Vec& w) {
  const int p = ees.p(), r = ees.r(), dq = des.dq();
  const double lam = des.lam;
  AsymptoticMatrices M;
  M.p = p;
  M.r = r;
  M.dq = dq;
  M.lambda_star = lam;
  Vec omega;
  Mat G;
  stack_G(des, ees, psi, theta, omega, G);

  M.A_tt = Mat::Zero(dq, dq);
  Mat EdGdth = Mat::Zero(r + 1, dq);
  Mat EdGdpsi = Mat::Zero(r + 1, p);
  Mat Eh1QG = Mat::Zero(dq, r + 1);
  M.A_uu = Mat::Zero(r + 1, r + 1);
  Mat jpsi, jth;
  std::vector<double> g(r);
  for (int k = 0; k < des.n; ++k) {
    const Vec Qk = des.Q.row(k).transpose();
    const Vec Gk = G.row(k).transpose();
    const double h = 1.0 + lam * (omega[k] - 1.0);
    const double h1 = lam * omega[k] / h;
    M.A_tt.noalias() += (w[k] * (1.0 - lam) * h1) * Qk * Qk.transpose();
    EdGdth.row(0) += w[k] * omega[k] * Qk.transpose();
    if (r > 0) {
      ees.eval(des.args(k, omega[k], theta), psi, g.data(), p > 0 ? &jpsi : nullptr, &jth);
      EdGdth.bottomRows(r) += w[k] * jth;
      if (p > 0) EdGdpsi.bottomRows(r) += w[k] * jpsi;
    }
    Eh1QG.noalias() += (w[k] * h1) * Qk * Gk.transpose();
    M.A_uu.noalias() += (w[k] / h) * Gk * Gk.transpose();
  }
  M.A_tu = EdGdth.transpose() - Eh1QG;
  M.A_pu = EdGdpsi.transpose();

  const int rows = p + dq, cols = dq + r + 1;
  M.U = Mat::Zero(rows, cols);
  M.U.block(0, dq, p, r + 1) = M.A_pu;
  M.U.block(p, 0, dq, dq) = M.A_tt;
  M.U.block(p, dq, dq, r + 1) = M.A_tu;
  M.V = Mat::Zero(cols, cols);
  M.V.topLeftCorner(dq, dq) = M.A_tt;
  M.V.bottomRightCorner(r + 1, r + 1) = M.A_uu;

  M.v_condition = condition(M.V);
  if (!(M.v_condition < 1e14))
    throw Error(ErrorKind::SingularV,
                "V is singular (condition " + std::to_string(M.v_condition) + ")");
  Eigen::LDLT<Mat> Vf(M.V);
  const Mat VinvUt = Vf.solve(M.U.transpose());
  M.J = M.U * VinvUt;
  M.J = 0.5 * (M.J + M.J.transpose()).eval();
  M.j_condition = condition(M.J);
  if (!(M.j_condition < 1e14))
    throw Error(ErrorKind::SingularJ,
                "J is singular (condition " + std::to_string(M.j_condition) + ")");
  Eigen::LDLT<Mat> Jf(M.J);
  M.Jinv = Jf.solve(Mat::Identity(rows, rows));
  M.Jinv = 0.5 * (M.Jinv + M.Jinv.transpose()).eval();

  M.W = VinvUt * M.Jinv * VinvUt.transpose();
  M.W.bottomRightCorner(r + 1, r + 1) -=
      M.A_uu.ldlt().solve(Mat::Identity(r + 1, r + 1));

  M.C = Vec::Zero(cols);
  M.C.head(dq) = M.A_tt.col(0);
  M.C.tail(r + 1) = -lam * (1.0 - lam) * M.A_uu.col(0);
  const Vec UVC = M.U * Vf.solve(M.C);
  M.orthogonality = UVC.cwiseAbs().maxCoeff() / std::max(1.0, M.C.cwiseAbs().maxCoeff());
  return M;
}

Mat drm_theta_covariance(const Design& des, const Vec& theta, const Vec& w) {
  const int dq = des.dq();
  const double lam = des.lam;
  Vec omega;
  tilt(des, theta, omega);
  Mat A = Mat::Zero(dq, dq);
  for (int k = 0; k < des.n; ++k) {
    const double h = 1.0 + lam * (omega[k] - 1.0);
    const auto Qk = des.Q.row(k).transpose();
    A.noalias() += (w[k] * (1.0 - lam) * lam * omega[k] / h) * Qk * Qk.transpose();
  }
  Mat out = A.ldlt().solve(Mat::Identity(dq, dq));
  out(0, 0) -= 1.0 / (lam * (1.0 - lam));
  return 0.5 * (out + out.transpose());
}

CdfInfluence cdf_influence(const Design& des, const EstimatingEquations& ees,
                           const FitResult& fit, double x) {
  const int r = ees.r(), dq = des.dq();
  const double lam = des.lam;
  Vec omega;
  Mat G;
  stack_G(des, ees, fit.psi, fit.theta, omega, G);
  CdfInfluence b;
  b.B0_theta = Vec::Zero(dq);
  b.B0_u = Vec::Zero(r + 1);
  b.B1_u = Vec::Zero(r + 1);
  for (int k = 0; k < des.n; ++k) {
    if (!(des.data.x(k) <= x)) continue;
    const double h = 1.0 + lam * (omega[k] - 1.0);
    const double wk = fit.weights[k];
    b.B0_theta += (wk * lam * omega[k] / h) * des.Q.row(k).transpose();
    b.B0_u += (wk / h) * G.row(k).transpose();
    b.B1_u += (wk * omega[k] / h) * G.row(k).transpose();
  }
  b.B1_theta = ((lam - 1.0) / lam) * b.B0_theta;
  return b;
}

namespace {

// E0{omega^{i+j} I(X <= t)/h} and F-hat values.
struct CdfPieces {
  double e00 = 0, e01 = 0, e11 = 0, F0 = 0, F1 = 0;
};

CdfPieces pieces(const Design& des, const FitResult& fit, double t) {
  Vec omega;
  tilt(des, fit.theta, omega);
  CdfPieces c;
  for (int k = 0; k < des.n; ++k) {
    if (!(des.data.x(k) <= t)) continue;
    const double h = 1.0 + des.lam * (omega[k] - 1.0);
    const double wk = fit.weights[k];
    c.e00 += wk / h;
    c.e01 += wk * omega[k] / h;
    c.e11 += wk * omega[k] * omega[k] / h;
    c.F0 += wk;
    c.F1 += wk * omega[k];
  }
  return c;
}

double e_term(const CdfPieces& c, int i, int j) {
  const int s = i + j;
  return s == 0 ? c.e00 : (s == 1 ? c.e01 : c.e11);
}

double F_of(const CdfPieces& c, int i) { return i == 0 ? c.F0 : c.F1; }

}  // namespace

Mat cdf_covariance(const Design& des, const EstimatingEquations& ees,
                   const FitResult& fit, const AsymptoticMatrices& mats, int l, int s,
                   double x, double y) {
  const CdfInfluence bx = cdf_influence(des, ees, fit, x);
  const CdfInfluence by = cdf_influence(des, ees, fit, y);
  const CdfPieces px = pieces(des, fit, x), py = pieces(des, fit, y);
  const CdfPieces pm = pieces(des, fit, std::min(x, y));
  auto bstar = [](const CdfInfluence& b, int i) {
    Vec v(b.B0_theta.size() + b.B0_u.size());
    if (i == 0) v << b.B0_theta, b.B0_u;
    else v << b.B1_theta, b.B1_u;
    return v;
  };
  auto sigma = [&](int i, int j, const CdfInfluence& bi, const CdfInfluence& bj,
                   const CdfPieces& pi, const CdfPieces& pj, const CdfPieces& pmin) {
    return e_term(pmin, i, j) - F_of(pi, i) * F_of(pj, j) +
           bstar(bi, i).dot(mats.W * bstar(bj, j));
  };
  Mat S(2, 2);
  S(0, 0) = sigma(l, l, bx, bx, px, px, px);
  S(1, 1) = sigma(s, s, by, by, py, py, py);
  S(0, 1) = sigma(l, s, bx, by, px, py, pm);
  S(1, 0) = S(0, 1);
  return S;
}

Mat cdf_covariance_reduced(const Design& des, const FitResult& fit, int l, int s,
                           double x, double y) {
  const double lam = des.lam;
  const EstimatingEquations none;
  const CdfInfluence bx = cdf_influence(des, none, fit, x);
  const CdfInfluence by = cdf_influence(des, none, fit, y);
  const CdfPieces px = pieces(des, fit, x), py = pieces(des, fit, y);
  const CdfPieces pm = pieces(des, fit, std::min(x, y));
  const int dq = des.dq();
  Vec omega;
  tilt(des, fit.theta, omega);
  Mat A = Mat::Zero(dq, dq);
  for (int k = 0; k < des.n; ++k) {
    const double h = 1.0 + lam * (omega[k] - 1.0);
    const auto Qk = des.Q.row(k).transpose();
    A.noalias() += (fit.weights[k] * (1.0 - lam) * lam * omega[k] / h) * Qk * Qk.transpose();
  }
  Eigen::LDLT<Mat> Af(A);
  auto bt = [](const CdfInfluence& b, int i) { return i == 0 ? b.B0_theta : b.B1_theta; };
  auto delta = [&](int i, int j) {
    if (i != j) return 0.0;
    return i == 0 ? 1.0 / (1.0 - lam) : 1.0 / lam;
  };
  auto sigma = [&](int i, int j, const CdfInfluence& bi, const CdfInfluence& bj,
                   const CdfPieces& pi, const CdfPieces& pj, const CdfPieces& pmin) {
    return e_term(pmin, i, j) + bt(bi, i).dot(Af.solve(bt(bj, j))) -
           delta(i, j) * F_of(pi, i) * F_of(pj, j);
  };
  Mat S(2, 2);
  S(0, 0) = sigma(l, l, bx, bx, px, px, px);
  S(1, 1) = sigma(s, s, by, by, py, py, py);
  S(0, 1) = sigma(l, s, bx, by, px, py, pm);
  S(1, 0) = S(0, 1);
  return S;
}

double density_estimate(const Design& des, const FitResult& fit, int group, double t) {
  Vec omega;
  tilt(des, fit.theta, omega);
  const int n = des.n;
  Vec w(n);
  for (int k = 0; k < n; ++k) w[k] = fit.weights[k] * (group == 1 ? omega[k] : 1.0);
  w /= w.sum();
  double mean = 0.0;
  for (int k = 0; k < n; ++k) mean += w[k] * des.data.x(k);
  double var = 0.0;
  for (int k = 0; k < n; ++k) var += w[k] * std::pow(des.data.x(k) - mean, 2);
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return des.data.x(a) < des.data.x(b); });
  auto wq = [&](double tau) {
    double acc = 0.0;
    for (int k : idx) {
      acc += w[k];
      if (acc >= tau) return des.data.x(k);
    }
    return des.data.x(idx.back());
  };
  const double iqr = wq(0.75) - wq(0.25);
  const double neff = 1.0 / w.squaredNorm();
  double spread = std::sqrt(var);
  if (iqr > 0.0) spread = std::min(spread, iqr / 1.34);
  const double bw = 0.9 * spread * std::pow(neff, -0.2);
  if (!(bw > 0.0)) throw Error(ErrorKind::ZeroDensity, "degenerate bandwidth");
  double f = 0.0;
  const double c = 1.0 / (bw * std::sqrt(2.0 * M_PI));
  for (int k = 0; k < n; ++k) {
    const double z = (t - des.data.x(k)) / bw;
    f += w[k] * c * std::exp(-0.5 * z * z);
  }
  return f;
}

Mat quantile_covariance(const Design& des, const EstimatingEquations& ees,
                        const FitResult& fit, const AsymptoticMatrices& mats, int l,
                        int s, double xi_l, double xi_s, double f_l, double f_s) {
  if (!(f_l > 0.0) || !(f_s > 0.0))
    throw Error(ErrorKind::ZeroDensity, "density estimate must be positive");
  Mat S = cdf_covariance(des, ees, fit, mats, l, s, xi_l, xi_s);
  Mat O(2, 2);
  O(0, 0) = S(0, 0) / (f_l * f_l);
  O(1, 1) = S(1, 1) / (f_s * f_s);
  O(0, 1) = O(1, 0) = S(0, 1) / (f_l * f_s);
  return O;
}

}  // namespace drmel
