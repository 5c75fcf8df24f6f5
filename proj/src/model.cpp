#include "drmel/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace drmel {

const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::EmptyGroup: return "EmptyGroup";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::SingularBasis: return "SingularBasis";
    case ErrorKind::NonFiniteBasis: return "NonFiniteBasis";
    case ErrorKind::Infeasible: return "Infeasible";
    case ErrorKind::MaxIterations: return "MaxIterations";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::NonPositiveWeight: return "NonPositiveWeight";
    case ErrorKind::RankDeficientConstraint: return "RankDeficientConstraint";
    case ErrorKind::SingularV: return "SingularV";
    case ErrorKind::SingularJ: return "SingularJ";
    case ErrorKind::ZeroDensity: return "ZeroDensity";
    case ErrorKind::DegenerateDf: return "DegenerateDf";
    case ErrorKind::BracketFailure: return "BracketFailure";
    case ErrorKind::EmptyInterval: return "EmptyInterval";
    case ErrorKind::UnknownFamily: return "UnknownFamily";
    case ErrorKind::UnknownBasis: return "UnknownBasis";
    case ErrorKind::UnknownEE: return "UnknownEE";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::MissingGroupColumn: return "MissingGroupColumn";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& msg)
    : std::runtime_error(std::string(to_string(kind)) + ": " + msg),
      kind_(kind) {}

TwoSampleData::TwoSampleData(Mat values, std::vector<int> group)
    : values_(std::move(values)), group_(std::move(group)) {
  if (static_cast<Eigen::Index>(group_.size()) != values_.rows())
    throw Error(ErrorKind::DimensionMismatch,
                "group labels and values differ in length");
  if (values_.cols() < 1)
    throw Error(ErrorKind::DimensionMismatch, "no value columns");
  for (int g : group_) {
    if (g == 0) ++n0_;
    else if (g == 1) ++n1_;
    else throw Error(ErrorKind::InvalidArgument, "group label must be 0 or 1");
  }
  if (n0_ == 0 || n1_ == 0)
    throw Error(ErrorKind::EmptyGroup, "both groups need at least one value");
  lambda_star_ = static_cast<double>(n1_) / static_cast<double>(n0_ + n1_);
}

TwoSampleData TwoSampleData::from_groups(const std::vector<double>& x0,
                                         const std::vector<double>& x1) {
  const int n = static_cast<int>(x0.size() + x1.size());
  Mat v(n, 1);
  std::vector<int> g(n);
  int k = 0;
  for (double x : x0) { v(k, 0) = x; g[k++] = 0; }
  for (double x : x1) { v(k, 0) = x; g[k++] = 1; }
  return TwoSampleData(std::move(v), std::move(g));
}

std::vector<double> TwoSampleData::column(int c, int grp) const {
  std::vector<double> out;
  for (int k = 0; k < n(); ++k)
    if (grp < 0 || group_[k] == grp) out.push_back(values_(k, c));
  return out;
}

DrmBasis make_basis(const std::string& name) {
  DrmBasis b;
  b.label = name;
  if (name == "identity") {
    b.d = 1;
    b.q = [](const double* x, int, double* q) { q[0] = x[0]; };
  } else if (name == "log") {
    b.d = 1;
    b.q = [](const double* x, int, double* q) { q[0] = std::log(x[0]); };
  } else if (name == "log-log2") {
    b.d = 2;
    b.q = [](const double* x, int, double* q) {
      const double l = std::log(x[0]);
      q[0] = l;
      q[1] = l * l;
    };
  } else if (name == "x-x2") {
    b.d = 2;
    b.q = [](const double* x, int, double* q) {
      q[0] = x[0];
      q[1] = x[0] * x[0];
    };
  } else if (name == "x-log") {
    b.d = 2;
    b.q = [](const double* x, int, double* q) {
      q[0] = x[0];
      q[1] = std::log(x[0]);
    };
  } else {
    throw Error(ErrorKind::UnknownBasis, name);
  }
  return b;
}

std::vector<std::string> basis_names() {
  return {"identity", "log", "log-log2", "x-x2", "x-log"};
}

double fd_step(double v) { return 1e-6 * (1.0 + std::fabs(v)); }

EstimatingEquations::EstimatingEquations(EEBlock b) {
  r_ = b.r;
  std::vector<int> map;
  for (const auto& pi : b.params) {
    map.push_back(static_cast<int>(params_.size()));
    params_.push_back(pi);
  }
  offsets_.push_back(0);
  maps_.push_back(std::move(map));
  blocks_.push_back(std::move(b));
}

EstimatingEquations EstimatingEquations::operator+(
    const EstimatingEquations& o) const {
  EstimatingEquations out = *this;
  for (const auto& b : o.blocks_) {
    std::vector<int> map;
    for (const auto& pi : b.params) {
      auto it = std::find_if(out.params_.begin(), out.params_.end(),
                             [&](const ParamInfo& q) { return q.name == pi.name; });
      if (it == out.params_.end()) {
        map.push_back(static_cast<int>(out.params_.size()));
        out.params_.push_back(pi);
      } else {
        map.push_back(static_cast<int>(it - out.params_.begin()));
      }
    }
    out.offsets_.push_back(out.r_);
    out.r_ += b.r;
    out.maps_.push_back(std::move(map));
    out.blocks_.push_back(b);
  }
  return out;
}

EstimatingEquations EstimatingEquations::subset(
    const std::vector<int>& block_ids) const {
  EstimatingEquations out;
  for (int id : block_ids) out = out + EstimatingEquations(blocks_.at(id));
  return out;
}

std::string EstimatingEquations::label() const {
  if (blocks_.empty()) return "none";
  std::string s;
  for (const auto& b : blocks_) {
    if (!s.empty()) s += "+";
    s += b.name;
  }
  return s;
}

void EstimatingEquations::eval_block(int bi, const EEArgs& a, const Vec& psi,
                                     double* g, Mat* jpsi, Mat* jth,
                                     bool force_fd) const {
  const EEBlock& b = blocks_[bi];
  const auto& map = maps_[bi];
  const int pl = static_cast<int>(map.size());
  const int off = offsets_[bi];
  double lpsi[16];
  double dpsi[256];
  double dth[256];
  for (int j = 0; j < pl; ++j) lpsi[j] = psi[map[j]];
  const bool fd = force_fd || !b.analytic;
  const bool want = jpsi || jth;
  b.fn(a, lpsi, g + off, (want && !fd) ? dpsi : nullptr,
       (want && !fd) ? dth : nullptr);
  if (!want) return;
  if (!fd) {
    for (int i = 0; i < b.r; ++i) {
      if (jpsi)
        for (int j = 0; j < pl; ++j) (*jpsi)(off + i, map[j]) += dpsi[i * pl + j];
      if (jth)
        for (int j = 0; j < a.dq; ++j) (*jth)(off + i, j) = dth[i * a.dq + j];
    }
    return;
  }
  double gp[64], gm[64];
  if (jpsi) {
    for (int j = 0; j < pl; ++j) {
      const double h = fd_step(lpsi[j]);
      const double save = lpsi[j];
      lpsi[j] = save + h;
      b.fn(a, lpsi, gp, nullptr, nullptr);
      lpsi[j] = save - h;
      b.fn(a, lpsi, gm, nullptr, nullptr);
      lpsi[j] = save;
      for (int i = 0; i < b.r; ++i)
        (*jpsi)(off + i, map[j]) += (gp[i] - gm[i]) / (2 * h);
    }
  }
  if (jth) {
    double th[32];
    for (int j = 0; j < a.dq; ++j) th[j] = a.theta[j];
    for (int j = 0; j < a.dq; ++j) {
      const double h = fd_step(th[j]);
      EEArgs ap = a, am = a;
      ap.theta = th;
      const double save = th[j];
      th[j] = save + h;
      ap.omega = a.omega * std::exp(h * a.Q[j]);
      b.fn(ap, lpsi, gp, nullptr, nullptr);
      th[j] = save - h;
      am.theta = th;
      am.omega = a.omega * std::exp(-h * a.Q[j]);
      b.fn(am, lpsi, gm, nullptr, nullptr);
      th[j] = save;
      for (int i = 0; i < b.r; ++i) (*jth)(off + i, j) = (gp[i] - gm[i]) / (2 * h);
    }
  }
}

void EstimatingEquations::eval(const EEArgs& a, const Vec& psi, double* g,
                               Mat* jpsi, Mat* jth) const {
  if (jpsi) jpsi->setZero(r_, p());
  if (jth) jth->setZero(r_, a.dq);
  for (int b = 0; b < static_cast<int>(blocks_.size()); ++b)
    eval_block(b, a, psi, g, jpsi, jth, false);
}

void EstimatingEquations::eval_fd(const EEArgs& a, const Vec& psi, Mat* jpsi,
                                  Mat* jth) const {
  if (jpsi) jpsi->setZero(r_, p());
  if (jth) jth->setZero(r_, a.dq);
  std::vector<double> g(r_);
  for (int b = 0; b < static_cast<int>(blocks_.size()); ++b)
    eval_block(b, a, psi, g.data(), jpsi, jth, true);
}

Vec EstimatingEquations::to_natural(const Vec& s) const {
  Vec out = s;
  for (int j = 0; j < p(); ++j) {
    if (params_[j].scale == ParamScale::Logit) out[j] = 1.0 / (1.0 + std::exp(-s[j]));
    else if (params_[j].scale == ParamScale::Log) out[j] = std::exp(s[j]);
  }
  return out;
}

Vec EstimatingEquations::to_internal(const Vec& v) const {
  Vec out = v;
  for (int j = 0; j < p(); ++j) {
    if (params_[j].scale == ParamScale::Logit) out[j] = std::log(v[j] / (1.0 - v[j]));
    else if (params_[j].scale == ParamScale::Log) out[j] = std::log(v[j]);
  }
  return out;
}

Vec EstimatingEquations::natural_derivative(const Vec& s) const {
  Vec out = Vec::Ones(p());
  const Vec nat = to_natural(s);
  for (int j = 0; j < p(); ++j) {
    if (params_[j].scale == ParamScale::Logit) out[j] = nat[j] * (1.0 - nat[j]);
    else if (params_[j].scale == ParamScale::Log) out[j] = nat[j];
  }
  return out;
}

ValidationReport validate(const TwoSampleData& data, const DrmBasis& basis,
                          const EstimatingEquations& ees) {
  ValidationReport rep;
  rep.n0 = data.n0();
  rep.n1 = data.n1();
  rep.lambda_star = data.lambda_star();
  rep.d = basis.d;
  rep.r = ees.r();
  rep.p = ees.p();
  const int dq = basis.d + 1;
  Mat gram = Mat::Zero(dq, dq);
  Vec Q(dq);
  for (int k = 0; k < data.n(); ++k) {
    Q[0] = 1.0;
    basis.q(data.row(k), data.dx(), Q.data() + 1);
    if (!Q.allFinite()) {
      std::ostringstream os;
      os << "q(x) is not finite at observation " << k + 1;
      throw Error(ErrorKind::NonFiniteBasis, os.str());
    }
    gram += Q * Q.transpose();
  }
  gram /= data.n();
  Eigen::JacobiSVD<Mat> svd(gram);
  const Vec sv = svd.singularValues();
  rep.gram_condition = sv[sv.size() - 1] > 0 ? sv[0] / sv[sv.size() - 1]
                                             : std::numeric_limits<double>::infinity();
  if (!(rep.gram_condition <= 1e12))
    throw Error(ErrorKind::SingularBasis, "Gram matrix of Q(x) is singular");
  if (rep.r == 0) rep.identification = "none";
  else if (rep.r == rep.p) rep.identification = "just-identified";
  else if (rep.r > rep.p) rep.identification = "over-identified";
  else {
    rep.identification = "under-identified";
    rep.warnings.push_back("r < p: parameters are not identified");
  }
  return rep;
}

}  // namespace drmel
