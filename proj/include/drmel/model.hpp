#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace drmel {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class ErrorKind {
  EmptyGroup,
  DimensionMismatch,
  SingularBasis,
  NonFiniteBasis,
  Infeasible,
  MaxIterations,
  NonConvergence,
  NonPositiveWeight,
  RankDeficientConstraint,
  SingularV,
  SingularJ,
  ZeroDensity,
  DegenerateDf,
  BracketFailure,
  EmptyInterval,
  UnknownFamily,
  UnknownBasis,
  UnknownEE,
  ParseError,
  MissingGroupColumn,
  InvalidArgument,
};

const char* to_string(ErrorKind k);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg);
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Pooled two-sample data. Rows of `values` are observations; column 0 is the
// response used for CDFs and quantiles, further columns are covariates.
class TwoSampleData {
 public:
  TwoSampleData() = default;
  TwoSampleData(Mat values, std::vector<int> group);
  static TwoSampleData from_groups(const std::vector<double>& x0,
                                   const std::vector<double>& x1);

  const RowMat& values() const { return values_; }
  const double* row(int k) const { return values_.data() + static_cast<Eigen::Index>(k) * values_.cols(); }
  const std::vector<int>& group() const { return group_; }
  double x(int k) const { return values_(k, 0); }
  int n() const { return static_cast<int>(group_.size()); }
  int n0() const { return n0_; }
  int n1() const { return n1_; }
  int dx() const { return static_cast<int>(values_.cols()); }
  double lambda_star() const { return lambda_star_; }
  std::vector<double> column(int c, int grp = -1) const;

 private:
  RowMat values_;
  std::vector<int> group_;
  int n0_ = 0;
  int n1_ = 0;
  double lambda_star_ = 0.0;
};

// q(x); Q(x) = (1, q(x)) is formed by the likelihood code.
struct DrmBasis {
  std::string label;
  int d = 0;
  std::function<void(const double* row, int dx, double* q)> q;
};

// identity, log, log-log2, x-x2. All act on column 0.
DrmBasis make_basis(const std::string& name);
std::vector<std::string> basis_names();

// Everything an estimating function may look at for one observation.
struct EEArgs {
  const double* x;
  int dx;
  const double* Q;
  int dq;
  double omega;
  const double* theta;
};

enum class ParamScale { Natural, Logit, Log };

struct ParamInfo {
  std::string name;
  ParamScale scale = ParamScale::Natural;
  double start = 0.0;  // internal scale
};

// One block of equations. `fn` writes r values to g, and when non-null the
// row-major Jacobians dpsi (r x p_local) and dth (r x dq), both with respect
// to the internal parameterization.
struct EEBlock {
  std::string name;
  int r = 0;
  std::vector<ParamInfo> params;
  bool analytic = true;
  std::function<void(const EEArgs&, const double* psi, double* g, double* dpsi,
                     double* dth)>
      fn;
};

class EstimatingEquations {
 public:
  EstimatingEquations() = default;
  explicit EstimatingEquations(EEBlock b);

  // Parameters are shared between blocks by name.
  EstimatingEquations operator+(const EstimatingEquations& o) const;
  EstimatingEquations subset(const std::vector<int>& block_ids) const;

  int r() const { return r_; }
  int p() const { return static_cast<int>(params_.size()); }
  bool empty() const { return r_ == 0; }
  const std::vector<ParamInfo>& params() const { return params_; }
  const std::vector<EEBlock>& blocks() const { return blocks_; }
  std::string label() const;

  // jpsi is r x p, jth is r x dq; either may be null. Blocks without an
  // analytic Jacobian are differentiated numerically.
  void eval(const EEArgs& a, const Vec& psi, double* g, Mat* jpsi,
            Mat* jth) const;
  void eval_fd(const EEArgs& a, const Vec& psi, Mat* jpsi, Mat* jth) const;

  Vec to_natural(const Vec& psi_internal) const;
  Vec to_internal(const Vec& psi_natural) const;
  Vec natural_derivative(const Vec& psi_internal) const;

 private:
  void eval_block(int b, const EEArgs& a, const Vec& psi, double* g,
                  Mat* jpsi, Mat* jth, bool force_fd) const;

  std::vector<EEBlock> blocks_;
  std::vector<std::vector<int>> maps_;
  std::vector<int> offsets_;
  std::vector<ParamInfo> params_;
  int r_ = 0;
};

double fd_step(double v);

struct ValidationReport {
  int n0 = 0, n1 = 0, d = 0, r = 0, p = 0;
  double lambda_star = 0.0;
  double gram_condition = 0.0;
  std::string identification;  // "none", "just-identified", "over-identified"
  std::vector<std::string> warnings;
};

ValidationReport validate(const TwoSampleData& data, const DrmBasis& basis,
                          const EstimatingEquations& ees);

}  // namespace drmel
