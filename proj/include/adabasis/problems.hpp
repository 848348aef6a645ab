#pragma once

#include "adabasis/linalg.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace adabasis {

/// Linear differential operator of order <= 1 acting on a scalar field:
///   L[u](x) = c0(x) u(x) + sum_k c_k(x) du/dx_k
/// Coefficients are evaluated per collocation point.
struct LinearOperator {
  using Coefficient = std::function<double(const Eigen::RowVectorXd&)>;

  std::string name;
  int order = 0;
  Coefficient value_coeff;                  // null => 0
  std::vector<Coefficient> deriv_coeff;     // one per input dim; null or empty => 0

  bool needs_jacobian() const;
  /// c0 at every row of points (length N).
  Vector value_coefficients(const Matrix& points) const;
  /// c_k at every row of points (N x d); all zeros when order 0.
  Matrix derivative_coefficients(const Matrix& points) const;
};

enum class Velocity { constant, linear };
enum class TransportForm { advective, conservative };

LinearOperator identity_operator();
/// Identity restricted to a boundary point set; kept distinct for reporting.
LinearOperator trace_operator();
/// d/dt + a(x,t) d/dx on inputs ordered (x, t). The conservative form adds
/// (da/dx) u, which is nonzero only for the linear velocity a = x.
LinearOperator transport_operator(Velocity velocity, TransportForm form = TransportForm::advective);

struct LossTerm {
  LinearOperator op;
  Matrix points;   // N_k x d
  Matrix targets;  // N_k x n_out, values of L_k[u] at points
  double weight = 1.0;
};

struct ProblemSpec {
  std::string name;
  int input_dim = 1;
  int outputs = 1;
  std::vector<LossTerm> terms;
  // Optional reference solution for RMS tracking.
  Matrix eval_points;
  Matrix eval_exact;

  bool has_reference() const { return eval_points.rows() > 0; }
  bool needs_jacobian() const;
  void validate() const;
};

double target_u1(double x);
double target_u2(double x);
/// Shifted Legendre polynomial P_order(2x - 1) scaled to unit L2([0,1]) norm.
double legendre_normalized(int order, double x);

struct RegressionTarget {
  std::string name;
  std::function<double(double)> f;
};

/// Parses u1, u2 or legendre:<n> (the first n normalized Legendre
/// polynomials).
std::vector<RegressionTarget> regression_targets(const std::string& selector);

enum class PointSampling { grid, uniform_random };

/// Identity-operator fit of one or more targets on a shared 1-D point set.
ProblemSpec make_regression(const std::vector<RegressionTarget>& targets, int npoints = 1000, std::uint64_t seed = 0,
                            PointSampling sampling = PointSampling::grid);

/// Piecewise-linear tent with u0(0) = 0: rises to `height` at `peak_at`,
/// back to zero at `support_end`, zero beyond.
struct Tent {
  double peak_at = 0.25;
  double height = 1.0;
  double support_end = 0.5;

  double operator()(double s) const;
};

struct TransportConfig {
  Velocity velocity = Velocity::constant;
  TransportForm form = TransportForm::advective;
  double dx = 0.05;
  double alpha = 0.0;
  Tent tent;

  void validate() const;
  int cells() const;  // 1 / dx
};

/// Penalty on the PDE-residual term: W^(-alpha).
double residual_penalty(double alpha, int width);

/// Three-term collocation problem on (x, t) in [0,1]^2: interior residual
/// (open grid, weight W^-alpha), initial trace at t = 0 and inflow trace at
/// x = 0 (closed grids, corners included, weight 1).
ProblemSpec make_pinn(const TransportConfig& config, int width);

double analytic_transport(const TransportConfig& config, double x, double t);

double rms_error(const Matrix& pred, const Matrix& exact);
/// Per-column RMS of pred - exact.
std::vector<double> rms_per_column(const Matrix& pred, const Matrix& exact);
/// min over iterations of max over targets.
double minmax_metric(const std::vector<std::vector<double>>& history);

}  // namespace adabasis
