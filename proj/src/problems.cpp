#include "adabasis/problems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace adabasis {

bool LinearOperator::needs_jacobian() const {
  return order >= 1 && std::any_of(deriv_coeff.begin(), deriv_coeff.end(), [](const auto& c) { return bool(c); });
}

Vector LinearOperator::value_coefficients(const Matrix& points) const {
  Vector out = Vector::Zero(points.rows());
  if (!value_coeff) return out;
  for (Eigen::Index i = 0; i < points.rows(); ++i) out(i) = value_coeff(points.row(i));
  return out;
}

Matrix LinearOperator::derivative_coefficients(const Matrix& points) const {
  Matrix out = Matrix::Zero(points.rows(), points.cols());
  if (order < 1) return out;
  if (static_cast<Eigen::Index>(deriv_coeff.size()) > points.cols())
    throw InvalidArgument("operator " + name + ": more derivative coefficients than input dimensions");
  for (std::size_t k = 0; k < deriv_coeff.size(); ++k) {
    if (!deriv_coeff[k]) continue;
    for (Eigen::Index i = 0; i < points.rows(); ++i)
      out(i, static_cast<Eigen::Index>(k)) = deriv_coeff[k](points.row(i));
  }
  return out;
}

LinearOperator identity_operator() {
  return {"identity", 0, [](const Eigen::RowVectorXd&) { return 1.0; }, {}};
}

LinearOperator trace_operator() {
  auto op = identity_operator();
  op.name = "trace";
  return op;
}

LinearOperator transport_operator(Velocity velocity, TransportForm form) {
  LinearOperator op;
  op.name = "transport";
  op.order = 1;
  const auto speed = [velocity](const Eigen::RowVectorXd& p) { return velocity == Velocity::constant ? 1.0 : p(0); };
  op.deriv_coeff = {speed, [](const Eigen::RowVectorXd&) { return 1.0; }};
  if (form == TransportForm::conservative && velocity == Velocity::linear)
    op.value_coeff = [](const Eigen::RowVectorXd&) { return 1.0; };
  return op;
}

bool ProblemSpec::needs_jacobian() const {
  return std::any_of(terms.begin(), terms.end(), [](const LossTerm& t) { return t.op.needs_jacobian(); });
}

void ProblemSpec::validate() const {
  if (terms.empty()) throw InvalidArgument("problem " + name + ": no loss terms");
  if (input_dim < 1 || outputs < 1) throw InvalidArgument("problem " + name + ": bad dimensions");
  for (const auto& t : terms) {
    if (t.points.rows() < 1) throw InvalidArgument("problem " + name + ": term " + t.op.name + " has no points");
    if (t.points.cols() != input_dim || t.targets.rows() != t.points.rows() || t.targets.cols() != outputs)
      throw InvalidArgument("problem " + name + ": term " + t.op.name + " has inconsistent shapes");
    if (!(t.weight >= 0.0) || !std::isfinite(t.weight))
      throw InvalidArgument("problem " + name + ": negative or non-finite weight");
    if (t.op.order > 1) throw InvalidArgument("problem " + name + ": operator " + t.op.name + " is beyond first order");
    require_finite(t.points, "problem points");
    require_finite(t.targets, "problem targets");
    if (t.points.minCoeff() < 0.0 || t.points.maxCoeff() > 1.0)
      throw InvalidArgument("problem " + name + ": collocation points outside [0,1]^d");
  }
  if (has_reference() && (eval_points.cols() != input_dim || eval_exact.rows() != eval_points.rows() ||
                          eval_exact.cols() != outputs))
    throw InvalidArgument("problem " + name + ": reference solution has inconsistent shapes");
}

double target_u1(double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw InvalidArgument("target_u1: x outside [0,1]");
  return x < 0.5 ? x : 1.0 - 0.75 * x * x;
}

double target_u2(double x) { return std::sin(2.0 * std::numbers::pi * x); }

double legendre_normalized(int order, double x) {
  if (order < 0) throw InvalidArgument("legendre_normalized: negative order");
  const double s = 2.0 * x - 1.0;
  double prev = 1.0;
  double cur = s;
  if (order == 0) return 1.0;
  for (int k = 1; k < order; ++k) {
    const double next = ((2.0 * k + 1.0) * s * cur - k * prev) / (k + 1.0);
    prev = cur;
    cur = next;
  }
  return std::sqrt(2.0 * order + 1.0) * cur;
}

std::vector<RegressionTarget> regression_targets(const std::string& selector) {
  if (selector == "u1") return {{"u1", target_u1}};
  if (selector == "u2") return {{"u2", target_u2}};
  const std::string prefix = "legendre:";
  if (selector.rfind(prefix, 0) == 0) {
    int count = 0;
    try {
      std::size_t used = 0;
      count = std::stoi(selector.substr(prefix.size()), &used);
      if (used != selector.size() - prefix.size()) count = 0;
    } catch (const std::exception&) {
      count = 0;
    }
    if (count < 1) throw InvalidArgument("legendre target count must be a positive integer: " + selector);
    std::vector<RegressionTarget> out;
    for (int m = 0; m < count; ++m)
      out.push_back({"legendre" + std::to_string(m), [m](double x) { return legendre_normalized(m, x); }});
    return out;
  }
  throw InvalidArgument("unknown regression target '" + selector + "'");
}

ProblemSpec make_regression(const std::vector<RegressionTarget>& targets, int npoints, std::uint64_t seed,
                            PointSampling sampling) {
  if (targets.empty()) throw InvalidArgument("make_regression: empty target list");
  if (npoints < 2) throw InvalidArgument("make_regression: need at least two points");

  Matrix x(npoints, 1);
  if (sampling == PointSampling::grid) {
    for (int i = 0; i < npoints; ++i) x(i, 0) = static_cast<double>(i) / (npoints - 1);
    x(npoints - 1, 0) = 1.0;
  } else {
    Rng rng(seed);
    x = rng_uniform(rng, 0.0, 1.0, npoints, 1);
  }

  const int n_out = static_cast<int>(targets.size());
  Matrix y(npoints, n_out);
  for (int i = 0; i < npoints; ++i)
    for (int c = 0; c < n_out; ++c) y(i, c) = targets[static_cast<std::size_t>(c)].f(x(i, 0));

  ProblemSpec spec;
  spec.name = n_out == 1 ? targets.front().name : "multi:" + std::to_string(n_out);
  spec.input_dim = 1;
  spec.outputs = n_out;
  spec.terms.push_back({identity_operator(), x, y, 1.0});
  spec.eval_points = x;
  spec.eval_exact = y;
  return spec;
}

double Tent::operator()(double s) const {
  if (s <= 0.0 || s >= support_end) return 0.0;
  return s <= peak_at ? height * s / peak_at : height * (support_end - s) / (support_end - peak_at);
}

int TransportConfig::cells() const { return static_cast<int>(std::lround(1.0 / dx)); }

void TransportConfig::validate() const {
  if (!(dx > 0.0 && dx <= 0.5)) throw InvalidArgument("transport: dx must lie in (0, 0.5]");
  if (std::abs(cells() * dx - 1.0) > 1e-9) throw InvalidArgument("transport: dx must divide 1");
  if (!std::isfinite(alpha)) throw InvalidArgument("transport: alpha must be finite");
  if (!(tent.peak_at > 0.0 && tent.peak_at < tent.support_end)) throw InvalidArgument("transport: bad tent geometry");
}

double residual_penalty(double alpha, int width) {
  if (width <= 0) throw InvalidArgument("residual_penalty: width must be positive");
  if (alpha == 0.0) return 1.0;
  return std::pow(static_cast<double>(width), -alpha);
}

ProblemSpec make_pinn(const TransportConfig& config, int width) {
  config.validate();
  const double eps = residual_penalty(config.alpha, width);
  const int n = config.cells();
  const double h = 1.0 / n;

  Matrix interior((n - 1) * (n - 1), 2);
  Eigen::Index row = 0;
  for (int j = 1; j < n; ++j)
    for (int i = 1; i < n; ++i) interior.row(row++) << i * h, j * h;

  Matrix initial(n + 1, 2), initial_values(n + 1, 1);
  Matrix inflow(n + 1, 2), inflow_values = Matrix::Zero(n + 1, 1);
  for (int i = 0; i <= n; ++i) {
    const double s = i == n ? 1.0 : i * h;
    initial.row(i) << s, 0.0;
    initial_values(i, 0) = config.tent(s);
    inflow.row(i) << 0.0, s;
  }

  ProblemSpec spec;
  spec.name = config.velocity == Velocity::constant ? "pinn-const" : "pinn-linear";
  spec.input_dim = 2;
  spec.outputs = 1;
  spec.terms.push_back({transport_operator(config.velocity, config.form), interior,
                        Matrix::Zero(interior.rows(), 1), eps});
  spec.terms.push_back({trace_operator(), initial, initial_values, 1.0});
  spec.terms.push_back({trace_operator(), inflow, inflow_values, 1.0});

  // Reference on the closed grid at half spacing.
  const int m = 2 * n;
  spec.eval_points.resize((m + 1) * (m + 1), 2);
  spec.eval_exact.resize((m + 1) * (m + 1), 1);
  row = 0;
  for (int j = 0; j <= m; ++j)
    for (int i = 0; i <= m; ++i) {
      const double x = i == m ? 1.0 : static_cast<double>(i) / m;
      const double t = j == m ? 1.0 : static_cast<double>(j) / m;
      spec.eval_points.row(row) << x, t;
      spec.eval_exact(row, 0) = analytic_transport(config, x, t);
      ++row;
    }
  return spec;
}

double analytic_transport(const TransportConfig& config, double x, double t) {
  const double foot = config.velocity == Velocity::constant ? x - t : x * std::exp(-t);
  return config.tent(foot);
}

double rms_error(const Matrix& pred, const Matrix& exact) {
  if (pred.rows() != exact.rows() || pred.cols() != exact.cols() || pred.size() == 0)
    throw InvalidArgument("rms_error: shape mismatch");
  return std::sqrt((pred - exact).squaredNorm() / static_cast<double>(pred.size()));
}

std::vector<double> rms_per_column(const Matrix& pred, const Matrix& exact) {
  if (pred.rows() != exact.rows() || pred.cols() != exact.cols() || pred.rows() == 0)
    throw InvalidArgument("rms_per_column: shape mismatch");
  std::vector<double> out(static_cast<std::size_t>(pred.cols()));
  for (Eigen::Index c = 0; c < pred.cols(); ++c)
    out[static_cast<std::size_t>(c)] =
        std::sqrt((pred.col(c) - exact.col(c)).squaredNorm() / static_cast<double>(pred.rows()));
  return out;
}

double minmax_metric(const std::vector<std::vector<double>>& history) {
  if (history.empty()) throw InvalidArgument("minmax_metric: empty history");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& per_target : history) {
    if (per_target.empty()) throw InvalidArgument("minmax_metric: empty entry");
    best = std::min(best, *std::max_element(per_target.begin(), per_target.end()));
  }
  return best;
}

}  // namespace adabasis
