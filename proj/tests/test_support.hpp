#pragma once
// Shared fixtures for unit tests and the acceptance binary: random networks,
// finite-difference checks of the analytic derivatives, kink filtering.

#include "adabasis/network.hpp"
#include "adabasis/optimize.hpp"
#include "adabasis/problems.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace support {

using namespace adabasis;

inline NetworkParams random_params(const Architecture& arch, Rng& rng, double scale = 1.0) {
  NetworkParams p;
  for (int l = 0; l < arch.depth; ++l) {
    const int in = l == 0 ? arch.input_dim : arch.width;
    p.hidden.push_back({scale * rng_normal(rng, arch.width, in), scale * rng_normal(rng, arch.width, 1).col(0)});
  }
  p.linear = rng_normal(rng, arch.width, arch.outputs);
  return p;
}

/// Smallest |pre-activation| over all layers and points.
inline double min_abs_preact(const NetworkParams& params, const Architecture& arch, const Matrix& x) {
  const BasisEval e = forward_basis(params, arch, x);
  double m = INFINITY;
  for (const auto& c : e.layers) m = std::min(m, c.preact.cwiseAbs().minCoeff());
  return m;
}

/// Rows of x whose pre-activations all exceed margin in magnitude.
inline Matrix kink_safe_rows(const NetworkParams& params, const Architecture& arch, const Matrix& x, double margin) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    if (min_abs_preact(params, arch, x.row(i)) > margin) keep.push_back(i);
  Matrix out(static_cast<Eigen::Index>(keep.size()), x.cols());
  for (std::size_t r = 0; r < keep.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(keep[r]);
  return out;
}

inline double rel_err(double a, double b, double floor = 1e-300) {
  const double den = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / den;
}

// Entries smaller than this are compared absolutely: central differences
// with h = 1e-6 carry ~1e-10 roundoff on O(1) values.
inline constexpr double kFdFloor = 1e-4;

struct CheckStats {
  double max_rel = 0.0;
  int probes = 0;
};

/// Compares the flat hidden gradient `grad` to central differences of f at
/// `probes` random parameter indices (or all, if fewer).
inline CheckStats fd_probe_hidden(NetworkParams params, const Vector& grad,
                                  const std::function<double(const NetworkParams&)>& f, int probes, Rng& rng,
                                  double h = 1e-6) {
  Vector flat = flatten_hidden(params.hidden);
  CheckStats s;
  const Eigen::Index n = flat.size();
  for (int k = 0; k < probes; ++k) {
    const Eigen::Index i = probes >= n ? k % n : static_cast<Eigen::Index>(rng.next_u64() % static_cast<std::uint64_t>(n));
    const double x0 = flat(i);
    flat(i) = x0 + h;
    unflatten_hidden(flat, params.hidden);
    const double fp = f(params);
    flat(i) = x0 - h;
    unflatten_hidden(flat, params.hidden);
    const double fm = f(params);
    flat(i) = x0;
    unflatten_hidden(flat, params.hidden);
    const double fd = (fp - fm) / (2.0 * h);
    s.max_rel = std::max(s.max_rel, rel_err(grad(i), fd, kFdFloor));
    ++s.probes;
  }
  return s;
}

/// <g_phi, Phi> + sum_k <g_jac[k], dPhi/dx_k>.
inline double basis_functional(const NetworkParams& params, const Architecture& arch, const Matrix& x,
                               const Matrix& g_phi, const std::vector<Matrix>& g_jac) {
  const BasisEval e = forward_basis(params, arch, x, !g_jac.empty());
  double v = (g_phi.array() * e.phi.array()).sum();
  for (std::size_t k = 0; k < g_jac.size(); ++k) v += (g_jac[k].array() * e.jac[k].array()).sum();
  return v;
}

/// Input Jacobian vs central differences of the basis, every entry.
inline CheckStats fd_input_jacobian(const NetworkParams& params, const Architecture& arch, const Matrix& x,
                                    double h = 1e-6) {
  const auto jac = input_jacobian_basis(params, arch, x);
  CheckStats s;
  for (int k = 0; k < arch.input_dim; ++k) {
    Matrix xp = x, xm = x;
    xp.col(k).array() += h;
    xm.col(k).array() -= h;
    const Matrix fd = (forward_basis(params, arch, xp).phi - forward_basis(params, arch, xm).phi) / (2.0 * h);
    for (Eigen::Index i = 0; i < fd.rows(); ++i)
      for (Eigen::Index j = 0; j < fd.cols(); ++j) {
        const double a = jac[static_cast<std::size_t>(k)](i, j);
        if (std::abs(a) < 1e-12 && std::abs(fd(i, j)) < 1e-9) continue;
        s.max_rel = std::max(s.max_rel, rel_err(a, fd(i, j), kFdFloor));
        ++s.probes;
      }
  }
  return s;
}

/// Gradient of a problem's loss w.r.t. hidden params at fixed linear
/// coefficients, checked against finite differences of the same loss.
inline CheckStats fd_loss_gradient(const ProblemSpec& spec, const NetworkParams& params, const Architecture& arch,
                                   int probes, Rng& rng, double h = 1e-6) {
  const CollocationProblem cp(spec);
  const BasisEval e = cp.evaluate(params, arch);
  const LsSystem sys = cp.assemble(e);
  const auto cot = cp.cotangents(sys, params.linear);
  const Vector grad = flatten_hidden(param_vjp(e, params, arch, cot.g_phi, cot.g_jac));
  auto loss = [&](const NetworkParams& p) { return cp.assemble(cp.evaluate(p, arch)).loss(p.linear); };
  return fd_probe_hidden(params, grad, loss, probes, rng, h);
}

/// Width-3 ReLU network for the constant-velocity tent wave:
/// u = 4 s(x - t) - 8 s(x - t - 1/4) + 4 s(x - t - 1/2).
inline void exact_tent_network(Architecture& arch, NetworkParams& params) {
  arch = Architecture{ArchKind::plain, Activation::relu, 2, 3, 1, 1};
  Matrix w(3, 2);
  w << 1, -1, 1, -1, 1, -1;
  Vector b(3);
  b << 0.0, -0.25, -0.5;
  params.hidden = {{w, b}};
  params.linear = Matrix(3, 1);
  params.linear << 4.0, -8.0, 4.0;
}

}  // namespace support
