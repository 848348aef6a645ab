#pragma once

#include "adabasis/network.hpp"
#include "adabasis/problems.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace adabasis {

/// Weighted least-squares system for the linear coefficients. Row block k
/// is the operator applied to the basis on term k's points, scaled by
/// sqrt(eps_k / N_k), so ||A xi - b||_F^2 equals the weighted mean-square
/// loss sum_k eps_k J_k.
struct LsSystem {
  Matrix a;
  Matrix b;
  struct Block {
    Eigen::Index begin = 0;
    Eigen::Index rows = 0;
    double scale = 0.0;  // sqrt(eps_k / N_k)
  };
  std::vector<Block> blocks;
  // Unscaled operator rows and targets, for per-term reporting.
  Matrix raw_a;
  Matrix raw_b;

  double loss(const Matrix& linear) const;
  /// Unweighted mean-square residual J_k of each term.
  std::vector<double> term_losses(const Matrix& linear) const;
};

/// Stacks a problem's collocation points once and assembles its LS system
/// from a forward pass over the stacked set.
class CollocationProblem {
 public:
  explicit CollocationProblem(ProblemSpec spec);

  const ProblemSpec& spec() const { return spec_; }
  const Matrix& points() const { return points_; }
  bool needs_jacobian() const { return needs_jacobian_; }

  BasisEval evaluate(const NetworkParams& params, const Architecture& arch) const;
  LsSystem assemble(const BasisEval& eval) const;

  /// Cotangents of the total loss w.r.t. (Phi, dPhi/dx) for given linear
  /// coefficients; also returns the gradient w.r.t. the coefficients.
  struct Cotangents {
    Matrix g_phi;
    std::vector<Matrix> g_jac;
    Matrix g_linear;
  };
  Cotangents cotangents(const LsSystem& system, const Matrix& linear) const;

 private:
  ProblemSpec spec_;
  Matrix points_;
  Matrix targets_;
  std::vector<LsSystem::Block> blocks_;
  Vector value_coeff_;
  Matrix deriv_coeff_;
  Vector row_scale_;
  bool needs_jacobian_ = false;
};

LsSystem assemble_ls(const ProblemSpec& problem, const NetworkParams& params, const Architecture& arch);

/// Replaces params.linear with the minimum-norm LS solution; returns it.
Matrix ls_update(NetworkParams& params, const Architecture& arch, const ProblemSpec& problem,
                 std::optional<double> rank_tol = std::nullopt);

double evaluate_loss(const ProblemSpec& problem, const NetworkParams& params, const Architecture& arch);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  Vector m;
  Vector v;
  long step = 0;

  AdamState() = default;
  AdamState(double learning_rate, Eigen::Index size)
      : lr(learning_rate), m(Vector::Zero(size)), v(Vector::Zero(size)) {}
};

/// Bias-corrected Adam update of `params` in place. Throws on a
/// non-finite or mis-shaped gradient without touching state.
void adam_step(AdamState& state, Vector& params, const Vector& grads);

struct TrainOptions {
  int iters = 1000;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  bool track_rms = false;
  double divergence_threshold = 1e12;
  std::optional<double> rank_tol;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct IterationRecord {
  int iter = 0;
  double loss = 0.0;
  std::vector<double> term_losses;
  // LSGD only: loss at the new hidden parameters with the previous linear
  // coefficients, i.e. just before the LS solve.
  std::optional<double> loss_before_ls;
  std::optional<double> rms;
  std::vector<double> rms_per_target;
  double wall_ms = 0.0;
};

enum class TrainStatus { ok, diverged, aborted };

struct TrainRecord {
  std::string mode;
  std::uint64_t seed = 0;
  std::vector<IterationRecord> rows;
  TrainStatus status = TrainStatus::ok;
  std::string message;

  double final_loss() const { return rows.empty() ? 0.0 : rows.back().loss; }
};

std::string to_string(TrainStatus status);

/// Full-batch Adam on hidden and linear parameters jointly.
TrainRecord train_gd(const ProblemSpec& problem, NetworkParams& params, const Architecture& arch,
                     const TrainOptions& options);

/// LS solve, then alternate (Adam step on hidden params; LS solve).
/// Loss is recorded after each LS solve.
TrainRecord train_lsgd(const ProblemSpec& problem, NetworkParams& params, const Architecture& arch,
                       const TrainOptions& options);

/// CSV: iter,loss_total,loss_term_1..K[,rms_error[,rms_target_1..n]],wall_ms
void write_record_csv(std::ostream& os, const TrainRecord& record, int term_count);

enum class ToyMode { gd, lsgd };

struct ToyPoint {
  double x = 0.0;
  double y = 0.0;
};

double quadratic_toy_loss(ToyPoint p);

/// Minimizes 5x^2 - 6xy + 5y^2 with plain gradient steps; x plays the
/// linear coefficient (exact LS: x = 3y/5), y the hidden parameter.
/// GD: start plus one point per step. LSGD: start, the initial LS point,
/// then one point per GD+LS cycle.
std::vector<ToyPoint> quadratic_toy(ToyPoint start, double lr, int iters, ToyMode mode);

struct TimingRow {
  int width = 0;
  int depth = 0;
  double gd_ms = 0.0;
  double lsgd_ms = 0.0;
  double ratio() const { return gd_ms > 0.0 ? lsgd_ms / gd_ms : 0.0; }
};

/// Wall time of `iters` iterations of each trainer on a plain ReLU network
/// fitting sin(2 pi x) on `npoints` grid points.
std::vector<TimingRow> timing_compare(const std::vector<int>& widths, const std::vector<int>& depths, int iters,
                                      int npoints = 1000, std::uint64_t seed = 0);

}  // namespace adabasis
