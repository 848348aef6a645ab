#include "adabasis/optimize.hpp"

#include "adabasis/init.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

namespace adabasis {

double LsSystem::loss(const Matrix& linear) const { return (a * linear - b).squaredNorm(); }

std::vector<double> LsSystem::term_losses(const Matrix& linear) const {
  std::vector<double> out;
  out.reserve(blocks.size());
  const Matrix residual = raw_a * linear - raw_b;
  for (const auto& blk : blocks)
    out.push_back(residual.middleRows(blk.begin, blk.rows).squaredNorm() / static_cast<double>(blk.rows));
  return out;
}

CollocationProblem::CollocationProblem(ProblemSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  Eigen::Index total = 0;
  for (const auto& term : spec_.terms) total += term.points.rows();

  points_.resize(total, spec_.input_dim);
  targets_.resize(total, spec_.outputs);
  value_coeff_.resize(total);
  deriv_coeff_.resize(total, spec_.input_dim);
  row_scale_.resize(total);

  Eigen::Index pos = 0;
  for (const auto& term : spec_.terms) {
    const Eigen::Index n = term.points.rows();
    const double scale = std::sqrt(term.weight / static_cast<double>(n));
    points_.middleRows(pos, n) = term.points;
    targets_.middleRows(pos, n) = term.targets;
    value_coeff_.segment(pos, n) = term.op.value_coefficients(term.points);
    deriv_coeff_.middleRows(pos, n) = term.op.derivative_coefficients(term.points);
    row_scale_.segment(pos, n).setConstant(scale);
    blocks_.push_back({pos, n, scale});
    needs_jacobian_ = needs_jacobian_ || term.op.needs_jacobian();
    pos += n;
  }
}

BasisEval CollocationProblem::evaluate(const NetworkParams& params, const Architecture& arch) const {
  if (arch.input_dim != spec_.input_dim || arch.outputs != spec_.outputs)
    throw InvalidArgument("architecture does not match problem " + spec_.name + " (input_dim/outputs)");
  return forward_basis(params, arch, points_, needs_jacobian_);
}

LsSystem CollocationProblem::assemble(const BasisEval& eval) const {
  if (eval.phi.rows() != points_.rows()) throw InvalidArgument("assemble: evaluation does not match problem points");
  if (needs_jacobian_ && !eval.has_jacobian()) throw InvalidArgument("assemble: operator needs input derivatives");

  LsSystem sys;
  sys.raw_a = value_coeff_.asDiagonal() * eval.phi;
  if (needs_jacobian_)
    for (Eigen::Index k = 0; k < deriv_coeff_.cols(); ++k)
      sys.raw_a += deriv_coeff_.col(k).asDiagonal() * eval.jac[static_cast<std::size_t>(k)];
  sys.raw_b = targets_;
  sys.a = row_scale_.asDiagonal() * sys.raw_a;
  sys.b = row_scale_.asDiagonal() * sys.raw_b;
  sys.blocks = blocks_;
  return sys;
}

CollocationProblem::Cotangents CollocationProblem::cotangents(const LsSystem& system, const Matrix& linear) const {
  const Matrix residual = system.a * linear - system.b;
  const Matrix g_raw = row_scale_.asDiagonal() * (2.0 * residual * linear.transpose());
  Cotangents out;
  out.g_phi = value_coeff_.asDiagonal() * g_raw;
  if (needs_jacobian_)
    for (Eigen::Index k = 0; k < deriv_coeff_.cols(); ++k) out.g_jac.push_back(deriv_coeff_.col(k).asDiagonal() * g_raw);
  out.g_linear = 2.0 * system.a.transpose() * residual;
  return out;
}

LsSystem assemble_ls(const ProblemSpec& problem, const NetworkParams& params, const Architecture& arch) {
  CollocationProblem cp(problem);
  return cp.assemble(cp.evaluate(params, arch));
}

Matrix ls_update(NetworkParams& params, const Architecture& arch, const ProblemSpec& problem,
                 std::optional<double> rank_tol) {
  const LsSystem sys = assemble_ls(problem, params, arch);
  params.linear = lstsq_minnorm(sys.a, sys.b, rank_tol);
  return params.linear;
}

double evaluate_loss(const ProblemSpec& problem, const NetworkParams& params, const Architecture& arch) {
  return assemble_ls(problem, params, arch).loss(params.linear);
}

void adam_step(AdamState& state, Vector& params, const Vector& grads) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size())
    throw InvalidArgument("adam_step: gradient, parameter and moment sizes differ");
  if (!grads.allFinite()) throw InvalidArgument("adam_step: non-finite gradient");
  ++state.step;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  params.array() -= state.lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + state.eps);
}

std::string to_string(TrainStatus status) {
  switch (status) {
    case TrainStatus::ok: return "ok";
    case TrainStatus::diverged: return "diverged";
    case TrainStatus::aborted: return "aborted";
  }
  return "?";
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

Vector flatten_all(const NetworkParams& params) {
  const Vector hidden = flatten_hidden(params.hidden);
  Vector flat(hidden.size() + params.linear.size());
  flat << hidden, Eigen::Map<const Vector>(params.linear.data(), params.linear.size());
  return flat;
}

void unflatten_all(const Vector& flat, NetworkParams& params) {
  const Eigen::Index n_lin = params.linear.size();
  unflatten_hidden(flat.head(flat.size() - n_lin), params.hidden);
  Eigen::Map<Vector>(params.linear.data(), n_lin) = flat.tail(n_lin);
}

class Trainer {
 public:
  Trainer(const ProblemSpec& problem, NetworkParams& params, const Architecture& arch, const TrainOptions& options,
          std::string mode)
      : cp_(problem), params_(params), arch_(arch), options_(options), start_(Clock::now()) {
    params_.validate(arch_);
    if (options_.iters < 0) throw InvalidArgument("train: negative iteration count");
    record_.mode = std::move(mode);
    record_.seed = options_.seed;
  }

  void refresh() {
    eval_ = cp_.evaluate(params_, arch_);
    sys_ = cp_.assemble(eval_);
  }

  HiddenGrad hidden_grad(CollocationProblem::Cotangents& cot) const {
    return param_vjp(eval_, params_, arch_, cot.g_phi, cot.g_jac);
  }

  // Returns false when the run must stop.
  bool push(int iter, std::optional<double> before_ls) {
    IterationRecord row;
    row.iter = iter;
    row.loss = sys_.loss(params_.linear);
    row.term_losses = sys_.term_losses(params_.linear);
    row.loss_before_ls = before_ls;
    if (options_.track_rms && cp_.spec().has_reference()) {
      const Matrix pred = forward_output(params_, arch_, cp_.spec().eval_points);
      row.rms = rms_error(pred, cp_.spec().eval_exact);
      row.rms_per_target = rms_per_column(pred, cp_.spec().eval_exact);
    }
    row.wall_ms = elapsed_ms(start_);
    const bool bad = !std::isfinite(row.loss) || row.loss > options_.divergence_threshold;
    record_.rows.push_back(std::move(row));
    if (bad) {
      record_.status = TrainStatus::diverged;
      record_.message = "loss exceeded divergence threshold at iteration " + std::to_string(iter);
    }
    return !bad;
  }

  void abort(int iter, const std::exception& e) {
    record_.status = TrainStatus::aborted;
    record_.message = "iteration " + std::to_string(iter) + ": " + e.what();
  }

  AdamState adam(Eigen::Index size) const {
    AdamState s(options_.lr, size);
    s.beta1 = options_.beta1;
    s.beta2 = options_.beta2;
    s.eps = options_.adam_eps;
    return s;
  }

  CollocationProblem cp_;
  NetworkParams& params_;
  const Architecture& arch_;
  const TrainOptions& options_;
  Clock::time_point start_;
  BasisEval eval_;
  LsSystem sys_;
  TrainRecord record_;
};

}  // namespace

TrainRecord train_gd(const ProblemSpec& problem, NetworkParams& params, const Architecture& arch,
                     const TrainOptions& options) {
  Trainer t(problem, params, arch, options, "gd");
  t.refresh();
  if (!t.push(0, std::nullopt)) return t.record_;

  Vector flat = flatten_all(params);
  AdamState state = t.adam(flat.size());
  for (int it = 1; it <= options.iters; ++it) {
    try {
      auto cot = t.cp_.cotangents(t.sys_, params.linear);
      const HiddenGrad hg = t.hidden_grad(cot);
      Vector grad(flat.size());
      grad << flatten_hidden(hg), Eigen::Map<const Vector>(cot.g_linear.data(), cot.g_linear.size());
      adam_step(state, flat, grad);
      unflatten_all(flat, params);
      t.refresh();
    } catch (const InvalidArgument& e) {
      t.abort(it, e);
      break;
    }
    if (!t.push(it, std::nullopt)) break;
  }
  return t.record_;
}

TrainRecord train_lsgd(const ProblemSpec& problem, NetworkParams& params, const Architecture& arch,
                       const TrainOptions& options) {
  Trainer t(problem, params, arch, options, "lsgd");
  t.refresh();
  const double initial = t.sys_.loss(params.linear);
  params.linear = lstsq_minnorm(t.sys_.a, t.sys_.b, options.rank_tol);
  if (!t.push(0, initial)) return t.record_;

  Vector flat = flatten_hidden(params.hidden);
  AdamState state = t.adam(flat.size());
  for (int it = 1; it <= options.iters; ++it) {
    double before = 0.0;
    try {
      auto cot = t.cp_.cotangents(t.sys_, params.linear);
      adam_step(state, flat, flatten_hidden(t.hidden_grad(cot)));
      unflatten_hidden(flat, params.hidden);
      t.refresh();
      before = t.sys_.loss(params.linear);
      params.linear = lstsq_minnorm(t.sys_.a, t.sys_.b, options.rank_tol);
    } catch (const InvalidArgument& e) {
      t.abort(it, e);
      break;
    }
    if (!t.push(it, before)) break;
  }
  return t.record_;
}

void write_record_csv(std::ostream& os, const TrainRecord& record, int term_count) {
  const bool with_rms = !record.rows.empty() && record.rows.front().rms.has_value();
  const std::size_t n_targets = with_rms ? record.rows.front().rms_per_target.size() : 0;
  os << "iter,loss_total";
  for (int k = 1; k <= term_count; ++k) os << ",loss_term_" << k;
  if (with_rms) {
    os << ",rms_error";
    if (n_targets > 1)
      for (std::size_t c = 1; c <= n_targets; ++c) os << ",rms_target_" << c;
  }
  os << ",wall_ms\n";
  os << std::setprecision(17);
  for (const auto& row : record.rows) {
    os << row.iter << ',' << row.loss;
    for (int k = 0; k < term_count; ++k)
      os << ',' << (k < static_cast<int>(row.term_losses.size()) ? row.term_losses[static_cast<std::size_t>(k)] : 0.0);
    if (with_rms) {
      os << ',' << row.rms.value_or(0.0);
      if (n_targets > 1)
        for (std::size_t c = 0; c < n_targets; ++c)
          os << ',' << (c < row.rms_per_target.size() ? row.rms_per_target[c] : 0.0);
    }
    os << ',' << std::setprecision(6) << row.wall_ms << std::setprecision(17) << '\n';
  }
}

double quadratic_toy_loss(ToyPoint p) { return 5.0 * p.x * p.x - 6.0 * p.x * p.y + 5.0 * p.y * p.y; }

std::vector<ToyPoint> quadratic_toy(ToyPoint start, double lr, int iters, ToyMode mode) {
  if (iters < 0) throw InvalidArgument("quadratic_toy: negative iteration count");
  std::vector<ToyPoint> path{start};
  ToyPoint p = start;
  const auto solve_x = [](double y) { return 3.0 * y / 5.0; };
  if (mode == ToyMode::lsgd) {
    p.x = solve_x(p.y);
    path.push_back(p);
  }
  for (int i = 0; i < iters; ++i) {
    const double gx = 10.0 * p.x - 6.0 * p.y;
    const double gy = 10.0 * p.y - 6.0 * p.x;
    if (mode == ToyMode::gd) {
      p = {p.x - lr * gx, p.y - lr * gy};
    } else {
      p.y -= lr * gy;
      p.x = solve_x(p.y);
    }
    path.push_back(p);
  }
  return path;
}

std::vector<TimingRow> timing_compare(const std::vector<int>& widths, const std::vector<int>& depths, int iters,
                                      int npoints, std::uint64_t seed) {
  const ProblemSpec problem = make_regression(regression_targets("u2"), npoints);
  std::vector<TimingRow> rows;
  for (int w : widths) {
    for (int depth : depths) {
      const Architecture arch{ArchKind::plain, Activation::relu, 1, w, depth, 1};
      Rng rng(seed);
      const NetworkParams init = initialize(arch, InitKind::he, rng);
      TrainOptions opts;
      opts.iters = iters;
      opts.lr = 5e-4;
      // Divergence never truncates a timing run.
      opts.divergence_threshold = std::numeric_limits<double>::infinity();

      TimingRow row{w, depth, 0.0, 0.0};
      NetworkParams p_gd = init;
      auto t0 = Clock::now();
      train_gd(problem, p_gd, arch, opts);
      row.gd_ms = elapsed_ms(t0);

      opts.lr = 5e-3;
      NetworkParams p_ls = init;
      t0 = Clock::now();
      train_lsgd(problem, p_ls, arch, opts);
      row.lsgd_ms = elapsed_ms(t0);
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace adabasis
