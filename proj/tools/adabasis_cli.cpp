// Command-line runner for the adaptive-basis experiments.
//
//   adabasis regress      --problem u2 --arch resnet --width 32 --depth 8 ...
//   adabasis multiregress --problem legendre:6 ...
//   adabasis pinn         --problem pinn-linear --alpha 0.5 ...
//   adabasis diagnose     --diag eig-profile ...
//   adabasis toy2d
//   adabasis bench
//
// Every training command accepts --config <file> (flat key = value) and
// --sweep-axis/--sweep-values to run one ensemble per value.

#include "adabasis/diagnostics.hpp"
#include "adabasis/experiment.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

using namespace adabasis;

namespace {

struct TrainFlags {
  std::string config_file;
  std::optional<std::string> problem, arch, activation, init, opt, schedule, form, out;
  std::optional<int> width, depth, iters, npoints, ensemble, jobs;
  std::optional<double> lr, dx, alpha;
  std::optional<std::uint64_t> seed;
  bool no_rms = false;
  std::string sweep_axis;
  std::vector<double> sweep_values;
};

void add_train_flags(CLI::App* app, TrainFlags& f) {
  app->add_option("--config", f.config_file, "Flat key = value config file");
  app->add_option("--problem", f.problem, "u1 | u2 | legendre:<n> | pinn-const | pinn-linear");
  app->add_option("--arch", f.arch, "plain | resnet");
  app->add_option("--activation", f.activation, "relu | tanh");
  app->add_option("--width", f.width, "Hidden width");
  app->add_option("--depth", f.depth, "Number of hidden layers");
  app->add_option("--init", f.init, "box | he | glorot");
  app->add_option("--resnet-schedule", f.schedule, "scaled_box | uniform_peak");
  app->add_option("--opt", f.opt, "gd | lsgd");
  app->add_option("--lr", f.lr, "Adam learning rate");
  app->add_option("--iters", f.iters, "Training iterations");
  app->add_option("--npoints", f.npoints, "Regression sample count");
  app->add_option("--dx", f.dx, "Collocation spacing");
  app->add_option("--alpha", f.alpha, "Residual penalty exponent, eps = W^-alpha");
  app->add_option("--form", f.form, "advective | conservative transport operator");
  app->add_option("--seed", f.seed, "Master seed");
  app->add_option("--ensemble", f.ensemble, "Number of ensemble members");
  app->add_option("--jobs", f.jobs, "Concurrent ensemble members");
  app->add_option("--out", f.out, "Output directory");
  app->add_flag("--no-rms", f.no_rms, "Skip per-iteration RMS tracking");
  app->add_option("--sweep-axis", f.sweep_axis, "width | depth | alpha");
  app->add_option("--sweep-values", f.sweep_values, "Comma-separated sweep values")->delimiter(',');
}

ExperimentConfig build_config(ExperimentConfig cfg, const TrainFlags& f) {
  if (!f.config_file.empty()) {
    std::ifstream is(f.config_file);
    if (!is) throw std::runtime_error("cannot open config file " + f.config_file);
    std::stringstream ss;
    ss << is.rdbuf();
    apply_config_text(cfg, ss.str());
  }
  if (f.problem) cfg.problem = *f.problem;
  if (f.arch) cfg.arch = parse_arch_kind(*f.arch);
  if (f.activation) cfg.activation = parse_activation(*f.activation);
  if (f.width) cfg.width = *f.width;
  if (f.depth) cfg.depth = *f.depth;
  if (f.init) cfg.init = parse_init_kind(*f.init);
  if (f.schedule) set_config_value(cfg, "resnet_schedule", *f.schedule);
  if (f.opt) cfg.optimizer = parse_optimizer(*f.opt);
  if (f.lr) cfg.lr = *f.lr;
  if (f.iters) cfg.iters = *f.iters;
  if (f.npoints) cfg.npoints = *f.npoints;
  if (f.dx) cfg.dx = *f.dx;
  if (f.alpha) cfg.alpha = *f.alpha;
  if (f.form) set_config_value(cfg, "transport_form", *f.form);
  if (f.seed) cfg.seed = *f.seed;
  if (f.ensemble) cfg.ensemble = *f.ensemble;
  if (f.jobs) cfg.jobs = *f.jobs;
  if (f.out) cfg.out = *f.out;
  if (f.no_rms) cfg.track_rms = false;
  return cfg;
}

int run_training(const ExperimentConfig& defaults, const TrainFlags& f, bool want_pinn) {
  const ExperimentConfig cfg = build_config(defaults, f);
  if (cfg.is_pinn() != want_pinn)
    throw InvalidArgument(want_pinn ? "pinn expects --problem pinn-const|pinn-linear"
                                    : "regression commands expect a regression --problem");
  if (!f.sweep_axis.empty()) {
    const auto rows = sweep(cfg, parse_sweep_axis(f.sweep_axis), f.sweep_values);
    std::cout << f.sweep_axis << ",median_final_loss,median_final_rms,median_minmax_rms,diverged\n";
    for (const auto& r : rows)
      std::cout << r.value << ',' << r.median_final_loss << ',' << r.median_final_rms << ',' << r.median_minmax_rms
                << ',' << r.diverged << '\n';
    return 0;
  }
  if (!f.sweep_values.empty()) throw InvalidArgument("--sweep-values given without --sweep-axis");
  const RunResult res = run(cfg);
  int diverged = 0;
  for (const auto& m : res.members) diverged += m.status != TrainStatus::ok;
  const auto& last = res.summary.back();
  std::cout << "wrote " << res.members.size() << " member records to " << res.directory.string() << '\n'
            << "final mean log10(loss) = " << last.mean_log10_loss << " +/- " << last.std_log10_loss
            << " (iter " << last.iter << ")";
  if (diverged) std::cout << ", " << diverged << " member(s) diverged or aborted";
  std::cout << '\n';
  return 0;
}

struct DiagFlags {
  std::string diag = "collapse";
  std::string arch = "plain";
  std::string activation = "relu";
  std::string init = "box";
  std::string domain = "input";
  int input_dim = 1;
  int width = 2;
  int depth = 32;
  int samples = 10000;
  int grid = 256;
  int seeds = 16;
  std::uint64_t seed = 0;
  bool write_images = false;
  std::string out = "diagnostics";
};

int run_diagnose(const DiagFlags& f) {
  const Architecture arch{parse_arch_kind(f.arch), parse_activation(f.activation), f.input_dim, f.width, f.depth, 1};
  arch.validate();
  const InitKind init = parse_init_kind(f.init);
  if (f.seeds < 1) throw InvalidArgument("--seeds must be >= 1");
  const TraceDomain domain = f.domain == "input"    ? TraceDomain::input
                             : f.domain == "hidden" ? TraceDomain::hidden_box
                                                    : throw InvalidArgument("--domain expects input|hidden");
  const std::filesystem::path dir = f.out;
  std::filesystem::create_directories(dir);

  auto params_for = [&](int i) {
    Rng rng(member_seed(f.seed, i));
    return initialize(arch, init, rng);
  };

  if (f.diag == "image-trace") {
    std::ofstream os(dir / "image_bounds.csv");
    os << "seed,layer,component,min,max\n" << std::setprecision(17);
    for (int i = 0; i < f.seeds; ++i) {
      const auto trace = propagate_box(params_for(i), arch, f.samples, member_seed(f.seed, i) + 1, domain);
      for (std::size_t l = 0; l < trace.images.size(); ++l)
        for (Eigen::Index c = 0; c < trace.lower[l].size(); ++c)
          os << i << ',' << l << ',' << c + 1 << ',' << trace.lower[l](c) << ',' << trace.upper[l](c) << '\n';
      if (f.write_images) {
        std::ofstream img(dir / ("image_seed" + std::to_string(i) + ".csv"));
        img << "layer,sample";
        for (Eigen::Index c = 0; c < trace.images.back().cols(); ++c) img << ",y_" << c + 1;
        img << '\n' << std::setprecision(17);
        for (std::size_t l = 0; l < trace.images.size(); ++l)
          for (Eigen::Index r = 0; r < trace.images[l].rows(); ++r) {
            img << l << ',' << r;
            for (Eigen::Index c = 0; c < trace.images[l].cols(); ++c) img << ',' << trace.images[l](r, c);
            img << '\n';
          }
      }
    }
  } else if (f.diag == "eig-profile") {
    std::ofstream os(dir / "eig_profile.csv");
    os << "seed,layer,second_over_first,min_over_first,degenerate\n" << std::setprecision(17);
    for (int i = 0; i < f.seeds; ++i) {
      const auto prof =
          eig_ratio_profile(propagate_box(params_for(i), arch, f.samples, member_seed(f.seed, i) + 1, domain));
      for (std::size_t l = 0; l < prof.size(); ++l)
        os << i << ',' << l << ',' << prof[l].second_over_first << ',' << prof[l].min_over_first << ','
           << prof[l].degenerate << '\n';
    }
  } else if (f.diag == "collapse") {
    std::ofstream os(dir / "collapse.csv");
    os << "seed,score,collapsed\n" << std::setprecision(17);
    const Matrix grid = unit_grid(f.grid, arch.input_dim);
    int collapsed = 0;
    for (int i = 0; i < f.seeds; ++i) {
      const double score = collapse_score(params_for(i), arch, grid);
      collapsed += score < kCollapseThreshold;
      os << i << ',' << score << ',' << (score < kCollapseThreshold) << '\n';
    }
    std::cout << collapsed << "/" << f.seeds << " collapsed\n";
  } else if (f.diag == "basis") {
    const Matrix grid = unit_grid(f.grid, arch.input_dim);
    for (int i = 0; i < f.seeds; ++i) export_basis(dir / ("basis_seed" + std::to_string(i) + ".csv"), params_for(i), arch, grid);
  } else if (f.diag == "cutplanes") {
    for (int i = 0; i < f.seeds; ++i)
      export_cutplanes(dir / ("cutplanes_seed" + std::to_string(i) + ".csv"), params_for(i), arch);
  } else {
    throw InvalidArgument("--diag expects image-trace|eig-profile|collapse|basis|cutplanes");
  }
  std::cout << "wrote " << f.diag << " output to " << dir.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive-basis network training and initialization diagnostics"};
  app.require_subcommand(1);

  TrainFlags regress_flags, multi_flags, pinn_flags;
  auto* regress = app.add_subcommand("regress", "Single-target 1-D regression (u1, u2)");
  add_train_flags(regress, regress_flags);
  auto* multi = app.add_subcommand("multiregress", "Multi-target regression (legendre:<n>)");
  add_train_flags(multi, multi_flags);
  auto* pinn = app.add_subcommand("pinn", "Physics-informed collocation for linear transport");
  add_train_flags(pinn, pinn_flags);

  DiagFlags diag_flags;
  auto* diagnose = app.add_subcommand("diagnose", "Initialization diagnostics");
  diagnose->add_option("--diag", diag_flags.diag, "image-trace | eig-profile | collapse | basis | cutplanes");
  diagnose->add_option("--arch", diag_flags.arch, "plain | resnet");
  diagnose->add_option("--activation", diag_flags.activation, "relu | tanh");
  diagnose->add_option("--init", diag_flags.init, "box | he | glorot");
  diagnose->add_option("--domain", diag_flags.domain, "input | hidden (sample [0,1]^d or [0,1]^w)");
  diagnose->add_option("--input-dim", diag_flags.input_dim, "Input dimension d");
  diagnose->add_option("--width", diag_flags.width, "Hidden width");
  diagnose->add_option("--depth", diag_flags.depth, "Hidden layers");
  diagnose->add_option("--samples", diag_flags.samples, "Samples per image trace");
  diagnose->add_option("--grid", diag_flags.grid, "Grid points per axis for collapse/basis");
  diagnose->add_option("--seeds", diag_flags.seeds, "Number of initializations");
  diagnose->add_option("--seed", diag_flags.seed, "Master seed");
  diagnose->add_flag("--write-images", diag_flags.write_images, "Also dump every propagated sample");
  diagnose->add_option("--out", diag_flags.out, "Output directory");

  double toy_lr = 0.1, toy_x = -4.0, toy_y = 1.0;
  int toy_iters = 50;
  std::string toy_out;
  auto* toy = app.add_subcommand("toy2d", "GD vs LSGD on 5x^2 - 6xy + 5y^2");
  toy->add_option("--lr", toy_lr, "Step size");
  toy->add_option("--iters", toy_iters, "Steps / cycles");
  toy->add_option("--x0", toy_x, "Initial x");
  toy->add_option("--y0", toy_y, "Initial y");
  toy->add_option("--out", toy_out, "CSV file (stdout when omitted)");

  std::vector<int> bench_widths{4, 16, 64, 256}, bench_depths{4, 16, 64, 256};
  int bench_iters = 1000, bench_points = 1000;
  std::uint64_t bench_seed = 0;
  auto* bench = app.add_subcommand("bench", "Wall-time ratio LSGD / GD over a width x depth grid");
  bench->add_option("--widths", bench_widths, "Widths")->delimiter(',');
  bench->add_option("--depths", bench_depths, "Depths")->delimiter(',');
  bench->add_option("--iters", bench_iters, "Iterations per trainer");
  bench->add_option("--npoints", bench_points, "Regression points");
  bench->add_option("--seed", bench_seed, "Initialization seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*regress) {
      ExperimentConfig d;
      d.problem = "u2";
      d.out = "results/regress";
      return run_training(d, regress_flags, false);
    }
    if (*multi) {
      ExperimentConfig d;
      d.problem = "legendre:6";
      d.arch = ArchKind::resnet;
      d.width = 6;
      d.depth = 16;
      d.init = InitKind::box;
      d.lr = 0.0005;
      d.out = "results/multiregress";
      return run_training(d, multi_flags, false);
    }
    if (*pinn) {
      ExperimentConfig d;
      d.problem = "pinn-const";
      d.width = 32;
      d.depth = 1;
      d.init = InitKind::box;
      d.iters = 500;
      d.out = "results/pinn";
      return run_training(d, pinn_flags, true);
    }
    if (*diagnose) return run_diagnose(diag_flags);
    if (*toy) {
      std::ofstream file;
      if (!toy_out.empty()) {
        file.open(toy_out);
        if (!file) throw std::runtime_error("cannot open " + toy_out);
      }
      std::ostream& os = toy_out.empty() ? std::cout : file;
      os << "mode,step,x,y,loss\n" << std::setprecision(17);
      for (const auto mode : {ToyMode::gd, ToyMode::lsgd}) {
        const auto path = quadratic_toy({toy_x, toy_y}, toy_lr, toy_iters, mode);
        for (std::size_t i = 0; i < path.size(); ++i)
          os << (mode == ToyMode::gd ? "gd" : "lsgd") << ',' << i << ',' << path[i].x << ',' << path[i].y << ','
             << quadratic_toy_loss(path[i]) << '\n';
      }
      return 0;
    }
    if (*bench) {
      std::cout << "width,depth,gd_ms,lsgd_ms,ratio\n";
      for (const auto& r : timing_compare(bench_widths, bench_depths, bench_iters, bench_points, bench_seed))
        std::cout << r.width << ',' << r.depth << ',' << r.gd_ms << ',' << r.lsgd_ms << ',' << r.ratio() << std::endl;
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
