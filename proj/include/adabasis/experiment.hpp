#pragma once

#include "adabasis/init.hpp"
#include "adabasis/network.hpp"
#include "adabasis/optimize.hpp"
#include "adabasis/problems.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace adabasis {

enum class OptimizerMode { gd, lsgd };
std::string to_string(OptimizerMode mode);
OptimizerMode parse_optimizer(const std::string& s);

struct ExperimentConfig {
  // problem: u1 | u2 | legendre:<n> | pinn-const | pinn-linear
  std::string problem = "u2";
  ArchKind arch = ArchKind::plain;
  Activation activation = Activation::relu;
  int width = 32;
  int depth = 4;
  InitKind init = InitKind::he;
  ResnetSchedule resnet_schedule = ResnetSchedule::scaled_box;
  OptimizerMode optimizer = OptimizerMode::lsgd;
  double lr = 0.005;
  int iters = 1000;
  int npoints = 1000;
  double dx = 0.05;
  double alpha = 0.0;
  TransportForm transport_form = TransportForm::advective;
  bool track_rms = true;
  int ensemble = 1;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out = "results";

  void validate() const;
  bool is_pinn() const;
  Architecture architecture() const;
  ProblemSpec make_problem() const;
  bool operator==(const ExperimentConfig&) const = default;
};

/// Flat `key = value` text, one field per line; strings are quoted.
std::string serialize_config(const ExperimentConfig& config);
ExperimentConfig parse_config(const std::string& text);
/// Overrides only the keys present in text.
void apply_config_text(ExperimentConfig& config, const std::string& text);
/// Applies one `key`/`value` pair to config; throws on unknown keys.
void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);

struct SummaryRow {
  int iter = 0;
  double mean_log10_loss = 0.0;
  double std_log10_loss = 0.0;
  int count = 0;
};

/// Per-iteration mean and (population) standard deviation of log10 loss
/// over members; diverged members contribute only the iterations they ran.
std::vector<SummaryRow> summarize(const std::vector<TrainRecord>& members);

struct RunResult {
  std::vector<TrainRecord> members;
  std::vector<SummaryRow> summary;
  std::filesystem::path directory;
};

/// Seed for ensemble member i under a master seed.
std::uint64_t member_seed(std::uint64_t master, int member);

/// Trains one member in memory: initializes from the member seed, trains
/// with the configured optimizer.
TrainRecord run_member(const ExperimentConfig& config, int member, const ProblemSpec& problem);

/// Runs the ensemble and writes manifest.toml, member_<i>.csv,
/// members.csv (status per member) and summary.csv into config.out.
RunResult run(const ExperimentConfig& config);

enum class SweepAxis { width, depth, alpha };
std::string to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(const std::string& s);

struct SweepRow {
  double value = 0.0;
  double median_final_loss = 0.0;
  double median_final_rms = 0.0;
  double median_minmax_rms = 0.0;
  int diverged = 0;
  int members = 0;
};

/// Runs the template once per value, each into <out>/<axis>_<value>, and
/// writes <out>/sweep_<axis>.csv.
std::vector<SweepRow> sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<double>& values);

}  // namespace adabasis
