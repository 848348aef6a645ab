#include "adabasis/experiment.hpp"

#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

using namespace adabasis;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("adabasis_test_" + name);
  fs::remove_all(p);
  return p;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream is(path);
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(is, line);) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

ExperimentConfig small_config(const fs::path& out) {
  ExperimentConfig c;
  c.problem = "u2";
  c.width = 6;
  c.depth = 2;
  c.iters = 5;
  c.npoints = 40;
  c.out = out.string();
  return c;
}

}  // namespace

TEST_CASE("config round trip") {
  ExperimentConfig c;
  c.problem = "legendre:4";
  c.arch = ArchKind::resnet;
  c.activation = Activation::tanh;
  c.width = 17;
  c.depth = 9;
  c.init = InitKind::glorot;
  c.resnet_schedule = ResnetSchedule::uniform_peak;
  c.optimizer = OptimizerMode::gd;
  c.lr = 0.1 + 0.2;  // not representable as a short decimal
  c.iters = 123;
  c.npoints = 77;
  c.dx = 0.125;
  c.alpha = 1.5;
  c.transport_form = TransportForm::conservative;
  c.track_rms = false;
  c.ensemble = 3;
  c.seed = 18446744073709551615ULL;
  c.jobs = 2;
  c.out = "some dir/with # hash";
  CHECK(parse_config(serialize_config(c)) == c);
  CHECK(parse_config(serialize_config(ExperimentConfig{})) == ExperimentConfig{});
}

TEST_CASE("config parsing errors and overrides") {
  CHECK_THROWS_AS(parse_config("bogus = 1"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("width = abc"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("width"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("arch = \"cnn\""), InvalidArgument);
  ExperimentConfig c;
  apply_config_text(c, "# comment\nwidth = 5  # trailing\n\nlr = 1e-3\n");
  CHECK(c.width == 5);
  CHECK(c.lr == 1e-3);
  CHECK(c.depth == ExperimentConfig{}.depth);

  ExperimentConfig bad;
  bad.width = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = ExperimentConfig{};
  bad.problem = "pinn-const";
  bad.dx = 0.3;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = ExperimentConfig{};
  bad.problem = "nope";
  CHECK_THROWS(bad.validate());
}

TEST_CASE("architecture follows the problem") {
  ExperimentConfig c;
  c.problem = "legendre:6";
  CHECK(c.architecture().outputs == 6);
  CHECK(c.architecture().input_dim == 1);
  c.problem = "pinn-linear";
  CHECK(c.architecture().input_dim == 2);
  CHECK(c.make_problem().terms.size() == 3);
}

TEST_CASE("member seeds are distinct and reproducible") {
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < 16; ++i) seeds.push_back(member_seed(42, i));
  std::sort(seeds.begin(), seeds.end());
  CHECK(std::unique(seeds.begin(), seeds.end()) == seeds.end());
  CHECK(member_seed(42, 3) == member_seed(42, 3));
  CHECK(member_seed(42, 3) != member_seed(43, 3));
}

TEST_CASE("summarize: population statistics of log10 loss") {
  TrainRecord a, b;
  a.rows = {{0, 1.0}, {1, 0.01}};
  b.rows = {{0, 100.0}};
  const auto s = summarize({a, b});
  REQUIRE(s.size() == 2);
  CHECK(s[0].mean_log10_loss == doctest::Approx(1.0));
  CHECK(s[0].std_log10_loss == doctest::Approx(1.0));
  CHECK(s[0].count == 2);
  CHECK(s[1].mean_log10_loss == doctest::Approx(-2.0));
  CHECK(s[1].count == 1);
  TrainRecord z;
  z.rows = {{0, 0.0}};
  CHECK(summarize({z})[0].mean_log10_loss == doctest::Approx(-300.0));
}

TEST_CASE("run writes member files, summary and manifest") {
  const fs::path out = scratch("run16");
  ExperimentConfig c = small_config(out);
  c.ensemble = 16;
  c.jobs = 4;
  c.seed = 5;
  const RunResult res = run(c);
  int members = 0;
  for (const auto& e : fs::directory_iterator(out))
    if (e.path().filename().string().rfind("member_", 0) == 0) ++members;
  CHECK(members == 16);
  CHECK(fs::exists(out / "summary.csv"));
  CHECK(fs::exists(out / "members.csv"));
  std::ifstream mf(out / "manifest.toml");
  std::stringstream ms;
  ms << mf.rdbuf();
  CHECK(parse_config(ms.str()) == c);

  // summary recomputed from member files
  const auto summary = read_csv(out / "summary.csv");
  REQUIRE(summary.size() == static_cast<std::size_t>(c.iters + 2));
  CHECK(summary[0][0] == "iter");
  for (int it = 0; it <= c.iters; ++it) {
    std::vector<double> logs;
    for (int m = 0; m < 16; ++m) {
      std::ostringstream name;
      name << "member_" << std::setw(3) << std::setfill('0') << m << ".csv";
      const auto rows = read_csv(out / name.str());
      logs.push_back(std::log10(std::stod(rows[static_cast<std::size_t>(it + 1)][1])));
    }
    double mean = 0.0;
    for (double v : logs) mean += v;
    mean /= 16.0;
    double var = 0.0;
    for (double v : logs) var += (v - mean) * (v - mean);
    const auto& row = summary[static_cast<std::size_t>(it + 1)];
    CHECK(std::stod(row[1]) == doctest::Approx(mean).epsilon(1e-12));
    CHECK(std::stod(row[2]) == doctest::Approx(std::sqrt(var / 16.0)).epsilon(1e-9).scale(1e-12));
    CHECK(row[3] == "16");
  }
  fs::remove_all(out);
}

TEST_CASE("rerun reproduces every numeric column except wall time") {
  const fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
  ExperimentConfig c = small_config(a);
  c.ensemble = 3;
  c.jobs = 3;
  run(c);
  c.jobs = 1;
  c.out = b.string();
  run(c);
  for (const std::string f : {"member_000.csv", "member_002.csv", "summary.csv", "members.csv"}) {
    auto ra = read_csv(a / f), rb = read_csv(b / f);
    REQUIRE(ra.size() == rb.size());
    for (std::size_t i = 0; i < ra.size(); ++i) {
      const std::size_t cols = f.rfind("member_", 0) == 0 ? ra[i].size() - 1 : ra[i].size();
      for (std::size_t j = 0; j < cols; ++j) CHECK(ra[i][j] == rb[i][j]);
    }
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("sweep") {
  const fs::path out = scratch("sweep");
  ExperimentConfig c = small_config(out);
  c.iters = 2;
  const auto rows = sweep(c, SweepAxis::depth, {1, 2, 3});
  REQUIRE(rows.size() == 3);
  CHECK(fs::exists(out / "depth_2" / "summary.csv"));
  const auto table = read_csv(out / "sweep_depth.csv");
  CHECK(table.size() == 4);
  CHECK(table[0][0] == "depth");
  CHECK_THROWS_AS(sweep(c, SweepAxis::width, {}), InvalidArgument);
  CHECK_THROWS_AS(sweep(c, SweepAxis::width, {2.5}), InvalidArgument);

  ExperimentConfig p = small_config(out / "alpha");
  p.problem = "pinn-linear";
  p.dx = 0.25;
  p.width = 4;
  const auto ar = sweep(p, SweepAxis::alpha, {0.0, 0.5});
  CHECK(ar.size() == 2);
  CHECK(fs::exists(out / "alpha" / "alpha_0.5" / "manifest.toml"));
  CHECK(parse_sweep_axis("alpha") == SweepAxis::alpha);
  fs::remove_all(out);
}
