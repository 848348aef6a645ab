#include "adabasis/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

namespace adabasis {

std::string to_string(OptimizerMode mode) { return mode == OptimizerMode::gd ? "gd" : "lsgd"; }

OptimizerMode parse_optimizer(const std::string& s) {
  if (s == "gd") return OptimizerMode::gd;
  if (s == "lsgd") return OptimizerMode::lsgd;
  throw InvalidArgument("unknown optimizer '" + s + "' (expected gd|lsgd)");
}

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw InvalidArgument("config: '" + key + "' expects a number, got '" + s + "'");
  return v;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& s) {
  Int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw InvalidArgument("config: '" + key + "' expects an integer, got '" + s + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw InvalidArgument("config: '" + key + "' expects true|false, got '" + s + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string quote(const std::string& s) { return '"' + s + '"'; }

std::string to_string(ResnetSchedule s) { return s == ResnetSchedule::scaled_box ? "scaled_box" : "uniform_peak"; }
ResnetSchedule parse_schedule(const std::string& s) {
  if (s == "scaled_box") return ResnetSchedule::scaled_box;
  if (s == "uniform_peak") return ResnetSchedule::uniform_peak;
  throw InvalidArgument("unknown resnet schedule '" + s + "' (expected scaled_box|uniform_peak)");
}

std::string to_string(TransportForm f) { return f == TransportForm::advective ? "advective" : "conservative"; }
TransportForm parse_form(const std::string& s) {
  if (s == "advective") return TransportForm::advective;
  if (s == "conservative") return TransportForm::conservative;
  throw InvalidArgument("unknown transport form '" + s + "' (expected advective|conservative)");
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double safe_log10(double loss) { return std::log10(std::max(loss, 1e-300)); }

}  // namespace

bool ExperimentConfig::is_pinn() const { return problem == "pinn-const" || problem == "pinn-linear"; }

Architecture ExperimentConfig::architecture() const {
  Architecture a;
  a.kind = arch;
  a.activation = activation;
  a.width = width;
  a.depth = depth;
  if (is_pinn()) {
    a.input_dim = 2;
    a.outputs = 1;
  } else {
    a.input_dim = 1;
    a.outputs = static_cast<int>(regression_targets(problem).size());
  }
  return a;
}

ProblemSpec ExperimentConfig::make_problem() const {
  if (is_pinn()) {
    TransportConfig tc;
    tc.velocity = problem == "pinn-const" ? Velocity::constant : Velocity::linear;
    tc.form = transport_form;
    tc.dx = dx;
    tc.alpha = alpha;
    return make_pinn(tc, width);
  }
  return make_regression(regression_targets(problem), npoints, seed);
}

void ExperimentConfig::validate() const {
  if (width < 1 || depth < 1) throw InvalidArgument("config: width and depth must be >= 1");
  if (iters < 0) throw InvalidArgument("config: iters must be >= 0");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw InvalidArgument("config: lr must be a finite non-negative number");
  if (npoints < 2) throw InvalidArgument("config: npoints must be >= 2");
  if (ensemble < 1) throw InvalidArgument("config: ensemble must be >= 1");
  if (jobs < 1) throw InvalidArgument("config: jobs must be >= 1");
  if (out.empty()) throw InvalidArgument("config: out must not be empty");
  if (init == InitKind::box && arch == ArchKind::resnet && resnet_schedule == ResnetSchedule::uniform_peak && depth < 2)
    throw InvalidArgument("config: the uniform_peak resnet schedule needs depth >= 2");
  architecture().validate();
  make_problem().validate();
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "problem = " << quote(c.problem) << '\n'
     << "arch = " << quote(to_string(c.arch)) << '\n'
     << "activation = " << quote(to_string(c.activation)) << '\n'
     << "width = " << c.width << '\n'
     << "depth = " << c.depth << '\n'
     << "init = " << quote(to_string(c.init)) << '\n'
     << "resnet_schedule = " << quote(to_string(c.resnet_schedule)) << '\n'
     << "optimizer = " << quote(to_string(c.optimizer)) << '\n'
     << "lr = " << format_double(c.lr) << '\n'
     << "iters = " << c.iters << '\n'
     << "npoints = " << c.npoints << '\n'
     << "dx = " << format_double(c.dx) << '\n'
     << "alpha = " << format_double(c.alpha) << '\n'
     << "transport_form = " << quote(to_string(c.transport_form)) << '\n'
     << "track_rms = " << (c.track_rms ? "true" : "false") << '\n'
     << "ensemble = " << c.ensemble << '\n'
     << "seed = " << c.seed << '\n'
     << "jobs = " << c.jobs << '\n'
     << "out = " << quote(c.out) << '\n';
  return os.str();
}

void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  if (key == "problem") c.problem = value;
  else if (key == "arch") c.arch = parse_arch_kind(value);
  else if (key == "activation") c.activation = parse_activation(value);
  else if (key == "width") c.width = parse_int<int>(key, value);
  else if (key == "depth") c.depth = parse_int<int>(key, value);
  else if (key == "init") c.init = parse_init_kind(value);
  else if (key == "resnet_schedule") c.resnet_schedule = parse_schedule(value);
  else if (key == "optimizer") c.optimizer = parse_optimizer(value);
  else if (key == "lr") c.lr = parse_double(key, value);
  else if (key == "iters") c.iters = parse_int<int>(key, value);
  else if (key == "npoints") c.npoints = parse_int<int>(key, value);
  else if (key == "dx") c.dx = parse_double(key, value);
  else if (key == "alpha") c.alpha = parse_double(key, value);
  else if (key == "transport_form") c.transport_form = parse_form(value);
  else if (key == "track_rms") c.track_rms = parse_bool(key, value);
  else if (key == "ensemble") c.ensemble = parse_int<int>(key, value);
  else if (key == "seed") c.seed = parse_int<std::uint64_t>(key, value);
  else if (key == "jobs") c.jobs = parse_int<int>(key, value);
  else if (key == "out") c.out = value;
  else throw InvalidArgument("config: unknown key '" + key + "'");
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  apply_config_text(c, text);
  return c;
}

void apply_config_text(ExperimentConfig& c, const std::string& text) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string body = line;
    // '#' starts a comment unless inside quotes
    bool in_quotes = false;
    for (std::size_t i = 0; i < body.size(); ++i) {
      if (body[i] == '"') in_quotes = !in_quotes;
      if (body[i] == '#' && !in_quotes) {
        body.resize(i);
        break;
      }
    }
    body = trim(body);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(body.substr(0, eq));
    std::string value = trim(body.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    set_config_value(c, key, value);
  }
}

std::vector<SummaryRow> summarize(const std::vector<TrainRecord>& members) {
  std::size_t longest = 0;
  for (const auto& m : members) longest = std::max(longest, m.rows.size());
  std::vector<SummaryRow> out;
  out.reserve(longest);
  for (std::size_t i = 0; i < longest; ++i) {
    std::vector<double> logs;
    int iter = 0;
    for (const auto& m : members)
      if (i < m.rows.size()) {
        logs.push_back(safe_log10(m.rows[i].loss));
        iter = m.rows[i].iter;
      }
    double mean = 0.0;
    for (double v : logs) mean += v;
    mean /= static_cast<double>(logs.size());
    double var = 0.0;
    for (double v : logs) var += (v - mean) * (v - mean);
    var /= static_cast<double>(logs.size());
    out.push_back({iter, mean, std::sqrt(var), static_cast<int>(logs.size())});
  }
  return out;
}

std::uint64_t member_seed(std::uint64_t master, int member) {
  return Rng(master).split(static_cast<std::uint64_t>(member)).seed();
}

TrainRecord run_member(const ExperimentConfig& config, int member, const ProblemSpec& problem) {
  const Architecture arch = config.architecture();
  const std::uint64_t seed = member_seed(config.seed, member);
  Rng rng(seed);
  NetworkParams params = initialize(arch, config.init, rng, config.resnet_schedule);
  TrainOptions opts;
  opts.iters = config.iters;
  opts.lr = config.lr;
  opts.seed = seed;
  opts.track_rms = config.track_rms;
  return config.optimizer == OptimizerMode::gd ? train_gd(problem, params, arch, opts)
                                               : train_lsgd(problem, params, arch, opts);
}

RunResult run(const ExperimentConfig& config) {
  config.validate();
  const ProblemSpec problem = config.make_problem();
  const int term_count = static_cast<int>(problem.terms.size());

  RunResult result;
  result.directory = config.out;
  std::filesystem::create_directories(result.directory);
  {
    std::ofstream manifest(result.directory / "manifest.toml");
    manifest << serialize_config(config);
  }

  result.members.resize(static_cast<std::size_t>(config.ensemble));
  std::atomic<int> next{0};
  std::vector<std::string> errors(static_cast<std::size_t>(config.ensemble));
  auto worker = [&]() {
    for (int i = next++; i < config.ensemble; i = next++) {
      try {
        result.members[static_cast<std::size_t>(i)] = run_member(config, i, problem);
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(i)] = e.what();
      }
    }
  };
  const int threads = std::min(config.jobs, config.ensemble);
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (!errors[i].empty()) throw std::runtime_error("ensemble member " + std::to_string(i) + ": " + errors[i]);

  for (int i = 0; i < config.ensemble; ++i) {
    std::ostringstream name;
    name << "member_" << std::setw(3) << std::setfill('0') << i << ".csv";
    std::ofstream os(result.directory / name.str());
    write_record_csv(os, result.members[static_cast<std::size_t>(i)], term_count);
  }

  result.summary = summarize(result.members);
  {
    std::ofstream os(result.directory / "summary.csv");
    os << "iter,mean_log10_loss,std_log10_loss,members\n" << std::setprecision(17);
    for (const auto& r : result.summary)
      os << r.iter << ',' << r.mean_log10_loss << ',' << r.std_log10_loss << ',' << r.count << '\n';
  }
  {
    std::ofstream os(result.directory / "members.csv");
    os << "member,seed,status,iters_run,final_loss,final_rms\n" << std::setprecision(17);
    for (int i = 0; i < config.ensemble; ++i) {
      const auto& m = result.members[static_cast<std::size_t>(i)];
      os << i << ',' << m.seed << ',' << to_string(m.status) << ',' << (m.rows.empty() ? 0 : m.rows.back().iter) << ','
         << m.final_loss() << ',';
      if (!m.rows.empty() && m.rows.back().rms) os << *m.rows.back().rms;
      os << '\n';
    }
  }
  return result;
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::width: return "width";
    case SweepAxis::depth: return "depth";
    case SweepAxis::alpha: return "alpha";
  }
  return "?";
}

SweepAxis parse_sweep_axis(const std::string& s) {
  if (s == "width") return SweepAxis::width;
  if (s == "depth") return SweepAxis::depth;
  if (s == "alpha") return SweepAxis::alpha;
  throw InvalidArgument("unknown sweep axis '" + s + "' (expected width|depth|alpha)");
}

std::vector<SweepRow> sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<double>& values) {
  if (values.empty()) throw InvalidArgument("sweep: empty value list");
  std::vector<ExperimentConfig> configs;
  for (double v : values) {
    ExperimentConfig c = base;
    c.track_rms = true;
    std::string tag;
    if (axis == SweepAxis::alpha) {
      c.alpha = v;
      tag = "alpha_" + format_double(v);
    } else {
      if (v != std::floor(v) || v < 1) throw InvalidArgument("sweep: width/depth values must be positive integers");
      (axis == SweepAxis::width ? c.width : c.depth) = static_cast<int>(v);
      tag = to_string(axis) + "_" + std::to_string(static_cast<int>(v));
    }
    c.out = (std::filesystem::path(base.out) / tag).string();
    c.validate();
    configs.push_back(std::move(c));
  }

  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const RunResult res = run(configs[i]);
    SweepRow row;
    row.value = values[i];
    row.members = static_cast<int>(res.members.size());
    std::vector<double> losses, rms, minmax;
    for (const auto& m : res.members) {
      if (m.status != TrainStatus::ok) ++row.diverged;
      if (m.rows.empty()) continue;
      losses.push_back(m.final_loss());
      if (m.rows.back().rms) rms.push_back(*m.rows.back().rms);
      std::vector<std::vector<double>> history;
      for (const auto& r : m.rows)
        if (!r.rms_per_target.empty()) history.push_back(r.rms_per_target);
      if (!history.empty()) minmax.push_back(minmax_metric(history));
    }
    row.median_final_loss = median(losses);
    row.median_final_rms = median(rms);
    row.median_minmax_rms = median(minmax);
    rows.push_back(row);
  }

  std::filesystem::create_directories(base.out);
  std::ofstream os(std::filesystem::path(base.out) / ("sweep_" + to_string(axis) + ".csv"));
  os << to_string(axis) << ",median_final_loss,median_final_rms,median_minmax_rms,diverged,members\n"
     << std::setprecision(17);
  for (const auto& r : rows)
    os << r.value << ',' << r.median_final_loss << ',' << r.median_final_rms << ',' << r.median_minmax_rms << ','
       << r.diverged << ',' << r.members << '\n';
  return rows;
}

}  // namespace adabasis
