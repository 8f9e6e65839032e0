#include "lipgail/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "lipgail/config.hpp"
#include "lipgail/divergence.hpp"
#include "lipgail/perturb.hpp"
#include "lipgail/version.hpp"

namespace lipgail {

namespace {

double episode_return(const Agent& agent, const Env& env, const NoiseSpec& noise,
                      std::span<const double> noise_scale, Rng& rng) {
  PolicyFn act = [&](std::span<const double> s) {
    std::vector<double> seen(s.begin(), s.end());
    add_noise(seen, noise, noise_scale, rng);
    return agent.policy.dist(agent.normalizer.normalize(seen)).mean;
  };
  return rollout(env, act, rng).total_return();
}

std::vector<double> mean_std(std::span<const double> xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= xs.size();
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= xs.size();
  return {mean, std::sqrt(var)};
}

std::vector<std::string> read_report_lines(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) lines.push_back(line);
  return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

// "# key rest-of-line" comments carry the report metadata
std::string comment_value(const std::vector<std::string>& lines, const std::string& key) {
  const std::string prefix = "# " + key + " ";
  for (const auto& l : lines)
    if (l.rfind(prefix, 0) == 0) return l.substr(prefix.size());
  return "";
}

}  // namespace

NoiseEvalReport eval_noise(const Agent& agent, const std::string& env_name,
                           std::vector<double> noise_levels, int episodes_per_level,
                           NoiseKind kind, uint64_t seed, const std::string& checkpoint_id) {
  require(!noise_levels.empty(), "eval_noise: noise levels must be nonempty");
  for (double lvl : noise_levels)
    if (lvl < 0.0) throw ConfigError("eval_noise: noise levels must be >= 0");
  require(episodes_per_level >= 1, "eval_noise: episodes_per_level must be >= 1");
  std::sort(noise_levels.begin(), noise_levels.end());

  require(make_env(env_name)->spec().state_dim == agent.policy.state_dim(),
          "eval_noise: checkpoint does not match env " + env_name);

  const std::vector<double> scale = agent.normalizer.stds();
  const int n_levels = static_cast<int>(noise_levels.size());
  const Rng root(seed);
  std::vector<std::vector<double>> returns(n_levels,
                                           std::vector<double>(episodes_per_level, 0.0));

  const int n_tasks = n_levels * episodes_per_level;
  const int n_threads = std::min(env_thread_count(), n_tasks);
  std::atomic<int> next_task{0};
  auto worker = [&] {
    std::unique_ptr<Env> env = make_env(env_name);
    for (int task = next_task.fetch_add(1); task < n_tasks; task = next_task.fetch_add(1)) {
      const int li = task / episodes_per_level;
      const int ep = task % episodes_per_level;
      Rng stream = root.fork((static_cast<uint64_t>(li) << 32) | static_cast<uint64_t>(ep));
      returns[li][ep] = episode_return(agent, *env, NoiseSpec{kind, noise_levels[li]}, scale,
                                       stream);
    }
  };
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  NoiseEvalReport report;
  report.checkpoint_id = checkpoint_id;
  report.env = env_name;
  report.noise_kind = kind;
  report.seed = seed;
  for (int li = 0; li < n_levels; ++li) {
    std::vector<double> ms = mean_std(returns[li]);
    report.rows.push_back({noise_levels[li], episodes_per_level, ms[0], ms[1]});
  }
  return report;
}

double ellc_estimate(const GaussianPolicy& policy, const Mat& states, double radius, Norm norm,
                     Rng& rng) {
  require(radius > 0.0, "ellc: radius must be positive");
  require(states.rows > 0, "ellc: empty state set");
  double total = 0.0;
  for (int i = 0; i < states.rows; ++i) {
    std::span<const double> s = states.row_span(i);
    std::vector<double> delta = norm == Norm::L2 ? rng.sphere(states.cols, radius)
                                                 : rng.linf_surface(states.cols, radius);
    std::vector<double> shifted(s.begin(), s.end());
    for (int d = 0; d < states.cols; ++d) shifted[d] += delta[d];
    total += jeffreys(policy(s), policy(shifted)) / radius;
  }
  return total / states.rows;
}

EllcReport ellc_report(const Agent& agent, const std::string& env_name,
                       std::vector<double> radii, uint64_t seed, Norm norm, bool adversarial,
                       const std::string& checkpoint_id) {
  require(!radii.empty(), "ellc: radii must be nonempty");
  for (double r : radii)
    if (r <= 0.0) throw ConfigError("ellc: radii must be positive");
  std::sort(radii.begin(), radii.end());

  std::unique_ptr<Env> env = make_env(env_name);
  const EnvSpec& spec = env->spec();
  require(spec.state_dim == agent.policy.state_dim(),
          "ellc: checkpoint does not match env " + env_name);
  constexpr int kTrajectories = 30;
  const Rng root(seed);
  Mat states(kTrajectories * spec.horizon, spec.state_dim);
  int row = 0;
  for (int ep = 0; ep < kTrajectories; ++ep) {
    Rng stream = root.fork(ep);
    PolicyFn act = [&](std::span<const double> s) {
      return agent.policy.dist(agent.normalizer.normalize(s)).sample(stream);
    };
    Trajectory traj = rollout(*env, act, stream);
    for (int t = 0; t < spec.horizon; ++t, ++row) {
      std::vector<double> obs = agent.normalizer.normalize(traj.states.row_span(t));
      std::copy(obs.begin(), obs.end(), states.row(row));
    }
  }

  EllcReport report;
  report.trajectories = kTrajectories;
  report.horizon = spec.horizon;
  report.samples = states.rows;
  report.delta_rule = std::string(adversarial ? "adversarial-" : "") +
                      (norm == Norm::L2 ? "l2-sphere" : "linf-surface");
  report.checkpoint_id = checkpoint_id;
  report.env = env_name;
  report.seed = seed;

  GaussianPolicy pi = [&](std::span<const double> s) { return agent.policy.dist(s); };
  for (size_t k = 0; k < radii.size(); ++k) {
    const double r = radii[k];
    double value;
    if (adversarial) {
      PerturbationSpec pspec = PerturbationSpec::make(norm, r, 10);
      PgaResult pga = pga_gen(agent.policy, states, pspec, nullptr);
      double total = 0.0;
      for (int i = 0; i < states.rows; ++i) {
        std::vector<double> shifted(states.row(i), states.row(i) + states.cols);
        for (int d = 0; d < states.cols; ++d) shifted[d] += pga.delta.at(i, d);
        total += jeffreys(pi(states.row_span(i)), pi(shifted)) / r;
      }
      value = total / states.rows;
    } else {
      Rng stream = root.fork(1000 + k);
      value = ellc_estimate(pi, states, r, norm, stream);
    }
    report.rows.push_back({r, value});
  }
  return report;
}

void write_noise_eval_csv(const std::string& path, const NoiseEvalReport& report) {
  require(!report.rows.empty(), "noise eval report has no rows");
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << "# " << kVersionTag << "\n";
  f << "# checkpoint " << report.checkpoint_id << "\n";
  f << "# env " << report.env << "\n";
  f << "# noise " << noise_kind_name(report.noise_kind) << "\n";
  f << "# seed " << report.seed << "\n";
  f << "noise_level,episodes,mean_return,std_return\n";
  for (const auto& r : report.rows)
    f << format_double(r.noise_level) << ',' << r.episodes << ','
      << format_double(r.mean_return) << ',' << format_double(r.std_return) << "\n";
  if (!f) throw IoError("write failed: " + path);
}

NoiseEvalReport read_noise_eval_csv(const std::string& path) {
  std::vector<std::string> lines = read_report_lines(path);
  NoiseEvalReport report;
  report.checkpoint_id = comment_value(lines, "checkpoint");
  report.env = comment_value(lines, "env");
  std::string kind = comment_value(lines, "noise");
  if (!kind.empty()) report.noise_kind = noise_kind_from_name(kind);
  std::string seed = comment_value(lines, "seed");
  if (!seed.empty()) report.seed = std::stoull(seed);
  bool header_seen = false;
  for (const auto& line : lines) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      require(line == "noise_level,episodes,mean_return,std_return",
              path + ": unexpected noise eval header");
      header_seen = true;
      continue;
    }
    std::vector<std::string> cells = split_csv(line);
    require(cells.size() == 4, path + ": malformed noise eval row");
    report.rows.push_back({std::stod(cells[0]), std::stoi(cells[1]), std::stod(cells[2]),
                           std::stod(cells[3])});
  }
  require(header_seen, path + ": missing noise eval header");
  return report;
}

void write_ellc_csv(const std::string& path, const EllcReport& report) {
  require(!report.rows.empty(), "ellc report has no rows");
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << "# " << kVersionTag << "\n";
  f << "# checkpoint " << report.checkpoint_id << "\n";
  f << "# env " << report.env << "\n";
  f << "# trajectories " << report.trajectories << "\n";
  f << "# horizon " << report.horizon << "\n";
  f << "# samples " << report.samples << "\n";
  f << "# delta " << report.delta_rule << "\n";
  f << "# seed " << report.seed << "\n";
  f << "radius,ellc\n";
  for (const auto& r : report.rows)
    f << format_double(r.radius) << ',' << format_double(r.ellc) << "\n";
  if (!f) throw IoError("write failed: " + path);
}

EllcReport read_ellc_csv(const std::string& path) {
  std::vector<std::string> lines = read_report_lines(path);
  EllcReport report;
  report.checkpoint_id = comment_value(lines, "checkpoint");
  report.env = comment_value(lines, "env");
  auto int_of = [&](const std::string& key) {
    std::string v = comment_value(lines, key);
    return v.empty() ? 0 : std::stoi(v);
  };
  report.trajectories = int_of("trajectories");
  report.horizon = int_of("horizon");
  report.samples = int_of("samples");
  report.delta_rule = comment_value(lines, "delta");
  std::string seed = comment_value(lines, "seed");
  if (!seed.empty()) report.seed = std::stoull(seed);
  bool header_seen = false;
  for (const auto& line : lines) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      require(line == "radius,ellc", path + ": unexpected ellc header");
      header_seen = true;
      continue;
    }
    std::vector<std::string> cells = split_csv(line);
    require(cells.size() == 2, path + ": malformed ellc row");
    report.rows.push_back({std::stod(cells[0]), std::stod(cells[1])});
  }
  require(header_seen, path + ": missing ellc header");
  return report;
}

}  // namespace lipgail
