#include "lipgail/envs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lipgail/version.hpp"

namespace lipgail {
namespace {

using nlohmann::json;

double clamp_action(double a, double limit) { return std::clamp(a, -limit, limit); }

// shared quadratic bump reward per (x, v) axis, gradient norm <= 2 everywhere
double axis_reward(double x, double v) {
  return std::max(0.0, 1.0 - x * x - 0.1 * v * v);
}

constexpr double kDt = 0.1;

class DoubleIntegrator1D : public Env {
 public:
  DoubleIntegrator1D() {
    spec_.name = "double-integrator-1d";
    spec_.state_dim = 2;
    spec_.action_dim = 1;
    spec_.reward_lipschitz = 2.0;
    spec_.dynamics_lipschitz = 1.1;  // true sup singular value ~1.0512
  }
  std::vector<double> reset(Rng& rng) const override {
    return {rng.uniform(-1.0, 1.0), rng.uniform(-0.5, 0.5)};
  }
  std::vector<double> step(std::span<const double> s, std::span<const double> a) const override {
    double u = clamp_action(a[0], spec_.action_limit);
    double v = s[1] + kDt * u;
    double x = s[0] + kDt * v;
    return {x, v};
  }
  double reward(std::span<const double> s) const override { return axis_reward(s[0], s[1]); }
};

class PointReach2D : public Env {
 public:
  PointReach2D() {
    spec_.name = "point-reach-2d";
    spec_.state_dim = 4;
    spec_.action_dim = 2;
    spec_.reward_lipschitz = std::sqrt(2.0);
    spec_.dynamics_lipschitz = 1.1;
  }
  std::vector<double> reset(Rng& rng) const override {
    std::vector<double> s(4);
    for (int axis = 0; axis < 2; ++axis) {
      s[2 * axis] = rng.uniform(-1.0, 1.0);
      s[2 * axis + 1] = rng.uniform(-0.5, 0.5);
    }
    return s;
  }
  std::vector<double> step(std::span<const double> s, std::span<const double> a) const override {
    std::vector<double> out(4);
    for (int axis = 0; axis < 2; ++axis) {
      double u = clamp_action(a[axis], spec_.action_limit);
      double v = s[2 * axis + 1] + kDt * u;
      out[2 * axis] = s[2 * axis] + kDt * v;
      out[2 * axis + 1] = v;
    }
    return out;
  }
  double reward(std::span<const double> s) const override {
    return 0.5 * (axis_reward(s[0], s[1]) + axis_reward(s[2], s[3]));
  }
};

class SpringPendulum : public Env {
 public:
  SpringPendulum() {
    spec_.name = "spring-pendulum";
    spec_.state_dim = 2;
    spec_.action_dim = 1;
    spec_.reward_lipschitz = 2.0;
    spec_.dynamics_lipschitz = 1.05;  // true sup singular value ~1.0423
  }
  std::vector<double> reset(Rng& rng) const override {
    return {rng.uniform(-1.0, 1.0), rng.uniform(-0.5, 0.5)};
  }
  std::vector<double> step(std::span<const double> s, std::span<const double> a) const override {
    constexpr double kSpring = 2.0, kDamping = 0.2;
    double u = clamp_action(a[0], spec_.action_limit);
    double v = s[1] + kDt * (-kSpring * s[0] - kDamping * s[1] + u);
    double x = s[0] + kDt * v;
    return {x, v};
  }
  double reward(std::span<const double> s) const override { return axis_reward(s[0], s[1]); }
};

}  // namespace

std::unique_ptr<Env> make_env(const std::string& name) {
  if (name == "double-integrator-1d") return std::make_unique<DoubleIntegrator1D>();
  if (name == "point-reach-2d") return std::make_unique<PointReach2D>();
  if (name == "spring-pendulum") return std::make_unique<SpringPendulum>();
  throw ConfigError("unknown env: " + name);
}

const std::vector<std::string>& env_names() {
  static const std::vector<std::string> names = {"double-integrator-1d", "point-reach-2d",
                                                 "spring-pendulum"};
  return names;
}

std::vector<double> PdExpert::act(const Env& env, std::span<const double> s) const {
  const auto& spec = env.spec();
  std::vector<double> a(spec.action_dim);
  for (int axis = 0; axis < spec.action_dim; ++axis) {
    double x = s[2 * axis], v = s[2 * axis + 1];
    a[axis] = std::clamp(-kp * x - kd * v, -spec.action_limit, spec.action_limit);
  }
  return a;
}

PdExpert make_expert(const std::string& env_name) {
  if (env_name == "double-integrator-1d") return {4.0, 3.2};
  if (env_name == "point-reach-2d") return {4.0, 3.2};
  if (env_name == "spring-pendulum") return {2.5, 3.0};
  throw ConfigError("unknown env: " + env_name);
}

double Trajectory::total_return() const {
  double sum = 0.0;
  for (double r : rewards) sum += r;
  return sum;
}

Trajectory rollout(const Env& env, const PolicyFn& policy, Rng& rng) {
  const auto& spec = env.spec();
  const int T = spec.horizon;
  Trajectory tr;
  tr.states = Mat(T, spec.state_dim);
  tr.actions = Mat(T, spec.action_dim);
  tr.rewards.resize(T);
  std::vector<double> s = env.reset(rng);
  for (int t = 0; t < T; ++t) {
    std::vector<double> a = policy(s);
    require(static_cast<int>(a.size()) == spec.action_dim, "rollout: action dim mismatch");
    std::copy(s.begin(), s.end(), tr.states.row(t));
    std::copy(a.begin(), a.end(), tr.actions.row(t));
    s = env.step(s, a);
    tr.rewards[t] = env.reward(s);
  }
  tr.final_state = s;
  return tr;
}

std::vector<Trajectory> roll_expert(const Env& env, const PdExpert& expert, int episodes,
                                    uint64_t seed) {
  Rng root(seed);
  std::vector<Trajectory> out;
  out.reserve(episodes);
  for (int ep = 0; ep < episodes; ++ep) {
    Rng ep_rng = root.fork(static_cast<uint64_t>(ep));
    out.push_back(rollout(
        env, [&](std::span<const double> s) { return expert.act(env, s); }, ep_rng));
  }
  return out;
}

namespace {

std::vector<std::vector<double>> mat_rows(const Mat& m) {
  std::vector<std::vector<double>> out(m.rows);
  for (int r = 0; r < m.rows; ++r)
    out[r].assign(m.row_span(r).begin(), m.row_span(r).end());
  return out;
}

}  // namespace

void write_demos(const std::string& path, const Env& env, const std::vector<Trajectory>& trajs,
                 uint64_t seed) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path);
  double mean_return = 0.0;
  for (const auto& tr : trajs) mean_return += tr.total_return();
  if (!trajs.empty()) mean_return /= static_cast<double>(trajs.size());
  std::string provenance = "env=" + env.spec().name +
                           ";episodes=" + std::to_string(trajs.size()) +
                           ";horizon=" + std::to_string(env.spec().horizon) +
                           ";seed=" + std::to_string(seed);
  json meta = {{"meta",
                {{"env", env.spec().name},
                 {"episodes", static_cast<int>(trajs.size())},
                 {"horizon", env.spec().horizon},
                 {"seed", seed},
                 {"version_tag", kVersionTag},
                 {"config_hash", hex64(fnv1a64(provenance))},
                 {"mean_return", mean_return}}}};
  f << meta.dump() << "\n";
  for (const auto& tr : trajs) {
    json line = {{"states", mat_rows(tr.states)},
                 {"actions", mat_rows(tr.actions)},
                 {"env_return", tr.total_return()}};
    f << line.dump() << "\n";
  }
  if (!f) throw IoError("write failed: " + path);
}

DemoSet read_demos(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(f, line)) throw IoError("empty demo file: " + path);
  json meta_line;
  try {
    meta_line = json::parse(line);
  } catch (const json::parse_error& e) {
    throw IoError("demo meta parse error: " + std::string(e.what()));
  }
  if (!meta_line.contains("meta")) throw IoError("demo file missing meta line: " + path);
  const json& meta = meta_line["meta"];
  DemoSet out;
  out.env_name = meta.at("env").get<std::string>();
  out.episodes = meta.at("episodes").get<int>();
  out.horizon = meta.at("horizon").get<int>();
  out.seed = meta.at("seed").get<uint64_t>();
  out.mean_return = meta.at("mean_return").get<double>();
  auto env = make_env(out.env_name);
  const int sdim = env->spec().state_dim, adim = env->spec().action_dim;
  const int n = out.episodes * out.horizon;
  out.states = Mat(n, sdim);
  out.actions = Mat(n, adim);
  out.returns.reserve(out.episodes);
  int row = 0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw IoError("demo line parse error: " + std::string(e.what()));
    }
    const auto& states = j.at("states");
    const auto& actions = j.at("actions");
    if (states.size() != actions.size())
      throw IoError("demo trajectory length mismatch: " + path);
    if (static_cast<int>(states.size()) != out.horizon)
      throw IoError("demo trajectory does not match declared horizon: " + path);
    for (size_t t = 0; t < states.size(); ++t) {
      if (row >= n) throw IoError("demo file has more transitions than meta declares: " + path);
      const auto& s = states[t];
      const auto& a = actions[t];
      if (static_cast<int>(s.size()) != sdim || static_cast<int>(a.size()) != adim)
        throw IoError("demo transition dim mismatch: " + path);
      for (int c = 0; c < sdim; ++c) out.states.at(row, c) = s[c].get<double>();
      for (int c = 0; c < adim; ++c) out.actions.at(row, c) = a[c].get<double>();
      ++row;
    }
    out.returns.push_back(j.at("env_return").get<double>());
  }
  if (row != n || static_cast<int>(out.returns.size()) != out.episodes)
    throw IoError("demo file has fewer transitions than meta declares: " + path);
  return out;
}

void add_noise(std::span<double> x, const NoiseSpec& noise, Rng& rng) {
  if (noise.level <= 0.0) return;
  if (noise.kind == NoiseKind::Gaussian) {
    for (double& xi : x) xi += noise.level * rng.normal();
  } else {
    for (double& xi : x) xi += rng.uniform(-noise.level, noise.level);
  }
}

void add_noise(std::span<double> x, const NoiseSpec& noise, std::span<const double> scale,
               Rng& rng) {
  if (noise.level <= 0.0) return;
  require(scale.size() == x.size(), "add_noise: scale size mismatch");
  if (noise.kind == NoiseKind::Gaussian) {
    for (size_t i = 0; i < x.size(); ++i) x[i] += noise.level * scale[i] * rng.normal();
  } else {
    for (size_t i = 0; i < x.size(); ++i)
      x[i] += scale[i] * rng.uniform(-noise.level, noise.level);
  }
}

double empirical_dynamics_lipschitz(const Env& env, int probes, double box, Rng& rng) {
  const auto& spec = env.spec();
  const double eps = 1e-4;
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    std::vector<double> s(spec.state_dim), a(spec.action_dim);
    for (double& v : s) v = rng.uniform(-box, box);
    for (double& v : a) v = rng.uniform(-spec.action_limit, spec.action_limit);
    std::vector<double> u = rng.sphere(spec.state_dim, 1.0);
    std::vector<double> s2(s);
    for (int i = 0; i < spec.state_dim; ++i) s2[i] += eps * u[i];
    auto f1 = env.step(s, a);
    auto f2 = env.step(s2, a);
    double d2 = 0.0;
    for (int i = 0; i < spec.state_dim; ++i) d2 += (f2[i] - f1[i]) * (f2[i] - f1[i]);
    worst = std::max(worst, std::sqrt(d2) / eps);
  }
  return worst;
}

double empirical_reward_lipschitz(const Env& env, int probes, double box, Rng& rng) {
  const auto& spec = env.spec();
  const double eps = 1e-4;
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    std::vector<double> s(spec.state_dim);
    for (double& v : s) v = rng.uniform(-box, box);
    std::vector<double> u = rng.sphere(spec.state_dim, 1.0);
    std::vector<double> s2(s);
    for (int i = 0; i < spec.state_dim; ++i) s2[i] += eps * u[i];
    worst = std::max(worst, std::abs(env.reward(s2) - env.reward(s)) / eps);
  }
  return worst;
}

}  // namespace lipgail
