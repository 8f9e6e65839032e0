#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lipgail/common.hpp"
#include "lipgail/rng.hpp"

namespace lipgail {

struct EnvSpec {
  std::string name;
  int state_dim = 0;
  int action_dim = 0;
  int horizon = 128;
  double action_limit = 1.0;        // step() clamps actions to [-limit, limit]
  double reward_lipschitz = 0.0;    // L, global bound on |grad r|
  double dynamics_lipschitz = 0.0;  // declared C, >= sup ||df/ds||
};

// deterministic dynamics, pure functions of (s, a); episodes run to the fixed
// horizon with no early termination, reward is paid on the arrival state
class Env {
 public:
  virtual ~Env() = default;
  const EnvSpec& spec() const { return spec_; }
  virtual std::vector<double> reset(Rng& rng) const = 0;
  virtual std::vector<double> step(std::span<const double> s, std::span<const double> a) const = 0;
  virtual double reward(std::span<const double> s) const = 0;

 protected:
  EnvSpec spec_;
};

std::unique_ptr<Env> make_env(const std::string& name);
const std::vector<std::string>& env_names();

// scripted controller that reads the state as (position, velocity) pairs,
// one pair per action dimension
struct PdExpert {
  double kp = 0.0;
  double kd = 0.0;
  std::vector<double> act(const Env& env, std::span<const double> s) const;
};
PdExpert make_expert(const std::string& env_name);

struct Trajectory {
  Mat states;                   // [T, state_dim], at decision time
  Mat actions;                  // [T, action_dim], as emitted (pre-clamp)
  std::vector<double> rewards;  // [T]
  std::vector<double> final_state;
  double total_return() const;
};

using PolicyFn = std::function<std::vector<double>(std::span<const double>)>;
Trajectory rollout(const Env& env, const PolicyFn& policy, Rng& rng);
std::vector<Trajectory> roll_expert(const Env& env, const PdExpert& expert, int episodes,
                                    uint64_t seed);

// demos are JSONL: a meta line, then one trajectory per line
// {"states": [[...]], "actions": [[...]], "env_return": r}
void write_demos(const std::string& path, const Env& env, const std::vector<Trajectory>& trajs,
                 uint64_t seed);

struct DemoSet {
  std::string env_name;
  int episodes = 0;
  int horizon = 0;
  uint64_t seed = 0;
  double mean_return = 0.0;
  Mat states;   // [episodes * horizon, state_dim]
  Mat actions;  // [episodes * horizon, action_dim]
  std::vector<double> returns;  // per trajectory
};
DemoSet read_demos(const std::string& path);

// test-time / noisy-baseline observation corruption; level 0 draws nothing.
// Noise is added to the raw state before normalization; when the level is
// meant in normalized units, pass the normalizer's per-dim stds as scale.
enum class NoiseKind { Gaussian, UniformLinf };
struct NoiseSpec {
  NoiseKind kind = NoiseKind::Gaussian;
  double level = 0.0;  // std for Gaussian, radius for UniformLinf
};
void add_noise(std::span<double> x, const NoiseSpec& noise, Rng& rng);
void add_noise(std::span<double> x, const NoiseSpec& noise, std::span<const double> scale,
               Rng& rng);

// sup of ||f(s + eps u, a) - f(s, a)|| / eps over random probes
double empirical_dynamics_lipschitz(const Env& env, int probes, double box, Rng& rng);
double empirical_reward_lipschitz(const Env& env, int probes, double box, Rng& rng);

}  // namespace lipgail
