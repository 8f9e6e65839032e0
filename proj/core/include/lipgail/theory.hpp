#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lipgail/common.hpp"
#include "lipgail/rng.hpp"

namespace lipgail {

// closed-form MDP with a finite action set on a state box. Reward is a
// function of the state alone and the current state's reward counts toward
// Q, so Q(s,a) = r(s) + gamma * V(D(s,a)).
struct SyntheticMdp {
  std::string name;
  int state_dim = 1;
  double discount = 0.9;
  double reward_lipschitz = 1.0;    // L
  double dynamics_lipschitz = 0.9;  // C of the deterministic part
  double noise_scale = 0.0;         // s' += uniform(-scale, scale) per dim
  std::vector<double> box_lo, box_hi;
  std::vector<std::vector<double>> actions;
  std::function<std::vector<double>(std::span<const double>, std::span<const double>)> dynamics;
  std::function<double(std::span<const double>)> reward;
  // states where |grad D| / |grad r| attain the declared constants; the
  // empirical checks probe these on top of random pairs
  std::vector<std::vector<double>> dynamics_slope_probes;
  std::vector<std::vector<double>> reward_slope_probes;

  bool stochastic() const { return noise_scale > 0.0; }
};

SyntheticMdp make_mdp(const std::string& name);
std::vector<std::string> mdp_names();

// V* by value iteration on a uniform grid, multilinear interpolation
// off-grid; deterministic dynamics only
class QTable {
 public:
  QTable(const SyntheticMdp& mdp, int points_per_dim, double tol = 1e-8,
         int max_sweeps = 200000);

  double value(std::span<const double> s) const;
  double q(std::span<const double> s, int action) const;
  int best_action(std::span<const double> s) const;
  double bellman_residual() const { return residual_; }
  double spacing(int dim) const { return spacing_[dim]; }
  const SyntheticMdp& mdp() const { return mdp_; }

 private:
  double interp(std::span<const double> s) const;

  SyntheticMdp mdp_;
  int points_;
  std::vector<double> spacing_;
  std::vector<double> v_;
  double residual_ = 0.0;
};

// central differences of Q(., action) per state dimension; every probe must
// sit at least h inside the box
std::vector<double> grad_q_fd(const QTable& q, std::span<const double> s, int action, double h);

struct BoundReport {
  std::string mdp;
  int state_dim = 1;
  double L = 0.0, C = 0.0, gamma = 0.0;
  bool applicable = false;  // gamma * C < 1
  double bound = 0.0;       // sqrt(N) * L / (1 - gamma C) when applicable
  double max_grad = 0.0;    // max over probes x actions of ||grad Q||_2
  double tolerance = 0.0;   // relative slack granted to pass
  bool pass = false;        // only meaningful when applicable
  int probes = 0;
  double bellman_residual = 0.0;  // 0 on the Monte-Carlo (stochastic) path
};

struct DetConditionReport {
  std::string mdp;
  double C = 0.0;
  double max_dyn_grad = 0.0;  // max operator norm of the FD Jacobian
  bool pass = false;          // max_dyn_grad <= C + 1e-6
  int probes = 0;
};

struct TheoryOptions {
  int grid_points_1d = 2001;
  int grid_points_2d = 201;  // per dimension
  int bound_probes_1d = 101;
  int bound_probes_2d = 21;  // per dimension
  int det_random_probes = 200;
  double fd_step = 1e-3;
  double det_fd_step = 1e-4;
  int mc_rollouts = 64;   // stochastic path, common random numbers
  int mc_horizon = 400;
  uint64_t seed = 0;
};

// pass a prebuilt table to share it across checks; nullptr builds one (or
// switches to the Monte-Carlo path for stochastic dynamics)
BoundReport check_bound(const SyntheticMdp& mdp, const QTable* table = nullptr,
                        const TheoryOptions& opt = {});
DetConditionReport check_det_condition(const SyntheticMdp& mdp, const QTable* table = nullptr,
                                       const TheoryOptions& opt = {});

// |d r(s_k) / d s_0| for k = 0..kmax along the optimal policy's actions
// (common actions and common noise for the two FD sides)
std::vector<double> reward_grad_chain(const SyntheticMdp& mdp, const QTable* table,
                                      std::span<const double> s0, int kmax, double h,
                                      const TheoryOptions& opt = {});

// max difference quotient over random pairs plus the designed slope probes
double empirical_mdp_dynamics_lipschitz(const SyntheticMdp& mdp, int pairs, Rng& rng);
double empirical_mdp_reward_lipschitz(const SyntheticMdp& mdp, int pairs, Rng& rng);

struct TheoryReport {
  BoundReport bound;
  DetConditionReport det;
};

TheoryReport verify_theory(const SyntheticMdp& mdp, const TheoryOptions& opt = {});
// {mdp, L, C, gamma, bound, max_grad, pass, probes, ...}; bound and pass are
// null when gamma * C >= 1
nlohmann::json theory_report_to_json(const TheoryReport& report);

}  // namespace lipgail
