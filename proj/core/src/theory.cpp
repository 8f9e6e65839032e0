#include "lipgail/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "lipgail/version.hpp"

namespace lipgail {

namespace {

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i)
    out[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (n - 1);
  return out;
}

double l2(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

// largest singular value via power iteration on J^T J (row-major n x n)
double op_norm(const std::vector<double>& jac, int n) {
  if (n == 1) return std::abs(jac[0]);
  std::vector<double> x(n, 1.0 / std::sqrt(static_cast<double>(n)));
  double lambda = 0.0;
  for (int it = 0; it < 500; ++it) {
    std::vector<double> z(n, 0.0), y(n, 0.0);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) z[r] += jac[r * n + c] * x[c];
    for (int c = 0; c < n; ++c)
      for (int r = 0; r < n; ++r) y[c] += jac[r * n + c] * z[r];
    double nrm = l2(y);
    if (nrm == 0.0) return 0.0;
    lambda = nrm;
    for (int i = 0; i < n; ++i) x[i] = y[i] / nrm;
  }
  return std::sqrt(lambda);
}

// central-difference Jacobian of the deterministic dynamics, row-major
std::vector<double> fd_jacobian(const SyntheticMdp& mdp, std::span<const double> s,
                                std::span<const double> action, double h) {
  const int n = mdp.state_dim;
  std::vector<double> jac(n * n, 0.0);
  for (int c = 0; c < n; ++c) {
    std::vector<double> sp(s.begin(), s.end()), sm(s.begin(), s.end());
    sp[c] += h;
    sm[c] -= h;
    std::vector<double> fp = mdp.dynamics(sp, action);
    std::vector<double> fm = mdp.dynamics(sm, action);
    for (int r = 0; r < n; ++r) jac[r * n + c] = (fp[r] - fm[r]) / (2.0 * h);
  }
  return jac;
}

std::vector<double> fd_reward_grad(const SyntheticMdp& mdp, std::span<const double> s,
                                   double h) {
  const int n = mdp.state_dim;
  std::vector<double> g(n, 0.0);
  for (int c = 0; c < n; ++c) {
    std::vector<double> sp(s.begin(), s.end()), sm(s.begin(), s.end());
    sp[c] += h;
    sm[c] -= h;
    g[c] = (mdp.reward(sp) - mdp.reward(sm)) / (2.0 * h);
  }
  return g;
}

// Cartesian product of per-dim linspaces shrunk by margin
std::vector<std::vector<double>> probe_grid(const SyntheticMdp& mdp, int per_dim,
                                            double margin) {
  std::vector<std::vector<double>> axes;
  for (int d = 0; d < mdp.state_dim; ++d)
    axes.push_back(linspace(mdp.box_lo[d] + margin, mdp.box_hi[d] - margin, per_dim));
  std::vector<std::vector<double>> probes;
  std::vector<int> idx(mdp.state_dim, 0);
  while (true) {
    std::vector<double> p(mdp.state_dim);
    for (int d = 0; d < mdp.state_dim; ++d) p[d] = axes[d][idx[d]];
    probes.push_back(std::move(p));
    int d = mdp.state_dim - 1;
    while (d >= 0 && ++idx[d] == per_dim) idx[d--] = 0;
    if (d < 0) break;
  }
  return probes;
}

std::vector<double> random_interior(const SyntheticMdp& mdp, double margin, Rng& rng) {
  std::vector<double> s(mdp.state_dim);
  for (int d = 0; d < mdp.state_dim; ++d)
    s[d] = rng.uniform(mdp.box_lo[d] + margin, mdp.box_hi[d] - margin);
  return s;
}

// discounted return of one truncated rollout under a fixed noise sequence
double noisy_return(const SyntheticMdp& mdp, std::vector<double> s,
                    std::span<const double> noise, int horizon) {
  const std::vector<double>& a0 = mdp.actions.at(0);
  double total = 0.0, g = 1.0;
  for (int k = 0; k < horizon; ++k) {
    total += g * mdp.reward(s);
    s = mdp.dynamics(s, a0);
    for (int d = 0; d < mdp.state_dim; ++d) s[d] += noise[k * mdp.state_dim + d];
    g *= mdp.discount;
  }
  return total;
}

}  // namespace

std::vector<std::string> mdp_names() {
  return {"linear-1d",    "contraction-1d",       "linear-2d",
          "tanh-1d",      "piecewise-1d",         "noisy-linear-1d-0.01",
          "noisy-linear-1d-0.05"};
}

SyntheticMdp make_mdp(const std::string& name) {
  SyntheticMdp m;
  m.name = name;
  m.actions = {{0.0}};
  auto linear_1d = [](double rate) {
    return [rate](std::span<const double> s, std::span<const double>) {
      return std::vector<double>{rate * s[0]};
    };
  };
  if (name == "linear-1d") {
    m.box_lo = {-1.0};
    m.box_hi = {1.0};
    m.actions = {{-1.0}, {0.0}, {1.0}};  // dummies, dynamics ignores them
    m.dynamics = linear_1d(0.9);
    m.reward = [](std::span<const double> s) { return s[0]; };
    m.dynamics_slope_probes = {{0.0}};
    m.reward_slope_probes = {{0.0}};
  } else if (name == "contraction-1d") {
    m.dynamics_lipschitz = 0.5;
    m.box_lo = {-1.0};
    m.box_hi = {1.0};
    m.dynamics = linear_1d(0.5);
    m.reward = [](std::span<const double> s) { return std::max(0.0, s[0] - 0.3); };
    m.dynamics_slope_probes = {{0.0}};
    m.reward_slope_probes = {{0.5}, {0.8}};
  } else if (name == "linear-2d") {
    m.state_dim = 2;
    m.box_lo = {-1.0, -1.0};
    m.box_hi = {1.0, 1.0};
    m.dynamics = [](std::span<const double> s, std::span<const double>) {
      return std::vector<double>{0.9 * s[0], 0.9 * s[1]};
    };
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    m.reward = [inv_sqrt2](std::span<const double> s) { return inv_sqrt2 * (s[0] + s[1]); };
    m.dynamics_slope_probes = {{0.0, 0.0}};
    m.reward_slope_probes = {{0.0, 0.0}};
  } else if (name == "tanh-1d") {
    m.dynamics_lipschitz = 1.0;
    m.box_lo = {-2.0};
    m.box_hi = {2.0};
    m.dynamics = [](std::span<const double> s, std::span<const double>) {
      return std::vector<double>{std::tanh(s[0])};
    };
    m.reward = [](std::span<const double> s) { return s[0]; };
    m.dynamics_slope_probes = {{0.0}};
    m.reward_slope_probes = {{0.0}};
  } else if (name == "piecewise-1d") {
    // slope 1.5 inside |s| <= 0.4, slope 0.5 outside, continuous
    m.dynamics_lipschitz = 1.5;
    m.box_lo = {-1.0};
    m.box_hi = {1.0};
    m.dynamics = [](std::span<const double> s, std::span<const double>) {
      double x = s[0];
      double y = std::abs(x) <= 0.4 ? 1.5 * x : 0.5 * x + (x > 0.0 ? 0.4 : -0.4);
      return std::vector<double>{y};
    };
    m.reward = [](std::span<const double> s) { return s[0]; };
    m.dynamics_slope_probes = {{0.0}, {0.2}};
    m.reward_slope_probes = {{0.0}};
  } else if (name == "noisy-linear-1d-0.01" || name == "noisy-linear-1d-0.05") {
    m.noise_scale = name.back() == '5' ? 0.05 : 0.01;
    m.box_lo = {-1.0};
    m.box_hi = {1.0};
    m.dynamics = linear_1d(0.9);
    m.reward = [](std::span<const double> s) { return s[0]; };
    m.dynamics_slope_probes = {{0.0}};
    m.reward_slope_probes = {{0.0}};
  } else {
    throw ConfigError("unknown synthetic mdp: " + name);
  }
  return m;
}

QTable::QTable(const SyntheticMdp& mdp, int points_per_dim, double tol, int max_sweeps)
    : mdp_(mdp), points_(points_per_dim) {
  require(!mdp_.stochastic(), "value iteration handles deterministic dynamics only");
  require(points_ >= 2, "grid needs at least 2 points per dimension");
  require(!mdp_.actions.empty(), "mdp has no actions");
  require(static_cast<int>(mdp_.box_lo.size()) == mdp_.state_dim &&
              static_cast<int>(mdp_.box_hi.size()) == mdp_.state_dim,
          "box does not match state_dim");
  const int n = mdp_.state_dim;
  spacing_.resize(n);
  for (int d = 0; d < n; ++d) {
    require(mdp_.box_hi[d] > mdp_.box_lo[d], "empty state box");
    spacing_[d] = (mdp_.box_hi[d] - mdp_.box_lo[d]) / (points_ - 1);
  }
  long long nodes = 1;
  for (int d = 0; d < n; ++d) nodes *= points_;
  const int n_actions = static_cast<int>(mdp_.actions.size());
  const int corners = 1 << n;

  // per (node, action): 2^n interpolation corners of the clamped successor
  std::vector<double> rewards(nodes);
  std::vector<long long> corner_index(nodes * n_actions * corners);
  std::vector<double> corner_weight(nodes * n_actions * corners);
  std::vector<double> state(n);
  for (long long node = 0; node < nodes; ++node) {
    long long rem = node;
    for (int d = n - 1; d >= 0; --d) {
      state[d] = mdp_.box_lo[d] + spacing_[d] * (rem % points_);
      rem /= points_;
    }
    rewards[node] = mdp_.reward(state);
    for (int a = 0; a < n_actions; ++a) {
      std::vector<double> next = mdp_.dynamics(state, mdp_.actions[a]);
      std::vector<int> cell(n);
      std::vector<double> frac(n);
      for (int d = 0; d < n; ++d) {
        double u = (std::clamp(next[d], mdp_.box_lo[d], mdp_.box_hi[d]) - mdp_.box_lo[d]) /
                   spacing_[d];
        cell[d] = std::min(static_cast<int>(u), points_ - 2);
        frac[d] = u - cell[d];
      }
      for (int c = 0; c < corners; ++c) {
        long long flat = 0;
        double w = 1.0;
        for (int d = 0; d < n; ++d) {
          int hi_side = (c >> d) & 1;
          flat = flat * points_ + cell[d] + hi_side;
          w *= hi_side ? frac[d] : 1.0 - frac[d];
        }
        long long slot = (node * n_actions + a) * corners + c;
        corner_index[slot] = flat;
        corner_weight[slot] = w;
      }
    }
  }

  v_.assign(nodes, 0.0);
  std::vector<double> v_next(nodes, 0.0);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    residual_ = 0.0;
    for (long long node = 0; node < nodes; ++node) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < n_actions; ++a) {
        double ev = 0.0;
        long long base = (node * n_actions + a) * corners;
        for (int c = 0; c < corners; ++c)
          ev += corner_weight[base + c] * v_[corner_index[base + c]];
        best = std::max(best, ev);
      }
      v_next[node] = rewards[node] + mdp_.discount * best;
      residual_ = std::max(residual_, std::abs(v_next[node] - v_[node]));
    }
    v_.swap(v_next);
    if (residual_ < tol) return;
  }
  require(false, "value iteration did not converge: residual " + format_double(residual_));
}

double QTable::interp(std::span<const double> s) const {
  const int n = mdp_.state_dim;
  std::vector<int> cell(n);
  std::vector<double> frac(n);
  for (int d = 0; d < n; ++d) {
    double u = (std::clamp(s[d], mdp_.box_lo[d], mdp_.box_hi[d]) - mdp_.box_lo[d]) /
               spacing_[d];
    cell[d] = std::min(static_cast<int>(u), points_ - 2);
    frac[d] = u - cell[d];
  }
  double out = 0.0;
  for (int c = 0; c < (1 << n); ++c) {
    long long flat = 0;
    double w = 1.0;
    for (int d = 0; d < n; ++d) {
      int hi_side = (c >> d) & 1;
      flat = flat * points_ + cell[d] + hi_side;
      w *= hi_side ? frac[d] : 1.0 - frac[d];
    }
    out += w * v_[flat];
  }
  return out;
}

double QTable::value(std::span<const double> s) const { return interp(s); }

double QTable::q(std::span<const double> s, int action) const {
  require(action >= 0 && action < static_cast<int>(mdp_.actions.size()), "bad action index");
  std::vector<double> next = mdp_.dynamics(s, mdp_.actions[action]);
  return mdp_.reward(s) + mdp_.discount * interp(next);
}

int QTable::best_action(std::span<const double> s) const {
  int best = 0;
  double best_v = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < static_cast<int>(mdp_.actions.size()); ++a) {
    double ev = interp(mdp_.dynamics(s, mdp_.actions[a]));
    if (ev > best_v) {
      best_v = ev;
      best = a;
    }
  }
  return best;
}

std::vector<double> grad_q_fd(const QTable& q, std::span<const double> s, int action,
                              double h) {
  const SyntheticMdp& mdp = q.mdp();
  const int n = mdp.state_dim;
  std::vector<double> g(n);
  for (int d = 0; d < n; ++d) {
    require(s[d] - h >= mdp.box_lo[d] && s[d] + h <= mdp.box_hi[d],
            "grad_q_fd: probe within h of the box boundary");
    std::vector<double> sp(s.begin(), s.end()), sm(s.begin(), s.end());
    sp[d] += h;
    sm[d] -= h;
    g[d] = (q.q(sp, action) - q.q(sm, action)) / (2.0 * h);
  }
  return g;
}

BoundReport check_bound(const SyntheticMdp& mdp, const QTable* table,
                        const TheoryOptions& opt) {
  BoundReport rep;
  rep.mdp = mdp.name;
  rep.state_dim = mdp.state_dim;
  rep.L = mdp.reward_lipschitz;
  rep.C = mdp.dynamics_lipschitz;
  rep.gamma = mdp.discount;
  const double gc = rep.gamma * rep.C;
  rep.applicable = gc < 1.0;
  if (rep.applicable) rep.bound = std::sqrt(static_cast<double>(rep.state_dim)) * rep.L / (1.0 - gc);
  rep.tolerance = mdp.stochastic() ? 0.05 : 0.01;

  const int per_dim = mdp.state_dim == 1 ? opt.bound_probes_1d : opt.bound_probes_2d;
  const double margin = 2.0 * opt.fd_step + 0.01;
  std::vector<std::vector<double>> probes = probe_grid(mdp, per_dim, margin);
  rep.probes = static_cast<int>(probes.size());

  double max_grad = 0.0;
  if (mdp.stochastic()) {
    require(mdp.actions.size() == 1, "the Monte-Carlo path expects an action-free mdp");
    const Rng root(opt.seed);
    for (size_t p = 0; p < probes.size(); ++p) {
      std::vector<double> grad(mdp.state_dim);
      for (int d = 0; d < mdp.state_dim; ++d) {
        std::vector<double> sp = probes[p], sm = probes[p];
        sp[d] += opt.fd_step;
        sm[d] -= opt.fd_step;
        double acc = 0.0;
        for (int m = 0; m < opt.mc_rollouts; ++m) {
          // common random numbers: one noise sequence drives both FD sides
          Rng stream = root.fork(p * 1000003ULL + static_cast<uint64_t>(d) * 1009ULL +
                                 static_cast<uint64_t>(m));
          std::vector<double> noise(static_cast<size_t>(opt.mc_horizon) * mdp.state_dim);
          for (double& w : noise) w = stream.uniform(-mdp.noise_scale, mdp.noise_scale);
          acc += noisy_return(mdp, sp, noise, opt.mc_horizon) -
                 noisy_return(mdp, sm, noise, opt.mc_horizon);
        }
        grad[d] = acc / (2.0 * opt.fd_step * opt.mc_rollouts);
      }
      max_grad = std::max(max_grad, l2(grad));
    }
  } else {
    std::unique_ptr<QTable> owned;
    if (!table) {
      owned = std::make_unique<QTable>(
          mdp, mdp.state_dim == 1 ? opt.grid_points_1d : opt.grid_points_2d);
      table = owned.get();
    }
    for (const auto& probe : probes)
      for (int a = 0; a < static_cast<int>(mdp.actions.size()); ++a)
        max_grad = std::max(max_grad, l2(grad_q_fd(*table, probe, a, opt.fd_step)));
    rep.bellman_residual = table->bellman_residual();
  }
  rep.max_grad = max_grad;
  rep.pass = rep.applicable && max_grad <= rep.bound * (1.0 + rep.tolerance);
  return rep;
}

DetConditionReport check_det_condition(const SyntheticMdp& mdp, const QTable* table,
                                       const TheoryOptions& opt) {
  DetConditionReport rep;
  rep.mdp = mdp.name;
  rep.C = mdp.dynamics_lipschitz;
  std::vector<std::vector<double>> probes = mdp.dynamics_slope_probes;
  Rng rng(opt.seed ^ 0x9e3779b97f4a7c15ULL);
  for (int i = 0; i < opt.det_random_probes; ++i)
    probes.push_back(random_interior(mdp, opt.det_fd_step, rng));
  rep.probes = static_cast<int>(probes.size());
  double max_grad = 0.0;
  for (const auto& probe : probes) {
    int a = (table && mdp.actions.size() > 1) ? table->best_action(probe) : 0;
    std::vector<double> jac = fd_jacobian(mdp, probe, mdp.actions.at(a), opt.det_fd_step);
    max_grad = std::max(max_grad, op_norm(jac, mdp.state_dim));
  }
  rep.max_dyn_grad = max_grad;
  rep.pass = max_grad <= rep.C + 1e-6;
  return rep;
}

std::vector<double> reward_grad_chain(const SyntheticMdp& mdp, const QTable* table,
                                      std::span<const double> s0, int kmax, double h,
                                      const TheoryOptions& opt) {
  require(kmax >= 0, "kmax must be >= 0");
  // actions fixed from the unperturbed rollout so both FD sides share them
  std::vector<int> acts(kmax, 0);
  if (table && mdp.actions.size() > 1) {
    std::vector<double> c(s0.begin(), s0.end());
    for (int k = 0; k < kmax; ++k) {
      acts[k] = table->best_action(c);
      c = mdp.dynamics(c, mdp.actions[acts[k]]);
    }
  }
  const int rollouts = mdp.stochastic() ? opt.mc_rollouts : 1;
  const Rng root(opt.seed);
  std::vector<double> out(kmax + 1, 0.0);
  for (int d = 0; d < mdp.state_dim; ++d) {
    std::vector<double> diff(kmax + 1, 0.0);
    for (int m = 0; m < rollouts; ++m) {
      Rng stream = root.fork(static_cast<uint64_t>(d) * 7919ULL + static_cast<uint64_t>(m));
      std::vector<double> noise(static_cast<size_t>(std::max(kmax, 1)) * mdp.state_dim, 0.0);
      if (mdp.stochastic())
        for (double& w : noise) w = stream.uniform(-mdp.noise_scale, mdp.noise_scale);
      std::vector<double> sp(s0.begin(), s0.end()), sm(s0.begin(), s0.end());
      sp[d] += h;
      sm[d] -= h;
      for (int k = 0; k <= kmax; ++k) {
        diff[k] += mdp.reward(sp) - mdp.reward(sm);
        if (k == kmax) break;
        sp = mdp.dynamics(sp, mdp.actions[acts[k]]);
        sm = mdp.dynamics(sm, mdp.actions[acts[k]]);
        for (int dd = 0; dd < mdp.state_dim; ++dd) {
          sp[dd] += noise[static_cast<size_t>(k) * mdp.state_dim + dd];
          sm[dd] += noise[static_cast<size_t>(k) * mdp.state_dim + dd];
        }
      }
    }
    for (int k = 0; k <= kmax; ++k) {
      double g = diff[k] / (2.0 * h * rollouts);
      out[k] += g * g;
    }
  }
  for (double& v : out) v = std::sqrt(v);
  return out;
}

double empirical_mdp_dynamics_lipschitz(const SyntheticMdp& mdp, int pairs, Rng& rng) {
  const std::vector<double>& a0 = mdp.actions.at(0);
  double best = 0.0;
  for (int i = 0; i < pairs; ++i) {
    std::vector<double> x = random_interior(mdp, 0.0, rng);
    std::vector<double> y;
    if (i % 2 == 0) {
      y = random_interior(mdp, 0.0, rng);
    } else {
      std::vector<double> dir = rng.sphere(mdp.state_dim, 1e-4);
      y = x;
      for (int d = 0; d < mdp.state_dim; ++d) y[d] += dir[d];
    }
    std::vector<double> dxy(mdp.state_dim);
    for (int d = 0; d < mdp.state_dim; ++d) dxy[d] = x[d] - y[d];
    double dist = l2(dxy);
    if (dist == 0.0) continue;
    std::vector<double> fx = mdp.dynamics(x, a0), fy = mdp.dynamics(y, a0);
    for (int d = 0; d < mdp.state_dim; ++d) fx[d] -= fy[d];
    best = std::max(best, l2(fx) / dist);
  }
  for (const auto& probe : mdp.dynamics_slope_probes)
    best = std::max(best, op_norm(fd_jacobian(mdp, probe, a0, 1e-4), mdp.state_dim));
  return best;
}

double empirical_mdp_reward_lipschitz(const SyntheticMdp& mdp, int pairs, Rng& rng) {
  double best = 0.0;
  for (int i = 0; i < pairs; ++i) {
    std::vector<double> x = random_interior(mdp, 0.0, rng);
    std::vector<double> y;
    if (i % 2 == 0) {
      y = random_interior(mdp, 0.0, rng);
    } else {
      std::vector<double> dir = rng.sphere(mdp.state_dim, 1e-4);
      y = x;
      for (int d = 0; d < mdp.state_dim; ++d) y[d] += dir[d];
    }
    std::vector<double> dxy(mdp.state_dim);
    for (int d = 0; d < mdp.state_dim; ++d) dxy[d] = x[d] - y[d];
    double dist = l2(dxy);
    if (dist == 0.0) continue;
    best = std::max(best, std::abs(mdp.reward(x) - mdp.reward(y)) / dist);
  }
  for (const auto& probe : mdp.reward_slope_probes)
    best = std::max(best, l2(fd_reward_grad(mdp, probe, 1e-4)));
  return best;
}

TheoryReport verify_theory(const SyntheticMdp& mdp, const TheoryOptions& opt) {
  TheoryReport rep;
  if (mdp.stochastic()) {
    rep.bound = check_bound(mdp, nullptr, opt);
    rep.det = check_det_condition(mdp, nullptr, opt);  // deterministic core
  } else {
    QTable table(mdp, mdp.state_dim == 1 ? opt.grid_points_1d : opt.grid_points_2d);
    rep.bound = check_bound(mdp, &table, opt);
    rep.det = check_det_condition(mdp, &table, opt);
  }
  return rep;
}

nlohmann::json theory_report_to_json(const TheoryReport& report) {
  const BoundReport& b = report.bound;
  nlohmann::json j;
  j["mdp"] = b.mdp;
  j["state_dim"] = b.state_dim;
  j["L"] = b.L;
  j["C"] = b.C;
  j["gamma"] = b.gamma;
  j["applicable"] = b.applicable;
  if (b.applicable) {
    j["bound"] = b.bound;
    j["pass"] = b.pass;
  } else {
    // gamma * C >= 1: the geometric series diverges, nothing to check
    j["bound"] = nullptr;
    j["pass"] = nullptr;
  }
  j["max_grad"] = b.max_grad;
  j["tolerance"] = b.tolerance;
  j["probes"] = b.probes;
  j["bellman_residual"] = b.bellman_residual;
  nlohmann::json det;
  det["C"] = report.det.C;
  det["max_dyn_grad"] = report.det.max_dyn_grad;
  det["pass"] = report.det.pass;
  det["probes"] = report.det.probes;
  j["det_condition"] = std::move(det);
  j["version_tag"] = kVersionTag;
  return j;
}

}  // namespace lipgail
