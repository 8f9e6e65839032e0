#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "lipgail/gail.hpp"
#include "support/finitediff.hpp"

using namespace lipgail;
namespace ts = testsupport;

namespace {

DemoSet make_demo_set(const std::string& env_name, int episodes, uint64_t seed) {
  auto env = make_env(env_name);
  PdExpert expert = make_expert(env_name);
  auto trajs = roll_expert(*env, expert, episodes, seed);
  auto path = std::filesystem::temp_directory_path() /
              ("gail_demos_" + std::to_string(seed) + ".jsonl");
  write_demos(path.string(), *env, trajs, seed);
  return read_demos(path.string());
}

Mat random_mat(Rng& rng, int rows, int cols, double scale) {
  Mat m(rows, cols);
  for (double& v : m.v) v = rng.uniform(-scale, scale);
  return m;
}

TrainConfig small_cfg(TrainMode mode, uint64_t seed) {
  TrainConfig cfg;
  cfg.mode = mode;
  cfg.seed = seed;
  cfg.steps_per_iter = 256;
  cfg.minibatch_size = 64;
  return cfg;
}

bool rows_equal(const MetricsRow& a, const MetricsRow& b) {
  return a.iter == b.iter && a.env_steps == b.env_steps && a.disc_bce == b.disc_bce &&
         a.disc_reg == b.disc_reg && a.gen_ppo_loss == b.gen_ppo_loss &&
         a.gen_reg == b.gen_reg && a.entropy == b.entropy &&
         a.rollout_env_return_mean == b.rollout_env_return_mean;
}

std::vector<MetricsRow> run_iters(const TrainConfig& cfg, const DemoSet& demos, int iters) {
  Trainer trainer(cfg, demos);
  std::vector<MetricsRow> rows;
  for (int i = 0; i < iters; ++i) rows.push_back(trainer.iterate());
  return rows;
}

}  // namespace

TEST_CASE("gae: single step with zero values gives advantage = return = reward") {
  std::vector<double> r = {1.0}, v = {0.0};
  GaeOut g = gae(r, v, 0.0, 0.99, 0.95);
  CHECK(g.advantages[0] == 1.0);
  CHECK(g.returns[0] == 1.0);
}

TEST_CASE("gae: lambda = 0 collapses to one-step TD errors") {
  Rng rng(4);
  std::vector<double> r(6), v(6);
  for (auto& x : r) x = rng.uniform(-1.0, 1.0);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  const double gamma = 0.9, bootstrap = 0.3;
  GaeOut g = gae(r, v, bootstrap, gamma, 0.0);
  for (int t = 0; t < 6; ++t) {
    double v_next = t + 1 < 6 ? v[t + 1] : bootstrap;
    CHECK(std::fabs(g.advantages[t] - (r[t] + gamma * v_next - v[t])) < 1e-15);
    CHECK(g.returns[t] == g.advantages[t] + v[t]);
  }
}

TEST_CASE("gae: 3-step case matches the brute-force discounted sum of TD errors") {
  std::vector<double> r = {0.5, -0.2, 1.0}, v = {0.1, 0.4, -0.3};
  const double gamma = 0.99, lambda = 0.95, bootstrap = 0.2;
  GaeOut g = gae(r, v, bootstrap, gamma, lambda);
  std::vector<double> delta(3);
  for (int t = 0; t < 3; ++t) {
    double v_next = t + 1 < 3 ? v[t + 1] : bootstrap;
    delta[t] = r[t] + gamma * v_next - v[t];
  }
  for (int t = 0; t < 3; ++t) {
    double want = 0.0;
    for (int k = 0; t + k < 3; ++k) want += std::pow(gamma * lambda, k) * delta[t + k];
    CHECK(std::fabs(g.advantages[t] - want) < 1e-12);
  }
}

TEST_CASE("surrogate reward: log 2 at D = 0.5, strictly decreasing, finite at the edges") {
  CHECK(std::fabs(surrogate_reward(0.5) - std::log(2.0)) < 1e-15);
  double prev = surrogate_reward(0.01);
  for (double d = 0.02; d < 1.0; d += 0.01) {
    double cur = surrogate_reward(d);
    CHECK(cur < prev);
    prev = cur;
  }
  CHECK(std::isfinite(surrogate_reward(0.0)));
  CHECK(std::isfinite(surrogate_reward(1.0)));
  CHECK(surrogate_reward(0.0) == surrogate_reward(1e-9));  // clamp floor
}

TEST_CASE("zeroed discriminator scores every pair 0.5: bce is exactly 2 log 2") {
  ParamStore store;
  Rng rng(7);
  DiscriminatorNet disc(store, 2, 1, rng, {6});
  for (auto& [name, t] : store.entries)
    for (double& w : t.data()) w = 0.0;
  Mat gen_s = random_mat(rng, 5, 2, 1.0), gen_a = random_mat(rng, 5, 1, 1.0);
  Mat demo_s = random_mat(rng, 5, 2, 1.0), demo_a = random_mat(rng, 5, 1, 1.0);
  ad::Tensor bce = disc_bce_graph(disc, gen_s, gen_a, demo_s, demo_a);
  CHECK(std::fabs(bce.value() - 2.0 * std::log(2.0)) < 1e-15);
}

TEST_CASE("discriminator loss gradient (bce + kappa R_d) matches finite differences") {
  ParamStore store;
  Rng rng(12);
  DiscriminatorNet disc(store, 2, 1, rng, {6});
  Mat gen_s = random_mat(rng, 4, 2, 1.0), gen_a = random_mat(rng, 4, 1, 1.0);
  Mat demo_s = random_mat(rng, 4, 2, 1.0), demo_a = random_mat(rng, 4, 1, 1.0);
  Mat union_s(8, 2), union_a(8, 1);
  std::copy(gen_s.v.begin(), gen_s.v.end(), union_s.v.begin());
  std::copy(demo_s.v.begin(), demo_s.v.end(), union_s.v.begin() + 8);
  std::copy(gen_a.v.begin(), gen_a.v.end(), union_a.v.begin());
  std::copy(demo_a.v.begin(), demo_a.v.end(), union_a.v.begin() + 4);
  Mat delta = random_mat(rng, 8, 2, 0.05);
  const double kappa = 0.7;

  auto loss = [&] {
    ad::Tensor bce = disc_bce_graph(disc, gen_s, gen_a, demo_s, demo_a);
    ad::Tensor reg = reg_disc_term(disc, union_s, union_a, delta);
    return bce.value() + kappa * reg.value();
  };
  std::vector<double> fd = ts::fd_grad_params(store, loss);

  store.zero_grads();
  ad::Tensor total = ad::add(disc_bce_graph(disc, gen_s, gen_a, demo_s, demo_a),
                             ad::mul_scalar(reg_disc_term(disc, union_s, union_a, delta),
                                            kappa));
  ad::backward(total);
  std::vector<double> g = store.flat_grads();
  REQUIRE(g.size() == fd.size());
  for (size_t i = 0; i < g.size(); ++i)
    CHECK(std::fabs(g[i] - fd[i]) <= 1e-7 + 1e-4 * std::fabs(fd[i]));
}

TEST_CASE("generator loss gradient (ppo + entropy + value mse + kappa R_g) matches "
          "directional finite differences") {
  ParamStore pstore, vstore;
  Rng rng(21);
  PolicyNet policy(pstore, 2, 1, rng);
  ValueNet value(vstore, 2, rng);
  Mat obs = random_mat(rng, 4, 2, 1.0), act = random_mat(rng, 4, 1, 0.8);
  std::vector<double> old_lp(4), adv(4), ret(4);
  {
    PolicyForward pf = policy.forward(ad::Tensor::constant(obs));
    ad::Tensor lp = gaussian_log_prob(pf, ad::Tensor::constant(act));
    for (int i = 0; i < 4; ++i) {
      old_lp[i] = lp.data()[i] + rng.uniform(-0.5, 0.5);
      adv[i] = rng.uniform(-1.0, 1.0);
      ret[i] = rng.uniform(-1.0, 1.0);
    }
  }
  Mat delta = random_mat(rng, 4, 2, 0.1);
  GaussianRef ref = policy_reference(policy, obs);  // frozen reference
  const double kappa = 0.4;

  auto loss = [&] {
    GenLossParts parts = ppo_loss_graph(policy, value, obs, act, old_lp, adv, ret, 0.2, 0.01);
    ad::Tensor reg = reg_gen_term(policy, obs, delta, ref);
    return parts.total.value() + kappa * reg.value();
  };

  pstore.zero_grads();
  vstore.zero_grads();
  {
    GenLossParts parts = ppo_loss_graph(policy, value, obs, act, old_lp, adv, ret, 0.2, 0.01);
    ad::Tensor total = ad::add(parts.total,
                               ad::mul_scalar(reg_gen_term(policy, obs, delta, ref), kappa));
    ad::backward(total);
  }
  std::vector<double> gp = pstore.flat_grads(), gv = vstore.flat_grads();

  const double h = 1e-5;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> p0 = pstore.flat_values(), v0 = vstore.flat_values();
    std::vector<double> up(p0.size()), uv(v0.size());
    double norm = 0.0;
    for (auto& u : up) { u = rng.normal(); norm += u * u; }
    for (auto& u : uv) { u = rng.normal(); norm += u * u; }
    norm = std::sqrt(norm);
    double expected = 0.0;
    for (size_t i = 0; i < up.size(); ++i) expected += gp[i] * (up[i] /= norm);
    for (size_t i = 0; i < uv.size(); ++i) expected += gv[i] * (uv[i] /= norm);

    auto shift = [&](double sign) {
      std::vector<double> p = p0, v = v0;
      for (size_t i = 0; i < p.size(); ++i) p[i] += sign * h * up[i];
      for (size_t i = 0; i < v.size(); ++i) v[i] += sign * h * uv[i];
      pstore.set_flat_values(p);
      vstore.set_flat_values(v);
      return loss();
    };
    double fd = (shift(1.0) - shift(-1.0)) / (2.0 * h);
    pstore.set_flat_values(p0);
    vstore.set_flat_values(v0);
    CHECK(std::fabs(fd - expected) <= 1e-7 + 1e-4 * std::fabs(expected));
  }
}

TEST_CASE("collected log probs match the graph bit-for-bit, so the first ppo ratio is 1") {
  DemoSet demos = make_demo_set("double-integrator-1d", 4, 501);
  Trainer trainer(small_cfg(TrainMode::Natural, 31), demos);
  RolloutBatch batch = trainer.collect();
  PolicyForward pf = trainer.agent().policy.forward(ad::Tensor::constant(batch.obs));
  ad::Tensor lp = gaussian_log_prob(pf, ad::Tensor::constant(batch.actions));
  double max_diff = 0.0;
  for (int i = 0; i < batch.obs.rows; ++i)
    max_diff = std::max(max_diff, std::fabs(lp.data()[i] - batch.old_log_probs[i]));
  CHECK(max_diff <= 1e-12);
  CHECK(max_diff == 0.0);  // engineered to be exact, not merely close
}

TEST_CASE("loss components are additive: total = bce + kappa * reg within 1e-12") {
  ParamStore store;
  Rng rng(40);
  DiscriminatorNet disc(store, 2, 1, rng, {6});
  Mat s = random_mat(rng, 6, 2, 1.0), a = random_mat(rng, 6, 1, 1.0);
  Mat delta = random_mat(rng, 6, 2, 0.05);
  const double kappa = 1.3;
  ad::Tensor bce = disc_bce_graph(disc, s, a, s, a);
  ad::Tensor reg = reg_disc_term(disc, s, a, delta);
  ad::Tensor total = ad::add(bce, ad::mul_scalar(reg, kappa));
  CHECK(std::fabs(total.value() - (bce.value() + kappa * reg.value())) <= 1e-12);
}

TEST_CASE("zero-radius and zero-weight runs reduce to natural mode bit-for-bit") {
  DemoSet demos = make_demo_set("double-integrator-1d", 4, 502);
  std::vector<MetricsRow> natural = run_iters(small_cfg(TrainMode::Natural, 11), demos, 3);

  TrainConfig reg_gen = small_cfg(TrainMode::RegGen, 11);
  reg_gen.reg_weight = 0.5;  // radius stays 0
  TrainConfig reg_disc = small_cfg(TrainMode::RegDisc, 11);
  reg_disc.perturb_radius = 0.1;  // weight stays 0
  TrainConfig noisy = small_cfg(TrainMode::NoisyGen, 11);
  noisy.noise_level = 0.0;

  for (const TrainConfig& cfg : {reg_gen, reg_disc, noisy}) {
    std::vector<MetricsRow> rows = run_iters(cfg, demos, 3);
    REQUIRE(rows.size() == natural.size());
    for (size_t i = 0; i < rows.size(); ++i) CHECK(rows_equal(rows[i], natural[i]));
  }
}

TEST_CASE("an active generator regularizer changes the run and reports a positive term") {
  DemoSet demos = make_demo_set("double-integrator-1d", 4, 503);
  std::vector<MetricsRow> natural = run_iters(small_cfg(TrainMode::Natural, 13), demos, 2);
  TrainConfig cfg = small_cfg(TrainMode::RegGen, 13);
  cfg.reg_weight = 1.0;
  cfg.perturb_radius = 0.3;
  std::vector<MetricsRow> rows = run_iters(cfg, demos, 2);
  CHECK(rows[0].gen_reg > 0.0);
  CHECK(!rows_equal(rows[1], natural[1]));
}

TEST_CASE("same config and seed reproduce identical metrics") {
  DemoSet demos = make_demo_set("double-integrator-1d", 4, 504);
  TrainConfig cfg = small_cfg(TrainMode::Natural, 17);
  std::vector<MetricsRow> a = run_iters(cfg, demos, 3);
  std::vector<MetricsRow> b = run_iters(cfg, demos, 3);
  for (size_t i = 0; i < a.size(); ++i) CHECK(rows_equal(a[i], b[i]));
}

TEST_CASE("rescoring a batch with the frozen discriminator reproduces the stored rewards") {
  DemoSet demos = make_demo_set("double-integrator-1d", 4, 505);
  Trainer trainer(small_cfg(TrainMode::Natural, 19), demos);
  RolloutBatch batch = trainer.collect();
  trainer.update_disc(batch);
  trainer.finalize_batch(batch);
  std::vector<double> probs =
      trainer.agent().disc.prob_values(batch.disc_states, batch.actions);
  for (int i = 0; i < batch.disc_states.rows; ++i) {
    CHECK(probs[i] > 0.0);
    CHECK(probs[i] < 1.0);
    CHECK(surrogate_reward(probs[i]) == batch.surrogate_rewards[i]);
  }
}

TEST_CASE("advantages come out normalized and returns equal advantages plus values") {
  DemoSet demos = make_demo_set("double-integrator-1d", 4, 506);
  Trainer trainer(small_cfg(TrainMode::Natural, 23), demos);
  RolloutBatch batch = trainer.collect();
  trainer.update_disc(batch);
  trainer.finalize_batch(batch);
  double mean = 0.0;
  for (double a : batch.advantages) mean += a;
  mean /= batch.advantages.size();
  double var = 0.0;
  for (double a : batch.advantages) var += (a - mean) * (a - mean);
  var /= batch.advantages.size();
  CHECK(std::fabs(mean) < 1e-10);
  CHECK(std::fabs(std::sqrt(var) - 1.0) < 1e-6);
}
