#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>

#include "lipgail/config.hpp"
#include "lipgail/divergence.hpp"
#include "lipgail/eval.hpp"

using namespace lipgail;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::unique_ptr<Agent> make_agent(const std::string& env_name, uint64_t seed) {
  auto env = make_env(env_name);
  Rng rng(seed);
  auto agent = std::make_unique<Agent>(env->spec(), rng);
  // prime the normalizer so normalized observations are O(1)
  for (int i = 0; i < 64; ++i) {
    std::vector<double> s(env->spec().state_dim);
    for (auto& x : s) x = rng.normal();
    agent->normalizer.update(s);
  }
  return agent;
}

void zero_store(ParamStore& store) {
  for (auto& [name, t] : store.entries) std::fill(t.data().begin(), t.data().end(), 0.0);
}

bool same_noise_report(const NoiseEvalReport& a, const NoiseEvalReport& b) {
  if (a.rows.size() != b.rows.size()) return false;
  for (size_t i = 0; i < a.rows.size(); ++i) {
    if (a.rows[i].noise_level != b.rows[i].noise_level) return false;
    if (a.rows[i].episodes != b.rows[i].episodes) return false;
    if (a.rows[i].mean_return != b.rows[i].mean_return) return false;
    if (a.rows[i].std_return != b.rows[i].std_return) return false;
  }
  return a.checkpoint_id == b.checkpoint_id && a.env == b.env &&
         a.noise_kind == b.noise_kind && a.seed == b.seed;
}

}  // namespace

TEST_CASE("eval_noise sorts levels, records episode counts and reproduces its streams") {
  auto agent = make_agent("double-integrator-1d", 3);
  NoiseEvalReport rep =
      eval_noise(*agent, "double-integrator-1d", {0.3, 0.0}, 3, NoiseKind::Gaussian, 17, "ck");
  REQUIRE(rep.rows.size() == 2);
  CHECK(rep.rows[0].noise_level == 0.0);
  CHECK(rep.rows[1].noise_level == 0.3);
  CHECK(rep.rows[0].episodes == 3);
  CHECK(rep.env == "double-integrator-1d");
  CHECK(rep.checkpoint_id == "ck");
  CHECK(rep.seed == 17);

  // manual replay of the documented per-(level, episode) stream layout
  auto env = make_env("double-integrator-1d");
  const std::vector<double> scale = agent->normalizer.stds();
  const Rng root(17);
  std::vector<double> levels = {0.0, 0.3};
  for (int li = 0; li < 2; ++li) {
    double total = 0.0;
    for (int ep = 0; ep < 3; ++ep) {
      Rng stream = root.fork((static_cast<uint64_t>(li) << 32) | static_cast<uint64_t>(ep));
      NoiseSpec noise{NoiseKind::Gaussian, levels[li]};
      PolicyFn act = [&](std::span<const double> s) {
        std::vector<double> seen(s.begin(), s.end());
        add_noise(seen, noise, scale, stream);
        return agent->policy.dist(agent->normalizer.normalize(seen)).mean;
      };
      total += rollout(*env, act, stream).total_return();
    }
    CHECK(rep.rows[li].mean_return == total / 3.0);
  }
}

TEST_CASE("eval_noise is deterministic and thread-count independent") {
  auto agent = make_agent("spring-pendulum", 9);
  auto run = [&] {
    return eval_noise(*agent, "spring-pendulum", {0.0, 0.1, 0.5}, 4, NoiseKind::UniformLinf,
                      23, "h");
  };
  NoiseEvalReport a = run();
  NoiseEvalReport b = run();
  CHECK(same_noise_report(a, b));

  setenv("LIPGAIL_THREADS", "3", 1);
  NoiseEvalReport c = run();
  unsetenv("LIPGAIL_THREADS");
  CHECK(same_noise_report(a, c));
}

TEST_CASE("eval_noise validates its inputs") {
  auto agent = make_agent("double-integrator-1d", 3);
  CHECK_THROWS(eval_noise(*agent, "double-integrator-1d", {}, 3, NoiseKind::Gaussian, 1, ""));
  CHECK_THROWS_AS(
      eval_noise(*agent, "double-integrator-1d", {-0.1}, 3, NoiseKind::Gaussian, 1, ""),
      ConfigError);
  CHECK_THROWS(eval_noise(*agent, "double-integrator-1d", {0.1}, 0, NoiseKind::Gaussian, 1, ""));
  // point-reach-2d observations are 4-dimensional, this agent expects 2
  CHECK_THROWS(eval_noise(*agent, "point-reach-2d", {0.1}, 2, NoiseKind::Gaussian, 1, ""));
}

TEST_CASE("ellc_report follows the 30x128 protocol") {
  auto agent = make_agent("double-integrator-1d", 5);
  EllcReport rep = ellc_report(*agent, "double-integrator-1d", {0.2, 0.05, 0.1}, 31);
  CHECK(rep.trajectories == 30);
  CHECK(rep.horizon == 128);
  CHECK(rep.samples == 3840);
  CHECK(rep.delta_rule == "l2-sphere");
  REQUIRE(rep.rows.size() == 3);
  CHECK(rep.rows[0].radius == 0.05);
  CHECK(rep.rows[1].radius == 0.1);
  CHECK(rep.rows[2].radius == 0.2);
  for (const auto& r : rep.rows) CHECK(r.ellc > 0.0);

  // the trajectory set and the per-radius delta stream are shared, so a
  // radius produces the same estimate no matter which batch it runs in
  EllcReport solo = ellc_report(*agent, "double-integrator-1d", {0.05}, 31);
  CHECK(solo.rows[0].ellc == rep.rows[0].ellc);

  EllcReport again = ellc_report(*agent, "double-integrator-1d", {0.2, 0.05, 0.1}, 31);
  for (size_t i = 0; i < rep.rows.size(); ++i) CHECK(again.rows[i].ellc == rep.rows[i].ellc);

  EllcReport linf =
      ellc_report(*agent, "double-integrator-1d", {0.1}, 31, Norm::Linf);
  CHECK(linf.delta_rule == "linf-surface");
  CHECK(linf.rows[0].ellc > 0.0);
}

TEST_CASE("a constant policy has exactly zero ellc under both delta rules") {
  auto agent = make_agent("spring-pendulum", 11);
  zero_store(agent->policy_store);
  EllcReport rnd = ellc_report(*agent, "spring-pendulum", {0.1, 0.3}, 7);
  for (const auto& r : rnd.rows) CHECK(r.ellc == 0.0);
  EllcReport adv = ellc_report(*agent, "spring-pendulum", {0.1}, 7, Norm::L2, true);
  CHECK(adv.delta_rule == "adversarial-l2-sphere");
  CHECK(adv.rows[0].ellc == 0.0);
}

TEST_CASE("linear-policy ellc matches the closed form within 5 percent") {
  const int sdim = 3, adim = 2;
  Mat W(adim, sdim, {0.3, -0.2, 0.5, 0.1, 0.4, -0.7});
  std::vector<double> sigma = {0.5, 1.2};
  std::vector<double> log_std = {std::log(sigma[0]), std::log(sigma[1])};
  GaussianPolicy pi = [&](std::span<const double> s) {
    DiagGaussian g;
    g.log_std = log_std;
    g.mean.assign(adim, 0.0);
    for (int j = 0; j < adim; ++j)
      for (int d = 0; d < sdim; ++d) g.mean[j] += W.at(j, d) * s[d];
    return g;
  };

  // E[D_J / r] over the r-sphere: (r / sdim) * sum_j |w_j|^2 / sigma_j^2
  double expected = 0.0;
  for (int j = 0; j < adim; ++j) {
    double w2 = 0.0;
    for (int d = 0; d < sdim; ++d) w2 += W.at(j, d) * W.at(j, d);
    expected += w2 / (sigma[j] * sigma[j]);
  }
  const double radius = 0.2;
  expected *= radius / sdim;

  Mat states(3840, sdim);  // the linear policy makes D_J state-independent
  Rng rng(99);
  double est = ellc_estimate(pi, states, radius, Norm::L2, rng);
  CHECK(std::fabs(est - expected) / expected < 0.05);

  // doubling the radius scales the estimate linearly for a linear policy
  Rng rng2(99);
  double est2 = ellc_estimate(pi, states, 2.0 * radius, Norm::L2, rng2);
  CHECK(std::fabs(est2 - 2.0 * est) / est2 < 1e-9);
}

TEST_CASE("adversarial ellc dominates the random-delta estimate") {
  auto agent = make_agent("double-integrator-1d", 21);
  // scale the mean head up so the policy actually varies with the state
  for (auto& [name, t] : agent->policy_store.entries)
    if (name.find("/w") != std::string::npos)
      for (auto& x : t.data()) x *= 3.0;
  EllcReport rnd = ellc_report(*agent, "double-integrator-1d", {0.1}, 13);
  EllcReport adv = ellc_report(*agent, "double-integrator-1d", {0.1}, 13, Norm::L2, true);
  CHECK(adv.rows[0].ellc > rnd.rows[0].ellc);
}

TEST_CASE("ellc_estimate rejects bad inputs") {
  GaussianPolicy pi = [](std::span<const double>) {
    DiagGaussian g;
    g.mean = {0.0};
    g.log_std = {0.0};
    return g;
  };
  Mat states(4, 2);
  Rng rng(1);
  CHECK_THROWS(ellc_estimate(pi, states, 0.0, Norm::L2, rng));
  CHECK_THROWS(ellc_estimate(pi, Mat(0, 2), 0.1, Norm::L2, rng));

  auto agent = make_agent("double-integrator-1d", 3);
  CHECK_THROWS(ellc_report(*agent, "double-integrator-1d", {}, 1));
  CHECK_THROWS_AS(ellc_report(*agent, "double-integrator-1d", {-0.1}, 1), ConfigError);
  CHECK_THROWS(ellc_report(*agent, "point-reach-2d", {0.1}, 1));
}

TEST_CASE("noise eval csv round-trips") {
  NoiseEvalReport rep;
  rep.rows = {{0.0, 5, 121.25, 0.5}, {0.1, 5, 118.0 + 1.0 / 3.0, 2.25}};
  rep.checkpoint_id = "f00dface00000001";
  rep.env = "spring-pendulum";
  rep.noise_kind = NoiseKind::UniformLinf;
  rep.seed = 77;
  auto path = tmp_path("lipgail_noise_eval_test.csv");
  write_noise_eval_csv(path, rep);
  NoiseEvalReport back = read_noise_eval_csv(path);
  CHECK(same_noise_report(rep, back));
  std::filesystem::remove(path);
}

TEST_CASE("ellc csv round-trips") {
  EllcReport rep;
  rep.rows = {{0.05, 0.125}, {0.2, 1.0 / 7.0}};
  rep.trajectories = 30;
  rep.horizon = 128;
  rep.samples = 3840;
  rep.delta_rule = "adversarial-linf-surface";
  rep.checkpoint_id = "abc123";
  rep.env = "double-integrator-1d";
  rep.seed = 904;
  auto path = tmp_path("lipgail_ellc_test.csv");
  write_ellc_csv(path, rep);
  EllcReport back = read_ellc_csv(path);
  CHECK(back.rows.size() == rep.rows.size());
  for (size_t i = 0; i < rep.rows.size(); ++i) {
    CHECK(back.rows[i].radius == rep.rows[i].radius);
    CHECK(back.rows[i].ellc == rep.rows[i].ellc);
  }
  CHECK(back.trajectories == rep.trajectories);
  CHECK(back.horizon == rep.horizon);
  CHECK(back.samples == rep.samples);
  CHECK(back.delta_rule == rep.delta_rule);
  CHECK(back.checkpoint_id == rep.checkpoint_id);
  CHECK(back.env == rep.env);
  CHECK(back.seed == rep.seed);
  std::filesystem::remove(path);
}
