#pragma once

#include <memory>
#include <string>
#include <vector>

#include "lipgail/envs.hpp"
#include "lipgail/nets.hpp"
#include "lipgail/perturb.hpp"

namespace lipgail {

enum class TrainMode { Natural, NoisyDisc, NoisyGen, RegDisc, RegGen };
enum class RegRefresh { PerEpoch, PerIter };

struct TrainConfig {
  std::string env = "double-integrator-1d";
  double discount = 0.99;
  double gae_lambda = 0.95;
  double lr = 3e-4;
  int ppo_epochs = 10;
  double ppo_clip = 0.2;
  double entropy_coef = 0.0;
  int steps_per_iter = 2048;
  int minibatch_size = 256;
  long long total_env_steps = 300000;
  int disc_updates_per_iter = 1;
  int checkpoint_every = 50;
  TrainMode mode = TrainMode::Natural;
  double noise_level = 0.0;                    // NoisyDisc / NoisyGen, normalized units
  NoiseKind noise_kind = NoiseKind::UniformLinf;
  double reg_weight = 0.0;                     // kappa
  Norm perturb_norm = Norm::L2;
  double perturb_radius = 0.0;
  int perturb_steps = 10;
  PerturbInit perturb_init = PerturbInit::Zero;
  RegRefresh reg_refresh = RegRefresh::PerEpoch;
  uint64_t seed = 0;

  PerturbationSpec perturb_spec() const {
    PerturbationSpec spec = PerturbationSpec::make(perturb_norm, perturb_radius, perturb_steps);
    spec.init = perturb_init;
    return spec;
  }
  // disabled regularizers / zero noise must leave no trace in the math or the
  // RNG stream, so a reduced run is byte-identical to Natural
  bool reg_disc_active() const {
    return mode == TrainMode::RegDisc && reg_weight > 0.0 && perturb_radius > 0.0;
  }
  bool reg_gen_active() const {
    return mode == TrainMode::RegGen && reg_weight > 0.0 && perturb_radius > 0.0;
  }
  bool noisy_disc_active() const { return mode == TrainMode::NoisyDisc && noise_level > 0.0; }
  bool noisy_gen_active() const { return mode == TrainMode::NoisyGen && noise_level > 0.0; }
};

std::string train_mode_name(TrainMode mode);
TrainMode train_mode_from_name(const std::string& name);

// policy, value and discriminator nets plus the observation normalizer,
// owning their parameter stores
struct Agent {
  ParamStore policy_store, value_store, disc_store;
  PolicyNet policy;
  ValueNet value;
  DiscriminatorNet disc;
  ObsNormalizer normalizer;

  Agent(const EnvSpec& spec, Rng& rng)
      : policy(policy_store, spec.state_dim, spec.action_dim, rng),
        value(value_store, spec.state_dim, rng),
        disc(disc_store, spec.state_dim, spec.action_dim, rng),
        normalizer(spec.state_dim) {}
  Agent(const Agent&) = delete;
  Agent& operator=(const Agent&) = delete;
};

struct RolloutBatch {
  Mat raw_states;    // [N, sdim] true env states
  Mat obs;           // policy inputs (normalized; noisy in NoisyGen)
  Mat disc_states;   // clean states normalized with end-of-collection stats
  Mat actions;       // as sampled (pre-clamp)
  std::vector<double> old_log_probs;
  std::vector<double> env_rewards;
  std::vector<double> surrogate_rewards;
  std::vector<double> values;
  std::vector<double> advantages;  // normalized to zero mean / unit std
  std::vector<double> returns_to_go;
  int episodes = 0;
  double env_return_mean = 0.0;
  double policy_entropy = 0.0;  // at collection time
};

struct DiscLosses {
  double bce = 0.0;
  double reg = 0.0;  // raw R_d value (loss adds reg_weight * reg)
  double total = 0.0;
};

struct GenLosses {
  double ppo = 0.0;
  double entropy = 0.0;
  double value_mse = 0.0;
  double reg = 0.0;  // raw R_g value
};

struct MetricsRow {
  long long iter = 0;
  long long env_steps = 0;
  double disc_bce = 0.0;
  double disc_reg = 0.0;
  double gen_ppo_loss = 0.0;
  double gen_reg = 0.0;
  double entropy = 0.0;
  double rollout_env_return_mean = 0.0;
};

// -log(D) with D clamped to [1e-8, 1 - 1e-8]
double surrogate_reward(double d);

struct GaeOut {
  std::vector<double> advantages;
  std::vector<double> returns;
};
GaeOut gae(std::span<const double> rewards, std::span<const double> values,
           double bootstrap_value, double discount, double lambda);

// -[mean log D(gen) + mean log(1-D)(demo)], via softplus on logits
ad::Tensor disc_bce_graph(const DiscriminatorNet& disc, const Mat& gen_s, const Mat& gen_a,
                          const Mat& demo_s, const Mat& demo_a);

struct GenLossParts {
  ad::Tensor total;  // ppo - entropy_coef*entropy + 0.5*value_mse
  double ppo = 0.0;
  double entropy = 0.0;
  double value_mse = 0.0;
};
GenLossParts ppo_loss_graph(const PolicyNet& policy, const ValueNet& value, const Mat& obs,
                            const Mat& actions, std::span<const double> old_log_probs,
                            std::span<const double> advantages, std::span<const double> returns,
                            double clip, double entropy_coef);

class Trainer {
 public:
  Trainer(const TrainConfig& cfg, DemoSet demos);

  RolloutBatch collect();
  DiscLosses update_disc(const RolloutBatch& batch);  // one Adam step
  void finalize_batch(RolloutBatch& batch);  // surrogate rewards, values, GAE
  GenLosses update_gen(const RolloutBatch& batch);
  MetricsRow iterate();
  // full training loop; emits metrics.csv, config.json and checkpoints under
  // out_dir (empty out_dir -> no artifacts). On NaN abort the last good
  // parameters are saved first, then NanAbort propagates.
  std::vector<MetricsRow> run(const std::string& out_dir);

  Agent& agent() { return agent_; }
  const Agent& agent() const { return agent_; }
  const TrainConfig& config() const { return cfg_; }
  const Env& env() const { return *env_; }
  const DemoSet& demos() const { return demos_; }
  long long env_steps() const { return env_steps_; }
  long long iter() const { return iter_; }
  Rng& rng() { return rng_; }

 private:
  void check_finite(const MetricsRow& row) const;

  TrainConfig cfg_;
  DemoSet demos_;
  std::unique_ptr<Env> env_;
  Rng rng_;
  Agent agent_;
  Adam adam_policy_, adam_value_, adam_disc_;
  Mat demo_states_norm_;  // refreshed each iteration with frozen stats
  long long env_steps_ = 0;
  long long iter_ = 0;
};

void write_metrics_csv(const std::string& path, const TrainConfig& cfg,
                       const std::vector<MetricsRow>& rows);

}  // namespace lipgail
