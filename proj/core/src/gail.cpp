#include "lipgail/gail.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "lipgail/checkpoint.hpp"
#include "lipgail/config.hpp"
#include "lipgail/version.hpp"

namespace lipgail {

std::string train_mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::Natural: return "natural";
    case TrainMode::NoisyDisc: return "noisy-disc";
    case TrainMode::NoisyGen: return "noisy-gen";
    case TrainMode::RegDisc: return "reg-disc";
    case TrainMode::RegGen: return "reg-gen";
  }
  throw ConfigError("bad train mode");
}

TrainMode train_mode_from_name(const std::string& name) {
  if (name == "natural") return TrainMode::Natural;
  if (name == "noisy-disc") return TrainMode::NoisyDisc;
  if (name == "noisy-gen") return TrainMode::NoisyGen;
  if (name == "reg-disc") return TrainMode::RegDisc;
  if (name == "reg-gen") return TrainMode::RegGen;
  throw ConfigError("unknown train mode: " + name);
}

double surrogate_reward(double d) {
  return -std::log(std::clamp(d, 1e-8, 1.0 - 1e-8));
}

GaeOut gae(std::span<const double> rewards, std::span<const double> values,
           double bootstrap_value, double discount, double lambda) {
  require(rewards.size() == values.size(), "gae: length mismatch");
  const int T = static_cast<int>(rewards.size());
  GaeOut out;
  out.advantages.resize(T);
  out.returns.resize(T);
  double acc = 0.0;
  for (int t = T - 1; t >= 0; --t) {
    double v_next = t + 1 < T ? values[t + 1] : bootstrap_value;
    double delta = rewards[t] + discount * v_next - values[t];
    acc = delta + discount * lambda * acc;
    out.advantages[t] = acc;
    out.returns[t] = acc + values[t];
  }
  return out;
}

ad::Tensor disc_bce_graph(const DiscriminatorNet& disc, const Mat& gen_s, const Mat& gen_a,
                          const Mat& demo_s, const Mat& demo_a) {
  ad::Tensor z_gen = disc.logits(ad::Tensor::constant(gen_s), ad::Tensor::constant(gen_a));
  ad::Tensor z_demo = disc.logits(ad::Tensor::constant(demo_s), ad::Tensor::constant(demo_a));
  ad::Tensor gen_term = ad::mean(ad::softplus(ad::neg(z_gen)));    // -log D on gen
  ad::Tensor demo_term = ad::mean(ad::softplus(z_demo));           // -log(1-D) on demo
  return ad::add(gen_term, demo_term);
}

GenLossParts ppo_loss_graph(const PolicyNet& policy, const ValueNet& value, const Mat& obs,
                            const Mat& actions, std::span<const double> old_log_probs,
                            std::span<const double> advantages, std::span<const double> returns,
                            double clip, double entropy_coef) {
  const int B = obs.rows;
  require(static_cast<int>(old_log_probs.size()) == B &&
              static_cast<int>(advantages.size()) == B &&
              static_cast<int>(returns.size()) == B,
          "ppo_loss_graph: length mismatch");
  PolicyForward pf = policy.forward(ad::Tensor::constant(obs));
  ad::Tensor lp = gaussian_log_prob(pf, ad::Tensor::constant(actions));
  ad::Tensor old_lp = ad::Tensor::constant(B, 1, std::vector<double>(old_log_probs.begin(),
                                                                     old_log_probs.end()));
  ad::Tensor ratio = ad::exp(ad::sub(lp, old_lp));
  ad::Tensor adv = ad::Tensor::constant(B, 1, std::vector<double>(advantages.begin(),
                                                                  advantages.end()));
  ad::Tensor s1 = ad::mul(ratio, adv);
  ad::Tensor s2 = ad::mul(ad::clamp(ratio, 1.0 - clip, 1.0 + clip), adv);
  ad::Tensor ppo = ad::neg(ad::mean(ad::minimum(s1, s2)));
  ad::Tensor ent = gaussian_entropy(pf.log_std);
  ad::Tensor v = value.forward(ad::Tensor::constant(obs));
  ad::Tensor ret = ad::Tensor::constant(B, 1, std::vector<double>(returns.begin(),
                                                                  returns.end()));
  ad::Tensor vmse = ad::mean(ad::square(ad::sub(v, ret)));

  GenLossParts parts;
  parts.ppo = ppo.value();
  parts.entropy = ent.value();
  parts.value_mse = vmse.value();
  parts.total = ad::add(ppo, ad::mul_scalar(vmse, 0.5));
  if (entropy_coef != 0.0)
    parts.total = ad::add(parts.total, ad::mul_scalar(ent, -entropy_coef));
  return parts;
}

Trainer::Trainer(const TrainConfig& cfg, DemoSet demos)
    : cfg_(cfg),
      demos_(std::move(demos)),
      env_(make_env(cfg.env)),
      rng_(cfg.seed),
      agent_(env_->spec(), rng_),
      adam_policy_(agent_.policy_store, cfg.lr),
      adam_value_(agent_.value_store, cfg.lr),
      adam_disc_(agent_.disc_store, cfg.lr) {
  require(demos_.env_name == cfg_.env, "trainer: demos were generated for a different env");
  require(cfg_.steps_per_iter > 0 && cfg_.steps_per_iter % env_->spec().horizon == 0,
          "trainer: steps_per_iter must be a positive multiple of the env horizon");
  require(cfg_.minibatch_size > 0, "trainer: minibatch_size must be positive");
  require(cfg_.reg_weight >= 0.0 && cfg_.perturb_radius >= 0.0,
          "trainer: reg_weight and perturb_radius must be nonnegative");
  require(demos_.states.rows > 0, "trainer: demo set is empty");
}

RolloutBatch Trainer::collect() {
  const auto& spec = env_->spec();
  const int T = spec.horizon;
  const int N = cfg_.steps_per_iter;
  RolloutBatch b;
  b.episodes = N / T;
  b.raw_states = Mat(N, spec.state_dim);
  b.obs = Mat(N, spec.state_dim);
  b.actions = Mat(N, spec.action_dim);
  b.old_log_probs.resize(N);
  b.env_rewards.resize(N);
  const bool gen_noise = cfg_.noisy_gen_active();
  const NoiseSpec noise{cfg_.noise_kind, cfg_.noise_level};
  double return_sum = 0.0;
  int row = 0;
  for (int ep = 0; ep < b.episodes; ++ep) {
    std::vector<double> s = env_->reset(rng_);
    for (int t = 0; t < T; ++t, ++row) {
      agent_.normalizer.update(s);
      std::vector<double> seen = s;
      if (gen_noise) add_noise(seen, noise, agent_.normalizer.stds(), rng_);
      std::vector<double> obs = agent_.normalizer.normalize(seen);
      DiagGaussian dist = agent_.policy.dist(obs);
      std::vector<double> a = dist.sample(rng_);
      std::copy(s.begin(), s.end(), b.raw_states.row(row));
      std::copy(obs.begin(), obs.end(), b.obs.row(row));
      std::copy(a.begin(), a.end(), b.actions.row(row));
      b.old_log_probs[row] = dist.log_prob(a);
      s = env_->step(s, a);
      for (double x : s)
        if (!std::isfinite(x)) throw NanAbort("non-finite state during rollout");
      b.env_rewards[row] = env_->reward(s);
      return_sum += b.env_rewards[row];
    }
  }
  b.env_return_mean = return_sum / b.episodes;
  b.policy_entropy =
      agent_.policy.dist(std::vector<double>(spec.state_dim, 0.0)).entropy();
  // discriminator and demo inputs share the post-collection frozen stats
  b.disc_states = agent_.normalizer.normalize_batch(b.raw_states);
  demo_states_norm_ = agent_.normalizer.normalize_batch(demos_.states);
  return b;
}

DiscLosses Trainer::update_disc(const RolloutBatch& batch) {
  const int n_gen = batch.disc_states.rows;
  const int n_demo = demos_.states.rows;
  const int sdim = batch.disc_states.cols, adim = batch.actions.cols;

  // 1:1 batch composition, demos subsampled fresh each update
  Mat demo_s(n_gen, sdim), demo_a(n_gen, adim);
  if (n_demo >= n_gen) {
    std::vector<int> idx(n_demo);
    std::iota(idx.begin(), idx.end(), 0);
    rng_.shuffle(idx);
    for (int i = 0; i < n_gen; ++i) {
      std::copy(demo_states_norm_.row(idx[i]), demo_states_norm_.row(idx[i]) + sdim,
                demo_s.row(i));
      std::copy(demos_.actions.row(idx[i]), demos_.actions.row(idx[i]) + adim, demo_a.row(i));
    }
  } else {
    for (int i = 0; i < n_gen; ++i) {
      int j = rng_.uniform_int(n_demo);
      std::copy(demo_states_norm_.row(j), demo_states_norm_.row(j) + sdim, demo_s.row(i));
      std::copy(demos_.actions.row(j), demos_.actions.row(j) + adim, demo_a.row(i));
    }
  }

  Mat gen_s = batch.disc_states;
  if (cfg_.noisy_disc_active()) {
    const NoiseSpec noise{cfg_.noise_kind, cfg_.noise_level};
    // disc inputs are already normalized, so the level applies directly
    for (int i = 0; i < n_gen; ++i) add_noise(gen_s.row_span(i), noise, rng_);
    for (int i = 0; i < n_gen; ++i) add_noise(demo_s.row_span(i), noise, rng_);
  }

  DiscLosses out;
  ad::Tensor bce = disc_bce_graph(agent_.disc, gen_s, batch.actions, demo_s, demo_a);
  ad::Tensor total = bce;
  if (cfg_.reg_disc_active()) {
    // R_d runs over the union of generator and demo pairs
    Mat union_s(2 * n_gen, sdim), union_a(2 * n_gen, adim);
    std::copy(gen_s.v.begin(), gen_s.v.end(), union_s.v.begin());
    std::copy(demo_s.v.begin(), demo_s.v.end(), union_s.v.begin() + gen_s.v.size());
    std::copy(batch.actions.v.begin(), batch.actions.v.end(), union_a.v.begin());
    std::copy(demo_a.v.begin(), demo_a.v.end(), union_a.v.begin() + batch.actions.v.size());
    PerturbationSpec spec = cfg_.perturb_spec();
    PgaResult pga = pga_disc(agent_.disc, union_s, union_a, spec,
                             spec.init == PerturbInit::RandomInBall ? &rng_ : nullptr);
    ad::Tensor reg = reg_disc_term(agent_.disc, union_s, union_a, pga.delta);
    out.reg = reg.value();
    total = ad::add(bce, ad::mul_scalar(reg, cfg_.reg_weight));
  }
  out.bce = bce.value();
  out.total = total.value();
  agent_.disc_store.zero_grads();
  ad::backward(total);
  adam_disc_.step(agent_.disc_store);
  return out;
}

void Trainer::finalize_batch(RolloutBatch& batch) {
  const int N = batch.disc_states.rows;
  const int T = env_->spec().horizon;
  std::vector<double> probs = agent_.disc.prob_values(batch.disc_states, batch.actions);
  batch.surrogate_rewards.resize(N);
  for (int i = 0; i < N; ++i) batch.surrogate_rewards[i] = surrogate_reward(probs[i]);
  batch.values = agent_.value.values(batch.obs);
  batch.advantages.resize(N);
  batch.returns_to_go.resize(N);
  for (int ep = 0; ep < batch.episodes; ++ep) {
    std::span<const double> r(batch.surrogate_rewards.data() + ep * T, T);
    std::span<const double> v(batch.values.data() + ep * T, T);
    GaeOut g = gae(r, v, 0.0, cfg_.discount, cfg_.gae_lambda);
    std::copy(g.advantages.begin(), g.advantages.end(), batch.advantages.begin() + ep * T);
    std::copy(g.returns.begin(), g.returns.end(), batch.returns_to_go.begin() + ep * T);
  }
  double mean = 0.0;
  for (double a : batch.advantages) mean += a;
  mean /= N;
  double var = 0.0;
  for (double a : batch.advantages) var += (a - mean) * (a - mean);
  var /= N;
  double sd = std::sqrt(var) + 1e-8;
  for (double& a : batch.advantages) a = (a - mean) / sd;
}

GenLosses Trainer::update_gen(const RolloutBatch& batch) {
  const int N = batch.obs.rows;
  const int sdim = batch.obs.cols, adim = batch.actions.cols;
  const bool reg_active = cfg_.reg_gen_active();
  const PerturbationSpec spec = cfg_.perturb_spec();
  GenLosses acc;
  int n_updates = 0;
  Mat delta;
  std::vector<int> idx(N);
  std::iota(idx.begin(), idx.end(), 0);
  for (int epoch = 0; epoch < cfg_.ppo_epochs; ++epoch) {
    if (reg_active && (epoch == 0 || cfg_.reg_refresh == RegRefresh::PerEpoch)) {
      PgaResult pga = pga_gen(agent_.policy, batch.obs, spec,
                              spec.init == PerturbInit::RandomInBall ? &rng_ : nullptr);
      delta = std::move(pga.delta);
    }
    rng_.shuffle(idx);
    for (int start = 0; start < N; start += cfg_.minibatch_size) {
      const int mb = std::min(cfg_.minibatch_size, N - start);
      Mat obs(mb, sdim), act(mb, adim), dmb(reg_active ? mb : 0, reg_active ? sdim : 0);
      std::vector<double> old_lp(mb), adv(mb), ret(mb);
      for (int i = 0; i < mb; ++i) {
        int j = idx[start + i];
        std::copy(batch.obs.row(j), batch.obs.row(j) + sdim, obs.row(i));
        std::copy(batch.actions.row(j), batch.actions.row(j) + adim, act.row(i));
        if (reg_active) std::copy(delta.row(j), delta.row(j) + sdim, dmb.row(i));
        old_lp[i] = batch.old_log_probs[j];
        adv[i] = batch.advantages[j];
        ret[i] = batch.returns_to_go[j];
      }
      GenLossParts parts = ppo_loss_graph(agent_.policy, agent_.value, obs, act, old_lp, adv,
                                          ret, cfg_.ppo_clip, cfg_.entropy_coef);
      ad::Tensor total = parts.total;
      double reg_val = 0.0;
      if (reg_active) {
        GaussianRef ref = policy_reference(agent_.policy, obs);
        ad::Tensor reg = reg_gen_term(agent_.policy, obs, dmb, ref);
        reg_val = reg.value();
        total = ad::add(total, ad::mul_scalar(reg, cfg_.reg_weight));
      }
      agent_.policy_store.zero_grads();
      agent_.value_store.zero_grads();
      ad::backward(total);
      adam_policy_.step(agent_.policy_store);
      adam_value_.step(agent_.value_store);
      acc.ppo += parts.ppo;
      acc.entropy += parts.entropy;
      acc.value_mse += parts.value_mse;
      acc.reg += reg_val;
      ++n_updates;
    }
  }
  acc.ppo /= n_updates;
  acc.entropy /= n_updates;
  acc.value_mse /= n_updates;
  acc.reg /= n_updates;
  return acc;
}

MetricsRow Trainer::iterate() {
  RolloutBatch batch = collect();
  DiscLosses dl;
  for (int k = 0; k < cfg_.disc_updates_per_iter; ++k) {
    DiscLosses d = update_disc(batch);
    dl.bce += d.bce / cfg_.disc_updates_per_iter;
    dl.reg += d.reg / cfg_.disc_updates_per_iter;
    dl.total += d.total / cfg_.disc_updates_per_iter;
  }
  finalize_batch(batch);
  GenLosses gl = update_gen(batch);
  env_steps_ += cfg_.steps_per_iter;
  ++iter_;
  MetricsRow row;
  row.iter = iter_;
  row.env_steps = env_steps_;
  row.disc_bce = dl.bce;
  row.disc_reg = dl.reg;
  row.gen_ppo_loss = gl.ppo;
  row.gen_reg = gl.reg;
  row.entropy = batch.policy_entropy;
  row.rollout_env_return_mean = batch.env_return_mean;
  check_finite(row);
  return row;
}

void Trainer::check_finite(const MetricsRow& row) const {
  const double vals[] = {row.disc_bce,  row.disc_reg, row.gen_ppo_loss,
                         row.gen_reg,   row.entropy,  row.rollout_env_return_mean};
  for (double v : vals)
    if (!std::isfinite(v)) throw NanAbort("non-finite training metric at iter " +
                                          std::to_string(row.iter));
}

void write_metrics_csv(const std::string& path, const TrainConfig& cfg,
                       const std::vector<MetricsRow>& rows) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << "# " << kVersionTag << "\n";
  f << "# env " << cfg.env << "\n";
  f << "# seed " << cfg.seed << "\n";
  f << "iter,env_steps,disc_bce,disc_reg,gen_ppo_loss,gen_reg,entropy,"
       "rollout_env_return_mean\n";
  for (const auto& r : rows) {
    f << r.iter << ',' << r.env_steps << ',' << format_double(r.disc_bce) << ','
      << format_double(r.disc_reg) << ',' << format_double(r.gen_ppo_loss) << ','
      << format_double(r.gen_reg) << ',' << format_double(r.entropy) << ','
      << format_double(r.rollout_env_return_mean) << "\n";
  }
  if (!f) throw IoError("write failed: " + path);
}

std::vector<MetricsRow> Trainer::run(const std::string& out_dir) {
  namespace fs = std::filesystem;
  const bool emit = !out_dir.empty();
  if (emit) fs::create_directories(out_dir);
  std::vector<MetricsRow> rows;
  const long long iters = (cfg_.total_env_steps + cfg_.steps_per_iter - 1) / cfg_.steps_per_iter;
  std::string last_good;
  for (long long k = 0; k < iters; ++k) {
    try {
      rows.push_back(iterate());
    } catch (const NanAbort&) {
      if (emit) {
        if (!last_good.empty()) fs::copy_file(last_good, fs::path(out_dir) / "checkpoint.json",
                                              fs::copy_options::overwrite_existing);
        write_metrics_csv((fs::path(out_dir) / "metrics.csv").string(), cfg_, rows);
      }
      throw;
    }
    if (emit && cfg_.checkpoint_every > 0 && iter_ % cfg_.checkpoint_every == 0) {
      char name[64];
      std::snprintf(name, sizeof(name), "checkpoint_iter%06lld.json", iter_);
      std::string p = (fs::path(out_dir) / name).string();
      save_checkpoint(p, agent_, cfg_, env_steps_, iter_);
      last_good = p;
    }
  }
  if (emit) {
    save_checkpoint((fs::path(out_dir) / "checkpoint.json").string(), agent_, cfg_, env_steps_,
                    iter_);
    write_metrics_csv((fs::path(out_dir) / "metrics.csv").string(), cfg_, rows);
    write_config_snapshot((fs::path(out_dir) / "config.json").string(), cfg_);
  }
  return rows;
}

}  // namespace lipgail
