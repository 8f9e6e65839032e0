#include "lipgail/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "lipgail/version.hpp"

namespace lipgail {

std::string noise_kind_name(NoiseKind k) {
  return k == NoiseKind::Gaussian ? "gaussian" : "uniform-linf";
}

NoiseKind noise_kind_from_name(const std::string& name) {
  if (name == "gaussian") return NoiseKind::Gaussian;
  if (name == "uniform-linf") return NoiseKind::UniformLinf;
  throw ConfigError("unknown noise kind: " + name);
}

std::string norm_name(Norm n) { return n == Norm::L2 ? "l2" : "linf"; }

Norm norm_from_name(const std::string& name) {
  if (name == "l2") return Norm::L2;
  if (name == "linf") return Norm::Linf;
  throw ConfigError("unknown norm: " + name);
}

std::string reg_refresh_name(RegRefresh r) {
  return r == RegRefresh::PerEpoch ? "per-epoch" : "per-iter";
}

RegRefresh reg_refresh_from_name(const std::string& name) {
  if (name == "per-epoch") return RegRefresh::PerEpoch;
  if (name == "per-iter") return RegRefresh::PerIter;
  throw ConfigError("unknown reg refresh: " + name);
}

std::string perturb_init_name(PerturbInit i) {
  return i == PerturbInit::Zero ? "zero" : "random-in-ball";
}

PerturbInit perturb_init_from_name(const std::string& name) {
  if (name == "zero") return PerturbInit::Zero;
  if (name == "random-in-ball") return PerturbInit::RandomInBall;
  throw ConfigError("unknown perturb init: " + name);
}

namespace {

// strict object reader: every key must be consumed, leftovers are errors
class Fields {
 public:
  Fields(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(at("") + "expected a JSON object");
  }

  std::string at(const std::string& key) const {
    if (path_.empty()) return key.empty() ? "" : key + ": ";
    return key.empty() ? path_ + ": " : path_ + "." + key + ": ";
  }

  const nlohmann::json* take(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  bool get_double(const char* key, double& out) {
    const auto* v = take(key);
    if (!v) return false;
    if (!v->is_number()) throw ConfigError(at(key) + "expected a number");
    out = v->get<double>();
    return true;
  }

  bool get_int(const char* key, int& out) {
    const auto* v = take(key);
    if (!v) return false;
    if (!v->is_number_integer()) throw ConfigError(at(key) + "expected an integer");
    out = v->get<int>();
    return true;
  }

  bool get_i64(const char* key, long long& out) {
    const auto* v = take(key);
    if (!v) return false;
    if (!v->is_number_integer()) throw ConfigError(at(key) + "expected an integer");
    out = v->get<long long>();
    return true;
  }

  bool get_u64(const char* key, uint64_t& out) {
    const auto* v = take(key);
    if (!v) return false;
    if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() &&
                                    v->get<long long>() < 0))
      throw ConfigError(at(key) + "expected a nonnegative integer");
    out = v->get<uint64_t>();
    return true;
  }

  bool get_string(const char* key, std::string& out) {
    const auto* v = take(key);
    if (!v) return false;
    if (!v->is_string()) throw ConfigError(at(key) + "expected a string");
    out = v->get<std::string>();
    return true;
  }

  bool get_doubles(const char* key, std::vector<double>& out) {
    const auto* v = take(key);
    if (!v) return false;
    if (!v->is_array()) throw ConfigError(at(key) + "expected an array of numbers");
    std::vector<double> vals;
    for (const auto& e : *v) {
      if (!e.is_number()) throw ConfigError(at(key) + "expected an array of numbers");
      vals.push_back(e.get<double>());
    }
    out = std::move(vals);
    return true;
  }

  const nlohmann::json* take_object(const char* key) {
    const auto* v = take(key);
    if (v && !v->is_object()) throw ConfigError(at(key) + "expected a JSON object");
    return v;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(at(it.key()) + "unknown key");
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void validate_train(const TrainConfig& cfg, const std::string& path) {
  auto fail = [&](const std::string& msg) {
    throw ConfigError(path.empty() ? msg : path + ": " + msg);
  };
  if (!(cfg.discount > 0.0 && cfg.discount < 1.0)) fail("discount must be in (0, 1)");
  if (!(cfg.gae_lambda >= 0.0 && cfg.gae_lambda <= 1.0)) fail("gae_lambda must be in [0, 1]");
  if (!(cfg.lr > 0.0)) fail("lr must be positive");
  if (cfg.ppo_epochs < 1) fail("ppo_epochs must be >= 1");
  if (!(cfg.ppo_clip > 0.0)) fail("ppo_clip must be positive");
  if (cfg.entropy_coef < 0.0) fail("entropy_coef must be >= 0");
  if (cfg.steps_per_iter < 1) fail("steps_per_iter must be >= 1");
  if (cfg.minibatch_size < 1) fail("minibatch_size must be >= 1");
  if (cfg.total_env_steps < 1) fail("total_env_steps must be >= 1");
  if (cfg.disc_updates_per_iter < 1) fail("disc_updates_per_iter must be >= 1");
  if (cfg.checkpoint_every < 0) fail("checkpoint_every must be >= 0");
  if (cfg.noise_level < 0.0) fail("noise_level must be >= 0");
  if (cfg.reg_weight < 0.0) fail("reg_weight must be >= 0");
  if (cfg.perturb_radius < 0.0) fail("perturb_radius must be >= 0");
  if (cfg.perturb_steps < 1) fail("perturb_steps must be >= 1");
}

TrainConfig read_train(const nlohmann::json& j, const std::string& path, bool allow_env_seed) {
  TrainConfig cfg;
  Fields f(j, path);
  if (allow_env_seed) {
    f.get_string("env", cfg.env);
    f.get_u64("seed", cfg.seed);
  }
  f.get_double("discount", cfg.discount);
  f.get_double("gae_lambda", cfg.gae_lambda);
  f.get_double("lr", cfg.lr);
  f.get_int("ppo_epochs", cfg.ppo_epochs);
  f.get_double("ppo_clip", cfg.ppo_clip);
  f.get_double("entropy_coef", cfg.entropy_coef);
  f.get_int("steps_per_iter", cfg.steps_per_iter);
  f.get_int("minibatch_size", cfg.minibatch_size);
  f.get_i64("total_env_steps", cfg.total_env_steps);
  f.get_int("disc_updates_per_iter", cfg.disc_updates_per_iter);
  f.get_int("checkpoint_every", cfg.checkpoint_every);
  std::string s;
  if (f.get_string("mode", s)) cfg.mode = train_mode_from_name(s);
  bool level_given = f.get_double("noise_level", cfg.noise_level);
  if (f.get_string("noise_kind", s)) cfg.noise_kind = noise_kind_from_name(s);
  f.get_double("reg_weight", cfg.reg_weight);
  if (f.get_string("perturb_norm", s)) cfg.perturb_norm = norm_from_name(s);
  f.get_double("perturb_radius", cfg.perturb_radius);
  f.get_int("perturb_steps", cfg.perturb_steps);
  if (f.get_string("perturb_init", s)) cfg.perturb_init = perturb_init_from_name(s);
  if (f.get_string("reg_refresh", s)) cfg.reg_refresh = reg_refresh_from_name(s);
  f.finish();
  if (!level_given) {
    // documented best training levels for the noisy baselines
    if (cfg.mode == TrainMode::NoisyDisc) cfg.noise_level = 0.03;
    if (cfg.mode == TrainMode::NoisyGen) cfg.noise_level = 0.3;
  }
  validate_train(cfg, path);
  return cfg;
}

EvalConfig read_eval(const nlohmann::json& j, const std::string& path) {
  EvalConfig cfg;
  Fields f(j, path);
  f.get_doubles("noise_levels", cfg.noise_levels);
  f.get_int("episodes_per_level", cfg.episodes_per_level);
  std::string s;
  if (f.get_string("noise_kind", s)) cfg.noise_kind = noise_kind_from_name(s);
  f.get_doubles("ellc_radii", cfg.ellc_radii);
  f.finish();
  if (cfg.noise_levels.empty()) throw ConfigError(path + ".noise_levels: must be nonempty");
  for (double v : cfg.noise_levels)
    if (v < 0.0) throw ConfigError(path + ".noise_levels: entries must be >= 0");
  if (cfg.episodes_per_level < 1)
    throw ConfigError(path + ".episodes_per_level: must be >= 1");
  if (cfg.ellc_radii.empty()) throw ConfigError(path + ".ellc_radii: must be nonempty");
  for (double v : cfg.ellc_radii)
    if (v <= 0.0) throw ConfigError(path + ".ellc_radii: entries must be positive");
  return cfg;
}

}  // namespace

nlohmann::json train_config_to_json(const TrainConfig& cfg) {
  nlohmann::json j;
  j["env"] = cfg.env;
  j["discount"] = cfg.discount;
  j["gae_lambda"] = cfg.gae_lambda;
  j["lr"] = cfg.lr;
  j["ppo_epochs"] = cfg.ppo_epochs;
  j["ppo_clip"] = cfg.ppo_clip;
  j["entropy_coef"] = cfg.entropy_coef;
  j["steps_per_iter"] = cfg.steps_per_iter;
  j["minibatch_size"] = cfg.minibatch_size;
  j["total_env_steps"] = cfg.total_env_steps;
  j["disc_updates_per_iter"] = cfg.disc_updates_per_iter;
  j["checkpoint_every"] = cfg.checkpoint_every;
  j["mode"] = train_mode_name(cfg.mode);
  j["noise_level"] = cfg.noise_level;
  j["noise_kind"] = noise_kind_name(cfg.noise_kind);
  j["reg_weight"] = cfg.reg_weight;
  j["perturb_norm"] = norm_name(cfg.perturb_norm);
  j["perturb_radius"] = cfg.perturb_radius;
  j["perturb_steps"] = cfg.perturb_steps;
  j["perturb_init"] = perturb_init_name(cfg.perturb_init);
  j["reg_refresh"] = reg_refresh_name(cfg.reg_refresh);
  j["seed"] = cfg.seed;
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j, const std::string& path) {
  return read_train(j, path, /*allow_env_seed=*/true);
}

nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json train = train_config_to_json(cfg.train);
  train.erase("env");
  train.erase("seed");
  nlohmann::json j;
  j["env"] = cfg.train.env;
  j["seed"] = cfg.train.seed;
  j["train"] = std::move(train);
  nlohmann::json eval;
  eval["noise_levels"] = cfg.eval.noise_levels;
  eval["episodes_per_level"] = cfg.eval.episodes_per_level;
  eval["noise_kind"] = noise_kind_name(cfg.eval.noise_kind);
  eval["ellc_radii"] = cfg.eval.ellc_radii;
  j["eval"] = std::move(eval);
  nlohmann::json paths;
  paths["demos"] = cfg.paths.demos;
  paths["out_dir"] = cfg.paths.out_dir;
  j["paths"] = std::move(paths);
  return j;
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  Fields f(j, "");
  std::string env = cfg.train.env;
  uint64_t seed = cfg.train.seed;
  f.get_string("env", env);
  f.get_u64("seed", seed);
  if (const auto* t = f.take_object("train")) {
    if (t->contains("env")) throw ConfigError("train.env: set env at the top level");
    if (t->contains("seed")) throw ConfigError("train.seed: set seed at the top level");
    cfg.train = read_train(*t, "train", /*allow_env_seed=*/false);
  }
  if (const auto* e = f.take_object("eval")) cfg.eval = read_eval(*e, "eval");
  if (const auto* p = f.take_object("paths")) {
    Fields pf(*p, "paths");
    pf.get_string("demos", cfg.paths.demos);
    pf.get_string("out_dir", cfg.paths.out_dir);
    pf.finish();
  }
  f.finish();
  cfg.train.env = env;
  cfg.train.seed = seed;
  return cfg;
}

nlohmann::json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // nlohmann reports "parse error at line L, column C: ..."
    throw ConfigError(origin + ": " + e.what());
  }
}

nlohmann::json parse_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  if (f.bad()) throw IoError("read failed: " + path);
  return parse_json_text(ss.str(), path);
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return experiment_config_from_json(parse_json_file(path));
}

std::string config_hash(const TrainConfig& cfg) {
  return hex64(fnv1a64(train_config_to_json(cfg).dump()));
}

std::string config_hash(const ExperimentConfig& cfg) {
  return hex64(fnv1a64(experiment_config_to_json(cfg).dump()));
}

void write_config_snapshot(const std::string& path, const TrainConfig& cfg) {
  nlohmann::json j = train_config_to_json(cfg);
  j["config_hash"] = config_hash(cfg);
  j["version_tag"] = kVersionTag;
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << j.dump(2) << "\n";
  if (!f) throw IoError("write failed: " + path);
}

int env_thread_count() {
  const char* s = std::getenv("LIPGAIL_THREADS");
  if (!s || !*s) return 1;
  int n = std::atoi(s);
  return n < 1 ? 1 : n;
}

}  // namespace lipgail
