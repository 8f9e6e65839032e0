#include "lipgail/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "lipgail/config.hpp"
#include "lipgail/version.hpp"

namespace lipgail {

namespace {

nlohmann::json store_json(const ParamStore& store) {
  nlohmann::json j;
  j["version_tag"] = store.version_tag;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [name, t] : store.entries) {
    nlohmann::json e;
    e["name"] = name;
    e["shape"] = {t.rows(), t.cols()};
    e["data"] = t.data();
    entries.push_back(std::move(e));
  }
  j["entries"] = std::move(entries);
  return j;
}

void load_store(const nlohmann::json& j, ParamStore& into) {
  if (!j.is_object() || !j.contains("version_tag") || !j.contains("entries"))
    throw ConfigError("param store document needs version_tag and entries");
  into.version_tag = j.at("version_tag").get<std::string>();
  const auto& entries = j.at("entries");
  require(entries.is_array() && entries.size() == into.entries.size(),
          "param store entry count does not match the target network");
  for (const auto& e : entries) {
    const std::string name = e.at("name").get<std::string>();
    ad::Tensor* t = into.find(name);
    require(t != nullptr, "param store has no entry named " + name);
    const auto& shape = e.at("shape");
    require(shape.is_array() && shape.size() == 2 &&
                shape[0].get<int>() == t->rows() && shape[1].get<int>() == t->cols(),
            "shape mismatch for param " + name);
    std::vector<double> data = e.at("data").get<std::vector<double>>();
    require(data.size() == t->data().size(), "data length mismatch for param " + name);
    t->data() = std::move(data);
  }
}

}  // namespace

std::string param_store_to_json(const ParamStore& store) {
  return store_json(store).dump();
}

void param_store_from_json(const std::string& text, ParamStore& into) {
  load_store(parse_json_text(text, "param store"), into);
}

void save_checkpoint(const std::string& path, const Agent& agent, const TrainConfig& cfg,
                     long long env_steps, long long iter) {
  nlohmann::json j;
  j["version_tag"] = kVersionTag;
  j["config_hash"] = config_hash(cfg);
  j["seed"] = cfg.seed;
  j["env_steps"] = env_steps;
  j["iter"] = iter;
  j["config"] = train_config_to_json(cfg);
  j["policy"] = store_json(agent.policy_store);
  j["value"] = store_json(agent.value_store);
  j["disc"] = store_json(agent.disc_store);
  nlohmann::json norm;
  norm["mean"] = agent.normalizer.mean;
  norm["var"] = agent.normalizer.var;
  norm["count"] = agent.normalizer.count;
  j["normalizer"] = std::move(norm);
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << j.dump() << "\n";
  if (!f) throw IoError("write failed: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  nlohmann::json j = parse_json_file(path);
  for (const char* key : {"version_tag", "config_hash", "config", "policy", "value", "disc",
                          "normalizer"})
    if (!j.contains(key))
      throw ConfigError(path + ": checkpoint is missing key " + std::string(key));

  LoadedCheckpoint out;
  out.config = train_config_from_json(j.at("config"), "config");
  out.config_hash = j.at("config_hash").get<std::string>();
  require(out.config_hash == config_hash(out.config),
          path + ": config_hash does not match the stored config");
  out.env_steps = j.value("env_steps", 0LL);
  out.iter = j.value("iter", 0LL);
  out.env = make_env(out.config.env);
  Rng init_rng(out.config.seed);
  out.agent = std::make_unique<Agent>(out.env->spec(), init_rng);
  load_store(j.at("policy"), out.agent->policy_store);
  load_store(j.at("value"), out.agent->value_store);
  load_store(j.at("disc"), out.agent->disc_store);
  const auto& norm = j.at("normalizer");
  std::vector<double> mean = norm.at("mean").get<std::vector<double>>();
  std::vector<double> var = norm.at("var").get<std::vector<double>>();
  require(mean.size() == out.agent->normalizer.mean.size() &&
              var.size() == out.agent->normalizer.var.size(),
          path + ": normalizer dimension mismatch");
  out.agent->normalizer.mean = std::move(mean);
  out.agent->normalizer.var = std::move(var);
  out.agent->normalizer.count = norm.at("count").get<double>();
  return out;
}

}  // namespace lipgail
