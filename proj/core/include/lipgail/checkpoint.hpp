#pragma once

#include <memory>
#include <string>

#include "lipgail/gail.hpp"

namespace lipgail {

struct LoadedCheckpoint {
  TrainConfig config;
  std::unique_ptr<Env> env;
  std::unique_ptr<Agent> agent;
  long long env_steps = 0;
  long long iter = 0;
  std::string config_hash;
};

// one JSON document: version_tag, config_hash, seed, env_steps, iter, the
// full config, the three param stores and the normalizer stats
void save_checkpoint(const std::string& path, const Agent& agent, const TrainConfig& cfg,
                     long long env_steps, long long iter);
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace lipgail
