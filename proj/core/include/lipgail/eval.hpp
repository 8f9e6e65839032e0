#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lipgail/gail.hpp"

namespace lipgail {

struct NoiseEvalRow {
  double noise_level = 0.0;
  int episodes = 0;
  double mean_return = 0.0;
  double std_return = 0.0;
};

struct NoiseEvalReport {
  std::vector<NoiseEvalRow> rows;  // sorted by noise_level ascending
  std::string checkpoint_id;       // config hash of the source checkpoint
  std::string env;
  NoiseKind noise_kind = NoiseKind::Gaussian;
  uint64_t seed = 0;
};

// deterministic (mean) actions on noisy observations; the env evolves on true
// states. Noise levels are in normalized units (scaled per dim by the
// normalizer stds before normalization). Episodes run on LIPGAIL_THREADS
// workers with per-(level, episode) RNG streams, so results do not depend on
// the thread count.
NoiseEvalReport eval_noise(const Agent& agent, const std::string& env_name,
                           std::vector<double> noise_levels, int episodes_per_level,
                           NoiseKind kind, uint64_t seed, const std::string& checkpoint_id);

struct EllcRow {
  double radius = 0.0;
  double ellc = 0.0;
};

struct EllcReport {
  std::vector<EllcRow> rows;  // sorted by radius ascending
  int trajectories = 0;
  int horizon = 0;
  int samples = 0;  // trajectories * horizon
  std::string delta_rule;
  std::string checkpoint_id;
  std::string env;
  uint64_t seed = 0;
};

using GaussianPolicy = std::function<DiagGaussian(std::span<const double>)>;

// mean over rows of D_J(pi(s) || pi(s + delta)) / radius with one delta per
// state: uniform on the L2 sphere, or on the Linf ball surface
double ellc_estimate(const GaussianPolicy& policy, const Mat& states, double radius, Norm norm,
                     Rng& rng);

// protocol: 30 noiseless trajectories of 128 steps with the stochastic
// policy, 3840 perturbed states per radius. adversarial swaps the random
// delta for a PGA ascent on the Jeffreys objective (worst case, non-default).
EllcReport ellc_report(const Agent& agent, const std::string& env_name,
                       std::vector<double> radii, uint64_t seed, Norm norm = Norm::L2,
                       bool adversarial = false, const std::string& checkpoint_id = "");

void write_noise_eval_csv(const std::string& path, const NoiseEvalReport& report);
NoiseEvalReport read_noise_eval_csv(const std::string& path);
void write_ellc_csv(const std::string& path, const EllcReport& report);
EllcReport read_ellc_csv(const std::string& path);

}  // namespace lipgail
