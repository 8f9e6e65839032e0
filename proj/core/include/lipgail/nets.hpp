#pragma once

#include <span>
#include <string>
#include <vector>

#include "lipgail/param_store.hpp"
#include "lipgail/rng.hpp"
#include "lipgail/tensor.hpp"

namespace lipgail {

inline constexpr double kLogStdLo = -5.0;
inline constexpr double kLogStdHi = 2.0;

// plain diagonal Gaussian over actions, used on non-graph paths
struct DiagGaussian {
  std::vector<double> mean;
  std::vector<double> log_std;  // already clamped to [kLogStdLo, kLogStdHi]

  double log_prob(std::span<const double> a) const;
  double entropy() const;
  std::vector<double> sample(Rng& rng) const;
};

struct Linear {
  ad::Tensor w;  // [in, out]
  ad::Tensor b;  // [1, out]
};

// tanh MLP; the final layer is linear
struct Mlp {
  std::vector<Linear> layers;

  // registers params as "<prefix>/l<k>/w|b"; head_gain scales the last layer
  static Mlp make(ParamStore& store, const std::string& prefix, int in_dim,
                  const std::vector<int>& hidden, int out_dim, double head_gain, Rng& rng);
  ad::Tensor forward(const ad::Tensor& x) const;
};

// graph-side policy output for a batch of states
struct PolicyForward {
  ad::Tensor mean;     // [B, act]
  ad::Tensor log_std;  // [1, act], clamped
};

class PolicyNet {
 public:
  PolicyNet(ParamStore& store, int state_dim, int action_dim, Rng& rng);

  PolicyForward forward(const ad::Tensor& states) const;
  DiagGaussian dist(std::span<const double> s_norm) const;
  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }

 private:
  int state_dim_, action_dim_;
  Mlp net_;
  ad::Tensor log_std_;  // [1, act] parameter
};

class ValueNet {
 public:
  ValueNet(ParamStore& store, int state_dim, Rng& rng);
  ad::Tensor forward(const ad::Tensor& states) const;  // [B,1]
  std::vector<double> values(const Mat& states) const;

 private:
  Mlp net_;
};

class DiscriminatorNet {
 public:
  // hidden = {} makes the logit an exactly linear function of (s, a)
  DiscriminatorNet(ParamStore& store, int state_dim, int action_dim, Rng& rng,
                   const std::vector<int>& hidden = {100, 100});

  ad::Tensor logits(const ad::Tensor& states, const ad::Tensor& actions) const;  // [B,1]
  ad::Tensor probs(const ad::Tensor& states, const ad::Tensor& actions) const;   // sigmoid
  std::vector<double> prob_values(const Mat& states, const Mat& actions) const;
  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }

 private:
  int state_dim_, action_dim_;
  Mlp net_;
};

// per-sample log density of a diagonal Gaussian batch -> [B,1]
ad::Tensor gaussian_log_prob(const PolicyForward& pf, const ad::Tensor& actions);
// entropy of the (state-independent) Gaussian -> [1,1]
ad::Tensor gaussian_entropy(const ad::Tensor& log_std);

// running per-dim mean/var; normalize = (s - mean)/sqrt(var + 1e-8), then
// clamp to [-10, 10]. Frozen during evaluation and inside perturbation loops.
struct ObsNormalizer {
  std::vector<double> mean, var;  // population variance
  double count = 0.0;

  explicit ObsNormalizer(int dim) : mean(dim, 0.0), var(dim, 0.0) {}
  void update(std::span<const double> s);
  std::vector<double> normalize(std::span<const double> s) const;
  Mat normalize_batch(const Mat& raw) const;
  std::vector<double> stds() const;  // sqrt(var + 1e-8) per dim
};

// orthogonal-style init: Gaussian matrix orthonormalized, scaled by gain
Mat orthogonal_init(int rows, int cols, double gain, Rng& rng);

}  // namespace lipgail
