#pragma once

#include <optional>
#include <vector>

#include "lipgail/nets.hpp"
#include "lipgail/rng.hpp"

namespace lipgail {

enum class PerturbInit { Zero, RandomInBall };

struct PerturbationSpec {
  Norm norm = Norm::L2;
  double radius = 0.0;
  int steps = 10;
  double step_size = 0.0;
  PerturbInit init = PerturbInit::Zero;

  // standard heuristic: step_size = 2.5 * radius / steps
  static PerturbationSpec make(Norm norm, double radius, int steps = 10);
};

// project one vector onto the ball of spec.radius (L2 rescale / Linf clamp)
void project(std::span<double> delta, const PerturbationSpec& spec);

// detached reference distribution of a policy over a state batch
struct GaussianRef {
  Mat mean;                     // [B, act]
  std::vector<double> log_std;  // clamped, shared across the batch
};
GaussianRef policy_reference(const PolicyNet& policy, const Mat& s_norm);

// graph objectives, exposed so gradients can be checked against finite
// differences. Both sum per-row terms; rows are independent.
// sum_i |D(s_i + delta_i, a_i) - d0_i| with d0 a constant reference
ad::Tensor pga_disc_objective(const DiscriminatorNet& disc, const Mat& s_norm, const Mat& actions,
                              const ad::Tensor& delta, std::span<const double> d0);
// sum_i DJ(ref_i || policy(s_i + delta_i))
ad::Tensor pga_gen_objective(const PolicyNet& policy, const Mat& s_norm, const ad::Tensor& delta,
                             const GaussianRef& ref);

struct PgaResult {
  Mat delta;                      // best iterate per row, inside the ball
  std::vector<double> objective;  // objective at the returned delta, per row
};

// projected gradient ascent, batched over rows; parameters stay fixed.
// radius <= 0 or (steps == 0 with Zero init) short-circuits to delta = 0
// without consuming RNG draws. rng is only touched for RandomInBall init.
PgaResult pga_disc(const DiscriminatorNet& disc, const Mat& s_norm, const Mat& actions,
                   const PerturbationSpec& spec, Rng* rng);
PgaResult pga_gen(const PolicyNet& policy, const Mat& s_norm, const PerturbationSpec& spec,
                  Rng* rng);

// regularizer terms for the outer losses, built with delta held fixed
// mean_i |D(s_i + delta_i, a_i) - D(s_i, a_i)|, differentiable in disc params
ad::Tensor reg_disc_term(const DiscriminatorNet& disc, const Mat& s_norm, const Mat& actions,
                         const Mat& delta);
// mean_i DJ(ref_i || policy(s_i + delta_i)), reference detached
ad::Tensor reg_gen_term(const PolicyNet& policy, const Mat& s_norm, const Mat& delta,
                        const GaussianRef& ref);

}  // namespace lipgail
