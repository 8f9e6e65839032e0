#pragma once

#include "lipgail/nets.hpp"
#include "lipgail/tensor.hpp"

namespace lipgail {

// closed-form KL between diagonal Gaussians:
//   sum_i [ log(sq/sp) + (sp^2 + (mp - mq)^2) / (2 sq^2) - 1/2 ]
double kl_divergence(const DiagGaussian& p, const DiagGaussian& q);
// symmetrized: KL(p||q) + KL(q||p); exactly 0 on identical parameters
double jeffreys(const DiagGaussian& p, const DiagGaussian& q);

// graph versions over batches: means are [B,a], log-stds are [1,a] rows
// broadcast over the batch. Any argument may be a constant tensor, which is
// how a detached reference distribution enters.
ad::Tensor kl_rows(const ad::Tensor& mean_p, const ad::Tensor& log_std_p,
                   const ad::Tensor& mean_q, const ad::Tensor& log_std_q);  // [B,1]
ad::Tensor jeffreys_rows(const ad::Tensor& mean_p, const ad::Tensor& log_std_p,
                         const ad::Tensor& mean_q, const ad::Tensor& log_std_q);  // [B,1]

}  // namespace lipgail
