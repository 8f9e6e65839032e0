#include "lipgail/divergence.hpp"

#include <cmath>

namespace lipgail {

double kl_divergence(const DiagGaussian& p, const DiagGaussian& q) {
  require(p.mean.size() == q.mean.size(), "kl: dim mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < p.mean.size(); ++i) {
    double lsp = p.log_std[i], lsq = q.log_std[i];
    double dm = p.mean[i] - q.mean[i];
    // written so that identical parameters cancel to exactly zero
    acc += (lsq - lsp) + 0.5 * std::exp(2.0 * (lsp - lsq)) +
           0.5 * dm * dm * std::exp(-2.0 * lsq) - 0.5;
  }
  return acc;
}

double jeffreys(const DiagGaussian& p, const DiagGaussian& q) {
  return kl_divergence(p, q) + kl_divergence(q, p);
}

ad::Tensor kl_rows(const ad::Tensor& mean_p, const ad::Tensor& log_std_p,
                   const ad::Tensor& mean_q, const ad::Tensor& log_std_q) {
  require(mean_p.rows() == mean_q.rows() && mean_p.cols() == mean_q.cols(),
          "kl_rows: mean shape mismatch");
  require(log_std_p.rows() == 1 && log_std_q.rows() == 1, "kl_rows: log_std must be [1,a]");
  int d = mean_p.cols();

  // per-dim scalar pieces, [1,a]
  ad::Tensor ls_diff = ad::sub(log_std_q, log_std_p);
  ad::Tensor var_ratio =
      ad::mul_scalar(ad::exp(ad::mul_scalar(ad::sub(log_std_p, log_std_q), 2.0)), 0.5);
  ad::Tensor inv_var_q = ad::exp(ad::mul_scalar(log_std_q, -2.0));

  // mean term, [B,1]
  ad::Tensor quad =
      ad::mul_scalar(ad::row_sum(ad::mul_rowwise(ad::square(ad::sub(mean_p, mean_q)), inv_var_q)),
                     0.5);

  // broadcast the per-dim sums down the batch column
  ad::Tensor per_dim = ad::add(ls_diff, var_ratio);          // [1,a]
  ad::Tensor dim_sum = ad::sum(per_dim);                     // [1,1]
  int b = mean_p.rows();
  ad::Tensor ones = ad::Tensor::constant(b, 1, std::vector<double>(b, 1.0));
  ad::Tensor col = ad::matmul(ones, dim_sum);                // [B,1]
  return ad::add_scalar(ad::add(quad, col), -0.5 * d);
}

ad::Tensor jeffreys_rows(const ad::Tensor& mean_p, const ad::Tensor& log_std_p,
                         const ad::Tensor& mean_q, const ad::Tensor& log_std_q) {
  return ad::add(kl_rows(mean_p, log_std_p, mean_q, log_std_q),
                 kl_rows(mean_q, log_std_q, mean_p, log_std_p));
}

}  // namespace lipgail
