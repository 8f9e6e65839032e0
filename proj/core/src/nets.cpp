#include "lipgail/nets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace lipgail {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)
const std::vector<int> kPolicyHidden = {64, 64, 64};
}  // namespace

double DiagGaussian::log_prob(std::span<const double> a) const {
  // same term grouping as gaussian_log_prob so both paths agree bit-for-bit
  double quad = 0.0;
  for (size_t i = 0; i < mean.size(); ++i) {
    double diff = a[i] - mean[i];
    quad += diff * diff * std::exp(-2.0 * log_std[i]);
  }
  double ls_sum = 0.0;
  for (double ls : log_std) ls_sum += ls;
  return (-0.5 * quad - ls_sum) + -0.5 * kLog2Pi * static_cast<double>(mean.size());
}

double DiagGaussian::entropy() const {
  double h = 0.0;
  for (double ls : log_std) h += ls + 0.5 * (kLog2Pi + 1.0);
  return h;
}

std::vector<double> DiagGaussian::sample(Rng& rng) const {
  std::vector<double> a(mean.size());
  for (size_t i = 0; i < a.size(); ++i)
    a[i] = mean[i] + std::exp(log_std[i]) * rng.normal();
  return a;
}

Mat orthogonal_init(int rows, int cols, double gain, Rng& rng) {
  // orthonormalize along the shorter dimension via modified Gram-Schmidt
  bool tall = rows >= cols;
  int n = tall ? rows : cols;  // vector length
  int k = tall ? cols : rows;  // number of vectors
  std::vector<std::vector<double>> vs(k, std::vector<double>(n));
  for (auto& v : vs)
    for (auto& x : v) x = rng.normal();
  for (int i = 0; i < k; ++i) {
    auto& vi = vs[i];
    for (int j = 0; j < i; ++j) {
      const auto& vj = vs[j];
      double dot = 0.0;
      for (int t = 0; t < n; ++t) dot += vi[t] * vj[t];
      for (int t = 0; t < n; ++t) vi[t] -= dot * vj[t];
    }
    double nrm2 = 0.0;
    for (double x : vi) nrm2 += x * x;
    double inv = 1.0 / std::sqrt(nrm2);
    for (auto& x : vi) x *= inv;
  }
  Mat out(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      out.at(i, j) = gain * (tall ? vs[j][i] : vs[i][j]);
  return out;
}

Mlp Mlp::make(ParamStore& store, const std::string& prefix, int in_dim,
              const std::vector<int>& hidden, int out_dim, double head_gain, Rng& rng) {
  Mlp mlp;
  std::vector<int> dims;
  dims.push_back(in_dim);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out_dim);
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    bool last = (l + 2 == dims.size());
    double gain = last ? head_gain : std::numbers::sqrt2;
    Mat w = orthogonal_init(dims[l], dims[l + 1], gain, rng);
    std::string base = prefix + "/l" + std::to_string(l);
    Linear lin;
    lin.w = store.add(base + "/w", ad::Tensor::variable(w.rows, w.cols, std::move(w.v)));
    lin.b = store.add(base + "/b",
                      ad::Tensor::variable(1, dims[l + 1], std::vector<double>(dims[l + 1], 0.0)));
    mlp.layers.push_back(lin);
  }
  return mlp;
}

ad::Tensor Mlp::forward(const ad::Tensor& x) const {
  ad::Tensor h = x;
  for (size_t l = 0; l < layers.size(); ++l) {
    h = ad::add_rowwise(ad::matmul(h, layers[l].w), layers[l].b);
    if (l + 1 < layers.size()) h = ad::tanh(h);
  }
  return h;
}

PolicyNet::PolicyNet(ParamStore& store, int state_dim, int action_dim, Rng& rng)
    : state_dim_(state_dim), action_dim_(action_dim) {
  net_ = Mlp::make(store, "policy", state_dim, kPolicyHidden, action_dim, 0.01, rng);
  log_std_ = store.add("policy/log_std",
                       ad::Tensor::variable(1, action_dim, std::vector<double>(action_dim, 0.0)));
}

PolicyForward PolicyNet::forward(const ad::Tensor& states) const {
  PolicyForward pf;
  pf.mean = net_.forward(states);
  pf.log_std = ad::clamp(log_std_, kLogStdLo, kLogStdHi);
  return pf;
}

DiagGaussian PolicyNet::dist(std::span<const double> s_norm) const {
  require(static_cast<int>(s_norm.size()) == state_dim_, "policy dist: state dim mismatch");
  auto pf = forward(ad::Tensor::constant(1, state_dim_, {s_norm.begin(), s_norm.end()}));
  return DiagGaussian{pf.mean.data(), pf.log_std.data()};
}

ValueNet::ValueNet(ParamStore& store, int state_dim, Rng& rng) {
  net_ = Mlp::make(store, "value", state_dim, kPolicyHidden, 1, 1.0, rng);
}

ad::Tensor ValueNet::forward(const ad::Tensor& states) const { return net_.forward(states); }

std::vector<double> ValueNet::values(const Mat& states) const {
  return forward(ad::Tensor::constant(states)).data();
}

DiscriminatorNet::DiscriminatorNet(ParamStore& store, int state_dim, int action_dim, Rng& rng,
                                   const std::vector<int>& hidden)
    : state_dim_(state_dim), action_dim_(action_dim) {
  net_ = Mlp::make(store, "disc", state_dim + action_dim, hidden, 1, 0.01, rng);
}

ad::Tensor DiscriminatorNet::logits(const ad::Tensor& states, const ad::Tensor& actions) const {
  require(states.cols() == state_dim_ && actions.cols() == action_dim_,
          "disc: input dim mismatch");
  return net_.forward(ad::concat_cols(states, actions));
}

ad::Tensor DiscriminatorNet::probs(const ad::Tensor& states, const ad::Tensor& actions) const {
  return ad::sigmoid(logits(states, actions));
}

std::vector<double> DiscriminatorNet::prob_values(const Mat& states, const Mat& actions) const {
  return probs(ad::Tensor::constant(states), ad::Tensor::constant(actions)).data();
}

ad::Tensor gaussian_log_prob(const PolicyForward& pf, const ad::Tensor& actions) {
  // per dim: -(a-mu)^2/(2 sigma^2) - log_std - log(2pi)/2, summed over dims
  ad::Tensor diff = ad::sub(actions, pf.mean);
  ad::Tensor inv_var = ad::exp(ad::mul_scalar(pf.log_std, -2.0));  // [1,a]
  ad::Tensor quad = ad::mul_rowwise(ad::square(diff), inv_var);
  ad::Tensor lp = ad::mul_scalar(ad::row_sum(quad), -0.5);  // [B,1]
  int d = pf.mean.cols();
  ad::Tensor ls_sum = ad::sum(pf.log_std);  // [1,1]
  // broadcast the scalar term over the column
  ad::Tensor ones = ad::Tensor::constant(lp.rows(), 1, std::vector<double>(lp.rows(), 1.0));
  ad::Tensor ls_col = ad::matmul(ones, ls_sum);
  return ad::add_scalar(ad::sub(lp, ls_col), -0.5 * kLog2Pi * d);
}

ad::Tensor gaussian_entropy(const ad::Tensor& log_std) {
  int d = log_std.cols();
  return ad::add_scalar(ad::sum(log_std), 0.5 * (kLog2Pi + 1.0) * d);
}

void ObsNormalizer::update(std::span<const double> s) {
  require(s.size() == mean.size(), "normalizer: dim mismatch");
  count += 1.0;
  for (size_t i = 0; i < mean.size(); ++i) {
    double delta = s[i] - mean[i];
    mean[i] += delta / count;
    // Welford: var tracks M2/count (population variance)
    var[i] += (delta * (s[i] - mean[i]) - var[i]) / count;
  }
}

std::vector<double> ObsNormalizer::normalize(std::span<const double> s) const {
  std::vector<double> out(s.size());
  for (size_t i = 0; i < s.size(); ++i) {
    double z = (s[i] - mean[i]) / std::sqrt(var[i] + 1e-8);
    out[i] = std::clamp(z, -10.0, 10.0);
  }
  return out;
}

Mat ObsNormalizer::normalize_batch(const Mat& raw) const {
  Mat out(raw.rows, raw.cols);
  for (int i = 0; i < raw.rows; ++i) {
    auto r = normalize(raw.row_span(i));
    std::copy(r.begin(), r.end(), out.row(i));
  }
  return out;
}

std::vector<double> ObsNormalizer::stds() const {
  std::vector<double> out(var.size());
  for (size_t i = 0; i < var.size(); ++i) out[i] = std::sqrt(var[i] + 1e-8);
  return out;
}

}  // namespace lipgail
