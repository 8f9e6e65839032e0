#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lipgail/tensor.hpp"
#include "lipgail/version.hpp"

namespace lipgail {

// named parameter registry; entry order is insertion order and is the
// serialization order, so checkpoints are stable across runs
struct ParamStore {
  std::string version_tag = kVersionTag;
  std::vector<std::pair<std::string, ad::Tensor>> entries;

  ad::Tensor& add(const std::string& name, ad::Tensor t);
  ad::Tensor* find(const std::string& name);
  const ad::Tensor* find(const std::string& name) const;
  void zero_grads();
  size_t param_count() const;

  // flat views over all entries, used by the finite-difference test oracle
  std::vector<double> flat_values() const;
  std::vector<double> flat_grads() const;
  void set_flat_values(const std::vector<double>& v);
};

// serialization lives in checkpoint.cpp: {version_tag, entries:[{name,shape,data}]}
std::string param_store_to_json(const ParamStore& store);
void param_store_from_json(const std::string& text, ParamStore& into);

// Adam with bias correction; denominator sqrt(v_hat) + eps
struct Adam {
  double lr;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step_count = 0;
  std::vector<std::vector<double>> m, v;

  explicit Adam(const ParamStore& store, double learning_rate);
  void step(ParamStore& store);
};

}  // namespace lipgail
