#include "lipgail/param_store.hpp"

#include <cmath>

namespace lipgail {

ad::Tensor& ParamStore::add(const std::string& name, ad::Tensor t) {
  require(find(name) == nullptr, "param store: duplicate name " + name);
  require(t.requires_grad(), "param store: params must require grad");
  entries.emplace_back(name, std::move(t));
  return entries.back().second;
}

ad::Tensor* ParamStore::find(const std::string& name) {
  for (auto& [n, t] : entries)
    if (n == name) return &t;
  return nullptr;
}

const ad::Tensor* ParamStore::find(const std::string& name) const {
  return const_cast<ParamStore*>(this)->find(name);
}

void ParamStore::zero_grads() {
  for (auto& [n, t] : entries) t.zero_grad();
}

size_t ParamStore::param_count() const {
  size_t c = 0;
  for (const auto& [n, t] : entries) c += t.size();
  return c;
}

std::vector<double> ParamStore::flat_values() const {
  std::vector<double> out;
  out.reserve(param_count());
  for (const auto& [n, t] : entries) out.insert(out.end(), t.data().begin(), t.data().end());
  return out;
}

std::vector<double> ParamStore::flat_grads() const {
  std::vector<double> out;
  out.reserve(param_count());
  for (const auto& [n, t] : entries) {
    const auto& g = t.grad();
    out.insert(out.end(), g.begin(), g.end());
  }
  return out;
}

void ParamStore::set_flat_values(const std::vector<double>& v) {
  require(v.size() == param_count(), "param store: flat size mismatch");
  size_t off = 0;
  for (auto& [n, t] : entries) {
    std::copy(v.begin() + off, v.begin() + off + t.size(), t.data().begin());
    off += t.size();
  }
}

Adam::Adam(const ParamStore& store, double learning_rate) : lr(learning_rate) {
  m.reserve(store.entries.size());
  v.reserve(store.entries.size());
  for (const auto& [n, t] : store.entries) {
    m.emplace_back(t.size(), 0.0);
    v.emplace_back(t.size(), 0.0);
  }
}

void Adam::step(ParamStore& store) {
  require(m.size() == store.entries.size(), "adam: store changed since init");
  ++step_count;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
  for (size_t e = 0; e < store.entries.size(); ++e) {
    auto& t = store.entries[e].second;
    auto& val = t.data();
    const auto& g = t.grad();
    auto& me = m[e];
    auto& ve = v[e];
    for (size_t i = 0; i < val.size(); ++i) {
      me[i] = beta1 * me[i] + (1.0 - beta1) * g[i];
      ve[i] = beta2 * ve[i] + (1.0 - beta2) * g[i] * g[i];
      double mh = me[i] / bc1;
      double vh = ve[i] / bc2;
      val[i] -= lr * mh / (std::sqrt(vh) + eps);
    }
  }
}

}  // namespace lipgail
