#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "lipgail/param_store.hpp"

// central-difference gradient oracles, independent of the autodiff tape
namespace testsupport {

inline std::vector<double> fd_grad_params(lipgail::ParamStore& store,
                                          const std::function<double()>& loss,
                                          double h = 1e-5) {
  std::vector<double> g;
  g.reserve(store.param_count());
  for (auto& [name, t] : store.entries) {
    for (auto& w : t.data()) {
      double keep = w;
      w = keep + h;
      double up = loss();
      w = keep - h;
      double dn = loss();
      w = keep;
      g.push_back((up - dn) / (2.0 * h));
    }
  }
  return g;
}

inline std::vector<double> fd_grad_vector(std::vector<double>& x,
                                          const std::function<double()>& loss,
                                          double h = 1e-5) {
  std::vector<double> g(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    double keep = x[i];
    x[i] = keep + h;
    double up = loss();
    x[i] = keep - h;
    double dn = loss();
    x[i] = keep;
    g[i] = (up - dn) / (2.0 * h);
  }
  return g;
}

// worst component error: relative, with an absolute floor near zero
inline double max_grad_err(const std::vector<double>& a, const std::vector<double>& b,
                           double abs_floor = 1e-6) {
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double diff = std::fabs(a[i] - b[i]);
    if (diff <= abs_floor) continue;
    double scale = std::max(std::fabs(a[i]), std::fabs(b[i]));
    worst = std::max(worst, diff / std::max(scale, 1e-12));
  }
  return worst;
}

}  // namespace testsupport
