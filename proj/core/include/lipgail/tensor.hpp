#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "lipgail/common.hpp"

// Minimal reverse-mode autodiff over dense 2-D double tensors. The graph is
// define-by-run: every op allocates a fresh node, backward() walks the tape.
// Scalars are [1,1]; vectors are rows [1,n].
namespace lipgail::ad {

namespace detail {
struct Node {
  int rows = 0, cols = 0;
  std::vector<double> value;
  // leaves: persistent accumulator, zeroed only by zero_grad/ParamStore;
  // interior nodes: scratch, reset at the start of each backward pass
  std::vector<double> grad;
  bool requires_grad = false;
  bool leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void()> backprop;
  int size() const { return rows * cols; }
};
}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(int rows, int cols, std::vector<double> data);
  static Tensor constant(const Mat& m) { return constant(m.rows, m.cols, m.v); }
  static Tensor zeros(int rows, int cols);
  static Tensor scalar(double v) { return constant(1, 1, {v}); }
  // leaf with requires_grad
  static Tensor variable(int rows, int cols, std::vector<double> data);

  bool defined() const { return static_cast<bool>(n_); }
  int rows() const { return n_->rows; }
  int cols() const { return n_->cols; }
  int size() const { return n_->size(); }
  bool requires_grad() const { return n_->requires_grad; }
  bool is_leaf() const { return n_->leaf; }

  std::vector<double>& data() { return n_->value; }
  const std::vector<double>& data() const { return n_->value; }
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  void zero_grad();

  double value() const;  // scalar convenience

  std::shared_ptr<detail::Node> n_;
};

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor neg(const Tensor& a);
// broadcast a [1,n] row over the rows of m [B,n]
Tensor add_rowwise(const Tensor& m, const Tensor& row);
Tensor mul_rowwise(const Tensor& m, const Tensor& row);
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);
Tensor abs(const Tensor& a);  // subgradient 0 at 0
Tensor clamp(const Tensor& a, double lo, double hi);  // grad 1 inside [lo,hi], 0 outside
Tensor minimum(const Tensor& a, const Tensor& b);     // ties route grad to a
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor sum(const Tensor& a);      // -> [1,1]
Tensor mean(const Tensor& a);     // -> [1,1]
Tensor row_sum(const Tensor& a);  // [B,n] -> [B,1]

// reverse-mode pass from a scalar loss; accumulates into leaf grads
void backward(const Tensor& loss);

}  // namespace lipgail::ad
