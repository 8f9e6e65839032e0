#include "lipgail/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace lipgail::ad {

using detail::Node;

namespace {

std::shared_ptr<Node> new_node(int rows, int cols) {
  auto n = std::make_shared<Node>();
  n->rows = rows;
  n->cols = cols;
  n->value.assign(static_cast<size_t>(rows) * cols, 0.0);
  return n;
}

Tensor wrap(std::shared_ptr<Node> n) {
  Tensor t;
  t.n_ = std::move(n);
  return t;
}

// result node of an op: requires_grad if any parent does; parents kept only
// when a backward pass will need them
Tensor op_node(int rows, int cols, std::initializer_list<Tensor> parents) {
  auto n = new_node(rows, cols);
  n->leaf = false;
  for (const auto& p : parents) {
    if (p.n_->requires_grad) n->requires_grad = true;
  }
  if (n->requires_grad) {
    for (const auto& p : parents) n->parents.push_back(p.n_);
  }
  return wrap(n);
}

// C[m,n] += or = A[m,k] * B[k,n]; ikj order keeps the k-accumulation sequence
// identical to a plain ascending dot product, so batch size never changes
// per-element results bit-wise
void k_matmul(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<size_t>(i) * n;
    std::fill(ci, ci + n, 0.0);
    const double* ai = a + static_cast<size_t>(i) * k;
    for (int l = 0; l < k; ++l) {
      double av = ai[l];
      const double* bl = b + static_cast<size_t>(l) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bl[j];
    }
  }
}

// dA[m,k] += dC[m,n] * B^T  (row-of-dC dot row-of-B, both contiguous)
void k_acc_grad_a(const double* dc, const double* b, double* da, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* dci = dc + static_cast<size_t>(i) * n;
    double* dai = da + static_cast<size_t>(i) * k;
    for (int l = 0; l < k; ++l) {
      const double* bl = b + static_cast<size_t>(l) * n;
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += dci[j] * bl[j];
      dai[l] += acc;
    }
  }
}

// dB[k,n] += A^T * dC[m,n]
void k_acc_grad_b(const double* a, const double* dc, double* db, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<size_t>(i) * k;
    const double* dci = dc + static_cast<size_t>(i) * n;
    for (int l = 0; l < k; ++l) {
      double av = ai[l];
      double* dbl = db + static_cast<size_t>(l) * n;
      for (int j = 0; j < n; ++j) dbl[j] += av * dci[j];
    }
  }
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// shared skeleton for elementwise unary ops: f(value) and df(value, out_value)
template <class F, class DF>
Tensor unary_op(const Tensor& a, F f, DF df) {
  Tensor out = op_node(a.rows(), a.cols(), {a});
  const auto& av = a.n_->value;
  auto& ov = out.n_->value;
  for (size_t i = 0; i < av.size(); ++i) ov[i] = f(av[i]);
  if (out.n_->requires_grad) {
    Node* pa = a.n_.get();
    Node* po = out.n_.get();
    out.n_->backprop = [pa, po, df]() {
      for (size_t i = 0; i < po->value.size(); ++i)
        pa->grad[i] += po->grad[i] * df(pa->value[i], po->value[i]);
    };
  }
  return out;
}

}  // namespace

Tensor Tensor::constant(int rows, int cols, std::vector<double> data) {
  require(static_cast<size_t>(rows) * cols == data.size(), "tensor: data size mismatch");
  auto n = new_node(rows, cols);
  n->value = std::move(data);
  return wrap(n);
}

Tensor Tensor::zeros(int rows, int cols) { return wrap(new_node(rows, cols)); }

Tensor Tensor::variable(int rows, int cols, std::vector<double> data) {
  Tensor t = constant(rows, cols, std::move(data));
  t.n_->requires_grad = true;
  t.n_->grad.assign(t.n_->value.size(), 0.0);
  return t;
}

std::vector<double>& Tensor::grad() {
  require(n_->requires_grad, "tensor: grad on non-grad tensor");
  if (n_->grad.empty()) n_->grad.assign(n_->value.size(), 0.0);
  return n_->grad;
}

const std::vector<double>& Tensor::grad() const {
  return const_cast<Tensor*>(this)->grad();
}

void Tensor::zero_grad() {
  if (n_->requires_grad) std::fill(grad().begin(), grad().end(), 0.0);
}

double Tensor::value() const {
  require(n_->size() == 1, "tensor: value() needs a scalar");
  return n_->value[0];
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), "matmul: inner dims differ");
  int m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out = op_node(m, n, {a, b});
  k_matmul(a.data().data(), b.data().data(), out.data().data(), m, k, n);
  if (out.n_->requires_grad) {
    Node* pa = a.n_.get();
    Node* pb = b.n_.get();
    Node* po = out.n_.get();
    out.n_->backprop = [pa, pb, po, m, k, n]() {
      if (pa->requires_grad)
        k_acc_grad_a(po->grad.data(), pb->value.data(), pa->grad.data(), m, k, n);
      if (pb->requires_grad)
        k_acc_grad_b(pa->value.data(), po->grad.data(), pb->grad.data(), m, k, n);
    };
  }
  return out;
}

namespace {

template <class F>
Tensor binary_same_shape(const Tensor& a, const Tensor& b, F f,
                         void (*back)(Node*, Node*, Node*)) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "binary op: shape mismatch");
  Tensor out = op_node(a.rows(), a.cols(), {a, b});
  const auto& av = a.data();
  const auto& bv = b.data();
  auto& ov = out.data();
  for (size_t i = 0; i < av.size(); ++i) ov[i] = f(av[i], bv[i]);
  if (out.n_->requires_grad) {
    Node* pa = a.n_.get();
    Node* pb = b.n_.get();
    Node* po = out.n_.get();
    out.n_->backprop = [pa, pb, po, back]() { back(pa, pb, po); };
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_same_shape(
      a, b, [](double x, double y) { return x + y; },
      +[](Node* pa, Node* pb, Node* po) {
        if (pa->requires_grad)
          for (size_t i = 0; i < po->grad.size(); ++i) pa->grad[i] += po->grad[i];
        if (pb->requires_grad)
          for (size_t i = 0; i < po->grad.size(); ++i) pb->grad[i] += po->grad[i];
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_same_shape(
      a, b, [](double x, double y) { return x - y; },
      +[](Node* pa, Node* pb, Node* po) {
        if (pa->requires_grad)
          for (size_t i = 0; i < po->grad.size(); ++i) pa->grad[i] += po->grad[i];
        if (pb->requires_grad)
          for (size_t i = 0; i < po->grad.size(); ++i) pb->grad[i] -= po->grad[i];
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_same_shape(
      a, b, [](double x, double y) { return x * y; },
      +[](Node* pa, Node* pb, Node* po) {
        if (pa->requires_grad)
          for (size_t i = 0; i < po->grad.size(); ++i)
            pa->grad[i] += po->grad[i] * pb->value[i];
        if (pb->requires_grad)
          for (size_t i = 0; i < po->grad.size(); ++i)
            pb->grad[i] += po->grad[i] * pa->value[i];
      });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  return binary_same_shape(
      a, b, [](double x, double y) { return x <= y ? x : y; },
      +[](Node* pa, Node* pb, Node* po) {
        for (size_t i = 0; i < po->grad.size(); ++i) {
          if (pa->value[i] <= pb->value[i]) {
            if (pa->requires_grad) pa->grad[i] += po->grad[i];
          } else if (pb->requires_grad) {
            pb->grad[i] += po->grad[i];
          }
        }
      });
}

Tensor neg(const Tensor& a) {
  return unary_op(
      a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor add_rowwise(const Tensor& m, const Tensor& row) {
  require(row.rows() == 1 && row.cols() == m.cols(), "add_rowwise: need [1,n] row");
  int r = m.rows(), c = m.cols();
  Tensor out = op_node(r, c, {m, row});
  const auto& mv = m.data();
  const auto& rv = row.data();
  auto& ov = out.data();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      ov[static_cast<size_t>(i) * c + j] = mv[static_cast<size_t>(i) * c + j] + rv[j];
  if (out.n_->requires_grad) {
    Node* pm = m.n_.get();
    Node* pr = row.n_.get();
    Node* po = out.n_.get();
    out.n_->backprop = [pm, pr, po, r, c]() {
      if (pm->requires_grad)
        for (size_t i = 0; i < po->grad.size(); ++i) pm->grad[i] += po->grad[i];
      if (pr->requires_grad)
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j) pr->grad[j] += po->grad[static_cast<size_t>(i) * c + j];
    };
  }
  return out;
}

Tensor mul_rowwise(const Tensor& m, const Tensor& row) {
  require(row.rows() == 1 && row.cols() == m.cols(), "mul_rowwise: need [1,n] row");
  int r = m.rows(), c = m.cols();
  Tensor out = op_node(r, c, {m, row});
  const auto& mv = m.data();
  const auto& rv = row.data();
  auto& ov = out.data();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      ov[static_cast<size_t>(i) * c + j] = mv[static_cast<size_t>(i) * c + j] * rv[j];
  if (out.n_->requires_grad) {
    Node* pm = m.n_.get();
    Node* pr = row.n_.get();
    Node* po = out.n_.get();
    out.n_->backprop = [pm, pr, po, r, c]() {
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) {
          size_t idx = static_cast<size_t>(i) * c + j;
          if (pm->requires_grad) pm->grad[idx] += po->grad[idx] * pr->value[j];
          if (pr->requires_grad) pr->grad[j] += po->grad[idx] * pm->value[idx];
        }
    };
  }
  return out;
}

Tensor add_scalar(const Tensor& a, double cv) {
  return unary_op(
      a, [cv](double x) { return x + cv; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double cv) {
  return unary_op(
      a, [cv](double x) { return x * cv; }, [cv](double, double) { return cv; });
}

Tensor tanh(const Tensor& a) {
  return unary_op(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      a, [](double x) { return stable_sigmoid(x); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& a) {
  return unary_op(
      a, [](double x) { return stable_softplus(x); },
      [](double x, double) { return stable_sigmoid(x); });
}

Tensor exp(const Tensor& a) {
  return unary_op(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary_op(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor square(const Tensor& a) {
  return unary_op(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor abs(const Tensor& a) {
  return unary_op(
      a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  require(lo <= hi, "clamp: lo > hi");
  return unary_op(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows(), "concat_cols: row mismatch");
  int r = a.rows(), ca = a.cols(), cb = b.cols();
  Tensor out = op_node(r, ca + cb, {a, b});
  auto& ov = out.data();
  for (int i = 0; i < r; ++i) {
    const double* ar = a.data().data() + static_cast<size_t>(i) * ca;
    const double* br = b.data().data() + static_cast<size_t>(i) * cb;
    double* orow = ov.data() + static_cast<size_t>(i) * (ca + cb);
    std::copy(ar, ar + ca, orow);
    std::copy(br, br + cb, orow + ca);
  }
  if (out.n_->requires_grad) {
    Node* pa = a.n_.get();
    Node* pb = b.n_.get();
    Node* po = out.n_.get();
    out.n_->backprop = [pa, pb, po, r, ca, cb]() {
      for (int i = 0; i < r; ++i) {
        const double* grow = po->grad.data() + static_cast<size_t>(i) * (ca + cb);
        if (pa->requires_grad) {
          double* ga = pa->grad.data() + static_cast<size_t>(i) * ca;
          for (int j = 0; j < ca; ++j) ga[j] += grow[j];
        }
        if (pb->requires_grad) {
          double* gb = pb->grad.data() + static_cast<size_t>(i) * cb;
          for (int j = 0; j < cb; ++j) gb[j] += grow[ca + j];
        }
      }
    };
  }
  return out;
}

Tensor sum(const Tensor& a) {
  Tensor out = op_node(1, 1, {a});
  double acc = 0.0;
  for (double x : a.data()) acc += x;
  out.data()[0] = acc;
  if (out.n_->requires_grad) {
    Node* pa = a.n_.get();
    Node* po = out.n_.get();
    out.n_->backprop = [pa, po]() {
      double g = po->grad[0];
      for (auto& x : pa->grad) x += g;
    };
  }
  return out;
}

Tensor mean(const Tensor& a) {
  require(a.size() > 0, "mean: empty tensor");
  Tensor out = op_node(1, 1, {a});
  double acc = 0.0;
  for (double x : a.data()) acc += x;
  double inv = 1.0 / a.size();
  out.data()[0] = acc * inv;
  if (out.n_->requires_grad) {
    Node* pa = a.n_.get();
    Node* po = out.n_.get();
    out.n_->backprop = [pa, po, inv]() {
      double g = po->grad[0] * inv;
      for (auto& x : pa->grad) x += g;
    };
  }
  return out;
}

Tensor row_sum(const Tensor& a) {
  int r = a.rows(), c = a.cols();
  Tensor out = op_node(r, 1, {a});
  for (int i = 0; i < r; ++i) {
    double acc = 0.0;
    const double* row = a.data().data() + static_cast<size_t>(i) * c;
    for (int j = 0; j < c; ++j) acc += row[j];
    out.data()[i] = acc;
  }
  if (out.n_->requires_grad) {
    Node* pa = a.n_.get();
    Node* po = out.n_.get();
    out.n_->backprop = [pa, po, r, c]() {
      for (int i = 0; i < r; ++i) {
        double g = po->grad[i];
        double* grow = pa->grad.data() + static_cast<size_t>(i) * c;
        for (int j = 0; j < c; ++j) grow[j] += g;
      }
    };
  }
  return out;
}

void backward(const Tensor& loss) {
  require(loss.defined() && loss.size() == 1, "backward: loss must be scalar");
  require(loss.n_->requires_grad, "backward: loss does not require grad");

  // iterative post-order DFS for a topological order
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(loss.n_.get(), 0);
  visited.insert(loss.n_.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // interior grads are per-pass scratch; leaf grads accumulate across passes
  for (Node* n : order) {
    if (n->grad.empty())
      n->grad.assign(n->value.size(), 0.0);
    else if (!n->leaf)
      std::fill(n->grad.begin(), n->grad.end(), 0.0);
  }
  loss.n_->grad[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backprop) (*it)->backprop();
  }
}

}  // namespace lipgail::ad
