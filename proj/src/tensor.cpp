#include "topickg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/special_functions/digamma.hpp>

#include "topickg/error.hpp"

namespace topickg {

using NodePtr = std::shared_ptr<detail::Node>;

std::string Shape::str() const {
  std::ostringstream os;
  os << "[" << rows << "x" << cols << "]";
  return os.str();
}

// ---------------------------------------------------------------------------
// Tensor

Tensor make_result(Shape shape, std::vector<double> values) {
  auto node = std::make_shared<detail::Node>();
  node->shape = shape;
  node->value = std::move(values);
  return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (values.size() != shape.size()) {
    throw ShapeError("Tensor::from: shape " + shape.str() + " needs " + std::to_string(shape.size()) +
                     " values, got " + std::to_string(values.size()));
  }
  Tensor t = make_result(shape, std::move(values));
  t.node_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(shape, 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  return from(shape, std::vector<double>(shape.size(), value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1, 1}, {value}, requires_grad); }

namespace {
const detail::Node& checked(const std::shared_ptr<detail::Node>& n) {
  if (!n) throw UsageError("use of an undefined tensor");
  return *n;
}
}  // namespace

const Shape& Tensor::shape() const { return checked(node_).shape; }
std::span<const double> Tensor::values() const { return checked(node_).value; }
std::span<double> Tensor::mutable_values() {
  checked(node_);
  return node_->value;
}
double Tensor::at(std::size_t r, std::size_t c) const {
  const auto& n = checked(node_);
  if (r >= n.shape.rows || c >= n.shape.cols) throw ShapeError("Tensor::at out of range on " + n.shape.str());
  return n.value[r * n.shape.cols + c];
}
double Tensor::item() const {
  const auto& n = checked(node_);
  if (n.shape.size() != 1) throw ShapeError("Tensor::item on non-scalar " + n.shape.str());
  return n.value[0];
}
bool Tensor::requires_grad() const { return checked(node_).requires_grad; }
void Tensor::set_requires_grad(bool flag) {
  checked(node_);
  node_->requires_grad = flag;
}
std::vector<double> Tensor::grad() const {
  const auto& n = checked(node_);
  if (n.grad.empty()) return std::vector<double>(n.value.size(), 0.0);
  return n.grad;
}
bool Tensor::has_grad() const { return !checked(node_).grad.empty(); }
void Tensor::zero_grad() {
  checked(node_);
  node_->grad.clear();
}
Tensor Tensor::detach() const {
  const auto& n = checked(node_);
  return make_result(n.shape, n.value);
}

// ---------------------------------------------------------------------------
// Tape

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape::Scope::Scope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
Tape::Scope::~Scope() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(Tensor output, BackwardFn backward) {
  output.node_->requires_grad = true;
  output.node_->producer = this;
  records_.push_back({output.node_, std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.node_->producer != this) {
    throw UsageError("backward: loss was not produced by an op on this tape");
  }
  if (loss.size() != 1) throw ShapeError("backward: loss must be scalar, got " + loss.shape().str());
  loss.node_->ensure_grad();
  loss.node_->grad[0] += 1.0;
  visited_ = 0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (it->output->grad.empty()) continue;
    it->backward();
    ++visited_;
  }
}

void Tape::clear() {
  records_.clear();
  visited_ = 0;
}

// ---------------------------------------------------------------------------
// Op helpers

namespace {

bool any_requires_grad(std::initializer_list<const Tensor*> inputs) {
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
}

/// Records `out` on the active tape when an input needs gradients. Without an
/// active tape the op runs in inference mode and nothing is recorded.
template <class Fn>
Tensor finish(Tensor out, std::initializer_list<const Tensor*> inputs, Fn&& backward) {
  Tape* tape = Tape::active();
  if (tape != nullptr && any_requires_grad(inputs)) tape->record(out, std::forward<Fn>(backward));
  return out;
}

void accumulate(const NodePtr& target, std::size_t i, double g) {
  target->ensure_grad();
  target->grad[i] += g;
}

std::size_t broadcast_dim(std::size_t a, std::size_t b, const char* op, const Shape& sa, const Shape& sb) {
  if (a == b) return a;
  if (a == 1) return b;
  if (b == 1) return a;
  throw ShapeError(std::string(op) + ": cannot broadcast " + sa.str() + " with " + sb.str());
}

/// Elementwise binary op. `fwd(x, y)`; `dx(x, y, z)` and `dy(x, y, z)` give
/// the partial derivatives at output z.
template <class F, class DX, class DY>
Tensor binary(const char* name, const Tensor& a, const Tensor& b, F fwd, DX dx, DY dy) {
  const Shape sa = a.shape(), sb = b.shape();
  const Shape so{broadcast_dim(sa.rows, sb.rows, name, sa, sb), broadcast_dim(sa.cols, sb.cols, name, sa, sb)};
  auto ia = [sa](std::size_t r, std::size_t c) { return (sa.rows == 1 ? 0 : r) * sa.cols + (sa.cols == 1 ? 0 : c); };
  auto ib = [sb](std::size_t r, std::size_t c) { return (sb.rows == 1 ? 0 : r) * sb.cols + (sb.cols == 1 ? 0 : c); };
  std::vector<double> out(so.size());
  const auto av = a.values(), bv = b.values();
  for (std::size_t r = 0; r < so.rows; ++r)
    for (std::size_t c = 0; c < so.cols; ++c) out[r * so.cols + c] = fwd(av[ia(r, c)], bv[ib(r, c)]);
  Tensor res = make_result(so, std::move(out));
  NodePtr na = a.shared_node(), nb = b.shared_node(), no = res.shared_node();
  return finish(res, {&a, &b}, [=] {
    for (std::size_t r = 0; r < so.rows; ++r) {
      for (std::size_t c = 0; c < so.cols; ++c) {
        const std::size_t o = r * so.cols + c;
        const double g = no->grad[o];
        if (g == 0.0) continue;
        const double x = na->value[ia(r, c)], y = nb->value[ib(r, c)], z = no->value[o];
        if (na->requires_grad) accumulate(na, ia(r, c), g * dx(x, y, z));
        if (nb->requires_grad) accumulate(nb, ib(r, c), g * dy(x, y, z));
      }
    }
  });
}

/// Elementwise unary op with derivative `d(x, y)`.
template <class F, class D>
Tensor unary(const Tensor& a, F fwd, D d) {
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  Tensor res = make_result(a.shape(), std::move(out));
  NodePtr na = a.shared_node(), no = res.shared_node();
  return finish(res, {&a}, [=] {
    na->ensure_grad();
    for (std::size_t i = 0; i < no->value.size(); ++i) {
      const double g = no->grad[i];
      if (g != 0.0) na->grad[i] += g * d(na->value[i], no->value[i]);
    }
  });
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// C[m,n] += A[m,k] B[k,n]
void gemm_nn(const double* A, const double* B, double* C, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = C + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double a = A[i * k + p];
      if (a == 0.0) continue;
      const double* brow = B + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += a * brow[j];
    }
  }
}

// dA[m,k] += G[m,n] B[k,n]^T
void gemm_nt(const double* G, const double* B, double* dA, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = G + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = B + p * n;
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
      dA[i * k + p] += s;
    }
  }
}

// dB[k,n] += A[m,k]^T G[m,n]
void gemm_tn(const double* A, const double* G, double* dB, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = G + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double a = A[i * k + p];
      if (a == 0.0) continue;
      double* drow = dB + p * n;
      for (std::size_t j = 0; j < n; ++j) drow[j] += a * grow[j];
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  const Shape sa = a.shape(), sb = b.shape();
  if (sa.cols != sb.rows) throw ShapeError("matmul: " + sa.str() + " x " + sb.str());
  const std::size_t m = sa.rows, k = sa.cols, n = sb.cols;
  std::vector<double> out(m * n, 0.0);
  gemm_nn(a.values().data(), b.values().data(), out.data(), m, k, n);
  Tensor res = make_result({m, n}, std::move(out));
  NodePtr na = a.shared_node(), nb = b.shared_node(), no = res.shared_node();
  return finish(res, {&a, &b}, [=] {
    if (na->requires_grad) {
      na->ensure_grad();
      gemm_nt(no->grad.data(), nb->value.data(), na->grad.data(), m, k, n);
    }
    if (nb->requires_grad) {
      nb->ensure_grad();
      gemm_tn(na->value.data(), no->grad.data(), nb->grad.data(), m, k, n);
    }
  });
}

Tensor transpose(const Tensor& a) {
  const Shape s = a.shape();
  const auto av = a.values();
  std::vector<double> out(s.size());
  for (std::size_t r = 0; r < s.rows; ++r)
    for (std::size_t c = 0; c < s.cols; ++c) out[c * s.rows + r] = av[r * s.cols + c];
  Tensor res = make_result({s.cols, s.rows}, std::move(out));
  NodePtr na = a.shared_node(), no = res.shared_node();
  return finish(res, {&a}, [=] {
    na->ensure_grad();
    for (std::size_t r = 0; r < s.rows; ++r)
      for (std::size_t c = 0; c < s.cols; ++c) na->grad[r * s.cols + c] += no->grad[c * s.rows + r];
  });
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      "div", a, b, [](double x, double y) { return x / y; }, [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double z) { return -z / y; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary(a, [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor exp(const Tensor& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  for (double x : a.values())
    if (x <= 0.0) throw DomainError("log: non-positive argument " + std::to_string(x));
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor softplus(const Tensor& a) {
  return unary(a, stable_softplus, [](double x, double) { return stable_sigmoid(x); });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor log_sigmoid(const Tensor& a) {
  return unary(
      a, [](double x) { return -stable_softplus(-x); }, [](double x, double) { return stable_sigmoid(-x); });
}

Tensor log_gamma(const Tensor& a) {
  for (double x : a.values())
    if (x <= 0.0) throw DomainError("lgamma: non-positive argument " + std::to_string(x));
  return unary(
      a, [](double x) { return std::lgamma(x); }, [](double x, double) { return boost::math::digamma(x); });
}

Tensor square(const Tensor& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor sqrt(const Tensor& a) {
  for (double x : a.values())
    if (x < 0.0) throw DomainError("sqrt: negative argument " + std::to_string(x));
  return unary(
      a, [](double x) { return std::sqrt(x); }, [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (lo > hi) throw UsageError("clamp: lo > hi");
  return unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// Structural

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  const Shape sa = a.shape(), sb = b.shape();
  if (sa.rows != sb.rows) throw ShapeError("concat_cols: " + sa.str() + " with " + sb.str());
  const std::size_t rows = sa.rows, ca = sa.cols, cb = sb.cols, cols = ca + cb;
  std::vector<double> out(rows * cols);
  const auto av = a.values(), bv = b.values();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(av.begin() + r * ca, ca, out.begin() + r * cols);
    std::copy_n(bv.begin() + r * cb, cb, out.begin() + r * cols + ca);
  }
  Tensor res = make_result({rows, cols}, std::move(out));
  NodePtr na = a.shared_node(), nb = b.shared_node(), no = res.shared_node();
  return finish(res, {&a, &b}, [=] {
    for (std::size_t r = 0; r < rows; ++r) {
      if (na->requires_grad) {
        na->ensure_grad();
        for (std::size_t c = 0; c < ca; ++c) na->grad[r * ca + c] += no->grad[r * cols + c];
      }
      if (nb->requires_grad) {
        nb->ensure_grad();
        for (std::size_t c = 0; c < cb; ++c) nb->grad[r * cb + c] += no->grad[r * cols + ca + c];
      }
    }
  });
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  const Shape sa = a.shape(), sb = b.shape();
  if (sa.cols != sb.cols) throw ShapeError("concat_rows: " + sa.str() + " with " + sb.str());
  std::vector<double> out(a.values().begin(), a.values().end());
  out.insert(out.end(), b.values().begin(), b.values().end());
  Tensor res = make_result({sa.rows + sb.rows, sa.cols}, std::move(out));
  NodePtr na = a.shared_node(), nb = b.shared_node(), no = res.shared_node();
  const std::size_t split = sa.size();
  return finish(res, {&a, &b}, [=] {
    if (na->requires_grad) {
      na->ensure_grad();
      for (std::size_t i = 0; i < split; ++i) na->grad[i] += no->grad[i];
    }
    if (nb->requires_grad) {
      nb->ensure_grad();
      for (std::size_t i = 0; i < nb->value.size(); ++i) nb->grad[i] += no->grad[split + i];
    }
  });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  const Shape s = a.shape();
  if (begin > end || end > s.cols)
    throw ShapeError("slice_cols: [" + std::to_string(begin) + "," + std::to_string(end) + ") of " + s.str());
  const std::size_t w = end - begin;
  std::vector<double> out(s.rows * w);
  const auto av = a.values();
  for (std::size_t r = 0; r < s.rows; ++r) std::copy_n(av.begin() + r * s.cols + begin, w, out.begin() + r * w);
  Tensor res = make_result({s.rows, w}, std::move(out));
  NodePtr na = a.shared_node(), no = res.shared_node();
  return finish(res, {&a}, [=] {
    na->ensure_grad();
    for (std::size_t r = 0; r < s.rows; ++r)
      for (std::size_t c = 0; c < w; ++c) na->grad[r * s.cols + begin + c] += no->grad[r * w + c];
  });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  const Shape s = a.shape();
  if (begin > end || end > s.rows)
    throw ShapeError("slice_rows: [" + std::to_string(begin) + "," + std::to_string(end) + ") of " + s.str());
  const auto av = a.values();
  std::vector<double> out(av.begin() + begin * s.cols, av.begin() + end * s.cols);
  Tensor res = make_result({end - begin, s.cols}, std::move(out));
  NodePtr na = a.shared_node(), no = res.shared_node();
  return finish(res, {&a}, [=] {
    na->ensure_grad();
    for (std::size_t i = 0; i < no->value.size(); ++i) na->grad[begin * s.cols + i] += no->grad[i];
  });
}

// ---------------------------------------------------------------------------
// Softmax

namespace {

// Softmax over groups of `len` entries spaced `stride` apart.
Tensor softmax_impl(const Tensor& a, bool over_rows) {
  const Shape s = a.shape();
  const std::size_t groups = over_rows ? s.rows : s.cols;
  const std::size_t len = over_rows ? s.cols : s.rows;
  const std::size_t stride = over_rows ? 1 : s.cols;
  auto base = [=](std::size_t g) { return over_rows ? g * s.cols : g; };
  const auto av = a.values();
  std::vector<double> out(s.size());
  for (std::size_t g = 0; g < groups; ++g) {
    double mx = -INFINITY;
    for (std::size_t i = 0; i < len; ++i) mx = std::max(mx, av[base(g) + i * stride]);
    double total = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t idx = base(g) + i * stride;
      out[idx] = std::exp(av[idx] - mx);
      total += out[idx];
    }
    for (std::size_t i = 0; i < len; ++i) out[base(g) + i * stride] /= total;
  }
  Tensor res = make_result(s, std::move(out));
  NodePtr na = a.shared_node(), no = res.shared_node();
  return finish(res, {&a}, [=] {
    na->ensure_grad();
    for (std::size_t g = 0; g < groups; ++g) {
      double dot = 0.0;
      for (std::size_t i = 0; i < len; ++i) {
        const std::size_t idx = base(g) + i * stride;
        dot += no->grad[idx] * no->value[idx];
      }
      for (std::size_t i = 0; i < len; ++i) {
        const std::size_t idx = base(g) + i * stride;
        na->grad[idx] += no->value[idx] * (no->grad[idx] - dot);
      }
    }
  });
}

}  // namespace

Tensor softmax_rows(const Tensor& a) { return softmax_impl(a, true); }
Tensor softmax_cols(const Tensor& a) { return softmax_impl(a, false); }

// ---------------------------------------------------------------------------
// Reductions

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double x : a.values()) total += x;
  Tensor res = make_result({1, 1}, {total});
  NodePtr na = a.shared_node(), no = res.shared_node();
  return finish(res, {&a}, [=] {
    na->ensure_grad();
    const double g = no->grad[0];
    for (double& v : na->grad) v += g;
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor row_sums(const Tensor& a) {
  const Shape s = a.shape();
  const auto av = a.values();
  std::vector<double> out(s.rows, 0.0);
  for (std::size_t r = 0; r < s.rows; ++r)
    for (std::size_t c = 0; c < s.cols; ++c) out[r] += av[r * s.cols + c];
  Tensor res = make_result({s.rows, 1}, std::move(out));
  NodePtr na = a.shared_node(), no = res.shared_node();
  return finish(res, {&a}, [=] {
    na->ensure_grad();
    for (std::size_t r = 0; r < s.rows; ++r)
      for (std::size_t c = 0; c < s.cols; ++c) na->grad[r * s.cols + c] += no->grad[r];
  });
}

Tensor col_sums(const Tensor& a) {
  const Shape s = a.shape();
  const auto av = a.values();
  std::vector<double> out(s.cols, 0.0);
  for (std::size_t r = 0; r < s.rows; ++r)
    for (std::size_t c = 0; c < s.cols; ++c) out[c] += av[r * s.cols + c];
  Tensor res = make_result({1, s.cols}, std::move(out));
  NodePtr na = a.shared_node(), no = res.shared_node();
  return finish(res, {&a}, [=] {
    na->ensure_grad();
    for (std::size_t r = 0; r < s.rows; ++r)
      for (std::size_t c = 0; c < s.cols; ++c) na->grad[r * s.cols + c] += no->grad[c];
  });
}

// ---------------------------------------------------------------------------
// Cosine similarity

Tensor normalize_rows(const Tensor& a) {
  const Shape s = a.shape();
  const auto av = a.values();
  std::vector<double> norms(s.rows, 0.0), out(s.size(), 0.0);
  for (std::size_t r = 0; r < s.rows; ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < s.cols; ++c) sq += av[r * s.cols + c] * av[r * s.cols + c];
    norms[r] = std::sqrt(sq);
    if (norms[r] > 0.0)
      for (std::size_t c = 0; c < s.cols; ++c) out[r * s.cols + c] = av[r * s.cols + c] / norms[r];
  }
  Tensor res = make_result(s, std::move(out));
  NodePtr na = a.shared_node(), no = res.shared_node();
  return finish(res, {&a}, [=] {
    na->ensure_grad();
    for (std::size_t r = 0; r < s.rows; ++r) {
      if (norms[r] == 0.0) continue;
      double dot = 0.0;
      for (std::size_t c = 0; c < s.cols; ++c) dot += no->grad[r * s.cols + c] * no->value[r * s.cols + c];
      for (std::size_t c = 0; c < s.cols; ++c) {
        const std::size_t i = r * s.cols + c;
        na->grad[i] += (no->grad[i] - no->value[i] * dot) / norms[r];
      }
    }
  });
}

Tensor cosine_similarity_rows(const Tensor& a) {
  Tensor n = normalize_rows(a);
  return matmul(n, transpose(n));
}

}  // namespace topickg
