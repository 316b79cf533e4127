#pragma once

// Dense row-major matrices of doubles with tape-based reverse-mode
// differentiation. Every tensor is two-dimensional; vectors are 1 x n or
// n x 1 and scalars are 1 x 1.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace topickg {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

class Tape;

namespace detail {
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient reaches this node
  bool requires_grad = false;
  const Tape* producer = nullptr;  // tape holding the op that produced this node

  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
  }
};
}  // namespace detail

/// Handle to a shared node. Copies alias the same storage.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rows() const { return shape().rows; }
  std::size_t cols() const { return shape().cols; }
  std::size_t size() const { return shape().size(); }

  std::span<const double> values() const;
  /// Writable view. Only meant for leaves (parameters, inputs).
  std::span<double> mutable_values();
  double at(std::size_t r, std::size_t c) const;
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  /// Accumulated gradient, or zeros of the right shape if none reached it.
  std::vector<double> grad() const;
  bool has_grad() const;
  void zero_grad();

  /// Copy of the values that does not participate in differentiation.
  Tensor detach() const;
  Tensor clone() const { return detach(); }

  const detail::Node* node() const { return node_.get(); }
  std::shared_ptr<detail::Node> shared_node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;

  friend class Tape;
  friend Tensor make_result(Shape, std::vector<double>);
};

/// Ordered record of differentiable operations.
///
/// Ops executed while a Tape::Scope is active on the current thread are
/// appended here whenever one of their operands requires a gradient. Records
/// are appended in execution order, which is a topological order of the
/// computation, so the backward pass is a single reverse sweep.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Makes `tape` the active tape of the calling thread for its lifetime.
  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

  static Tape* active();

  void record(Tensor output, BackwardFn backward);

  /// Reverse sweep from a scalar `loss`. Leaves that require gradients have
  /// their gradients accumulated; call zero_grad() on them between steps.
  void backward(const Tensor& loss);

  void clear();
  std::size_t size() const { return records_.size(); }
  /// Number of records whose backward closure ran in the last sweep.
  std::size_t visited() const { return visited_; }

 private:
  struct Record {
    std::shared_ptr<detail::Node> output;
    BackwardFn backward;
  };
  std::vector<Record> records_;
  std::size_t visited_ = 0;
};

// ---------------------------------------------------------------------------
// Operations. Binary elementwise ops broadcast along any dimension of size 1.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor neg(const Tensor& a);

Tensor exp(const Tensor& a);
/// Natural log; throws DomainError on non-positive entries.
Tensor log(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
/// log(sigmoid(a)) evaluated without overflow.
Tensor log_sigmoid(const Tensor& a);
/// log Gamma(a); throws DomainError on non-positive entries.
Tensor log_gamma(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sqrt(const Tensor& a);
/// Entries outside [lo, hi] are pinned and receive zero gradient.
Tensor clamp(const Tensor& a, double lo, double hi);

Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_rows(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);

/// Every row sums to one.
Tensor softmax_rows(const Tensor& a);
/// Every column sums to one.
Tensor softmax_cols(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor row_sums(const Tensor& a);  // rows x 1
Tensor col_sums(const Tensor& a);  // 1 x cols

/// Scales every row to unit L2 norm. All-zero rows stay zero.
Tensor normalize_rows(const Tensor& a);
/// Pairwise cosine similarity between rows (rows x rows). A zero row scores
/// 0 against every row, itself included.
Tensor cosine_similarity_rows(const Tensor& a);

}  // namespace topickg
