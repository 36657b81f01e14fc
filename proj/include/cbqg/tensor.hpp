#pragma once

// Dense float64 tensors with a reverse-mode differentiation tape.
//
// Every op that has at least one input with requires_grad (and runs while
// gradients are enabled) appends a record to the calling thread's active
// tape. Tape::backward walks the records once, in reverse, and then clears
// the tape. Leaf tensors (parameters) live outside the tape and accumulate
// their gradients across backward calls until zero_grad().

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cbqg {

using Shape = std::vector<std::size_t>;

std::size_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorImpl {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient reaches this node
  bool requires_grad = false;
  std::uint64_t tape_id = 0;  // 0: leaf, not produced by any tape
  std::size_t tape_index = 0;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t numel() const { return impl_->value.size(); }
  bool requires_grad() const { return impl_->requires_grad; }

  std::span<const double> values() const { return impl_->value; }
  /// Direct write access. Only valid for leaves (parameters, constants).
  std::span<double> mutable_values();
  double item() const;
  double at(std::size_t flat) const { return impl_->value.at(flat); }

  /// Gradient buffer; zero-filled if backward never reached this tensor.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Same values, cut off from the graph.
  Tensor detach() const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<TensorImpl> impl_;
};

/// Ordered log of differentiable operations for one training step.
class Tape {
 public:
  using BackwardFn = std::function<void(const std::vector<double>& out_grad)>;

  struct Record {
    std::string_view kind;
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    std::shared_ptr<TensorImpl> output;
    BackwardFn backward;
  };

  /// The calling thread's tape.
  static Tape& active();

  std::uint64_t id() const { return id_; }
  std::size_t size() const { return records_.size(); }
  const std::vector<Record>& records() const { return records_; }

  void record(std::string_view kind, std::vector<std::shared_ptr<TensorImpl>> inputs,
              const std::shared_ptr<TensorImpl>& output, BackwardFn fn);

  /// Accumulates d(loss)/d(x) into every requires_grad tensor reachable
  /// from loss, then clears the tape.
  void backward(const Tensor& loss);

  /// Drops all records; tensors produced so far become stale.
  void clear();

 private:
  Tape();
  std::uint64_t id_;
  std::vector<Record> records_;
};

bool grad_enabled();

/// Disables recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

inline void backward(const Tensor& loss) { Tape::active().backward(loss); }

// ---- operations ---------------------------------------------------------
//
// Binary elementwise ops accept equal shapes, or a right operand whose shape
// is a suffix of the left operand's shape (broadcast over leading axes).

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& a);

/// a: [..., M, K]; b: [K, N] (shared) or [..., K, N] with a's leading axes.
/// With transpose_b, b holds [N, K] / [..., N, K].
Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_b = false);

Tensor softmax(const Tensor& t, std::size_t axis);
Tensor log_softmax(const Tensor& t, std::size_t axis);

/// Normalizes over the last axis; gain and bias have shape [last].
Tensor layer_norm(const Tensor& t, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

/// Rows of table [V, d] selected by ids; result shape is out_leading + [d].
Tensor embedding(const Tensor& table, std::span<const int> ids, Shape out_leading);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& t, std::size_t axis, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& t, Shape shape);
Tensor permute(const Tensor& t, const std::vector<std::size_t>& order);

Tensor sum(const Tensor& t);
Tensor mean(const Tensor& t);

/// Cosine similarity of two equal-length vectors. Zero norm throws DomainError.
Tensor cosine_similarity(const Tensor& a, const Tensor& b);

/// Mean of -log_probs[i, targets[i]] over rows whose target != ignore_index.
/// log_probs is [..., V], flattened to rows.
Tensor gather_nll(const Tensor& log_probs, std::span<const int> targets, int ignore_index = -1);

/// Forward value is `hard` (a constant); the gradient passes unchanged to `soft`.
Tensor straight_through(const Tensor& hard, const Tensor& soft);

}  // namespace cbqg
