#include "cbqg/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "cbqg/errors.hpp"

namespace cbqg {

namespace {

thread_local bool g_grad_enabled = true;
std::atomic<std::uint64_t> g_next_tape_id{1};

using ImplPtr = std::shared_ptr<TensorImpl>;

ImplPtr make_impl(Shape shape) {
  auto impl = std::make_shared<TensorImpl>();
  impl->value.assign(numel_of(shape), 0.0);
  impl->shape = std::move(shape);
  return impl;
}

// Gradient buffer of an input, or nullptr when the input is a constant.
double* grad_of(TensorImpl* t) {
  if (!t->requires_grad) return nullptr;
  t->ensure_grad();
  return t->grad.data();
}

Tensor finish(std::string_view kind, std::vector<ImplPtr> inputs, ImplPtr out,
              Tape::BackwardFn fn) {
  if (!grad_enabled()) return Tensor(std::move(out));
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const ImplPtr& p) { return p->requires_grad; });
  if (any) {
    out->requires_grad = true;
    Tape::active().record(kind, std::move(inputs), out, std::move(fn));
  }
  return Tensor(std::move(out));
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw ArgumentError(msg);
}

bool is_suffix(const Shape& full, const Shape& tail) {
  if (tail.size() > full.size()) return false;
  return std::equal(tail.begin(), tail.end(), full.end() - static_cast<std::ptrdiff_t>(tail.size()));
}

std::size_t broadcast_outer(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return 1;
  require(is_suffix(a.shape(), b.shape()), std::string(op) + ": incompatible shapes " +
                                               shape_str(a.shape()) + " and " + shape_str(b.shape()));
  return a.numel() / b.numel();
}

// C[M,N] += A[M,K] * B[K,N]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[M,N] += A[M,K] * B[N,K]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * n + j] += acc;
    }
  }
}

// C[M,N] += A[K,M]^T * B[K,N]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

struct AxisSplit {
  std::size_t outer, n, inner;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

std::size_t numel_of(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ']';
  return os.str();
}

// ---- Tensor ---------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
  for (auto d : shape) require(d > 0, "Tensor: dimension sizes must be positive");
  auto impl = make_impl(std::move(shape));
  std::fill(impl->value.begin(), impl->value.end(), v);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  for (auto d : shape) require(d > 0, "Tensor: dimension sizes must be positive");
  require(values.size() == numel_of(shape), "Tensor::from: " + std::to_string(values.size()) +
                                                " values for shape " + shape_str(shape));
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->value = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double v, bool requires_grad) { return from({}, {v}, requires_grad); }

std::span<double> Tensor::mutable_values() {
  if (impl_->tape_id != 0) throw StateError("mutable_values: tensor is an op output, not a leaf");
  return impl_->value;
}

double Tensor::item() const {
  if (numel() != 1) throw ArgumentError("item: tensor has " + std::to_string(numel()) + " elements");
  return impl_->value[0];
}

std::span<const double> Tensor::grad() const {
  impl_->ensure_grad();
  return impl_->grad;
}

std::span<double> Tensor::mutable_grad() {
  impl_->ensure_grad();
  return impl_->grad;
}

void Tensor::zero_grad() { impl_->grad.assign(impl_->value.size(), 0.0); }

Tensor Tensor::detach() const { return from(shape(), impl_->value, false); }

// ---- Tape -----------------------------------------------------------------

Tape::Tape() : id_(g_next_tape_id.fetch_add(1)) {}

Tape& Tape::active() {
  thread_local Tape tape;
  return tape;
}

void Tape::record(std::string_view kind, std::vector<ImplPtr> inputs, const ImplPtr& output,
                  BackwardFn fn) {
  for (const auto& in : inputs) {
    if (in->requires_grad && in->tape_id != 0 && in->tape_id != id_)
      throw StateError(std::string(kind) + ": input was produced by a cleared tape");
  }
  output->tape_id = id_;
  output->tape_index = records_.size();
  records_.push_back(Record{kind, std::move(inputs), output, std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
  const auto& impl = loss.impl();
  if (!impl || impl->tape_id != id_ || impl->tape_index >= records_.size() ||
      records_[impl->tape_index].output != impl)
    throw StateError("backward: loss was not produced by the active tape");
  if (impl->value.size() != 1) throw ArgumentError("backward: loss must be a scalar");
  impl->ensure_grad();
  impl->grad[0] = 1.0;
  for (std::size_t i = impl->tape_index + 1; i-- > 0;) {
    Record& rec = records_[i];
    if (rec.output->grad.empty()) continue;
    rec.backward(rec.output->grad);
  }
  clear();
}

void Tape::clear() {
  records_.clear();
  id_ = g_next_tape_id.fetch_add(1);
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

// ---- elementwise ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  const std::size_t outer = broadcast_outer(a, b, "add");
  const std::size_t nb = b.numel();
  auto out = make_impl(a.shape());
  const double* av = a.values().data();
  const double* bv = b.values().data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t j = 0; j < nb; ++j) out->value[o * nb + j] = av[o * nb + j] + bv[j];
  TensorImpl* ai = a.impl().get();
  TensorImpl* bi = b.impl().get();
  return finish("add", {a.impl(), b.impl()}, out, [ai, bi, outer, nb](const std::vector<double>& g) {
    if (double* ga = grad_of(ai))
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    if (double* gb = grad_of(bi))
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t j = 0; j < nb; ++j) gb[j] += g[o * nb + j];
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const std::size_t outer = broadcast_outer(a, b, "sub");
  const std::size_t nb = b.numel();
  auto out = make_impl(a.shape());
  const double* av = a.values().data();
  const double* bv = b.values().data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t j = 0; j < nb; ++j) out->value[o * nb + j] = av[o * nb + j] - bv[j];
  TensorImpl* ai = a.impl().get();
  TensorImpl* bi = b.impl().get();
  return finish("sub", {a.impl(), b.impl()}, out, [ai, bi, outer, nb](const std::vector<double>& g) {
    if (double* ga = grad_of(ai))
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    if (double* gb = grad_of(bi))
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t j = 0; j < nb; ++j) gb[j] -= g[o * nb + j];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const std::size_t outer = broadcast_outer(a, b, "mul");
  const std::size_t nb = b.numel();
  auto out = make_impl(a.shape());
  const double* av = a.values().data();
  const double* bv = b.values().data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t j = 0; j < nb; ++j) out->value[o * nb + j] = av[o * nb + j] * bv[j];
  TensorImpl* ai = a.impl().get();
  TensorImpl* bi = b.impl().get();
  return finish("mul", {a.impl(), b.impl()}, out, [ai, bi, outer, nb](const std::vector<double>& g) {
    if (double* ga = grad_of(ai))
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t j = 0; j < nb; ++j) ga[o * nb + j] += g[o * nb + j] * bi->value[j];
    if (double* gb = grad_of(bi))
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t j = 0; j < nb; ++j) gb[j] += g[o * nb + j] * ai->value[o * nb + j];
  });
}

Tensor scale(const Tensor& a, double s) {
  auto out = make_impl(a.shape());
  const auto av = a.values();
  for (std::size_t i = 0; i < av.size(); ++i) out->value[i] = av[i] * s;
  TensorImpl* ai = a.impl().get();
  return finish("scale", {a.impl()}, out, [ai, s](const std::vector<double>& g) {
    if (double* ga = grad_of(ai))
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
  });
}

Tensor relu(const Tensor& a) {
  auto out = make_impl(a.shape());
  const auto av = a.values();
  for (std::size_t i = 0; i < av.size(); ++i) out->value[i] = av[i] > 0.0 ? av[i] : 0.0;
  TensorImpl* ai = a.impl().get();
  return finish("relu", {a.impl()}, out, [ai](const std::vector<double>& g) {
    if (double* ga = grad_of(ai))
      for (std::size_t i = 0; i < g.size(); ++i)
        if (ai->value[i] > 0.0) ga[i] += g[i];
  });
}

// ---- matmul -------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_b) {
  require(a.rank() >= 2 && b.rank() >= 2, "matmul: operands need rank >= 2");
  const std::size_t m = a.dim(a.rank() - 2);
  const std::size_t k = a.dim(a.rank() - 1);
  const std::size_t b_rows = b.dim(b.rank() - 2);
  const std::size_t b_cols = b.dim(b.rank() - 1);
  const std::size_t n = transpose_b ? b_rows : b_cols;
  require((transpose_b ? b_cols : b_rows) == k,
          "matmul: inner dimensions differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const bool shared = b.rank() == 2;
  if (!shared) {
    require(b.rank() == a.rank() &&
                std::equal(a.shape().begin(), a.shape().end() - 2, b.shape().begin()),
            "matmul: batch dimensions differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const std::size_t batch = a.numel() / (m * k);
  Shape out_shape(a.shape().begin(), a.shape().end() - 2);
  out_shape.push_back(m);
  out_shape.push_back(n);
  auto out = make_impl(out_shape);
  const double* av = a.values().data();
  const double* bv = b.values().data();
  const std::size_t b_stride = shared ? 0 : k * n;
  for (std::size_t s = 0; s < batch; ++s) {
    if (transpose_b)
      gemm_nt(m, n, k, av + s * m * k, bv + s * b_stride, out->value.data() + s * m * n);
    else
      gemm_nn(m, n, k, av + s * m * k, bv + s * b_stride, out->value.data() + s * m * n);
  }
  TensorImpl* ai = a.impl().get();
  TensorImpl* bi = b.impl().get();
  return finish("matmul", {a.impl(), b.impl()}, out,
                [=](const std::vector<double>& g) {
                  double* ga = grad_of(ai);
                  double* gb = grad_of(bi);
                  for (std::size_t s = 0; s < batch; ++s) {
                    const double* gs = g.data() + s * m * n;
                    const double* as = ai->value.data() + s * m * k;
                    const double* bs = bi->value.data() + s * b_stride;
                    if (ga) {
                      if (transpose_b)
                        gemm_nn(m, k, n, gs, bs, ga + s * m * k);
                      else
                        gemm_nt(m, k, n, gs, bs, ga + s * m * k);
                    }
                    if (gb) {
                      if (transpose_b)
                        gemm_tn(n, k, m, gs, as, gb + s * b_stride);
                      else
                        gemm_tn(k, n, m, as, gs, gb + s * b_stride);
                    }
                  }
                });
}

// ---- softmax family ------------------------------------------------------------

Tensor softmax(const Tensor& t, std::size_t axis) {
  require(axis < t.rank(), "softmax: axis " + std::to_string(axis) + " out of range for " +
                               shape_str(t.shape()));
  const auto [outer, n, inner] = split_at(t.shape(), axis);
  auto out = make_impl(t.shape());
  const double* x = t.values().data();
  double* y = out->value.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < inner; ++j) {
      const std::size_t base = o * n * inner + j;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, x[base + i * inner]);
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double e = std::exp(x[base + i * inner] - mx);
        y[base + i * inner] = e;
        total += e;
      }
      for (std::size_t i = 0; i < n; ++i) y[base + i * inner] /= total;
    }
  }
  TensorImpl* ti = t.impl().get();
  TensorImpl* oi = out.get();
  return finish("softmax", {t.impl()}, out, [=](const std::vector<double>& g) {
    double* gx = grad_of(ti);
    if (!gx) return;
    const double* yv = oi->value.data();
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t j = 0; j < inner; ++j) {
        const std::size_t base = o * n * inner + j;
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += g[base + i * inner] * yv[base + i * inner];
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t idx = base + i * inner;
          gx[idx] += yv[idx] * (g[idx] - dot);
        }
      }
    }
  });
}

Tensor log_softmax(const Tensor& t, std::size_t axis) {
  require(axis < t.rank(), "log_softmax: axis " + std::to_string(axis) + " out of range for " +
                               shape_str(t.shape()));
  const auto [outer, n, inner] = split_at(t.shape(), axis);
  auto out = make_impl(t.shape());
  const double* x = t.values().data();
  double* y = out->value.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < inner; ++j) {
      const std::size_t base = o * n * inner + j;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, x[base + i * inner]);
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) total += std::exp(x[base + i * inner] - mx);
      const double lse = mx + std::log(total);
      for (std::size_t i = 0; i < n; ++i) y[base + i * inner] = x[base + i * inner] - lse;
    }
  }
  TensorImpl* ti = t.impl().get();
  TensorImpl* oi = out.get();
  return finish("log_softmax", {t.impl()}, out, [=](const std::vector<double>& g) {
    double* gx = grad_of(ti);
    if (!gx) return;
    const double* yv = oi->value.data();
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t j = 0; j < inner; ++j) {
        const std::size_t base = o * n * inner + j;
        double gsum = 0.0;
        for (std::size_t i = 0; i < n; ++i) gsum += g[base + i * inner];
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t idx = base + i * inner;
          gx[idx] += g[idx] - std::exp(yv[idx]) * gsum;
        }
      }
    }
  });
}

// ---- layer norm ------------------------------------------------------------------

Tensor layer_norm(const Tensor& t, const Tensor& gain, const Tensor& bias, double eps) {
  require(t.rank() >= 1, "layer_norm: input must have rank >= 1");
  require(eps > 0.0, "layer_norm: eps must be positive");
  const std::size_t d = t.dim(t.rank() - 1);
  require(gain.numel() == d && bias.numel() == d,
          "layer_norm: gain/bias must have " + std::to_string(d) + " elements");
  const std::size_t rows = t.numel() / d;
  auto out = make_impl(t.shape());
  auto xhat = std::make_shared<std::vector<double>>(t.numel());
  auto rstd = std::make_shared<std::vector<double>>(rows);
  const double* x = t.values().data();
  const double* gv = gain.values().data();
  const double* bv = bias.values().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * d;
    double mu = 0.0;
    for (std::size_t i = 0; i < d; ++i) mu += xr[i];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) var += (xr[i] - mu) * (xr[i] - mu);
    var /= static_cast<double>(d);
    const double rs = 1.0 / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    for (std::size_t i = 0; i < d; ++i) {
      const double xh = (xr[i] - mu) * rs;
      (*xhat)[r * d + i] = xh;
      out->value[r * d + i] = xh * gv[i] + bv[i];
    }
  }
  TensorImpl* ti = t.impl().get();
  TensorImpl* gi = gain.impl().get();
  TensorImpl* bi = bias.impl().get();
  return finish("layer_norm", {t.impl(), gain.impl(), bias.impl()}, out,
                [=](const std::vector<double>& g) {
                  double* gx = grad_of(ti);
                  double* gg = grad_of(gi);
                  double* gb = grad_of(bi);
                  std::vector<double> dxhat(d);
                  for (std::size_t r = 0; r < rows; ++r) {
                    const double* gr = g.data() + r * d;
                    const double* xh = xhat->data() + r * d;
                    double mean_dx = 0.0, mean_dxx = 0.0;
                    for (std::size_t i = 0; i < d; ++i) {
                      if (gg) gg[i] += gr[i] * xh[i];
                      if (gb) gb[i] += gr[i];
                      dxhat[i] = gr[i] * gi->value[i];
                      mean_dx += dxhat[i];
                      mean_dxx += dxhat[i] * xh[i];
                    }
                    if (!gx) continue;
                    mean_dx /= static_cast<double>(d);
                    mean_dxx /= static_cast<double>(d);
                    for (std::size_t i = 0; i < d; ++i)
                      gx[r * d + i] += (*rstd)[r] * (dxhat[i] - mean_dx - xh[i] * mean_dxx);
                  }
                });
}

// ---- indexing / shape -------------------------------------------------------------

Tensor embedding(const Tensor& table, std::span<const int> ids, Shape out_leading) {
  require(table.rank() == 2, "embedding: table must be [V, d]");
  require(numel_of(out_leading) == ids.size(), "embedding: id count does not match output shape");
  const std::size_t vocab = table.dim(0);
  const std::size_t d = table.dim(1);
  for (int id : ids)
    require(id >= 0 && static_cast<std::size_t>(id) < vocab,
            "embedding: id " + std::to_string(id) + " outside [0, " + std::to_string(vocab) + ")");
  Shape out_shape = std::move(out_leading);
  out_shape.push_back(d);
  auto out = make_impl(out_shape);
  const double* tv = table.values().data();
  for (std::size_t r = 0; r < ids.size(); ++r)
    std::copy_n(tv + static_cast<std::size_t>(ids[r]) * d, d, out->value.data() + r * d);
  TensorImpl* ti = table.impl().get();
  std::vector<int> saved(ids.begin(), ids.end());
  return finish("embedding", {table.impl()}, out, [ti, saved = std::move(saved), d](const std::vector<double>& g) {
    double* gt = grad_of(ti);
    if (!gt) return;
    for (std::size_t r = 0; r < saved.size(); ++r) {
      double* row = gt + static_cast<std::size_t>(saved[r]) * d;
      for (std::size_t j = 0; j < d; ++j) row[j] += g[r * d + j];
    }
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  require(!parts.empty(), "concat: no inputs");
  const Shape& ref = parts.front().shape();
  require(axis < ref.size(), "concat: axis out of range");
  Shape out_shape = ref;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    require(p.rank() == ref.size(), "concat: rank mismatch");
    for (std::size_t i = 0; i < ref.size(); ++i)
      require(i == axis || p.dim(i) == ref[i], "concat: shape mismatch " + shape_str(p.shape()) +
                                                   " vs " + shape_str(ref));
    out_shape[axis] += p.dim(axis);
  }
  const auto [outer, total, inner] = split_at(out_shape, axis);
  auto out = make_impl(out_shape);
  std::vector<std::size_t> offsets;
  std::vector<ImplPtr> inputs;
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t len = p.dim(axis) * inner;
    const double* src = p.values().data();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(src + o * len, len, out->value.data() + o * total * inner + off);
    offsets.push_back(off);
    off += len;
    inputs.push_back(p.impl());
  }
  std::vector<TensorImpl*> raw;
  for (const auto& p : inputs) raw.push_back(p.get());
  return finish("concat", inputs, out, [raw, offsets, outer, total, inner](const std::vector<double>& g) {
    for (std::size_t k = 0; k < raw.size(); ++k) {
      double* gp = grad_of(raw[k]);
      if (!gp) continue;
      const std::size_t len = raw[k]->value.size() / outer;
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < len; ++i) gp[o * len + i] += g[o * total * inner + offsets[k] + i];
    }
  });
}

Tensor slice(const Tensor& t, std::size_t axis, std::size_t begin, std::size_t end) {
  require(axis < t.rank(), "slice: axis out of range");
  require(begin < end && end <= t.dim(axis), "slice: bad range [" + std::to_string(begin) + ", " +
                                                 std::to_string(end) + ") for " + shape_str(t.shape()));
  const auto [outer, n, inner] = split_at(t.shape(), axis);
  Shape out_shape = t.shape();
  out_shape[axis] = end - begin;
  auto out = make_impl(out_shape);
  const std::size_t len = (end - begin) * inner;
  const double* src = t.values().data();
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(src + o * n * inner + begin * inner, len, out->value.data() + o * len);
  TensorImpl* ti = t.impl().get();
  return finish("slice", {t.impl()}, out, [=](const std::vector<double>& g) {
    double* gt = grad_of(ti);
    if (!gt) return;
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < len; ++i) gt[o * n * inner + begin * inner + i] += g[o * len + i];
  });
}

Tensor reshape(const Tensor& t, Shape shape) {
  require(numel_of(shape) == t.numel(), "reshape: " + shape_str(t.shape()) + " -> " + shape_str(shape));
  auto out = make_impl(std::move(shape));
  out->value = t.impl()->value;
  TensorImpl* ti = t.impl().get();
  return finish("reshape", {t.impl()}, out, [ti](const std::vector<double>& g) {
    if (double* gt = grad_of(ti))
      for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i];
  });
}

Tensor permute(const Tensor& t, const std::vector<std::size_t>& order) {
  const std::size_t r = t.rank();
  require(order.size() == r, "permute: order length must equal rank");
  std::vector<bool> seen(r, false);
  for (auto a : order) {
    require(a < r && !seen[a], "permute: order is not a permutation");
    seen[a] = true;
  }
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = t.dim(order[i]);
  std::vector<std::size_t> in_strides(r, 1);
  for (std::size_t i = r; i-- > 1;) in_strides[i - 1] = in_strides[i] * t.dim(i);
  // map[out_flat] = in_flat
  auto map = std::make_shared<std::vector<std::size_t>>(t.numel());
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t flat = 0; flat < t.numel(); ++flat) {
    std::size_t src = 0;
    for (std::size_t i = 0; i < r; ++i) src += idx[i] * in_strides[order[i]];
    (*map)[flat] = src;
    for (std::size_t i = r; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  auto out = make_impl(out_shape);
  const double* src = t.values().data();
  for (std::size_t i = 0; i < map->size(); ++i) out->value[i] = src[(*map)[i]];
  TensorImpl* ti = t.impl().get();
  return finish("permute", {t.impl()}, out, [ti, map](const std::vector<double>& g) {
    if (double* gt = grad_of(ti))
      for (std::size_t i = 0; i < g.size(); ++i) gt[(*map)[i]] += g[i];
  });
}

// ---- reductions ---------------------------------------------------------------------

Tensor sum(const Tensor& t) {
  auto out = make_impl({});
  double total = 0.0;
  for (double v : t.values()) total += v;
  out->value[0] = total;
  TensorImpl* ti = t.impl().get();
  return finish("sum", {t.impl()}, out, [ti](const std::vector<double>& g) {
    if (double* gt = grad_of(ti))
      for (std::size_t i = 0; i < ti->value.size(); ++i) gt[i] += g[0];
  });
}

Tensor mean(const Tensor& t) {
  auto out = make_impl({});
  double total = 0.0;
  for (double v : t.values()) total += v;
  const double n = static_cast<double>(t.numel());
  out->value[0] = total / n;
  TensorImpl* ti = t.impl().get();
  return finish("mean", {t.impl()}, out, [ti, n](const std::vector<double>& g) {
    if (double* gt = grad_of(ti))
      for (std::size_t i = 0; i < ti->value.size(); ++i) gt[i] += g[0] / n;
  });
}

Tensor cosine_similarity(const Tensor& a, const Tensor& b) {
  require(a.numel() == b.numel() && a.numel() >= 1, "cosine_similarity: vectors must have equal, nonzero length");
  const auto av = a.values();
  const auto bv = b.values();
  double dot = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    dot += av[i] * bv[i];
    aa += av[i] * av[i];
    bb += bv[i] * bv[i];
  }
  if (aa == 0.0 || bb == 0.0) throw DomainError("cosine_similarity: zero-norm vector");
  const double na = std::sqrt(aa);
  const double nb = std::sqrt(bb);
  const double s = dot / (na * nb);
  auto out = make_impl({});
  out->value[0] = s;
  TensorImpl* ai = a.impl().get();
  TensorImpl* bi = b.impl().get();
  return finish("cosine_similarity", {a.impl(), b.impl()}, out,
                [=](const std::vector<double>& g) {
                  const double inv = 1.0 / (na * nb);
                  if (double* ga = grad_of(ai))
                    for (std::size_t i = 0; i < ai->value.size(); ++i)
                      ga[i] += g[0] * (bi->value[i] * inv - s * ai->value[i] / aa);
                  if (double* gb = grad_of(bi))
                    for (std::size_t i = 0; i < bi->value.size(); ++i)
                      gb[i] += g[0] * (ai->value[i] * inv - s * bi->value[i] / bb);
                });
}

Tensor gather_nll(const Tensor& log_probs, std::span<const int> targets, int ignore_index) {
  require(log_probs.rank() >= 1, "gather_nll: log_probs must have rank >= 1");
  const std::size_t v = log_probs.dim(log_probs.rank() - 1);
  const std::size_t rows = log_probs.numel() / v;
  require(targets.size() == rows, "gather_nll: " + std::to_string(targets.size()) + " targets for " +
                                      std::to_string(rows) + " rows");
  const double* lp = log_probs.values().data();
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] == ignore_index) continue;
    require(targets[r] >= 0 && static_cast<std::size_t>(targets[r]) < v, "gather_nll: target out of range");
    total -= lp[r * v + static_cast<std::size_t>(targets[r])];
    ++count;
  }
  if (count == 0) throw ArgumentError("gather_nll: no non-ignored targets");
  const double n = static_cast<double>(count);
  auto out = make_impl({});
  out->value[0] = total / n;
  TensorImpl* li = log_probs.impl().get();
  std::vector<int> saved(targets.begin(), targets.end());
  return finish("gather_nll", {log_probs.impl()}, out,
                [li, saved = std::move(saved), v, n, ignore_index](const std::vector<double>& g) {
                  double* gl = grad_of(li);
                  if (!gl) return;
                  for (std::size_t r = 0; r < saved.size(); ++r)
                    if (saved[r] != ignore_index) gl[r * v + static_cast<std::size_t>(saved[r])] -= g[0] / n;
                });
}

Tensor straight_through(const Tensor& hard, const Tensor& soft) {
  require(hard.shape() == soft.shape(), "straight_through: shape mismatch");
  auto out = make_impl(hard.shape());
  out->value = hard.impl()->value;
  TensorImpl* si = soft.impl().get();
  return finish("straight_through", {soft.impl()}, out, [si](const std::vector<double>& g) {
    if (double* gs = grad_of(si))
      for (std::size_t i = 0; i < g.size(); ++i) gs[i] += g[i];
  });
}

}  // namespace cbqg
