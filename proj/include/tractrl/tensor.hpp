#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tractrl/rng.hpp"

namespace tractrl {

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& s);
int64_t shape_numel(const Shape& s);

// Dense row-major tensor of doubles. Copying a Tensor aliases the same
// storage (handle semantics); gradients live beside the data and are
// allocated on demand for requires_grad tensors.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0, bool requires_grad = false);
  static Tensor uniform(Shape shape, Rng& rng, double lo, double hi, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int rank() const { return int(shape().size()); }
  int64_t numel() const;
  int64_t dim(int i) const;  // negative indices allowed

  double* data();
  const double* data() const;
  std::vector<double>& vec();
  const std::vector<double>& vec() const;

  bool requires_grad() const;
  void set_requires_grad(bool rg);
  double* grad();
  const double* grad() const;
  std::vector<double>& grad_vec();
  void zero_grad();

  double item() const;  // requires numel() == 1
  bool all_finite() const;
  Tensor clone() const;  // deep copy, grad not copied

  // Identity of the underlying storage; used by the optimizer to key state.
  const void* id() const { return impl_.get(); }

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
  explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}
  friend class Graph;
};

// Routes large matrix products through single-precision BLAS. Training paths
// enable this; tests and gradient checks leave it off (full f64).
void set_fast_matmul(bool enabled);
bool fast_matmul_enabled();

// Reverse-mode tape. Record ops through one Graph per forward pass, call
// backward() on a scalar, then read gradients off the leaf tensors. A Graph
// is single-threaded; independent Graphs may run concurrently.
class Graph {
 public:
  explicit Graph(bool recording = true) : recording_(recording) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return recording_; }
  size_t size() const { return tape_.size(); }

  // --- primitives ---------------------------------------------------------
  // matmul: [m,k]x[k,n], [B,m,k]x[k,n], [B,m,k]x[B,k,n]
  Tensor matmul(const Tensor& a, const Tensor& b);
  // Elementwise with leading-batch broadcast: shapes equal, or the smaller
  // operand's shape is a suffix of the larger's.
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor minimum(const Tensor& a, const Tensor& b);
  Tensor scale(const Tensor& a, double s);
  Tensor add_scalar(const Tensor& a, double s);
  Tensor neg(const Tensor& a) { return scale(a, -1.0); }
  Tensor relu(const Tensor& a);
  Tensor tanh(const Tensor& a);
  Tensor sigmoid(const Tensor& a);
  Tensor exp(const Tensor& a);
  Tensor log(const Tensor& a);  // input clamped at 1e-12
  Tensor clamp(const Tensor& a, double lo, double hi);
  Tensor softmax(const Tensor& a);     // last axis; subtracts the row max
  Tensor layer_norm(const Tensor& a);  // last axis; eps 1e-8, no affine
  Tensor sum(const Tensor& a);         // all elements -> scalar
  Tensor mean(const Tensor& a);        // all elements -> scalar
  Tensor sum_last(const Tensor& a);    // reduce last axis
  Tensor transpose(const Tensor& a);   // swap the last two axes
  Tensor reshape(const Tensor& a, Shape shape);  // same numel, new view (copied)
  Tensor concat(const std::vector<Tensor>& parts, int axis);
  Tensor slice(const Tensor& a, int axis, int64_t start, int64_t length);
  Tensor expand0(const Tensor& a, int64_t copies);  // repeat axis 0 (must be 1)
  Tensor detach(const Tensor& a);
  // Reparameterized draw: mean + exp(log_std) * eps, log_std clamped [-20,2].
  Tensor gaussian_sample(const Tensor& mean, const Tensor& log_std, Rng& rng);
  Tensor gaussian_sample_frozen(const Tensor& mean, const Tensor& log_std, const Tensor& eps);

  void backward(const Tensor& scalar_output);

 private:
  bool recording_;
  std::vector<std::function<void()>> tape_;

  Tensor make_output(Shape shape, bool needs_grad);
  void record(std::function<void()> fn) { tape_.push_back(std::move(fn)); }
  Tensor binary_elementwise(const Tensor& a, const Tensor& b, int kind);
};

// Central-difference gradient verification of a scalar-valued function.
// Returns the max over coordinates of |analytic - numeric| /
// max(1e-8, |analytic| + |numeric|). The function must be deterministic.
double grad_check(const std::function<Tensor(Graph&, const Tensor&)>& f, Tensor x,
                  double h = 1e-5);

// Bias-corrected Adam. State is keyed by parameter storage identity and can
// be serialized alongside the parameters.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<Tensor>& params);
  static void zero_grad(const std::vector<Tensor>& params);

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

  // Moment access for checkpointing; slots appear after the first step.
  struct Slot {
    std::vector<double> m, v;
    int64_t t = 0;
  };
  const Slot* slot(const Tensor& param) const;
  void restore_slot(const Tensor& param, Slot s);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::vector<std::pair<const void*, Slot>> slots_;
  Slot& slot_for(const Tensor& param);
};

// Named parameter collection with stable iteration order.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor t);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const;
  const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
  std::vector<Tensor> tensors() const;
  int64_t parameter_count() const;
  void zero_grads() const;

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
};

}  // namespace tractrl
