#include "tractrl/tensor.hpp"

#include <cblas.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>

#include "tractrl/error.hpp"

namespace tractrl {

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

struct Tensor::Impl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty unless requires_grad
  bool requires_grad = false;
};

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto impl = std::make_shared<Impl>();
  const int64_t n = shape_numel(shape);
  impl->shape = std::move(shape);
  impl->data.assign(size_t(n), 0.0);
  impl->requires_grad = requires_grad;
  if (requires_grad) impl->grad.assign(size_t(n), 0.0);
  return Tensor(std::move(impl));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.vec().begin(), t.vec().end(), value);
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != int64_t(values.size()))
    throw ShapeError("from: shape " + shape_str(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  auto impl = std::make_shared<Impl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  if (requires_grad) impl->grad.assign(impl->data.size(), 0.0);
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({}, {value}, requires_grad);
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  for (double& v : t.vec()) v = rng.normal() * stddev;
  return t;
}

Tensor Tensor::uniform(Shape shape, Rng& rng, double lo, double hi, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  for (double& v : t.vec()) v = rng.uniform(lo, hi);
  return t;
}

const Shape& Tensor::shape() const { return impl_->shape; }
int64_t Tensor::numel() const { return int64_t(impl_->data.size()); }

int64_t Tensor::dim(int i) const {
  const int r = rank();
  if (i < 0) i += r;
  if (i < 0 || i >= r)
    throw ShapeError("dim " + std::to_string(i) + " out of range for " + shape_str(shape()));
  return impl_->shape[size_t(i)];
}

double* Tensor::data() { return impl_->data.data(); }
const double* Tensor::data() const { return impl_->data.data(); }
std::vector<double>& Tensor::vec() { return impl_->data; }
const std::vector<double>& Tensor::vec() const { return impl_->data; }

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool rg) {
  impl_->requires_grad = rg;
  if (rg && impl_->grad.size() != impl_->data.size())
    impl_->grad.assign(impl_->data.size(), 0.0);
  if (!rg) impl_->grad.clear();
}

double* Tensor::grad() { return impl_->grad.data(); }
const double* Tensor::grad() const { return impl_->grad.data(); }
std::vector<double>& Tensor::grad_vec() { return impl_->grad; }

void Tensor::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

double Tensor::item() const {
  if (numel() != 1)
    throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

bool Tensor::all_finite() const {
  for (double v : impl_->data)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor Tensor::clone() const {
  return from(impl_->shape, impl_->data, impl_->requires_grad);
}

// ---------------------------------------------------------------------------
// BLAS wrapper

namespace {
std::atomic<bool> g_fast_matmul{false};

// Row-major C[m,n] = alpha * op(A) * op(B) + beta * C.
void gemm_rm(bool ta, bool tb, int m, int n, int k, double alpha, const double* A,
             const double* B, double beta, double* C) {
  const int lda = ta ? m : k;
  const int ldb = tb ? k : n;
  const bool big = g_fast_matmul.load(std::memory_order_relaxed) &&
                   double(m) * double(n) * double(k) >= (1 << 18);
  if (big) {
    thread_local std::vector<float> fa, fb, fc;
    const size_t na = size_t(m) * k, nb = size_t(k) * n, nc = size_t(m) * n;
    fa.resize(na);
    fb.resize(nb);
    fc.resize(nc);
    for (size_t i = 0; i < na; ++i) fa[i] = float(A[i]);
    for (size_t i = 0; i < nb; ++i) fb[i] = float(B[i]);
    if (beta != 0.0)
      for (size_t i = 0; i < nc; ++i) fc[i] = float(C[i]);
    cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
                m, n, k, float(alpha), fa.data(), lda, fb.data(), ldb, float(beta), fc.data(),
                n);
    for (size_t i = 0; i < nc; ++i) C[i] = double(fc[i]);
  } else {
    cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
                m, n, k, alpha, A, lda, B, ldb, beta, C, n);
  }
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

}  // namespace

void set_fast_matmul(bool enabled) { g_fast_matmul.store(enabled); }
bool fast_matmul_enabled() { return g_fast_matmul.load(); }

// ---------------------------------------------------------------------------
// Graph

Tensor Graph::make_output(Shape shape, bool needs_grad) {
  return Tensor::zeros(std::move(shape), needs_grad && recording_);
}

Tensor Graph::matmul(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  const bool ok2x2 = sa.size() == 2 && sb.size() == 2 && sa[1] == sb[0];
  const bool ok3x2 = sa.size() == 3 && sb.size() == 2 && sa[2] == sb[0];
  const bool ok3x3 =
      sa.size() == 3 && sb.size() == 3 && sa[0] == sb[0] && sa[2] == sb[1];
  if (!ok2x2 && !ok3x2 && !ok3x3)
    throw ShapeError("matmul: incompatible shapes " + shape_str(sa) + " x " + shape_str(sb));

  const int64_t batch = sa.size() == 3 ? sa[0] : 1;
  const int m = int(sa[sa.size() - 2]);
  const int k = int(sa[sa.size() - 1]);
  const int n = int(sb[sb.size() - 1]);

  Shape out_shape = sa.size() == 3 ? Shape{batch, m, n} : Shape{m, n};
  Tensor out = make_output(std::move(out_shape), a.requires_grad() || b.requires_grad());

  const int64_t a_stride = int64_t(m) * k;
  const int64_t b_stride = ok3x3 ? int64_t(k) * n : 0;
  const int64_t c_stride = int64_t(m) * n;
  for (int64_t i = 0; i < batch; ++i)
    gemm_rm(false, false, m, n, k, 1.0, a.data() + i * a_stride, b.data() + i * b_stride, 0.0,
            out.data() + i * c_stride);

  if (out.requires_grad()) {
    Tensor ac = a, bc = b, oc = out;
    record([ac, bc, oc, batch, m, n, k, a_stride, b_stride, c_stride]() mutable {
      if (ac.requires_grad()) {
        // dA = dC * B^T, per batch slice.
        for (int64_t i = 0; i < batch; ++i)
          gemm_rm(false, true, m, k, n, 1.0, oc.grad() + i * c_stride,
                  bc.data() + i * b_stride, 1.0, ac.grad() + i * a_stride);
      }
      if (bc.requires_grad()) {
        // dB = A^T * dC; shared b accumulates over the batch.
        for (int64_t i = 0; i < batch; ++i)
          gemm_rm(true, false, k, n, m, 1.0, ac.data() + i * a_stride,
                  oc.grad() + i * c_stride, 1.0, bc.grad() + i * b_stride);
      }
    });
  }
  return out;
}

// kind: 0 add, 1 sub, 2 mul, 3 min
Tensor Graph::binary_elementwise(const Tensor& a, const Tensor& b, int kind) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  const Tensor* big = &a;
  const Tensor* small = &b;
  bool b_is_small = true;
  if (sa == sb) {
    // equal shapes, either orientation works
  } else if (is_suffix(sb, sa)) {
    // defaults
  } else if (is_suffix(sa, sb)) {
    big = &b;
    small = &a;
    b_is_small = false;
  } else {
    throw ShapeError("elementwise: shapes " + shape_str(sa) + " and " + shape_str(sb) +
                     " are not equal and neither is a trailing suffix of the other");
  }

  const int64_t n = big->numel();
  const int64_t ns = small->numel();
  Tensor out = make_output(big->shape(), a.requires_grad() || b.requires_grad());
  const double* pb = big->data();
  const double* ps = small->data();
  double* po = out.data();
  switch (kind) {
    case 0:
      for (int64_t i = 0; i < n; ++i) po[i] = pb[i] + ps[i % ns];
      break;
    case 1:
      if (b_is_small)
        for (int64_t i = 0; i < n; ++i) po[i] = pb[i] - ps[i % ns];
      else
        for (int64_t i = 0; i < n; ++i) po[i] = ps[i % ns] - pb[i];
      break;
    case 2:
      for (int64_t i = 0; i < n; ++i) po[i] = pb[i] * ps[i % ns];
      break;
    case 3:
      for (int64_t i = 0; i < n; ++i) po[i] = std::min(pb[i], ps[i % ns]);
      break;
  }

  if (out.requires_grad()) {
    Tensor bigc = *big, smallc = *small, oc = out;
    const Tensor ac = a;  // original orientation for sub sign / min tie-break
    record([bigc, smallc, oc, ac, kind, n, ns, b_is_small]() mutable {
      const double* g = oc.grad();
      const double* pb = bigc.data();
      const double* ps = smallc.data();
      double* gb = bigc.requires_grad() ? bigc.grad() : nullptr;
      double* gs = smallc.requires_grad() ? smallc.grad() : nullptr;
      for (int64_t i = 0; i < n; ++i) {
        const int64_t j = i % ns;
        double db = 0.0, ds = 0.0;
        switch (kind) {
          case 0:
            db = g[i];
            ds = g[i];
            break;
          case 1:
            if (b_is_small) {
              db = g[i];
              ds = -g[i];
            } else {
              db = -g[i];
              ds = g[i];
            }
            break;
          case 2:
            db = g[i] * ps[j];
            ds = g[i] * pb[i];
            break;
          case 3: {
            // Ties route to the first operand.
            const double va = b_is_small ? pb[i] : ps[j];
            const double vb = b_is_small ? ps[j] : pb[i];
            const bool a_wins = va <= vb;
            const bool big_wins = b_is_small ? a_wins : !a_wins;
            db = big_wins ? g[i] : 0.0;
            ds = big_wins ? 0.0 : g[i];
            break;
          }
        }
        if (gb) gb[i] += db;
        if (gs) gs[j] += ds;
      }
    });
  }
  return out;
}

Tensor Graph::add(const Tensor& a, const Tensor& b) { return binary_elementwise(a, b, 0); }
Tensor Graph::sub(const Tensor& a, const Tensor& b) { return binary_elementwise(a, b, 1); }
Tensor Graph::mul(const Tensor& a, const Tensor& b) { return binary_elementwise(a, b, 2); }
Tensor Graph::minimum(const Tensor& a, const Tensor& b) { return binary_elementwise(a, b, 3); }

Tensor Graph::scale(const Tensor& a, double s) {
  Tensor out = make_output(a.shape(), a.requires_grad());
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * s;
  if (out.requires_grad()) {
    Tensor ac = a, oc = out;
    record([ac, oc, s, n]() mutable {
      for (int64_t i = 0; i < n; ++i) ac.grad()[i] += oc.grad()[i] * s;
    });
  }
  return out;
}

Tensor Graph::add_scalar(const Tensor& a, double s) {
  Tensor out = make_output(a.shape(), a.requires_grad());
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + s;
  if (out.requires_grad()) {
    Tensor ac = a, oc = out;
    record([ac, oc, n]() mutable {
      for (int64_t i = 0; i < n; ++i) ac.grad()[i] += oc.grad()[i];
    });
  }
  return out;
}

Tensor Graph::relu(const Tensor& a) {
  Tensor out = make_output(a.shape(), a.requires_grad());
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
  if (out.requires_grad()) {
    Tensor ac = a, oc = out;
    record([ac, oc, n]() mutable {
      for (int64_t i = 0; i < n; ++i)
        if (ac.data()[i] > 0.0) ac.grad()[i] += oc.grad()[i];
    });
  }
  return out;
}

Tensor Graph::tanh(const Tensor& a) {
  Tensor out = make_output(a.shape(), a.requires_grad());
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = std::tanh(a.data()[i]);
  if (out.requires_grad()) {
    Tensor ac = a, oc = out;
    record([ac, oc, n]() mutable {
      for (int64_t i = 0; i < n; ++i)
        ac.grad()[i] += oc.grad()[i] * (1.0 - oc.data()[i] * oc.data()[i]);
    });
  }
  return out;
}

Tensor Graph::sigmoid(const Tensor& a) {
  Tensor out = make_output(a.shape(), a.requires_grad());
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = 1.0 / (1.0 + std::exp(-a.data()[i]));
  if (out.requires_grad()) {
    Tensor ac = a, oc = out;
    record([ac, oc, n]() mutable {
      for (int64_t i = 0; i < n; ++i)
        ac.grad()[i] += oc.grad()[i] * oc.data()[i] * (1.0 - oc.data()[i]);
    });
  }
  return out;
}

Tensor Graph::exp(const Tensor& a) {
  Tensor out = make_output(a.shape(), a.requires_grad());
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = std::exp(a.data()[i]);
  if (out.requires_grad()) {
    Tensor ac = a, oc = out;
    record([ac, oc, n]() mutable {
      for (int64_t i = 0; i < n; ++i) ac.grad()[i] += oc.grad()[i] * oc.data()[i];
    });
  }
  return out;
}

Tensor Graph::log(const Tensor& a) {
  Tensor out = make_output(a.shape(), a.requires_grad());
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = std::log(std::max(a.data()[i], 1e-12));
  if (out.requires_grad()) {
    Tensor ac = a, oc = out;
    record([ac, oc, n]() mutable {
      for (int64_t i = 0; i < n; ++i)
        ac.grad()[i] += oc.grad()[i] / std::max(ac.data()[i], 1e-12);
    });
  }
  return out;
}

Tensor Graph::clamp(const Tensor& a, double lo, double hi) {
  Tensor out = make_output(a.shape(), a.requires_grad());
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = std::clamp(a.data()[i], lo, hi);
  if (out.requires_grad()) {
    Tensor ac = a, oc = out;
    record([ac, oc, lo, hi, n]() mutable {
      for (int64_t i = 0; i < n; ++i)
        if (ac.data()[i] >= lo && ac.data()[i] <= hi) ac.grad()[i] += oc.grad()[i];
    });
  }
  return out;
}

Tensor Graph::softmax(const Tensor& a) {
  if (a.rank() < 1) throw ShapeError("softmax: rank-0 tensor");
  const int64_t cols = a.dim(-1);
  const int64_t rows = a.numel() / cols;
  Tensor out = make_output(a.shape(), a.requires_grad());
  for (int64_t r = 0; r < rows; ++r) {
    const double* x = a.data() + r * cols;
    double* y = out.data() + r * cols;
    double mx = x[0];
    for (int64_t c = 1; c < cols; ++c) mx = std::max(mx, x[c]);
    double sum = 0.0;
    for (int64_t c = 0; c < cols; ++c) {
      y[c] = std::exp(x[c] - mx);
      sum += y[c];
    }
    for (int64_t c = 0; c < cols; ++c) y[c] /= sum;
  }
  if (out.requires_grad()) {
    Tensor ac = a, oc = out;
    record([ac, oc, rows, cols]() mutable {
      for (int64_t r = 0; r < rows; ++r) {
        const double* y = oc.data() + r * cols;
        const double* g = oc.grad() + r * cols;
        double* gx = ac.grad() + r * cols;
        double dot = 0.0;
        for (int64_t c = 0; c < cols; ++c) dot += g[c] * y[c];
        for (int64_t c = 0; c < cols; ++c) gx[c] += y[c] * (g[c] - dot);
      }
    });
  }
  return out;
}

Tensor Graph::layer_norm(const Tensor& a) {
  if (a.rank() < 1) throw ShapeError("layer_norm: rank-0 tensor");
  constexpr double kEps = 1e-8;
  const int64_t cols = a.dim(-1);
  const int64_t rows = a.numel() / cols;
  Tensor out = make_output(a.shape(), a.requires_grad());
  std::vector<double> inv_std(static_cast<size_t>(rows));
  for (int64_t r = 0; r < rows; ++r) {
    const double* x = a.data() + r * cols;
    double* y = out.data() + r * cols;
    double mu = 0.0;
    for (int64_t c = 0; c < cols; ++c) mu += x[c];
    mu /= double(cols);
    double var = 0.0;
    for (int64_t c = 0; c < cols; ++c) var += (x[c] - mu) * (x[c] - mu);
    var /= double(cols);
    const double inv = 1.0 / std::sqrt(var + kEps);
    inv_std[size_t(r)] = inv;
    for (int64_t c = 0; c < cols; ++c) y[c] = (x[c] - mu) * inv;
  }
  if (out.requires_grad()) {
    Tensor ac = a, oc = out;
    record([ac, oc, rows, cols, inv_std = std::move(inv_std)]() mutable {
      for (int64_t r = 0; r < rows; ++r) {
        const double* y = oc.data() + r * cols;
        const double* g = oc.grad() + r * cols;
        double* gx = ac.grad() + r * cols;
        double gsum = 0.0, gysum = 0.0;
        for (int64_t c = 0; c < cols; ++c) {
          gsum += g[c];
          gysum += g[c] * y[c];
        }
        const double inv = inv_std[size_t(r)];
        const double n = double(cols);
        for (int64_t c = 0; c < cols; ++c)
          gx[c] += inv * (g[c] - gsum / n - y[c] * gysum / n);
      }
    });
  }
  return out;
}

Tensor Graph::sum(const Tensor& a) {
  Tensor out = make_output({}, a.requires_grad());
  double s = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) s += a.data()[i];
  out.data()[0] = s;
  if (out.requires_grad()) {
    Tensor ac = a, oc = out;
    record([ac, oc]() mutable {
      const double g = oc.grad()[0];
      for (int64_t i = 0; i < ac.numel(); ++i) ac.grad()[i] += g;
    });
  }
  return out;
}

Tensor Graph::mean(const Tensor& a) {
  Tensor out = make_output({}, a.requires_grad());
  double s = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) s += a.data()[i];
  out.data()[0] = s / double(a.numel());
  if (out.requires_grad()) {
    Tensor ac = a, oc = out;
    record([ac, oc]() mutable {
      const double g = oc.grad()[0] / double(ac.numel());
      for (int64_t i = 0; i < ac.numel(); ++i) ac.grad()[i] += g;
    });
  }
  return out;
}

Tensor Graph::sum_last(const Tensor& a) {
  if (a.rank() < 1) throw ShapeError("sum_last: rank-0 tensor");
  const int64_t cols = a.dim(-1);
  const int64_t rows = a.numel() / cols;
  Shape out_shape(a.shape().begin(), a.shape().end() - 1);
  Tensor out = make_output(std::move(out_shape), a.requires_grad());
  for (int64_t r = 0; r < rows; ++r) {
    double s = 0.0;
    const double* x = a.data() + r * cols;
    for (int64_t c = 0; c < cols; ++c) s += x[c];
    out.data()[r] = s;
  }
  if (out.requires_grad()) {
    Tensor ac = a, oc = out;
    record([ac, oc, rows, cols]() mutable {
      for (int64_t r = 0; r < rows; ++r) {
        const double g = oc.grad()[r];
        double* gx = ac.grad() + r * cols;
        for (int64_t c = 0; c < cols; ++c) gx[c] += g;
      }
    });
  }
  return out;
}

Tensor Graph::transpose(const Tensor& a) {
  if (a.rank() < 2) throw ShapeError("transpose: needs rank >= 2, got " + shape_str(a.shape()));
  Shape out_shape = a.shape();
  std::swap(out_shape[out_shape.size() - 1], out_shape[out_shape.size() - 2]);
  const int64_t m = a.dim(-2);
  const int64_t n = a.dim(-1);
  const int64_t batch = a.numel() / (m * n);
  Tensor out = make_output(std::move(out_shape), a.requires_grad());
  for (int64_t b = 0; b < batch; ++b) {
    const double* src = a.data() + b * m * n;
    double* dst = out.data() + b * m * n;
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) dst[j * m + i] = src[i * n + j];
  }
  if (out.requires_grad()) {
    Tensor ac = a, oc = out;
    record([ac, oc, batch, m, n]() mutable {
      for (int64_t b = 0; b < batch; ++b) {
        const double* g = oc.grad() + b * m * n;
        double* gx = ac.grad() + b * m * n;
        for (int64_t i = 0; i < m; ++i)
          for (int64_t j = 0; j < n; ++j) gx[i * n + j] += g[j * m + i];
      }
    });
  }
  return out;
}

Tensor Graph::reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    throw ShapeError("reshape: " + shape_str(a.shape()) + " to " + shape_str(shape) +
                     " changes element count");
  Tensor out = make_output(std::move(shape), a.requires_grad());
  std::memcpy(out.data(), a.data(), size_t(a.numel()) * sizeof(double));
  if (out.requires_grad()) {
    Tensor ac = a, oc = out;
    record([ac, oc]() mutable {
      for (int64_t i = 0; i < ac.numel(); ++i) ac.grad()[i] += oc.grad()[i];
    });
  }
  return out;
}

namespace {
// Decomposes shape into [outer, axis, inner] around `axis`.
void axis_split(const Shape& s, int axis, int64_t& outer, int64_t& alen, int64_t& inner) {
  outer = 1;
  inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[size_t(i)];
  alen = s[size_t(axis)];
  for (size_t i = size_t(axis) + 1; i < s.size(); ++i) inner *= s[i];
}
}  // namespace

Tensor Graph::concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const int r = parts[0].rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) throw ShapeError("concat: bad axis");
  Shape out_shape = parts[0].shape();
  int64_t total = 0;
  bool needs_grad = false;
  for (const Tensor& p : parts) {
    Shape s = p.shape();
    if (int(s.size()) != r)
      throw ShapeError("concat: rank mismatch " + shape_str(out_shape) + " vs " + shape_str(s));
    for (int i = 0; i < r; ++i)
      if (i != axis && s[size_t(i)] != out_shape[size_t(i)])
        throw ShapeError("concat: shape mismatch " + shape_str(out_shape) + " vs " +
                         shape_str(s));
    total += s[size_t(axis)];
    needs_grad = needs_grad || p.requires_grad();
  }
  out_shape[size_t(axis)] = total;
  Tensor out = make_output(out_shape, needs_grad);

  int64_t outer, alen_total, inner;
  axis_split(out_shape, axis, outer, alen_total, inner);
  int64_t offset = 0;
  for (const Tensor& p : parts) {
    const int64_t alen = p.shape()[size_t(axis)];
    for (int64_t o = 0; o < outer; ++o)
      std::memcpy(out.data() + (o * alen_total + offset) * inner,
                  p.data() + o * alen * inner, size_t(alen * inner) * sizeof(double));
    offset += alen;
  }
  if (out.requires_grad()) {
    std::vector<Tensor> pc = parts;
    Tensor oc = out;
    record([pc, oc, outer, alen_total, inner, axis]() mutable {
      int64_t offset = 0;
      for (Tensor& p : pc) {
        const int64_t alen = p.shape()[size_t(axis)];
        if (p.requires_grad()) {
          for (int64_t o = 0; o < outer; ++o) {
            const double* g = oc.grad() + (o * alen_total + offset) * inner;
            double* gp = p.grad() + o * alen * inner;
            for (int64_t i = 0; i < alen * inner; ++i) gp[i] += g[i];
          }
        }
        offset += alen;
      }
    });
  }
  return out;
}

Tensor Graph::slice(const Tensor& a, int axis, int64_t start, int64_t length) {
  const int r = a.rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) throw ShapeError("slice: bad axis");
  const int64_t alen = a.shape()[size_t(axis)];
  if (start < 0 || length <= 0 || start + length > alen)
    throw ShapeError("slice: range [" + std::to_string(start) + "," +
                     std::to_string(start + length) + ") out of " + std::to_string(alen));
  Shape out_shape = a.shape();
  out_shape[size_t(axis)] = length;
  Tensor out = make_output(out_shape, a.requires_grad());

  int64_t outer, alen_in, inner;
  axis_split(a.shape(), axis, outer, alen_in, inner);
  for (int64_t o = 0; o < outer; ++o)
    std::memcpy(out.data() + o * length * inner, a.data() + (o * alen_in + start) * inner,
                size_t(length * inner) * sizeof(double));
  if (out.requires_grad()) {
    Tensor ac = a, oc = out;
    record([ac, oc, outer, alen_in, inner, start, length]() mutable {
      for (int64_t o = 0; o < outer; ++o) {
        const double* g = oc.grad() + o * length * inner;
        double* gx = ac.grad() + (o * alen_in + start) * inner;
        for (int64_t i = 0; i < length * inner; ++i) gx[i] += g[i];
      }
    });
  }
  return out;
}

Tensor Graph::expand0(const Tensor& a, int64_t copies) {
  if (a.rank() < 1 || a.dim(0) != 1)
    throw ShapeError("expand0: axis 0 must be 1, got " + shape_str(a.shape()));
  Shape out_shape = a.shape();
  out_shape[0] = copies;
  const int64_t n = a.numel();
  Tensor out = make_output(out_shape, a.requires_grad());
  for (int64_t c = 0; c < copies; ++c)
    std::memcpy(out.data() + c * n, a.data(), size_t(n) * sizeof(double));
  if (out.requires_grad()) {
    Tensor ac = a, oc = out;
    record([ac, oc, copies, n]() mutable {
      for (int64_t c = 0; c < copies; ++c) {
        const double* g = oc.grad() + c * n;
        for (int64_t i = 0; i < n; ++i) ac.grad()[i] += g[i];
      }
    });
  }
  return out;
}

Tensor Graph::detach(const Tensor& a) {
  return Tensor::from(a.shape(), a.vec(), false);
}

Tensor Graph::gaussian_sample(const Tensor& mean, const Tensor& log_std, Rng& rng) {
  Tensor eps = Tensor::zeros(mean.shape());
  for (double& v : eps.vec()) v = rng.normal();
  return gaussian_sample_frozen(mean, log_std, eps);
}

Tensor Graph::gaussian_sample_frozen(const Tensor& mean, const Tensor& log_std,
                                     const Tensor& eps) {
  if (mean.shape() != log_std.shape() || mean.shape() != eps.shape())
    throw ShapeError("gaussian_sample: shapes " + shape_str(mean.shape()) + " vs " +
                     shape_str(log_std.shape()) + " vs " + shape_str(eps.shape()));
  constexpr double kLo = -20.0, kHi = 2.0;
  const int64_t n = mean.numel();
  Tensor out = make_output(mean.shape(), mean.requires_grad() || log_std.requires_grad());
  for (int64_t i = 0; i < n; ++i) {
    const double ls = std::clamp(log_std.data()[i], kLo, kHi);
    out.data()[i] = mean.data()[i] + std::exp(ls) * eps.data()[i];
  }
  if (out.requires_grad()) {
    Tensor mc = mean, lc = log_std, ec = eps, oc = out;
    record([mc, lc, ec, oc, n]() mutable {
      for (int64_t i = 0; i < n; ++i) {
        const double g = oc.grad()[i];
        if (mc.requires_grad()) mc.grad()[i] += g;
        if (lc.requires_grad()) {
          const double raw = lc.data()[i];
          if (raw >= -20.0 && raw <= 2.0)
            lc.grad()[i] += g * std::exp(raw) * ec.data()[i];
        }
      }
    });
  }
  return out;
}

void Graph::backward(const Tensor& scalar_output) {
  if (!scalar_output.defined() || scalar_output.numel() != 1)
    throw ShapeError("backward: output must be a defined scalar");
  if (!scalar_output.requires_grad())
    throw InvalidInput("backward: output does not participate in this graph");
  Tensor out = scalar_output;
  out.grad()[0] = 1.0;
  for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
  tape_.clear();
}

// ---------------------------------------------------------------------------
// grad_check

double grad_check(const std::function<Tensor(Graph&, const Tensor&)>& f, Tensor x, double h) {
  x.set_requires_grad(true);
  x.zero_grad();
  {
    Graph g;
    Tensor y = f(g, x);
    if (y.numel() != 1) throw InvalidInput("grad_check: f must return a scalar");
    g.backward(y);
  }
  std::vector<double> analytic(x.grad(), x.grad() + x.numel());

  double max_err = 0.0;
  for (int64_t i = 0; i < x.numel(); ++i) {
    const double orig = x.data()[i];
    x.data()[i] = orig + h;
    Graph gp(false);
    const double fp = f(gp, x).item();
    x.data()[i] = orig - h;
    Graph gm(false);
    const double fm = f(gm, x).item();
    x.data()[i] = orig;
    const double numeric = (fp - fm) / (2.0 * h);
    const double a = analytic[size_t(i)];
    const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
    max_err = std::max(max_err, err);
  }
  return max_err;
}

// ---------------------------------------------------------------------------
// Adam

Adam::Slot& Adam::slot_for(const Tensor& param) {
  for (auto& [id, slot] : slots_)
    if (id == param.id()) return slot;
  slots_.emplace_back(param.id(), Slot{});
  Slot& s = slots_.back().second;
  s.m.assign(size_t(param.numel()), 0.0);
  s.v.assign(size_t(param.numel()), 0.0);
  return s;
}

const Adam::Slot* Adam::slot(const Tensor& param) const {
  for (const auto& [id, slot] : slots_)
    if (id == param.id()) return &slot;
  return nullptr;
}

void Adam::restore_slot(const Tensor& param, Slot s) {
  for (auto& [id, slot] : slots_) {
    if (id == param.id()) {
      slot = std::move(s);
      return;
    }
  }
  slots_.emplace_back(param.id(), std::move(s));
}

void Adam::step(const std::vector<Tensor>& params) {
  for (const Tensor& p : params) {
    Tensor param = p;
    if (!param.requires_grad()) continue;
    Slot& s = slot_for(param);
    s.t += 1;
    const double bc1 = 1.0 - std::pow(beta1_, double(s.t));
    const double bc2 = 1.0 - std::pow(beta2_, double(s.t));
    const int64_t n = param.numel();
    double* w = param.data();
    const double* g = param.grad();
    for (int64_t i = 0; i < n; ++i) {
      s.m[size_t(i)] = beta1_ * s.m[size_t(i)] + (1.0 - beta1_) * g[i];
      s.v[size_t(i)] = beta2_ * s.v[size_t(i)] + (1.0 - beta2_) * g[i] * g[i];
      const double mhat = s.m[size_t(i)] / bc1;
      const double vhat = s.v[size_t(i)] / bc2;
      w[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void Adam::zero_grad(const std::vector<Tensor>& params) {
  for (const Tensor& p : params) {
    Tensor param = p;
    if (param.requires_grad()) param.zero_grad();
  }
}

// ---------------------------------------------------------------------------
// ParamStore

Tensor& ParamStore::add(const std::string& name, Tensor t) {
  if (has(name)) throw InvalidInput("duplicate parameter name: " + name);
  items_.emplace_back(name, std::move(t));
  return items_.back().second;
}

Tensor& ParamStore::get(const std::string& name) {
  for (auto& [n, t] : items_)
    if (n == name) return t;
  throw InvalidInput("unknown parameter: " + name);
}

const Tensor& ParamStore::get(const std::string& name) const {
  for (const auto& [n, t] : items_)
    if (n == name) return t;
  throw InvalidInput("unknown parameter: " + name);
}

bool ParamStore::has(const std::string& name) const {
  for (const auto& [n, t] : items_)
    if (n == name) return true;
  return false;
}

std::vector<Tensor> ParamStore::tensors() const {
  std::vector<Tensor> out;
  out.reserve(items_.size());
  for (const auto& [n, t] : items_) out.push_back(t);
  return out;
}

int64_t ParamStore::parameter_count() const {
  int64_t n = 0;
  for (const auto& [name, t] : items_) n += t.numel();
  return n;
}

void ParamStore::zero_grads() const {
  for (const auto& [name, t] : items_) {
    Tensor tt = t;
    if (tt.requires_grad()) tt.zero_grad();
  }
}

}  // namespace tractrl
