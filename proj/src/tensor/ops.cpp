#include "longview/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>

namespace longview {

namespace {

thread_local double g_kink_margin = std::numeric_limits<double>::infinity();

void note_kink(double margin) {
  if (margin < g_kink_margin) g_kink_margin = margin;
}

[[noreturn]] void op_error(const char* op, const std::string& msg) {
  throw std::invalid_argument(std::string(op) + ": " + msg);
}

void require(bool cond, const char* op, const std::string& msg) {
  if (!cond) op_error(op, msg);
}

bool track(std::initializer_list<TensorPtr> ins) {
  if (!grad_enabled()) return false;
  for (const auto& t : ins)
    if (t && t->requires_grad) return true;
  return false;
}

TensorPtr finish(const char* op, Shape s, std::vector<float> data, bool tracked) {
  auto out = Tensor::create(std::move(s), std::move(data), tracked);
  if (!out->all_finite()) throw std::runtime_error(std::string(op) + ": non-finite output");
  return out;
}

// ---- shape validation shared by the float and double paths ----

Shape check_elementwise(const char* op, const Shape& a, const Shape& b) {
  if (a != b) op_error(op, "shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  return a;
}

Shape check_matmul(const Shape& a, const Shape& b) {
  if (a.size() != 2 || b.size() != 2 || a[1] != b[0])
    op_error("matmul", "incompatible shapes " + shape_str(a) + " and " + shape_str(b));
  return {a[0], b[1]};
}

struct Conv2dDims {
  int n, ci, h, w, co, kh, kw, ho, wo;
};

Conv2dDims check_conv2d(const Shape& xs, const Shape& ws, const Shape* bs, int stride, int padding) {
  if (xs.size() != 4) op_error("conv2d", "input must be NCHW, got " + shape_str(xs));
  if (ws.size() != 4) op_error("conv2d", "weight must be (Co,Ci,Kh,Kw), got " + shape_str(ws));
  if (ws[1] != xs[1])
    op_error("conv2d", "channel mismatch: input " + shape_str(xs) + " weight " + shape_str(ws));
  if (bs && (bs->size() != 1 || (*bs)[0] != ws[0]))
    op_error("conv2d", "bias must be (Co)=(" + std::to_string(ws[0]) + "), got " + shape_str(*bs));
  if (stride < 1) op_error("conv2d", "stride must be >= 1");
  if (padding < 0) op_error("conv2d", "padding must be >= 0");
  Conv2dDims d;
  d.n = xs[0];
  d.ci = xs[1];
  d.h = xs[2];
  d.w = xs[3];
  d.co = ws[0];
  d.kh = ws[2];
  d.kw = ws[3];
  d.ho = (d.h + 2 * padding - d.kh) / stride + 1;
  d.wo = (d.w + 2 * padding - d.kw) / stride + 1;
  if (d.h + 2 * padding < d.kh || d.w + 2 * padding < d.kw)
    op_error("conv2d", "kernel " + shape_str(ws) + " larger than padded input " + shape_str(xs));
  return d;
}

struct PoolDims {
  int n, c, h, w, ho, wo;
};

PoolDims check_pool(const char* op, const Shape& xs, int kernel, int stride) {
  if (xs.size() != 4) op_error(op, "input must be NCHW, got " + shape_str(xs));
  if (kernel < 1 || stride < 1) op_error(op, "kernel and stride must be >= 1");
  if (xs[2] < kernel || xs[3] < kernel)
    op_error(op, "kernel " + std::to_string(kernel) + " larger than input " + shape_str(xs));
  PoolDims d;
  d.n = xs[0];
  d.c = xs[1];
  d.h = xs[2];
  d.w = xs[3];
  d.ho = (d.h - kernel) / stride + 1;
  d.wo = (d.w - kernel) / stride + 1;
  return d;
}

// (rows, cols) view of x flattened to 2-D with In features; accepts (N,In)
// or (N,In,1,1).
std::pair<int, int> check_linear_input(const Shape& xs, const Shape& ws, const Shape* bs) {
  bool ok = xs.size() == 2 || (xs.size() == 4 && xs[2] == 1 && xs[3] == 1);
  if (!ok) op_error("linear", "input must be (N,In) or (N,In,1,1), got " + shape_str(xs));
  int n = xs[0], in = xs[1];
  if (ws.size() != 2 || ws[0] != in)
    op_error("linear", "weight must be (In,Out) with In=" + std::to_string(in) + ", got " + shape_str(ws));
  if (bs && (bs->size() != 1 || (*bs)[0] != ws[1]))
    op_error("linear", "bias must be (Out), got " + shape_str(*bs));
  return {n, in};
}

std::pair<int64_t, int> rows_cols_last(const char* op, const Shape& s) {
  if (s.empty()) op_error(op, "input must have at least one dimension");
  int cols = s.back();
  int64_t rows = shape_numel(s) / cols;
  return {rows, cols};
}

Shape check_concat(const std::vector<Shape>& shapes, int axis) {
  if (shapes.empty()) op_error("concat", "needs at least one input");
  const Shape& first = shapes[0];
  if (axis < 0 || axis >= static_cast<int>(first.size()))
    op_error("concat", "axis " + std::to_string(axis) + " out of range for " + shape_str(first));
  Shape out = first;
  int total = first[axis];
  for (size_t i = 1; i < shapes.size(); ++i) {
    const Shape& s = shapes[i];
    if (s.size() != first.size())
      op_error("concat", "rank mismatch " + shape_str(first) + " vs " + shape_str(s));
    for (size_t d = 0; d < s.size(); ++d)
      if (static_cast<int>(d) != axis && s[d] != first[d])
        op_error("concat", "shape mismatch " + shape_str(first) + " vs " + shape_str(s));
    total += s[axis];
  }
  out[axis] = total;
  return out;
}

Shape check_resize(const Shape& xs, int out_h, int out_w) {
  if (xs.size() != 4) op_error("bilinear_resize", "input must be NCHW, got " + shape_str(xs));
  if (out_h < 1 || out_w < 1) op_error("bilinear_resize", "output dims must be >= 1");
  return {xs[0], xs[1], out_h, out_w};
}

// ---- kernels shared between float eager ops and the f64 reference path ----

template <typename T>
void matmul_kernel(const T* a, const T* b, T* y, int m, int k, int n) {
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      T acc = 0;
      for (int p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      y[i * n + j] = acc;
    }
}

template <typename T>
void conv2d_kernel(const T* x, const T* w, const T* b, T* y, const Conv2dDims& d, int stride,
                   int padding) {
  for (int n = 0; n < d.n; ++n)
    for (int co = 0; co < d.co; ++co)
      for (int oy = 0; oy < d.ho; ++oy)
        for (int ox = 0; ox < d.wo; ++ox) {
          T acc = b ? b[co] : T(0);
          for (int ci = 0; ci < d.ci; ++ci)
            for (int ky = 0; ky < d.kh; ++ky) {
              int iy = oy * stride - padding + ky;
              if (iy < 0 || iy >= d.h) continue;
              const T* xrow = x + ((static_cast<int64_t>(n) * d.ci + ci) * d.h + iy) * d.w;
              const T* wrow = w + ((static_cast<int64_t>(co) * d.ci + ci) * d.kh + ky) * d.kw;
              for (int kx = 0; kx < d.kw; ++kx) {
                int ix = ox * stride - padding + kx;
                if (ix < 0 || ix >= d.w) continue;
                acc += xrow[ix] * wrow[kx];
              }
            }
          y[((static_cast<int64_t>(n) * d.co + co) * d.ho + oy) * d.wo + ox] = acc;
        }
}

template <typename T>
void avgpool_kernel(const T* x, T* y, const PoolDims& d, int kernel, int stride) {
  const T inv = T(1) / static_cast<T>(kernel * kernel);
  for (int n = 0; n < d.n; ++n)
    for (int c = 0; c < d.c; ++c)
      for (int oy = 0; oy < d.ho; ++oy)
        for (int ox = 0; ox < d.wo; ++ox) {
          T acc = 0;
          for (int ky = 0; ky < kernel; ++ky)
            for (int kx = 0; kx < kernel; ++kx)
              acc += x[((static_cast<int64_t>(n) * d.c + c) * d.h + oy * stride + ky) * d.w +
                       ox * stride + kx];
          y[((static_cast<int64_t>(n) * d.c + c) * d.ho + oy) * d.wo + ox] = acc * inv;
        }
}

template <typename T>
void maxpool_kernel(const T* x, T* y, int64_t* argmax, const PoolDims& d, int kernel, int stride) {
  for (int n = 0; n < d.n; ++n)
    for (int c = 0; c < d.c; ++c)
      for (int oy = 0; oy < d.ho; ++oy)
        for (int ox = 0; ox < d.wo; ++ox) {
          T best = -std::numeric_limits<T>::infinity();
          T second = best;
          int64_t best_idx = -1;
          for (int ky = 0; ky < kernel; ++ky)
            for (int kx = 0; kx < kernel; ++kx) {
              int64_t idx = ((static_cast<int64_t>(n) * d.c + c) * d.h + oy * stride + ky) * d.w +
                            ox * stride + kx;
              T v = x[idx];
              if (v > best) {
                second = best;
                best = v;
                best_idx = idx;
              } else if (v > second) {
                second = v;
              }
            }
          if (kernel > 1) note_kink(static_cast<double>(best - second));
          y[((static_cast<int64_t>(n) * d.c + c) * d.ho + oy) * d.wo + ox] = best;
          if (argmax) argmax[((static_cast<int64_t>(n) * d.c + c) * d.ho + oy) * d.wo + ox] = best_idx;
        }
}

template <typename T>
void softmax_rows(const T* x, T* y, int64_t rows, int cols, bool log_form) {
  for (int64_t r = 0; r < rows; ++r) {
    const T* xr = x + r * cols;
    T* yr = y + r * cols;
    T mx = xr[0];
    for (int c = 1; c < cols; ++c) mx = std::max(mx, xr[c]);
    T denom = 0;
    for (int c = 0; c < cols; ++c) denom += std::exp(xr[c] - mx);
    T log_denom = std::log(denom);
    for (int c = 0; c < cols; ++c) {
      T ls = xr[c] - mx - log_denom;
      yr[c] = log_form ? ls : std::exp(ls);
    }
  }
}

template <typename T>
T cross_entropy_value(const T* logits, const std::vector<int>& targets, int n, int cols,
                      std::vector<T>* probs_out) {
  if (probs_out) probs_out->resize(static_cast<size_t>(n) * cols);
  T total = 0;
  std::vector<T> row(static_cast<size_t>(cols));
  for (int r = 0; r < n; ++r) {
    softmax_rows(logits + static_cast<int64_t>(r) * cols, row.data(), 1, cols, /*log_form=*/true);
    total -= row[targets[static_cast<size_t>(r)]];
    if (probs_out)
      for (int c = 0; c < cols; ++c)
        (*probs_out)[static_cast<size_t>(r) * cols + c] = std::exp(row[c]);
  }
  return total / static_cast<T>(n);
}

struct ResizeWeights {
  int y0, y1, x0, x1;
  float wy, wx;
};

ResizeWeights resize_weights(int oy, int ox, int in_h, int in_w, int out_h, int out_w) {
  ResizeWeights rw;
  float sy = static_cast<float>(in_h) / out_h;
  float sx = static_cast<float>(in_w) / out_w;
  float fy = (oy + 0.5f) * sy - 0.5f;
  float fx = (ox + 0.5f) * sx - 0.5f;
  int y0 = static_cast<int>(std::floor(fy));
  int x0 = static_cast<int>(std::floor(fx));
  rw.wy = fy - y0;
  rw.wx = fx - x0;
  rw.y0 = std::clamp(y0, 0, in_h - 1);
  rw.y1 = std::clamp(y0 + 1, 0, in_h - 1);
  rw.x0 = std::clamp(x0, 0, in_w - 1);
  rw.x1 = std::clamp(x0 + 1, 0, in_w - 1);
  return rw;
}

template <typename T>
void bilinear_kernel(const T* x, T* y, int n, int c, int h, int w, int oh, int ow) {
  for (int i = 0; i < n * c; ++i) {
    const T* plane = x + static_cast<int64_t>(i) * h * w;
    T* out = y + static_cast<int64_t>(i) * oh * ow;
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        ResizeWeights rw = resize_weights(oy, ox, h, w, oh, ow);
        T top = plane[rw.y0 * w + rw.x0] * (1 - static_cast<T>(rw.wx)) +
                plane[rw.y0 * w + rw.x1] * static_cast<T>(rw.wx);
        T bot = plane[rw.y1 * w + rw.x0] * (1 - static_cast<T>(rw.wx)) +
                plane[rw.y1 * w + rw.x1] * static_cast<T>(rw.wx);
        out[oy * ow + ox] = top * (1 - static_cast<T>(rw.wy)) + bot * static_cast<T>(rw.wy);
      }
  }
}

void accumulate(std::vector<float>& dst, const std::vector<float>& src) {
  for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

void reset_kink_margin() { g_kink_margin = std::numeric_limits<double>::infinity(); }
double min_kink_margin() { return g_kink_margin; }

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
  check_elementwise("add", a->shape, b->shape);
  std::vector<float> y(a->data.size());
  for (size_t i = 0; i < y.size(); ++i) y[i] = a->data[i] + b->data[i];
  bool tracked = track({a, b});
  auto out = finish("add", a->shape, std::move(y), tracked);
  if (tracked)
    Tape::active()->record("add", [a, b, out]() {
      if (a->requires_grad) accumulate(a->grad, out->grad);
      if (b->requires_grad) accumulate(b->grad, out->grad);
    });
  return out;
}

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
  check_elementwise("mul", a->shape, b->shape);
  std::vector<float> y(a->data.size());
  for (size_t i = 0; i < y.size(); ++i) y[i] = a->data[i] * b->data[i];
  bool tracked = track({a, b});
  auto out = finish("mul", a->shape, std::move(y), tracked);
  if (tracked)
    Tape::active()->record("mul", [a, b, out]() {
      if (a->requires_grad)
        for (size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += out->grad[i] * b->data[i];
      if (b->requires_grad)
        for (size_t i = 0; i < b->grad.size(); ++i) b->grad[i] += out->grad[i] * a->data[i];
    });
  return out;
}

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
  Shape os = check_matmul(a->shape, b->shape);
  int m = a->shape[0], k = a->shape[1], n = b->shape[1];
  std::vector<float> y(static_cast<size_t>(m) * n);
  matmul_kernel(a->data.data(), b->data.data(), y.data(), m, k, n);
  bool tracked = track({a, b});
  auto out = finish("matmul", os, std::move(y), tracked);
  if (tracked)
    Tape::active()->record("matmul", [a, b, out, m, k, n]() {
      if (a->requires_grad)
        for (int i = 0; i < m; ++i)
          for (int p = 0; p < k; ++p) {
            float acc = 0;
            for (int j = 0; j < n; ++j) acc += out->grad[i * n + j] * b->data[p * n + j];
            a->grad[i * k + p] += acc;
          }
      if (b->requires_grad)
        for (int p = 0; p < k; ++p)
          for (int j = 0; j < n; ++j) {
            float acc = 0;
            for (int i = 0; i < m; ++i) acc += a->data[i * k + p] * out->grad[i * n + j];
            b->grad[p * n + j] += acc;
          }
    });
  return out;
}

TensorPtr conv2d(const TensorPtr& x, const TensorPtr& w, const TensorPtr& bias, int stride,
                 int padding) {
  Conv2dDims d = check_conv2d(x->shape, w->shape, bias ? &bias->shape : nullptr, stride, padding);
  std::vector<float> y(static_cast<size_t>(d.n) * d.co * d.ho * d.wo);
  conv2d_kernel(x->data.data(), w->data.data(), bias ? bias->data.data() : nullptr, y.data(), d,
                stride, padding);
  bool tracked = track({x, w, bias});
  auto out = finish("conv2d", {d.n, d.co, d.ho, d.wo}, std::move(y), tracked);
  if (tracked)
    Tape::active()->record("conv2d", [x, w, bias, out, d, stride, padding]() {
      const std::vector<float>& gy = out->grad;
      for (int n = 0; n < d.n; ++n)
        for (int co = 0; co < d.co; ++co)
          for (int oy = 0; oy < d.ho; ++oy)
            for (int ox = 0; ox < d.wo; ++ox) {
              float g = gy[((static_cast<int64_t>(n) * d.co + co) * d.ho + oy) * d.wo + ox];
              if (bias && bias->requires_grad) bias->grad[co] += g;
              for (int ci = 0; ci < d.ci; ++ci)
                for (int ky = 0; ky < d.kh; ++ky) {
                  int iy = oy * stride - padding + ky;
                  if (iy < 0 || iy >= d.h) continue;
                  for (int kx = 0; kx < d.kw; ++kx) {
                    int ix = ox * stride - padding + kx;
                    if (ix < 0 || ix >= d.w) continue;
                    int64_t xi = ((static_cast<int64_t>(n) * d.ci + ci) * d.h + iy) * d.w + ix;
                    int64_t wi = ((static_cast<int64_t>(co) * d.ci + ci) * d.kh + ky) * d.kw + kx;
                    if (w->requires_grad) w->grad[wi] += g * x->data[xi];
                    if (x->requires_grad) x->grad[xi] += g * w->data[wi];
                  }
                }
            }
    });
  return out;
}

TensorPtr avgpool2d(const TensorPtr& x, int kernel, int stride) {
  PoolDims d = check_pool("avgpool2d", x->shape, kernel, stride);
  std::vector<float> y(static_cast<size_t>(d.n) * d.c * d.ho * d.wo);
  avgpool_kernel(x->data.data(), y.data(), d, kernel, stride);
  bool tracked = track({x});
  auto out = finish("avgpool2d", {d.n, d.c, d.ho, d.wo}, std::move(y), tracked);
  if (tracked)
    Tape::active()->record("avgpool2d", [x, out, d, kernel, stride]() {
      float inv = 1.f / static_cast<float>(kernel * kernel);
      for (int n = 0; n < d.n; ++n)
        for (int c = 0; c < d.c; ++c)
          for (int oy = 0; oy < d.ho; ++oy)
            for (int ox = 0; ox < d.wo; ++ox) {
              float g = out->grad[((static_cast<int64_t>(n) * d.c + c) * d.ho + oy) * d.wo + ox] * inv;
              for (int ky = 0; ky < kernel; ++ky)
                for (int kx = 0; kx < kernel; ++kx)
                  x->grad[((static_cast<int64_t>(n) * d.c + c) * d.h + oy * stride + ky) * d.w +
                          ox * stride + kx] += g;
            }
    });
  return out;
}

TensorPtr maxpool2d(const TensorPtr& x, int kernel, int stride) {
  PoolDims d = check_pool("maxpool2d", x->shape, kernel, stride);
  std::vector<float> y(static_cast<size_t>(d.n) * d.c * d.ho * d.wo);
  auto argmax = std::make_shared<std::vector<int64_t>>(y.size());
  maxpool_kernel(x->data.data(), y.data(), argmax->data(), d, kernel, stride);
  bool tracked = track({x});
  auto out = finish("maxpool2d", {d.n, d.c, d.ho, d.wo}, std::move(y), tracked);
  if (tracked)
    Tape::active()->record("maxpool2d", [x, out, argmax]() {
      for (size_t i = 0; i < out->grad.size(); ++i) x->grad[(*argmax)[i]] += out->grad[i];
    });
  return out;
}

TensorPtr relu(const TensorPtr& x) {
  std::vector<float> y(x->data.size());
  for (size_t i = 0; i < y.size(); ++i) {
    note_kink(std::abs(static_cast<double>(x->data[i])));
    y[i] = x->data[i] > 0.f ? x->data[i] : 0.f;
  }
  bool tracked = track({x});
  auto out = finish("relu", x->shape, std::move(y), tracked);
  if (tracked)
    Tape::active()->record("relu", [x, out]() {
      for (size_t i = 0; i < out->grad.size(); ++i)
        if (x->data[i] > 0.f) x->grad[i] += out->grad[i];
    });
  return out;
}

TensorPtr linear(const TensorPtr& x, const TensorPtr& w, const TensorPtr& bias) {
  auto [n, in] = check_linear_input(x->shape, w->shape, bias ? &bias->shape : nullptr);
  int out_dim = w->shape[1];
  std::vector<float> y(static_cast<size_t>(n) * out_dim);
  matmul_kernel(x->data.data(), w->data.data(), y.data(), n, in, out_dim);
  if (bias)
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < out_dim; ++c) y[static_cast<size_t>(r) * out_dim + c] += bias->data[c];
  bool tracked = track({x, w, bias});
  auto out = finish("linear", {n, out_dim}, std::move(y), tracked);
  if (tracked)
    Tape::active()->record("linear", [x, w, bias, out, n = n, in = in, out_dim]() {
      if (x->requires_grad)
        for (int r = 0; r < n; ++r)
          for (int p = 0; p < in; ++p) {
            float acc = 0;
            for (int c = 0; c < out_dim; ++c)
              acc += out->grad[r * out_dim + c] * w->data[p * out_dim + c];
            x->grad[r * in + p] += acc;
          }
      if (w->requires_grad)
        for (int p = 0; p < in; ++p)
          for (int c = 0; c < out_dim; ++c) {
            float acc = 0;
            for (int r = 0; r < n; ++r) acc += x->data[r * in + p] * out->grad[r * out_dim + c];
            w->grad[p * out_dim + c] += acc;
          }
      if (bias && bias->requires_grad)
        for (int r = 0; r < n; ++r)
          for (int c = 0; c < out_dim; ++c) bias->grad[c] += out->grad[r * out_dim + c];
    });
  return out;
}

TensorPtr softmax(const TensorPtr& x) {
  auto [rows, cols] = rows_cols_last("softmax", x->shape);
  std::vector<float> y(x->data.size());
  softmax_rows(x->data.data(), y.data(), rows, cols, /*log_form=*/false);
  bool tracked = track({x});
  auto out = finish("softmax", x->shape, std::move(y), tracked);
  if (tracked)
    Tape::active()->record("softmax", [x, out, rows = rows, cols = cols]() {
      for (int64_t r = 0; r < rows; ++r) {
        const float* yr = out->data.data() + r * cols;
        const float* gy = out->grad.data() + r * cols;
        float dot = 0;
        for (int c = 0; c < cols; ++c) dot += gy[c] * yr[c];
        for (int c = 0; c < cols; ++c) x->grad[r * cols + c] += yr[c] * (gy[c] - dot);
      }
    });
  return out;
}

TensorPtr log_softmax(const TensorPtr& x) {
  auto [rows, cols] = rows_cols_last("log_softmax", x->shape);
  std::vector<float> y(x->data.size());
  softmax_rows(x->data.data(), y.data(), rows, cols, /*log_form=*/true);
  bool tracked = track({x});
  auto out = finish("log_softmax", x->shape, std::move(y), tracked);
  if (tracked)
    Tape::active()->record("log_softmax", [x, out, rows = rows, cols = cols]() {
      for (int64_t r = 0; r < rows; ++r) {
        const float* yr = out->data.data() + r * cols;
        const float* gy = out->grad.data() + r * cols;
        float gsum = 0;
        for (int c = 0; c < cols; ++c) gsum += gy[c];
        for (int c = 0; c < cols; ++c) x->grad[r * cols + c] += gy[c] - std::exp(yr[c]) * gsum;
      }
    });
  return out;
}

TensorPtr cross_entropy(const TensorPtr& logits, const std::vector<int>& targets) {
  if (logits->shape.size() != 2)
    op_error("cross_entropy", "logits must be (N,C), got " + shape_str(logits->shape));
  int n = logits->shape[0], cols = logits->shape[1];
  if (static_cast<int>(targets.size()) != n)
    op_error("cross_entropy", "expected " + std::to_string(n) + " targets, got " + std::to_string(targets.size()));
  for (int t : targets)
    if (t < 0 || t >= cols)
      op_error("cross_entropy", "target " + std::to_string(t) + " out of range [0," + std::to_string(cols) + ")");
  auto probs = std::make_shared<std::vector<float>>();
  float loss = cross_entropy_value(logits->data.data(), targets, n, cols, probs.get());
  bool tracked = track({logits});
  auto out = finish("cross_entropy", {1}, {loss}, tracked);
  if (tracked)
    Tape::active()->record("cross_entropy", [logits, out, probs, targets, n, cols]() {
      float g = out->grad[0] / static_cast<float>(n);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < cols; ++c) {
          float p = (*probs)[static_cast<size_t>(r) * cols + c];
          float onehot = (targets[static_cast<size_t>(r)] == c) ? 1.f : 0.f;
          logits->grad[static_cast<size_t>(r) * cols + c] += g * (p - onehot);
        }
    });
  return out;
}

namespace {
TensorPtr reduce_full(const TensorPtr& x, bool take_mean, const char* name) {
  double acc = 0;
  for (float v : x->data) acc += v;
  float denom = take_mean ? static_cast<float>(x->data.size()) : 1.f;
  bool tracked = track({x});
  auto out = finish(name, {1}, {static_cast<float>(acc) / denom}, tracked);
  if (tracked)
    Tape::active()->record(name, [x, out, denom]() {
      float g = out->grad[0] / denom;
      for (size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += g;
    });
  return out;
}
}  // namespace

TensorPtr mean(const TensorPtr& x) { return reduce_full(x, true, "mean"); }
TensorPtr sum(const TensorPtr& x) { return reduce_full(x, false, "sum"); }

TensorPtr scale(const TensorPtr& x, float factor) {
  std::vector<float> y(x->data.size());
  for (size_t i = 0; i < y.size(); ++i) y[i] = x->data[i] * factor;
  bool tracked = track({x});
  auto out = finish("scale", x->shape, std::move(y), tracked);
  if (tracked)
    Tape::active()->record("scale", [x, out, factor]() {
      for (size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += out->grad[i] * factor;
    });
  return out;
}

TensorPtr concat(const std::vector<TensorPtr>& xs, int axis) {
  std::vector<Shape> shapes;
  shapes.reserve(xs.size());
  for (const auto& t : xs) shapes.push_back(t->shape);
  Shape os = check_concat(shapes, axis);
  int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= os[d];
  for (size_t d = axis + 1; d < os.size(); ++d) inner *= os[d];
  std::vector<float> y(static_cast<size_t>(shape_numel(os)));
  int64_t axis_total = os[axis];
  int64_t offset = 0;
  for (const auto& t : xs) {
    int64_t ax = t->shape[axis];
    for (int64_t o = 0; o < outer; ++o)
      std::memcpy(y.data() + (o * axis_total + offset) * inner,
                  t->data.data() + o * ax * inner, static_cast<size_t>(ax * inner) * sizeof(float));
    offset += ax;
  }
  bool anyt = false;
  for (const auto& t : xs) anyt = anyt || (grad_enabled() && t->requires_grad);
  bool tracked = grad_enabled() && anyt;
  auto out = finish("concat", os, std::move(y), tracked);
  if (tracked)
    Tape::active()->record("concat", [xs, out, outer, inner, axis_total, axis]() {
      int64_t offset = 0;
      for (const auto& t : xs) {
        int64_t ax = t->shape[axis];
        if (t->requires_grad)
          for (int64_t o = 0; o < outer; ++o)
            for (int64_t i = 0; i < ax * inner; ++i)
              t->grad[o * ax * inner + i] += out->grad[(o * axis_total + offset) * inner + i];
        offset += ax;
      }
    });
  return out;
}

TensorPtr bilinear_resize(const TensorPtr& x, int out_h, int out_w) {
  Shape os = check_resize(x->shape, out_h, out_w);
  int n = x->shape[0], c = x->shape[1], h = x->shape[2], w = x->shape[3];
  std::vector<float> y(static_cast<size_t>(shape_numel(os)));
  bilinear_kernel(x->data.data(), y.data(), n, c, h, w, out_h, out_w);
  bool tracked = track({x});
  auto out = finish("bilinear_resize", os, std::move(y), tracked);
  if (tracked)
    Tape::active()->record("bilinear_resize", [x, out, n, c, h, w, out_h, out_w]() {
      for (int i = 0; i < n * c; ++i) {
        float* gx = x->grad.data() + static_cast<int64_t>(i) * h * w;
        const float* gy = out->grad.data() + static_cast<int64_t>(i) * out_h * out_w;
        for (int oy = 0; oy < out_h; ++oy)
          for (int ox = 0; ox < out_w; ++ox) {
            ResizeWeights rw = resize_weights(oy, ox, h, w, out_h, out_w);
            float g = gy[oy * out_w + ox];
            gx[rw.y0 * w + rw.x0] += g * (1 - rw.wy) * (1 - rw.wx);
            gx[rw.y0 * w + rw.x1] += g * (1 - rw.wy) * rw.wx;
            gx[rw.y1 * w + rw.x0] += g * rw.wy * (1 - rw.wx);
            gx[rw.y1 * w + rw.x1] += g * rw.wy * rw.wx;
          }
      }
    });
  return out;
}

const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::add: return "add";
    case OpKind::mul: return "mul";
    case OpKind::matmul: return "matmul";
    case OpKind::conv2d: return "conv2d";
    case OpKind::avgpool2d: return "avgpool2d";
    case OpKind::maxpool2d: return "maxpool2d";
    case OpKind::relu: return "relu";
    case OpKind::linear: return "linear";
    case OpKind::log_softmax: return "log_softmax";
    case OpKind::softmax: return "softmax";
    case OpKind::cross_entropy: return "cross_entropy";
    case OpKind::mean: return "mean";
    case OpKind::sum: return "sum";
    case OpKind::scale: return "scale";
    case OpKind::concat: return "concat";
    case OpKind::bilinear_resize: return "bilinear_resize";
  }
  return "?";
}

namespace {
void require_inputs(OpKind kind, const std::vector<TensorPtr>& inputs, size_t lo, size_t hi) {
  require(inputs.size() >= lo && inputs.size() <= hi, op_name(kind),
          "expected " + std::to_string(lo) + ".." + std::to_string(hi) + " inputs, got " +
              std::to_string(inputs.size()));
}
}  // namespace

TensorPtr forward(OpKind kind, const std::vector<TensorPtr>& inputs, const OpAttrs& attrs) {
  switch (kind) {
    case OpKind::add:
      require_inputs(kind, inputs, 2, 2);
      return add(inputs[0], inputs[1]);
    case OpKind::mul:
      require_inputs(kind, inputs, 2, 2);
      return mul(inputs[0], inputs[1]);
    case OpKind::matmul:
      require_inputs(kind, inputs, 2, 2);
      return matmul(inputs[0], inputs[1]);
    case OpKind::conv2d:
      require_inputs(kind, inputs, 2, 3);
      return conv2d(inputs[0], inputs[1], inputs.size() > 2 ? inputs[2] : nullptr, attrs.stride,
                    attrs.padding);
    case OpKind::avgpool2d:
      require_inputs(kind, inputs, 1, 1);
      return avgpool2d(inputs[0], attrs.kernel, attrs.stride);
    case OpKind::maxpool2d:
      require_inputs(kind, inputs, 1, 1);
      return maxpool2d(inputs[0], attrs.kernel, attrs.stride);
    case OpKind::relu:
      require_inputs(kind, inputs, 1, 1);
      return relu(inputs[0]);
    case OpKind::linear:
      require_inputs(kind, inputs, 2, 3);
      return linear(inputs[0], inputs[1], inputs.size() > 2 ? inputs[2] : nullptr);
    case OpKind::log_softmax:
      require_inputs(kind, inputs, 1, 1);
      return log_softmax(inputs[0]);
    case OpKind::softmax:
      require_inputs(kind, inputs, 1, 1);
      return softmax(inputs[0]);
    case OpKind::cross_entropy:
      require_inputs(kind, inputs, 1, 1);
      return cross_entropy(inputs[0], attrs.targets);
    case OpKind::mean:
      require_inputs(kind, inputs, 1, 1);
      return mean(inputs[0]);
    case OpKind::sum:
      require_inputs(kind, inputs, 1, 1);
      return sum(inputs[0]);
    case OpKind::scale:
      require_inputs(kind, inputs, 1, 1);
      return scale(inputs[0], attrs.factor);
    case OpKind::concat:
      return concat(inputs, attrs.axis);
    case OpKind::bilinear_resize:
      require_inputs(kind, inputs, 1, 1);
      return bilinear_resize(inputs[0], attrs.out_h, attrs.out_w);
  }
  throw std::invalid_argument("forward: unknown op kind");
}

DArray forward_f64(OpKind kind, const std::vector<DArray>& inputs, const OpAttrs& attrs) {
  auto elementwise = [&](auto fn) {
    check_elementwise(op_name(kind), inputs[0].shape, inputs[1].shape);
    DArray out{inputs[0].shape, std::vector<double>(inputs[0].data.size())};
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = fn(inputs[0].data[i], inputs[1].data[i]);
    return out;
  };
  switch (kind) {
    case OpKind::add:
      return elementwise([](double a, double b) { return a + b; });
    case OpKind::mul:
      return elementwise([](double a, double b) { return a * b; });
    case OpKind::matmul: {
      Shape os = check_matmul(inputs[0].shape, inputs[1].shape);
      DArray out{os, std::vector<double>(static_cast<size_t>(shape_numel(os)))};
      matmul_kernel(inputs[0].data.data(), inputs[1].data.data(), out.data.data(),
                    inputs[0].shape[0], inputs[0].shape[1], inputs[1].shape[1]);
      return out;
    }
    case OpKind::conv2d: {
      const DArray* b = inputs.size() > 2 ? &inputs[2] : nullptr;
      Conv2dDims d = check_conv2d(inputs[0].shape, inputs[1].shape, b ? &b->shape : nullptr,
                                  attrs.stride, attrs.padding);
      DArray out{{d.n, d.co, d.ho, d.wo},
                 std::vector<double>(static_cast<size_t>(d.n) * d.co * d.ho * d.wo)};
      conv2d_kernel(inputs[0].data.data(), inputs[1].data.data(), b ? b->data.data() : nullptr,
                    out.data.data(), d, attrs.stride, attrs.padding);
      return out;
    }
    case OpKind::avgpool2d: {
      PoolDims d = check_pool("avgpool2d", inputs[0].shape, attrs.kernel, attrs.stride);
      DArray out{{d.n, d.c, d.ho, d.wo}, std::vector<double>(static_cast<size_t>(d.n) * d.c * d.ho * d.wo)};
      avgpool_kernel(inputs[0].data.data(), out.data.data(), d, attrs.kernel, attrs.stride);
      return out;
    }
    case OpKind::maxpool2d: {
      PoolDims d = check_pool("maxpool2d", inputs[0].shape, attrs.kernel, attrs.stride);
      DArray out{{d.n, d.c, d.ho, d.wo}, std::vector<double>(static_cast<size_t>(d.n) * d.c * d.ho * d.wo)};
      maxpool_kernel(inputs[0].data.data(), out.data.data(), nullptr, d, attrs.kernel, attrs.stride);
      return out;
    }
    case OpKind::relu: {
      DArray out{inputs[0].shape, std::vector<double>(inputs[0].data.size())};
      for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = inputs[0].data[i] > 0 ? inputs[0].data[i] : 0.0;
      return out;
    }
    case OpKind::linear: {
      const DArray* b = inputs.size() > 2 ? &inputs[2] : nullptr;
      auto [n, in] = check_linear_input(inputs[0].shape, inputs[1].shape, b ? &b->shape : nullptr);
      int out_dim = inputs[1].shape[1];
      DArray out{{n, out_dim}, std::vector<double>(static_cast<size_t>(n) * out_dim)};
      matmul_kernel(inputs[0].data.data(), inputs[1].data.data(), out.data.data(), n, in, out_dim);
      if (b)
        for (int r = 0; r < n; ++r)
          for (int c = 0; c < out_dim; ++c) out.data[static_cast<size_t>(r) * out_dim + c] += b->data[c];
      return out;
    }
    case OpKind::log_softmax:
    case OpKind::softmax: {
      auto [rows, cols] = rows_cols_last(op_name(kind), inputs[0].shape);
      DArray out{inputs[0].shape, std::vector<double>(inputs[0].data.size())};
      softmax_rows(inputs[0].data.data(), out.data.data(), rows, cols, kind == OpKind::log_softmax);
      return out;
    }
    case OpKind::cross_entropy: {
      int n = inputs[0].shape[0], cols = inputs[0].shape[1];
      double loss = cross_entropy_value<double>(inputs[0].data.data(), attrs.targets, n, cols, nullptr);
      return DArray{{1}, {loss}};
    }
    case OpKind::mean:
    case OpKind::sum: {
      double acc = 0;
      for (double v : inputs[0].data) acc += v;
      if (kind == OpKind::mean) acc /= static_cast<double>(inputs[0].data.size());
      return DArray{{1}, {acc}};
    }
    case OpKind::scale: {
      DArray out{inputs[0].shape, std::vector<double>(inputs[0].data.size())};
      for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = inputs[0].data[i] * attrs.factor;
      return out;
    }
    case OpKind::concat: {
      std::vector<Shape> shapes;
      for (const auto& t : inputs) shapes.push_back(t.shape);
      Shape os = check_concat(shapes, attrs.axis);
      int64_t outer = 1, inner = 1;
      for (int d = 0; d < attrs.axis; ++d) outer *= os[d];
      for (size_t d = attrs.axis + 1; d < os.size(); ++d) inner *= os[d];
      DArray out{os, std::vector<double>(static_cast<size_t>(shape_numel(os)))};
      int64_t axis_total = os[attrs.axis];
      int64_t offset = 0;
      for (const auto& t : inputs) {
        int64_t ax = t.shape[attrs.axis];
        for (int64_t o = 0; o < outer; ++o)
          for (int64_t i = 0; i < ax * inner; ++i)
            out.data[(o * axis_total + offset) * inner + i] = t.data[o * ax * inner + i];
        offset += ax;
      }
      return out;
    }
    case OpKind::bilinear_resize: {
      Shape os = check_resize(inputs[0].shape, attrs.out_h, attrs.out_w);
      const Shape& xs = inputs[0].shape;
      DArray out{os, std::vector<double>(static_cast<size_t>(shape_numel(os)))};
      bilinear_kernel(inputs[0].data.data(), out.data.data(), xs[0], xs[1], xs[2], xs[3],
                      attrs.out_h, attrs.out_w);
      return out;
    }
  }
  throw std::invalid_argument("forward_f64: unknown op kind");
}

}  // namespace longview
