#include "mltsf/ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "mltsf/error.hpp"

namespace mltsf::ops {

using detail::Node;

namespace {

// Gradient buffer of parent i, or nullptr when that parent needs no gradient.
double* parent_grad(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  if (!p.requires_grad) return nullptr;
  return p.grad_buffer().data();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw GeometryError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                        shape_string(b.shape()));
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw GeometryError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                        shape_string(t.shape()));
  }
}

std::size_t last_dim(const Tensor& t) { return t.shape().back(); }

thread_local PiecewiseTrace* current_trace = nullptr;

}  // namespace

PiecewiseTrace::PiecewiseTrace() : previous_(current_trace) { current_trace = this; }
PiecewiseTrace::~PiecewiseTrace() { current_trace = previous_; }
PiecewiseTrace* PiecewiseTrace::active() { return current_trace; }

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, "add", [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (double* g = parent_grad(self, p)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, "sub", [](Node& self) {
    if (double* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (double* g = parent_grad(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, "mul", [](Node& self) {
    const auto& av = self.parents[0]->values;
    const auto& bv = self.parents[1]->values;
    if (double* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * bv[i];
    }
    if (double* g = parent_grad(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
  return Tensor::make_result(a.shape(), std::move(out), {a}, "scale", [factor](Node& self) {
    if (double* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * factor;
    }
  });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  return Tensor::make_result({1}, {total}, {a}, "sum", [](Node& self) {
    if (double* g = parent_grad(self, 0)) {
      const std::size_t n = self.parents[0]->values.size();
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
    }
  });
}

Tensor sum_squares(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v * v;
  return Tensor::make_result({1}, {total}, {a}, "sum_squares", [](Node& self) {
    if (double* g = parent_grad(self, 0)) {
      const auto& av = self.parents[0]->values;
      for (std::size_t i = 0; i < av.size(); ++i) g[i] += 2.0 * av[i] * self.grad[0];
    }
  });
}

Tensor mean(std::span<const Tensor> scalars) {
  if (scalars.empty()) throw GeometryError("mean: no inputs");
  double total = 0.0;
  for (const Tensor& s : scalars) total += s.item();
  const double inv = 1.0 / static_cast<double>(scalars.size());
  std::vector<Tensor> inputs(scalars.begin(), scalars.end());
  return Tensor::make_result({1}, {total * inv}, std::move(inputs), "mean", [inv](Node& self) {
    for (std::size_t p = 0; p < self.parents.size(); ++p) {
      if (double* g = parent_grad(self, p)) g[0] += self.grad[0] * inv;
    }
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_rank(bias, 1, "add_bias");
  const std::size_t c = last_dim(x);
  if (bias.size() != c) throw GeometryError("add_bias: bias length does not match last dimension");
  const auto xv = x.values();
  const auto bv = bias.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] + bv[i % c];
  return Tensor::make_result(x.shape(), std::move(out), {x, bias}, "add_bias", [c](Node& self) {
    if (double* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (double* g = parent_grad(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % c] += self.grad[i];
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const std::optional<Tensor>& bias) {
  require_rank(weight, 2, "linear");
  const std::size_t k = weight.dim(0);
  const std::size_t m = weight.dim(1);
  if (last_dim(x) != k) {
    throw GeometryError("linear: input " + shape_string(x.shape()) + " vs weight " + shape_string(weight.shape()));
  }
  if (bias && (bias->rank() != 1 || bias->size() != m)) throw GeometryError("linear: bias length mismatch");
  const std::size_t rows = x.size() / k;
  const auto xv = x.values();
  const auto wv = weight.values();
  std::vector<double> out(rows * m, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double* o = out.data() + r * m;
    if (bias) std::copy(bias->values().begin(), bias->values().end(), o);
    for (std::size_t i = 0; i < k; ++i) {
      const double xi = xv[r * k + i];
      if (xi == 0.0) continue;
      const double* w = wv.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += xi * w[j];
    }
  }
  Shape shape = x.shape();
  shape.back() = m;
  std::vector<Tensor> inputs{x, weight};
  if (bias) inputs.push_back(*bias);
  return Tensor::make_result(std::move(shape), std::move(out), std::move(inputs), "linear",
                             [rows, k, m](Node& self) {
    const auto& xv = self.parents[0]->values;
    const auto& wv = self.parents[1]->values;
    const double* go = self.grad.data();
    if (double* gx = parent_grad(self, 0)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < k; ++i) {
          const double* w = wv.data() + i * m;
          double acc = 0.0;
          for (std::size_t j = 0; j < m; ++j) acc += go[r * m + j] * w[j];
          gx[r * k + i] += acc;
        }
      }
    }
    if (double* gw = parent_grad(self, 1)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < k; ++i) {
          const double xi = xv[r * k + i];
          if (xi == 0.0) continue;
          double* w = gw + i * m;
          for (std::size_t j = 0; j < m; ++j) w[j] += xi * go[r * m + j];
        }
      }
    }
    if (self.parents.size() > 2) {
      if (double* gb = parent_grad(self, 2)) {
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < m; ++j) gb[j] += go[r * m + j];
        }
      }
    }
  });
}

namespace {

Tensor conv1d_impl(const Tensor& input, const Tensor& filters, const Tensor* bias, std::size_t stride,
                   std::size_t padding) {
  if (input.rank() != 2 && input.rank() != 3) {
    throw GeometryError("conv1d: input must be LxC or NxLxC, got " + shape_string(input.shape()));
  }
  require_rank(filters, 3, "conv1d");
  if (stride < 1) throw GeometryError("conv1d: stride must be >= 1");
  const bool batched = input.rank() == 3;
  const std::size_t n = batched ? input.dim(0) : 1;
  const std::size_t len = input.dim(batched ? 1 : 0);
  const std::size_t cin = input.dim(batched ? 2 : 1);
  const std::size_t f = filters.dim(0);
  const std::size_t cout = filters.dim(2);
  if (filters.dim(1) != cin) {
    throw GeometryError("conv1d: filters " + shape_string(filters.shape()) + " do not match input channels " +
                        std::to_string(cin));
  }
  if (bias && (bias->rank() != 1 || bias->size() != cout)) throw GeometryError("conv1d: bias length mismatch");
  const long long span = static_cast<long long>(len + 2 * padding) - static_cast<long long>(f);
  if (span < 0) {
    throw GeometryError("conv1d: invalid geometry, L=" + std::to_string(len) + " padding=" +
                        std::to_string(padding) + " F=" + std::to_string(f));
  }
  const std::size_t lout = static_cast<std::size_t>(span) / stride + 1;

  const auto xv = input.values();
  const auto wv = filters.values();
  std::vector<double> out(n * lout * cout, 0.0);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t lo = 0; lo < lout; ++lo) {
      double* o = out.data() + (b * lout + lo) * cout;
      if (bias) std::copy(bias->values().begin(), bias->values().end(), o);
      for (std::size_t tap = 0; tap < f; ++tap) {
        const long long li = static_cast<long long>(lo * stride + tap) - static_cast<long long>(padding);
        if (li < 0 || li >= static_cast<long long>(len)) continue;
        const double* x = xv.data() + (b * len + static_cast<std::size_t>(li)) * cin;
        for (std::size_t ci = 0; ci < cin; ++ci) {
          const double xval = x[ci];
          if (xval == 0.0) continue;
          const double* w = wv.data() + (tap * cin + ci) * cout;
          for (std::size_t co = 0; co < cout; ++co) o[co] += xval * w[co];
        }
      }
    }
  }

  Shape shape = batched ? Shape{n, lout, cout} : Shape{lout, cout};
  std::vector<Tensor> inputs{input, filters};
  if (bias) inputs.push_back(*bias);
  return Tensor::make_result(std::move(shape), std::move(out), std::move(inputs), "conv1d",
                             [n, len, cin, f, cout, lout, stride, padding](Node& self) {
    const auto& xv = self.parents[0]->values;
    const auto& wv = self.parents[1]->values;
    const double* go = self.grad.data();
    double* gx = parent_grad(self, 0);
    double* gw = parent_grad(self, 1);
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t lo = 0; lo < lout; ++lo) {
        const double* g = go + (b * lout + lo) * cout;
        for (std::size_t tap = 0; tap < f; ++tap) {
          const long long li = static_cast<long long>(lo * stride + tap) - static_cast<long long>(padding);
          if (li < 0 || li >= static_cast<long long>(len)) continue;
          const std::size_t row = (b * len + static_cast<std::size_t>(li)) * cin;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const std::size_t woff = (tap * cin + ci) * cout;
            if (gx) {
              double acc = 0.0;
              for (std::size_t co = 0; co < cout; ++co) acc += g[co] * wv[woff + co];
              gx[row + ci] += acc;
            }
            if (gw) {
              const double xval = xv[row + ci];
              if (xval == 0.0) continue;
              for (std::size_t co = 0; co < cout; ++co) gw[woff + co] += xval * g[co];
            }
          }
        }
      }
    }
    if (self.parents.size() > 2) {
      if (double* gb = parent_grad(self, 2)) {
        for (std::size_t r = 0; r < n * lout; ++r) {
          for (std::size_t co = 0; co < cout; ++co) gb[co] += go[r * cout + co];
        }
      }
    }
  });
}

}  // namespace

Tensor conv1d(const Tensor& input, const Tensor& filters, std::size_t stride, std::size_t padding) {
  return conv1d_impl(input, filters, nullptr, stride, padding);
}

Tensor conv1d(const Tensor& input, const Tensor& filters, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  return conv1d_impl(input, filters, &bias, stride, padding);
}

Tensor relu(const Tensor& x) {
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  if (auto* trace = PiecewiseTrace::active()) {
    for (double v : xv) trace->record(v > 0.0);
  }
  return Tensor::make_result(x.shape(), std::move(out), {x}, "relu", [](Node& self) {
    if (double* g = parent_grad(self, 0)) {
      const auto& xv = self.parents[0]->values;
      for (std::size_t i = 0; i < xv.size(); ++i) {
        if (xv[i] > 0.0) g[i] += self.grad[i];
      }
    }
  });
}

Tensor gelu(const Tensor& x) {
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = xv[i] * 0.5 * (1.0 + std::erf(xv[i] * std::numbers::sqrt2 / 2.0));
  }
  return Tensor::make_result(x.shape(), std::move(out), {x}, "gelu", [](Node& self) {
    if (double* g = parent_grad(self, 0)) {
      const auto& xv = self.parents[0]->values;
      const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
      for (std::size_t i = 0; i < xv.size(); ++i) {
        const double cdf = 0.5 * (1.0 + std::erf(xv[i] * std::numbers::sqrt2 / 2.0));
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * xv[i] * xv[i]);
        g[i] += self.grad[i] * (cdf + xv[i] * pdf);
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t c = last_dim(x);
  if (gamma.rank() != 1 || gamma.size() != c || beta.rank() != 1 || beta.size() != c) {
    throw GeometryError("layer_norm: gamma/beta must have length " + std::to_string(c));
  }
  if (!(eps >= 0.0)) throw NumericError("layer_norm: eps must be non-negative");
  const std::size_t rows = x.size() / c;
  const auto xv = x.values();
  const auto gv = gamma.values();
  const auto bv = beta.values();
  std::vector<double> xhat(xv.size());
  std::vector<double> inv_std(rows);
  std::vector<double> out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * c;
    double mu = 0.0;
    for (std::size_t i = 0; i < c; ++i) mu += row[i];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t i = 0; i < c; ++i) var += (row[i] - mu) * (row[i] - mu);
    var /= static_cast<double>(c);
    const double denom = std::sqrt(var + eps);
    if (!(denom > 0.0)) throw NumericError("layer_norm: zero variance with eps=0");
    inv_std[r] = 1.0 / denom;
    for (std::size_t i = 0; i < c; ++i) {
      xhat[r * c + i] = (row[i] - mu) * inv_std[r];
      out[r * c + i] = xhat[r * c + i] * gv[i] + bv[i];
    }
  }
  return Tensor::make_result(x.shape(), std::move(out), {x, gamma, beta}, "layer_norm",
                             [rows, c, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
    const auto& gv = self.parents[1]->values;
    const double* go = self.grad.data();
    if (double* gx = parent_grad(self, 0)) {
      std::vector<double> gxhat(c);
      for (std::size_t r = 0; r < rows; ++r) {
        double mean_g = 0.0;
        double mean_gx = 0.0;
        for (std::size_t i = 0; i < c; ++i) {
          gxhat[i] = go[r * c + i] * gv[i];
          mean_g += gxhat[i];
          mean_gx += gxhat[i] * xhat[r * c + i];
        }
        mean_g /= static_cast<double>(c);
        mean_gx /= static_cast<double>(c);
        for (std::size_t i = 0; i < c; ++i) {
          gx[r * c + i] += inv_std[r] * (gxhat[i] - mean_g - xhat[r * c + i] * mean_gx);
        }
      }
    }
    if (double* gg = parent_grad(self, 1)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < c; ++i) gg[i] += go[r * c + i] * xhat[r * c + i];
      }
    }
    if (double* gb = parent_grad(self, 2)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < c; ++i) gb[i] += go[r * c + i];
      }
    }
  });
}

Tensor softmax_lastdim(const Tensor& x) {
  const std::size_t c = last_dim(x);
  const std::size_t rows = x.size() / c;
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * c;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < c; ++i) {
      if (std::isnan(row[i]) || row[i] == std::numeric_limits<double>::infinity()) {
        throw NumericError("softmax_lastdim: non-finite input");
      }
      mx = std::max(mx, row[i]);
    }
    if (mx == -std::numeric_limits<double>::infinity()) {
      throw NumericError("softmax_lastdim: undefined distribution, every entry of a slice is -inf");
    }
    double z = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
      out[r * c + i] = row[i] == -std::numeric_limits<double>::infinity() ? 0.0 : std::exp(row[i] - mx);
      z += out[r * c + i];
    }
    for (std::size_t i = 0; i < c; ++i) out[r * c + i] /= z;
  }
  std::vector<double> saved = out;
  return Tensor::make_result(x.shape(), std::move(out), {x}, "softmax", [rows, c, y = std::move(saved)](Node& self) {
    if (double* g = parent_grad(self, 0)) {
      const double* go = self.grad.data();
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t i = 0; i < c; ++i) dot += go[r * c + i] * y[r * c + i];
        for (std::size_t i = 0; i < c; ++i) g[r * c + i] += y[r * c + i] * (go[r * c + i] - dot);
      }
    }
  });
}

Tensor log_softmax_lastdim(const Tensor& x) {
  const std::size_t c = last_dim(x);
  const std::size_t rows = x.size() / c;
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  std::vector<double> probs(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * c;
    double mx = row[0];
    for (std::size_t i = 1; i < c; ++i) mx = std::max(mx, row[i]);
    double z = 0.0;
    for (std::size_t i = 0; i < c; ++i) z += std::exp(row[i] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t i = 0; i < c; ++i) {
      out[r * c + i] = row[i] - lse;
      probs[r * c + i] = std::exp(out[r * c + i]);
    }
  }
  return Tensor::make_result(x.shape(), std::move(out), {x}, "log_softmax",
                             [rows, c, p = std::move(probs)](Node& self) {
    if (double* g = parent_grad(self, 0)) {
      const double* go = self.grad.data();
      for (std::size_t r = 0; r < rows; ++r) {
        double total = 0.0;
        for (std::size_t i = 0; i < c; ++i) total += go[r * c + i];
        for (std::size_t i = 0; i < c; ++i) g[r * c + i] += go[r * c + i] - p[r * c + i] * total;
      }
    }
  });
}

Tensor max_pool_time(const Tensor& x, std::size_t size, std::size_t stride) {
  if (x.rank() != 2 && x.rank() != 3) throw GeometryError("max_pool_time: input must be LxC or NxLxC");
  if (size < 1 || stride < 1) throw GeometryError("max_pool_time: size and stride must be >= 1");
  const bool batched = x.rank() == 3;
  const std::size_t n = batched ? x.dim(0) : 1;
  const std::size_t len = x.dim(batched ? 1 : 0);
  const std::size_t c = x.dim(batched ? 2 : 1);
  if (len < size) {
    throw GeometryError("max_pool_time: length " + std::to_string(len) + " shorter than window " +
                        std::to_string(size));
  }
  const std::size_t lout = (len - size) / stride + 1;
  const auto xv = x.values();
  std::vector<double> out(n * lout * c);
  std::vector<std::size_t> arg(out.size());
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t lo = 0; lo < lout; ++lo) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        std::size_t best = (b * len + lo * stride) * c + ch;
        for (std::size_t w = 1; w < size; ++w) {
          const std::size_t idx = (b * len + lo * stride + w) * c + ch;
          if (xv[idx] > xv[best]) best = idx;
        }
        const std::size_t o = (b * lout + lo) * c + ch;
        out[o] = xv[best];
        arg[o] = best;
      }
    }
  }
  if (auto* trace = PiecewiseTrace::active()) {
    for (std::size_t a : arg) trace->record(a);
  }
  Shape shape = batched ? Shape{n, lout, c} : Shape{lout, c};
  return Tensor::make_result(std::move(shape), std::move(out), {x}, "max_pool_time", [arg = std::move(arg)](Node& self) {
    if (double* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < arg.size(); ++i) g[arg[i]] += self.grad[i];
    }
  });
}

Tensor pool_axis1(const Tensor& x, PoolMode mode) {
  require_rank(x, 3, "pool_axis1");
  const std::size_t n = x.dim(0);
  const std::size_t k = x.dim(1);
  const std::size_t c = x.dim(2);
  const auto xv = x.values();
  std::vector<double> out(n * c, 0.0);
  if (mode == PoolMode::kMean) {
    const double inv = 1.0 / static_cast<double>(k);
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t ch = 0; ch < c; ++ch) out[b * c + ch] += xv[(b * k + j) * c + ch];
      }
      for (std::size_t ch = 0; ch < c; ++ch) out[b * c + ch] *= inv;
    }
    return Tensor::make_result({n, c}, std::move(out), {x}, "mean_pool", [n, k, c, inv](Node& self) {
      if (double* g = parent_grad(self, 0)) {
        for (std::size_t b = 0; b < n; ++b) {
          for (std::size_t j = 0; j < k; ++j) {
            for (std::size_t ch = 0; ch < c; ++ch) g[(b * k + j) * c + ch] += self.grad[b * c + ch] * inv;
          }
        }
      }
    });
  }
  std::vector<std::size_t> arg(n * c);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      std::size_t best = b * k * c + ch;
      for (std::size_t j = 1; j < k; ++j) {
        const std::size_t idx = (b * k + j) * c + ch;
        if (xv[idx] > xv[best]) best = idx;
      }
      out[b * c + ch] = xv[best];
      arg[b * c + ch] = best;
    }
  }
  if (auto* trace = PiecewiseTrace::active()) {
    for (std::size_t a : arg) trace->record(a);
  }
  return Tensor::make_result({n, c}, std::move(out), {x}, "max_pool", [arg = std::move(arg)](Node& self) {
    if (double* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < arg.size(); ++i) g[arg[i]] += self.grad[i];
    }
  });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices, const Shape& prefix) {
  require_rank(table, 2, "gather_rows");
  if (numel(prefix) != indices.size()) throw GeometryError("gather_rows: prefix does not match index count");
  const std::size_t rows = table.dim(0);
  const std::size_t c = table.dim(1);
  const auto tv = table.values();
  std::vector<double> out(indices.size() * c);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows) {
      throw GeometryError("gather_rows: index " + std::to_string(indices[i]) + " out of range " + std::to_string(rows));
    }
    std::copy_n(tv.data() + indices[i] * c, c, out.data() + i * c);
  }
  Shape shape = prefix;
  shape.push_back(c);
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return Tensor::make_result(std::move(shape), std::move(out), {table}, "gather_rows",
                             [c, idx = std::move(idx)](Node& self) {
    if (double* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < idx.size(); ++i) {
        for (std::size_t ch = 0; ch < c; ++ch) g[idx[i] * c + ch] += self.grad[i * c + ch];
      }
    }
  });
}

Tensor stack_axis1(std::span<const Tensor> parts) {
  if (parts.empty()) throw GeometryError("stack_axis1: no inputs");
  for (const Tensor& p : parts) {
    require_rank(p, 2, "stack_axis1");
    require_same_shape(parts[0], p, "stack_axis1");
  }
  const std::size_t n = parts[0].dim(0);
  const std::size_t c = parts[0].dim(1);
  const std::size_t s = parts.size();
  std::vector<double> out(n * s * c);
  for (std::size_t j = 0; j < s; ++j) {
    const auto pv = parts[j].values();
    for (std::size_t b = 0; b < n; ++b) std::copy_n(pv.data() + b * c, c, out.data() + (b * s + j) * c);
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return Tensor::make_result({n, s, c}, std::move(out), std::move(inputs), "stack_axis1", [n, s, c](Node& self) {
    for (std::size_t j = 0; j < s; ++j) {
      if (double* g = parent_grad(self, j)) {
        for (std::size_t b = 0; b < n; ++b) {
          for (std::size_t ch = 0; ch < c; ++ch) g[b * c + ch] += self.grad[(b * s + j) * c + ch];
        }
      }
    }
  });
}

Tensor weighted_sum_axis1(const Tensor& weights, const Tensor& x) {
  require_rank(weights, 2, "weighted_sum_axis1");
  require_rank(x, 3, "weighted_sum_axis1");
  const std::size_t n = x.dim(0);
  const std::size_t s = x.dim(1);
  const std::size_t c = x.dim(2);
  if (weights.dim(0) != n || weights.dim(1) != s) {
    throw GeometryError("weighted_sum_axis1: weights " + shape_string(weights.shape()) + " vs " +
                        shape_string(x.shape()));
  }
  const auto wv = weights.values();
  const auto xv = x.values();
  std::vector<double> out(n * c, 0.0);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t j = 0; j < s; ++j) {
      const double w = wv[b * s + j];
      for (std::size_t ch = 0; ch < c; ++ch) out[b * c + ch] += w * xv[(b * s + j) * c + ch];
    }
  }
  return Tensor::make_result({n, c}, std::move(out), {weights, x}, "weighted_sum", [n, s, c](Node& self) {
    const auto& wv = self.parents[0]->values;
    const auto& xv = self.parents[1]->values;
    double* gw = parent_grad(self, 0);
    double* gx = parent_grad(self, 1);
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t j = 0; j < s; ++j) {
        double acc = 0.0;
        for (std::size_t ch = 0; ch < c; ++ch) {
          const double g = self.grad[b * c + ch];
          acc += g * xv[(b * s + j) * c + ch];
          if (gx) gx[(b * s + j) * c + ch] += g * wv[b * s + j];
        }
        if (gw) gw[b * s + j] += acc;
      }
    }
  });
}

Tensor select_columns(const Tensor& x, std::span<const std::size_t> cols) {
  require_rank(x, 2, "select_columns");
  if (cols.empty()) throw GeometryError("select_columns: no columns");
  const std::size_t rows = x.dim(0);
  const std::size_t c = x.dim(1);
  for (std::size_t col : cols) {
    if (col >= c) throw GeometryError("select_columns: column " + std::to_string(col) + " out of range");
  }
  const std::size_t m = cols.size();
  const auto xv = x.values();
  std::vector<double> out(rows * m);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < m; ++j) out[r * m + j] = xv[r * c + cols[j]];
  }
  std::vector<std::size_t> idx(cols.begin(), cols.end());
  return Tensor::make_result({rows, m}, std::move(out), {x}, "select_columns",
                             [rows, c, m, idx = std::move(idx)](Node& self) {
    if (double* g = parent_grad(self, 0)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < m; ++j) g[r * c + idx[j]] += self.grad[r * m + j];
      }
    }
  });
}

Tensor logsumexp_at(const Tensor& x, std::span<const std::size_t> indices) {
  if (indices.empty()) throw GeometryError("logsumexp_at: no indices");
  const auto xv = x.values();
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i : indices) {
    if (i >= xv.size()) throw GeometryError("logsumexp_at: index out of range");
    mx = std::max(mx, xv[i]);
  }
  double z = 0.0;
  for (std::size_t i : indices) z += std::exp(xv[i] - mx);
  const double lse = mx + std::log(z);
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return Tensor::make_result({1}, {lse}, {x}, "logsumexp_at", [idx = std::move(idx), lse](Node& self) {
    if (double* g = parent_grad(self, 0)) {
      const auto& xv = self.parents[0]->values;
      for (std::size_t i : idx) g[i] += self.grad[0] * std::exp(xv[i] - lse);
    }
  });
}

Tensor ctc_advance(const Tensor& prev, const Tensor& emissions, std::size_t t,
                   std::span<const bool> skip_allowed) {
  require_rank(prev, 1, "ctc_advance");
  require_rank(emissions, 2, "ctc_advance");
  const std::size_t states = emissions.dim(1);
  const std::size_t n = prev.size();
  if (t >= emissions.dim(0)) throw GeometryError("ctc_advance: time index out of range");
  if (skip_allowed.size() != states || n > states) throw GeometryError("ctc_advance: state count mismatch");

  std::size_t m = std::min(states, n + 1);
  if (n + 1 < states && skip_allowed[n + 1]) m = n + 2;

  const auto pv = prev.values();
  const auto ev = emissions.values();
  // Up to three predecessor states per output state, -1 marks an absent term.
  std::vector<std::array<long long, 3>> terms(m);
  std::vector<double> lse(m);
  std::vector<double> out(m);
  for (std::size_t s = 0; s < m; ++s) {
    terms[s] = {-1, -1, -1};
    if (s < n) terms[s][0] = static_cast<long long>(s);
    if (s >= 1 && s - 1 < n) terms[s][1] = static_cast<long long>(s - 1);
    if (s >= 2 && skip_allowed[s] && s - 2 < n) terms[s][2] = static_cast<long long>(s - 2);
    double mx = -std::numeric_limits<double>::infinity();
    for (long long j : terms[s]) {
      if (j >= 0) mx = std::max(mx, pv[static_cast<std::size_t>(j)]);
    }
    double z = 0.0;
    for (long long j : terms[s]) {
      if (j >= 0) z += std::exp(pv[static_cast<std::size_t>(j)] - mx);
    }
    lse[s] = mx + std::log(z);
    out[s] = lse[s] + ev[t * states + s];
  }
  return Tensor::make_result({m}, std::move(out), {prev, emissions}, "ctc_advance",
                             [t, states, terms = std::move(terms), lse = std::move(lse)](Node& self) {
    const auto& pv = self.parents[0]->values;
    double* gp = parent_grad(self, 0);
    double* ge = parent_grad(self, 1);
    for (std::size_t s = 0; s < terms.size(); ++s) {
      const double g = self.grad[s];
      if (ge) ge[t * states + s] += g;
      if (gp) {
        for (long long j : terms[s]) {
          if (j >= 0) gp[j] += g * std::exp(pv[static_cast<std::size_t>(j)] - lse[s]);
        }
      }
    }
  });
}

Tensor row_prefix(const Tensor& x, std::size_t row, std::size_t count) {
  require_rank(x, 2, "row_prefix");
  if (row >= x.dim(0) || count < 1 || count > x.dim(1)) throw GeometryError("row_prefix: out of range");
  const std::size_t c = x.dim(1);
  const auto xv = x.values();
  std::vector<double> out(xv.begin() + static_cast<long>(row * c), xv.begin() + static_cast<long>(row * c + count));
  return Tensor::make_result({count}, std::move(out), {x}, "row_prefix", [row, c, count](Node& self) {
    if (double* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < count; ++i) g[row * c + i] += self.grad[i];
    }
  });
}

}  // namespace mltsf::ops
