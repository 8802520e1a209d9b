// SPDX-License-Identifier: Apache-2.0
#include "vtcas/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vtcas/error.hpp"

namespace vtcas {
namespace {

void require_same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
}

// Adds g into the gradient buffer of `v`, optionally scaled.
void accumulate(Graph& g, Var v, std::span<const double> grad, double s = 1.0) {
  auto buf = g.grad_buffer(v.id());
  if (buf.empty()) return;
  for (std::size_t i = 0; i < grad.size(); ++i) buf[i] += s * grad[i];
}

// Splits a shape around `axis` into (outer, extent, inner).
struct AxisSplit {
  std::size_t outer, extent, inner;
};

AxisSplit split_axis(const Shape& s, std::size_t axis) {
  if (axis >= s.rank()) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + s.str());
  return {s.product(0, axis), s[axis], s.product(axis + 1, s.rank())};
}

}  // namespace

std::size_t conv_out_size(std::size_t in, std::size_t kernel, std::size_t pad, std::size_t stride,
                          std::size_t dilation) {
  const std::size_t span = dilation * (kernel - 1) + 1;
  if (in + 2 * pad < span || stride == 0) return 0;
  return (in + 2 * pad - span) / stride + 1;
}

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  Tensor out(a.shape());
  auto o = out.data();
  auto x = a.value().data(), y = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
  return a.graph().record("add", std::move(out), {a, b}, [a, b](std::span<const double> g, Graph& gr) {
    accumulate(gr, a, g);
    accumulate(gr, b, g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  Tensor out(a.shape());
  auto o = out.data();
  auto x = a.value().data(), y = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] - y[i];
  return a.graph().record("sub", std::move(out), {a, b}, [a, b](std::span<const double> g, Graph& gr) {
    accumulate(gr, a, g);
    accumulate(gr, b, g, -1.0);
  });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a, b);
  Tensor out(a.shape());
  auto o = out.data();
  auto x = a.value().data(), y = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
  return a.graph().record("mul", std::move(out), {a, b}, [a, b](std::span<const double> g, Graph& gr) {
    auto xv = a.value().data(), yv = b.value().data();
    if (auto ga = gr.grad_buffer(a.id()); !ga.empty()) {
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * yv[i];
    }
    if (auto gb = gr.grad_buffer(b.id()); !gb.empty()) {
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * xv[i];
    }
  });
}

Var scale(Var a, double s) {
  Tensor out(a.shape());
  auto o = out.data();
  auto x = a.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = s * x[i];
  return a.graph().record("scale", std::move(out), {a},
                          [a, s](std::span<const double> g, Graph& gr) { accumulate(gr, a, g, s); });
}

Var add_broadcast(Var a, Var b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sb.rank() > sa.rank() ||
      !std::equal(sb.dims().begin(), sb.dims().end(), sa.dims().end() - static_cast<long>(sb.rank()))) {
    throw ShapeError("add_broadcast: " + sb.str() + " is not a trailing shape of " + sa.str());
  }
  const std::size_t inner = sb.numel();
  const std::size_t outer = sa.numel() / inner;
  Tensor out(sa);
  auto o = out.data();
  auto x = a.value().data(), y = b.value().data();
  for (std::size_t r = 0; r < outer; ++r) {
    for (std::size_t i = 0; i < inner; ++i) o[r * inner + i] = x[r * inner + i] + y[i];
  }
  return a.graph().record("add_broadcast", std::move(out), {a, b},
                          [a, b, inner, outer](std::span<const double> g, Graph& gr) {
                            accumulate(gr, a, g);
                            if (auto gb = gr.grad_buffer(b.id()); !gb.empty()) {
                              for (std::size_t r = 0; r < outer; ++r) {
                                for (std::size_t i = 0; i < inner; ++i) gb[i] += g[r * inner + i];
                              }
                            }
                          });
}

Var mul_element(Var x, Var w, std::size_t index) {
  if (index >= w.value().size()) throw ShapeError("mul_element: index out of range");
  const double s = w.value()[index];
  Tensor out(x.shape());
  auto o = out.data();
  auto xv = x.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = s * xv[i];
  return x.graph().record("mul_element", std::move(out), {x, w},
                          [x, w, index](std::span<const double> g, Graph& gr) {
                            accumulate(gr, x, g, w.value()[index]);
                            if (auto gw = gr.grad_buffer(w.id()); !gw.empty()) {
                              auto xv = x.value().data();
                              double acc = 0.0;
                              for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * xv[i];
                              gw[index] += acc;
                            }
                          });
}

Var scale_channels(Var x, Var gate) {
  const Shape& s = x.shape();
  if (s.rank() < 2 || gate.shape().rank() != 2 || gate.shape()[0] != s[0] || gate.shape()[1] != s[1]) {
    throw ShapeError("scale_channels: gate " + gate.shape().str() + " does not match " + s.str());
  }
  const std::size_t rows = s[0] * s[1];
  const std::size_t inner = s.product(2, s.rank());
  Tensor out(s);
  auto o = out.data();
  auto xv = x.value().data(), gv = gate.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < inner; ++i) o[r * inner + i] = xv[r * inner + i] * gv[r];
  }
  return x.graph().record("scale_channels", std::move(out), {x, gate},
                          [x, gate, rows, inner](std::span<const double> g, Graph& gr) {
                            auto xv = x.value().data(), gv = gate.value().data();
                            if (auto gx = gr.grad_buffer(x.id()); !gx.empty()) {
                              for (std::size_t r = 0; r < rows; ++r) {
                                for (std::size_t i = 0; i < inner; ++i) gx[r * inner + i] += g[r * inner + i] * gv[r];
                              }
                            }
                            if (auto gg = gr.grad_buffer(gate.id()); !gg.empty()) {
                              for (std::size_t r = 0; r < rows; ++r) {
                                double acc = 0.0;
                                for (std::size_t i = 0; i < inner; ++i) acc += g[r * inner + i] * xv[r * inner + i];
                                gg[r] += acc;
                              }
                            }
                          });
}

Var relu(Var x) {
  Tensor out(x.shape());
  auto o = out.data();
  auto xv = x.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  return x.graph().record("relu", std::move(out), {x}, [x](std::span<const double> g, Graph& gr) {
    auto gx = gr.grad_buffer(x.id());
    auto xv = x.value().data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (xv[i] > 0.0) gx[i] += g[i];
    }
  });
}

namespace {
constexpr double kGeluC = 0.044715;
const double kSqrt2OverPi = std::sqrt(2.0 / std::numbers::pi);
}  // namespace

Var gelu(Var x) {
  Tensor out(x.shape());
  auto o = out.data();
  auto xv = x.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double v = xv[i];
    o[i] = 0.5 * v * (1.0 + std::tanh(kSqrt2OverPi * (v + kGeluC * v * v * v)));
  }
  return x.graph().record("gelu", std::move(out), {x}, [x](std::span<const double> g, Graph& gr) {
    auto gx = gr.grad_buffer(x.id());
    auto xv = x.value().data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = xv[i];
      const double t = std::tanh(kSqrt2OverPi * (v + kGeluC * v * v * v));
      const double dt = (1.0 - t * t) * kSqrt2OverPi * (1.0 + 3.0 * kGeluC * v * v);
      gx[i] += g[i] * (0.5 * (1.0 + t) + 0.5 * v * dt);
    }
  });
}

Var sigmoid(Var x) {
  Tensor out(x.shape());
  auto o = out.data();
  auto xv = x.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = 1.0 / (1.0 + std::exp(-xv[i]));
  Graph& graph = x.graph();
  const NodeId self = static_cast<NodeId>(graph.size());
  return graph.record("sigmoid", std::move(out), {x}, [x, self](std::span<const double> g, Graph& gr) {
    auto gx = gr.grad_buffer(x.id());
    auto y = gr.value(self).data();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var sum(Var x) {
  double acc = 0.0;
  for (double v : x.value().data()) acc += v;
  return x.graph().record("sum", Tensor::scalar(acc), {x}, [x](std::span<const double> g, Graph& gr) {
    auto gx = gr.grad_buffer(x.id());
    for (double& v : gx) v += g[0];
  });
}

Var mean(Var x) {
  const double n = static_cast<double>(x.value().size());
  double acc = 0.0;
  for (double v : x.value().data()) acc += v;
  return x.graph().record("mean", Tensor::scalar(acc / n), {x}, [x, n](std::span<const double> g, Graph& gr) {
    auto gx = gr.grad_buffer(x.id());
    for (double& v : gx) v += g[0] / n;
  });
}

Var mean_axis(Var x, std::size_t axis) {
  const Shape& s = x.shape();
  const auto [outer, extent, inner] = split_axis(s, axis);
  std::vector<std::size_t> dims;
  for (std::size_t i = 0; i < s.rank(); ++i) {
    if (i != axis) dims.push_back(s[i]);
  }
  if (dims.empty()) dims.push_back(1);
  Tensor out{Shape(std::span<const std::size_t>(dims))};
  auto o = out.data();
  auto xv = x.value().data();
  const double inv = 1.0 / static_cast<double>(extent);
  for (std::size_t a = 0; a < outer; ++a) {
    for (std::size_t e = 0; e < extent; ++e) {
      const double* src = &xv[(a * extent + e) * inner];
      double* dst = &o[a * inner];
      for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
  }
  for (double& v : o) v *= inv;
  return x.graph().record("mean_axis", std::move(out), {x},
                          [x, outer, extent, inner, inv](std::span<const double> g, Graph& gr) {
                            auto gx = gr.grad_buffer(x.id());
                            for (std::size_t a = 0; a < outer; ++a) {
                              for (std::size_t e = 0; e < extent; ++e) {
                                double* dst = &gx[(a * extent + e) * inner];
                                for (std::size_t i = 0; i < inner; ++i) dst[i] += g[a * inner + i] * inv;
                              }
                            }
                          });
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(shape);
  return x.graph().record("reshape", std::move(out), {x},
                          [x](std::span<const double> g, Graph& gr) { accumulate(gr, x, g); });
}

Var permute(Var x, std::initializer_list<std::size_t> perm_list) {
  const Shape& s = x.shape();
  const std::size_t rank = s.rank();
  if (perm_list.size() != rank) throw ShapeError("permute: permutation rank mismatch for " + s.str());
  std::array<std::size_t, 4> perm{0, 1, 2, 3};
  std::array<bool, 4> seen{};
  std::size_t k = 0;
  for (std::size_t p : perm_list) {
    if (p >= rank || seen[p]) throw ShapeError("permute: invalid permutation");
    seen[p] = true;
    perm[k++] = p;
  }
  // Pad to rank 4 with leading unit axes.
  std::array<std::size_t, 4> in_dims{1, 1, 1, 1}, in_strides{0, 0, 0, 0};
  const std::size_t off = 4 - rank;
  for (std::size_t i = 0; i < rank; ++i) in_dims[off + i] = s[i];
  std::size_t stride = 1;
  for (std::size_t i = 4; i-- > 0;) {
    in_strides[i] = stride;
    stride *= in_dims[i];
  }
  std::array<std::size_t, 4> out_dims{1, 1, 1, 1}, src_strides{0, 0, 0, 0};
  std::vector<std::size_t> out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    out_dims[off + i] = in_dims[off + perm[i]];
    src_strides[off + i] = in_strides[off + perm[i]];
    out_shape[i] = out_dims[off + i];
  }
  Tensor out{Shape(std::span<const std::size_t>(out_shape))};
  auto o = out.data();
  auto xv = x.value().data();
  std::size_t n = 0;
  for (std::size_t a = 0; a < out_dims[0]; ++a)
    for (std::size_t b = 0; b < out_dims[1]; ++b)
      for (std::size_t c = 0; c < out_dims[2]; ++c) {
        const std::size_t base = a * src_strides[0] + b * src_strides[1] + c * src_strides[2];
        for (std::size_t d = 0; d < out_dims[3]; ++d) o[n++] = xv[base + d * src_strides[3]];
      }
  return x.graph().record("permute", std::move(out), {x},
                          [x, out_dims, src_strides](std::span<const double> g, Graph& gr) {
                            auto gx = gr.grad_buffer(x.id());
                            std::size_t n = 0;
                            for (std::size_t a = 0; a < out_dims[0]; ++a)
                              for (std::size_t b = 0; b < out_dims[1]; ++b)
                                for (std::size_t c = 0; c < out_dims[2]; ++c) {
                                  const std::size_t base =
                                      a * src_strides[0] + b * src_strides[1] + c * src_strides[2];
                                  for (std::size_t d = 0; d < out_dims[3]; ++d) gx[base + d * src_strides[3]] += g[n++];
                                }
                          });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& s0 = parts[0].shape();
  if (axis >= s0.rank()) throw ShapeError("concat: axis out of range");
  std::size_t total = 0;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.rank() == s0.rank();
    for (std::size_t i = 0; ok && i < s.rank(); ++i) ok = i == axis || s[i] == s0[i];
    if (!ok) throw ShapeError("concat: incompatible " + s.str() + " vs " + s0.str());
    total += s[axis];
  }
  std::vector<std::size_t> dims(s0.dims().begin(), s0.dims().end());
  dims[axis] = total;
  const Shape out_shape{std::span<const std::size_t>(dims)};
  const std::size_t outer = s0.product(0, axis);
  const std::size_t inner = s0.product(axis + 1, s0.rank());
  Tensor out(out_shape);
  auto o = out.data();
  std::vector<std::size_t> widths;
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const std::size_t w = p.shape()[axis] * inner;
    auto pv = p.value().data();
    for (std::size_t r = 0; r < outer; ++r) {
      std::copy_n(&pv[r * w], w, &o[r * total * inner + offset]);
    }
    offset += w;
    widths.push_back(w);
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return parts[0].graph().record(
      "concat", std::move(out), parts,
      [saved, widths, outer, row = total * inner](std::span<const double> g, Graph& gr) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < saved.size(); ++k) {
          const std::size_t w = widths[k];
          if (auto gp = gr.grad_buffer(saved[k].id()); !gp.empty()) {
            for (std::size_t r = 0; r < outer; ++r) {
              for (std::size_t i = 0; i < w; ++i) gp[r * w + i] += g[r * row + offset + i];
            }
          }
          offset += w;
        }
      });
}

Var gather(Var x, IndexMap index, Shape out_shape) {
  if (index->size() != out_shape.numel()) throw ShapeError("gather: index length does not match output shape");
  const std::size_t n = x.value().size();
  Tensor out(out_shape);
  auto o = out.data();
  auto xv = x.value().data();
  const auto& idx = *index;
  for (std::size_t i = 0; i < o.size(); ++i) {
    if (idx[i] >= n) throw ShapeError("gather: index out of range");
    o[i] = xv[idx[i]];
  }
  return x.graph().record("gather", std::move(out), {x}, [x, index](std::span<const double> g, Graph& gr) {
    auto gx = gr.grad_buffer(x.id());
    const auto& idx = *index;
    for (std::size_t i = 0; i < g.size(); ++i) gx[idx[i]] += g[i];
  });
}

namespace {

// c(m,n) += a(m,k) * b(k,n)
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// c(m,k) += g(m,n) * b(k,n)^T
void gemm_nt(const double* g, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* gi = g + i * n;
    double* ci = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += gi[j] * bp[j];
      ci[p] += acc;
    }
  }
}

// c(k,n) += a(m,k)^T * g(m,n)
void gemm_tn(const double* a, const double* g, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* gi = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += av * gi[j];
    }
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.rank() < 2 || sb.rank() < 2) throw ShapeError("matmul: operands must have rank >= 2");
  const std::size_t k = sa.back();
  if (sb.back(2) != k) throw ShapeError("matmul: inner dims differ " + sa.str() + " x " + sb.str());
  const std::size_t n = sb.back();
  const bool shared_b = sb.rank() == 2;
  std::size_t batch = 1, m = sa.back(2);
  if (shared_b) {
    m = sa.numel() / k;  // fold all leading dims into rows
  } else {
    if (sa.rank() != sb.rank()) throw ShapeError("matmul: batch ranks differ " + sa.str() + " x " + sb.str());
    for (std::size_t i = 0; i + 2 < sa.rank(); ++i) {
      if (sa[i] != sb[i]) throw ShapeError("matmul: batch dims differ " + sa.str() + " x " + sb.str());
    }
    batch = sa.product(0, sa.rank() - 2);
  }
  std::vector<std::size_t> dims(sa.dims().begin(), sa.dims().end());
  dims.back() = n;
  Tensor out{Shape(std::span<const std::size_t>(dims))};
  const double* av = a.value().data().data();
  const double* bv = b.value().data().data();
  double* ov = out.data().data();
  const std::size_t b_stride = shared_b ? 0 : k * n;
  for (std::size_t t = 0; t < batch; ++t) gemm_nn(av + t * m * k, bv + t * b_stride, ov + t * m * n, m, k, n);
  return a.graph().record("matmul", std::move(out), {a, b},
                          [a, b, batch, m, k, n, b_stride](std::span<const double> g, Graph& gr) {
                            const double* av = a.value().data().data();
                            const double* bv = b.value().data().data();
                            if (auto ga = gr.grad_buffer(a.id()); !ga.empty()) {
                              for (std::size_t t = 0; t < batch; ++t)
                                gemm_nt(&g[t * m * n], bv + t * b_stride, &ga[t * m * k], m, n, k);
                            }
                            if (auto gb = gr.grad_buffer(b.id()); !gb.empty()) {
                              for (std::size_t t = 0; t < batch; ++t)
                                gemm_tn(av + t * m * k, &g[t * m * n], &gb[t * b_stride], m, k, n);
                            }
                          });
}

Var softmax(Var x, std::size_t axis) {
  const auto [outer, extent, inner] = split_axis(x.shape(), axis);
  Tensor out(x.shape());
  auto o = out.data();
  auto xv = x.value().data();
  for (std::size_t a = 0; a < outer; ++a) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = a * extent * inner + i;
      double mx = xv[base];
      for (std::size_t e = 1; e < extent; ++e) mx = std::max(mx, xv[base + e * inner]);
      double z = 0.0;
      for (std::size_t e = 0; e < extent; ++e) {
        const double v = std::exp(xv[base + e * inner] - mx);
        o[base + e * inner] = v;
        z += v;
      }
      const double inv = 1.0 / z;
      for (std::size_t e = 0; e < extent; ++e) o[base + e * inner] *= inv;
    }
  }
  Graph& graph = x.graph();
  const NodeId self = static_cast<NodeId>(graph.size());
  return graph.record("softmax", std::move(out), {x},
                      [x, self, outer, extent, inner](std::span<const double> g, Graph& gr) {
                        auto gx = gr.grad_buffer(x.id());
                        auto y = gr.value(self).data();
                        for (std::size_t a = 0; a < outer; ++a) {
                          for (std::size_t i = 0; i < inner; ++i) {
                            const std::size_t base = a * extent * inner + i;
                            double dot = 0.0;
                            for (std::size_t e = 0; e < extent; ++e) dot += g[base + e * inner] * y[base + e * inner];
                            for (std::size_t e = 0; e < extent; ++e) {
                              const std::size_t j = base + e * inner;
                              gx[j] += y[j] * (g[j] - dot);
                            }
                          }
                        }
                      });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  const std::size_t c = x.shape().back();
  if (gamma.shape() != Shape{c} || beta.shape() != Shape{c}) {
    throw ShapeError("layer_norm: gamma/beta must have length " + std::to_string(c));
  }
  const std::size_t rows = x.value().size() / c;
  auto xhat = std::make_shared<std::vector<double>>(x.value().size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  Tensor out(x.shape());
  auto o = out.data();
  auto xv = x.value().data(), gv = gamma.value().data(), bv = beta.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = &xv[r * c];
    double mu = 0.0;
    for (std::size_t i = 0; i < c; ++i) mu += xr[i];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t i = 0; i < c; ++i) var += (xr[i] - mu) * (xr[i] - mu);
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t i = 0; i < c; ++i) {
      const double h = (xr[i] - mu) * is;
      (*xhat)[r * c + i] = h;
      o[r * c + i] = gv[i] * h + bv[i];
    }
  }
  return x.graph().record(
      "layer_norm", std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat, inv_std, rows, c](std::span<const double> g, Graph& gr) {
        auto gv = gamma.value().data();
        const auto& h = *xhat;
        if (auto gg = gr.grad_buffer(gamma.id()); !gg.empty()) {
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t i = 0; i < c; ++i) gg[i] += g[r * c + i] * h[r * c + i];
        }
        if (auto gb = gr.grad_buffer(beta.id()); !gb.empty()) {
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t i = 0; i < c; ++i) gb[i] += g[r * c + i];
        }
        if (auto gx = gr.grad_buffer(x.id()); !gx.empty()) {
          const double cn = static_cast<double>(c);
          for (std::size_t r = 0; r < rows; ++r) {
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t i = 0; i < c; ++i) {
              const double d = g[r * c + i] * gv[i];
              s1 += d;
              s2 += d * h[r * c + i];
            }
            const double is = (*inv_std)[r];
            for (std::size_t i = 0; i < c; ++i) {
              const double d = g[r * c + i] * gv[i];
              gx[r * c + i] += is / cn * (cn * d - s1 - h[r * c + i] * s2);
            }
          }
        }
      });
}

Var batch_norm(Var x, Var gamma, Var beta, BatchNormState& state, bool training) {
  const Shape& s = x.shape();
  if (s.rank() < 2) throw ShapeError("batch_norm: input must have a channel axis");
  const std::size_t batch = s[0], ch = s[1], inner = s.product(2, s.rank());
  if (state.running_mean.size() != ch) throw ShapeError("batch_norm: running stats do not match channels");
  const bool affine = gamma.valid();
  if (affine && (gamma.shape() != Shape{ch} || !beta.valid() || beta.shape() != Shape{ch})) {
    throw ShapeError("batch_norm: gamma/beta must have length " + std::to_string(ch));
  }
  const std::size_t count = batch * inner;
  auto xv = x.value().data();
  auto mean_c = std::make_shared<std::vector<double>>(ch);
  auto inv_std = std::make_shared<std::vector<double>>(ch);
  if (training) {
    for (std::size_t c = 0; c < ch; ++c) {
      double mu = 0.0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < inner; ++i) mu += xv[(b * ch + c) * inner + i];
      mu /= static_cast<double>(count);
      double var = 0.0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < inner; ++i) {
          const double d = xv[(b * ch + c) * inner + i] - mu;
          var += d * d;
        }
      const double biased = var / static_cast<double>(count);
      const double unbiased = count > 1 ? var / static_cast<double>(count - 1) : biased;
      (*mean_c)[c] = mu;
      (*inv_std)[c] = 1.0 / std::sqrt(biased + state.eps);
      state.running_mean[c] = (1.0 - state.momentum) * state.running_mean[c] + state.momentum * mu;
      state.running_var[c] = (1.0 - state.momentum) * state.running_var[c] + state.momentum * unbiased;
    }
  } else {
    for (std::size_t c = 0; c < ch; ++c) {
      (*mean_c)[c] = state.running_mean[c];
      (*inv_std)[c] = 1.0 / std::sqrt(state.running_var[c] + state.eps);
    }
  }
  Tensor out(s);
  auto o = out.data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < ch; ++c) {
      const double gm = affine ? gamma.value()[c] : 1.0;
      const double bt = affine ? beta.value()[c] : 0.0;
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t j = (b * ch + c) * inner + i;
        o[j] = gm * (xv[j] - (*mean_c)[c]) * (*inv_std)[c] + bt;
      }
    }
  std::vector<Var> parents{x};
  if (affine) {
    parents.push_back(gamma);
    parents.push_back(beta);
  }
  return x.graph().record(
      "batch_norm", std::move(out), parents,
      [x, gamma, beta, affine, training, mean_c, inv_std, batch, ch, inner](std::span<const double> g, Graph& gr) {
        auto xv = x.value().data();
        const double n = static_cast<double>(batch * inner);
        auto gx = gr.grad_buffer(x.id());
        auto gg = affine ? gr.grad_buffer(gamma.id()) : std::span<double>{};
        auto gb = affine ? gr.grad_buffer(beta.id()) : std::span<double>{};
        for (std::size_t c = 0; c < ch; ++c) {
          const double mu = (*mean_c)[c], is = (*inv_std)[c];
          const double gm = affine ? gamma.value()[c] : 1.0;
          double sg = 0.0, sgh = 0.0;
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t i = 0; i < inner; ++i) {
              const std::size_t j = (b * ch + c) * inner + i;
              sg += g[j];
              sgh += g[j] * (xv[j] - mu) * is;
            }
          if (!gg.empty()) gg[c] += sgh;
          if (!gb.empty()) gb[c] += sg;
          if (gx.empty()) continue;
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t i = 0; i < inner; ++i) {
              const std::size_t j = (b * ch + c) * inner + i;
              if (training) {
                const double h = (xv[j] - mu) * is;
                gx[j] += gm * is / n * (n * g[j] - sg - h * sgh);
              } else {
                gx[j] += gm * is * g[j];
              }
            }
        }
      });
}

Var conv2d(Var x, Var w, Var bias, const Conv2dOptions& opt) {
  const Shape& sx = x.shape();
  const Shape& sw = w.shape();
  if (sx.rank() != 4 || sw.rank() != 4) throw ShapeError("conv2d: input and weight must be rank 4");
  const std::size_t batch = sx[0], cin = sx[1], h = sx[2], wd = sx[3];
  const std::size_t cout = sw[0], cin_g = sw[1], kh = sw[2], kw = sw[3];
  const std::size_t groups = opt.groups;
  if (groups == 0 || cin % groups != 0 || cout % groups != 0 || cin / groups != cin_g) {
    throw ShapeError("conv2d: channel/group mismatch input " + sx.str() + " weight " + sw.str() +
                     " groups " + std::to_string(groups));
  }
  if (bias.valid() && bias.shape() != Shape{cout}) throw ShapeError("conv2d: bias must have length Cout");
  const std::size_t oh = conv_out_size(h, kh, opt.pad_h, opt.stride, opt.dilation);
  const std::size_t ow = conv_out_size(wd, kw, opt.pad_w, opt.stride, opt.dilation);
  if (oh == 0 || ow == 0) throw ShapeError("conv2d: zero-size output for input " + sx.str());
  const std::size_t cout_g = cout / groups;

  const long st = static_cast<long>(opt.stride);
  const long dil = static_cast<long>(opt.dilation);
  const long pad_h = static_cast<long>(opt.pad_h), pad_w = static_cast<long>(opt.pad_w);

  // Output positions o along one axis for which the tap at offset `off`
  // reads inside the input: 0 <= o*st + off < in.
  const auto valid = [st](long off, std::size_t in, std::size_t out) -> std::pair<long, long> {
    long lo = off >= 0 ? 0 : (-off + st - 1) / st;
    long hi = static_cast<long>(in) - 1 - off;
    hi = hi < 0 ? 0 : std::min(hi / st + 1, static_cast<long>(out));
    return {std::min(lo, hi), hi};
  };

  Tensor out{Shape{batch, cout, oh, ow}};
  auto o = out.data();
  auto xv = x.value().data(), wv = w.value().data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t co = 0; co < cout; ++co) {
      double* op = &o[(b * cout + co) * oh * ow];
      if (bias.valid()) std::fill_n(op, oh * ow, bias.value()[co]);
      const std::size_t grp = co / cout_g;
      for (std::size_t ci = 0; ci < cin_g; ++ci) {
        const double* xp = &xv[(b * cin + grp * cin_g + ci) * h * wd];
        for (std::size_t i = 0; i < kh; ++i) {
          const long offh = static_cast<long>(i) * dil - pad_h;
          const auto [ylo, yhi] = valid(offh, h, oh);
          for (std::size_t j = 0; j < kw; ++j) {
            const double wt = wv[((co * cin_g + ci) * kh + i) * kw + j];
            const long offw = static_cast<long>(j) * dil - pad_w;
            const auto [zlo, zhi] = valid(offw, wd, ow);
            for (long y = ylo; y < yhi; ++y) {
              const double* xr = xp + (y * st + offh) * static_cast<long>(wd);
              double* orow = op + y * static_cast<long>(ow);
              for (long z = zlo; z < zhi; ++z) orow[z] += wt * xr[z * st + offw];
            }
          }
        }
      }
    }

  return x.graph().record(
      "conv2d", std::move(out), bias.valid() ? std::initializer_list<Var>{x, w, bias} : std::initializer_list<Var>{x, w},
      [=](std::span<const double> g, Graph& gr) {
        auto xv = x.value().data();
        auto wv = w.value().data();
        auto gx = gr.grad_buffer(x.id());
        auto gw = gr.grad_buffer(w.id());
        if (bias.valid()) {
          if (auto gb = gr.grad_buffer(bias.id()); !gb.empty()) {
            for (std::size_t b = 0; b < batch; ++b)
              for (std::size_t co = 0; co < cout; ++co) {
                const double* gp = &g[(b * cout + co) * oh * ow];
                double acc = 0.0;
                for (std::size_t t = 0; t < oh * ow; ++t) acc += gp[t];
                gb[co] += acc;
              }
          }
        }
        if (gx.empty() && gw.empty()) return;
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t co = 0; co < cout; ++co) {
            const double* gp = &g[(b * cout + co) * oh * ow];
            const std::size_t grp = co / cout_g;
            for (std::size_t ci = 0; ci < cin_g; ++ci) {
              const long xoff = static_cast<long>((b * cin + grp * cin_g + ci) * h * wd);
              for (std::size_t i = 0; i < kh; ++i) {
                const long offh = static_cast<long>(i) * dil - pad_h;
                const auto [ylo, yhi] = valid(offh, h, oh);
                for (std::size_t j = 0; j < kw; ++j) {
                  const std::size_t widx = ((co * cin_g + ci) * kh + i) * kw + j;
                  const double wt = wv[widx];
                  const long offw = static_cast<long>(j) * dil - pad_w;
                  const auto [zlo, zhi] = valid(offw, wd, ow);
                  double acc = 0.0;
                  for (long y = ylo; y < yhi; ++y) {
                    const long row = xoff + (y * st + offh) * static_cast<long>(wd) + offw;
                    const double* grow = gp + y * static_cast<long>(ow);
                    if (!gx.empty()) {
                      for (long z = zlo; z < zhi; ++z) gx[static_cast<std::size_t>(row + z * st)] += wt * grow[z];
                    }
                    for (long z = zlo; z < zhi; ++z) acc += xv[static_cast<std::size_t>(row + z * st)] * grow[z];
                  }
                  if (!gw.empty()) gw[widx] += acc;
                }
              }
            }
          }
      });
}

Var cross_entropy(Var logits, std::span<const int> labels) {
  const Shape& s = logits.shape();
  if (s.rank() != 2) throw ShapeError("cross_entropy: logits must be (B,K), got " + s.str());
  const std::size_t batch = s[0], k = s[1];
  if (labels.size() != batch) throw ShapeError("cross_entropy: label count does not match batch");
  auto probs = std::make_shared<std::vector<double>>(batch * k);
  auto lv = logits.value().data();
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    if (labels[b] < 0 || static_cast<std::size_t>(labels[b]) >= k) {
      throw ShapeError("cross_entropy: label " + std::to_string(labels[b]) + " out of range [0," +
                       std::to_string(k) + ")");
    }
    const double* row = &lv[b * k];
    const double mx = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < k; ++j) (*probs)[b * k + j] = std::exp(row[j] - lse);
    loss += lse - row[labels[b]];
  }
  loss /= static_cast<double>(batch);
  std::vector<int> lab(labels.begin(), labels.end());
  return logits.graph().record("cross_entropy", Tensor::scalar(loss), {logits},
                               [logits, probs, lab, batch, k](std::span<const double> g, Graph& gr) {
                                 auto gl = gr.grad_buffer(logits.id());
                                 const double s = g[0] / static_cast<double>(batch);
                                 for (std::size_t b = 0; b < batch; ++b) {
                                   for (std::size_t j = 0; j < k; ++j) {
                                     const double onehot = static_cast<int>(j) == lab[b] ? 1.0 : 0.0;
                                     gl[b * k + j] += s * ((*probs)[b * k + j] - onehot);
                                   }
                                 }
                               });
}

}  // namespace vtcas
