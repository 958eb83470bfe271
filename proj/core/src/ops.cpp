#include "ehalt/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ehalt {

namespace {

using detail::Node;
using detail::ensure_grad;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                a.shape().str() + " vs " + b.shape().str());
}

void require_rank2(const Tensor& x, const char* op) {
  if (x.shape().rank() != 2)
    throw std::invalid_argument(std::string(op) + ": expected rank-2 input, got " +
                                x.shape().str());
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> v(a.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.at(i) + b.at(i);
  return Tensor::from_op(a.shape(), std::move(v), {a, b}, [](Node& n) {
    for (int k = 0; k < 2; ++k) {
      Node& p = *n.parents[k];
      if (!p.requires_grad) continue;
      ensure_grad(p);
      for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> v(a.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.at(i) - b.at(i);
  return Tensor::from_op(a.shape(), std::move(v), {a, b}, [](Node& n) {
    for (int k = 0; k < 2; ++k) {
      Node& p = *n.parents[k];
      if (!p.requires_grad) continue;
      ensure_grad(p);
      const double sign = k == 0 ? 1.0 : -1.0;
      for (std::size_t i = 0; i < n.grad.size(); ++i)
        p.grad[i] += sign * n.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> v(a.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.at(i) * b.at(i);
  return Tensor::from_op(a.shape(), std::move(v), {a, b}, [](Node& n) {
    Node& pa = *n.parents[0];
    Node& pb = *n.parents[1];
    if (pa.requires_grad) {
      ensure_grad(pa);
      for (std::size_t i = 0; i < n.grad.size(); ++i)
        pa.grad[i] += n.grad[i] * pb.values[i];
    }
    if (pb.requires_grad) {
      ensure_grad(pb);
      for (std::size_t i = 0; i < n.grad.size(); ++i)
        pb.grad[i] += n.grad[i] * pa.values[i];
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> v(a.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = c * a.at(i);
  return Tensor::from_op(a.shape(), std::move(v), {a}, [c](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += c * n.grad[i];
  });
}

Tensor add_scalar(const Tensor& a, double c) {
  std::vector<double> v(a.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.at(i) + c;
  return Tensor::from_op(a.shape(), std::move(v), {a}, [](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i];
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a.at(i);
  return Tensor::from_op(Shape{1}, {s}, {a}, [](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    for (double& g : p.grad) g += n.grad[0];
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / double(a.numel())); }

Tensor dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a.at(i) * b.at(i);
  return Tensor::from_op(Shape{1}, {s}, {a, b}, [](Node& n) {
    Node& pa = *n.parents[0];
    Node& pb = *n.parents[1];
    const double g = n.grad[0];
    if (pa.requires_grad) {
      ensure_grad(pa);
      for (std::size_t i = 0; i < pa.grad.size(); ++i)
        pa.grad[i] += g * pb.values[i];
    }
    if (pb.requires_grad) {
      ensure_grad(pb);
      for (std::size_t i = 0; i < pb.grad.size(); ++i)
        pb.grad[i] += g * pa.values[i];
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> v(x.numel());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double z = x.at(i);
    // Symmetric formulation, no overflow for large |z|.
    v[i] = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                    : std::exp(z) / (1.0 + std::exp(z));
  }
  std::vector<double> y = v;
  return Tensor::from_op(x.shape(), std::move(v), {x},
                         [y = std::move(y)](Node& n) {
                           Node& p = *n.parents[0];
                           if (!p.requires_grad) return;
                           ensure_grad(p);
                           for (std::size_t i = 0; i < n.grad.size(); ++i)
                             p.grad[i] += n.grad[i] * y[i] * (1.0 - y[i]);
                         });
}

Tensor tanh(const Tensor& x) {
  std::vector<double> v(x.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::tanh(x.at(i));
  std::vector<double> y = v;
  return Tensor::from_op(x.shape(), std::move(v), {x},
                         [y = std::move(y)](Node& n) {
                           Node& p = *n.parents[0];
                           if (!p.requires_grad) return;
                           ensure_grad(p);
                           for (std::size_t i = 0; i < n.grad.size(); ++i)
                             p.grad[i] += n.grad[i] * (1.0 - y[i] * y[i]);
                         });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape.numel() != x.numel())
    throw std::invalid_argument("reshape: element count mismatch " +
                                x.shape().str() + " -> " + shape.str());
  return Tensor::from_op(std::move(shape), x.values(), {x}, [](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i];
  });
}

Tensor row(const Tensor& x, std::size_t i) {
  require_rank2(x, "row");
  const std::size_t N = x.shape()[0], D = x.shape()[1];
  if (i >= N) throw std::out_of_range("row: index out of range");
  std::vector<double> v(x.values().begin() + i * D,
                        x.values().begin() + (i + 1) * D);
  return Tensor::from_op(Shape{D}, std::move(v), {x}, [i, D](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    for (std::size_t d = 0; d < D; ++d) p.grad[i * D + d] += n.grad[d];
  });
}

Tensor pick_col(const Tensor& x, std::size_t c) {
  require_rank2(x, "pick_col");
  const std::size_t N = x.shape()[0], C = x.shape()[1];
  if (c >= C) throw std::out_of_range("pick_col: column out of range");
  std::vector<double> v(N);
  for (std::size_t t = 0; t < N; ++t) v[t] = x.at(t * C + c);
  return Tensor::from_op(Shape{N}, std::move(v), {x}, [c, C](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    ensure_grad(p);
    for (std::size_t t = 0; t < n.grad.size(); ++t)
      p.grad[t * C + c] += n.grad[t];
  });
}

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t len) {
  require_rank2(x, "slice_cols");
  const std::size_t N = x.shape()[0], D = x.shape()[1];
  if (len == 0 || start + len > D)
    throw std::out_of_range("slice_cols: invalid slice");
  std::vector<double> v(N * len);
  for (std::size_t t = 0; t < N; ++t)
    for (std::size_t d = 0; d < len; ++d) v[t * len + d] = x.at(t * D + start + d);
  return Tensor::from_op(Shape{N, len}, std::move(v), {x},
                         [start, len, D](Node& n) {
                           Node& p = *n.parents[0];
                           if (!p.requires_grad) return;
                           ensure_grad(p);
                           const std::size_t N2 = n.shape[0];
                           for (std::size_t t = 0; t < N2; ++t)
                             for (std::size_t d = 0; d < len; ++d)
                               p.grad[t * D + start + d] += n.grad[t * len + d];
                         });
}

Tensor concat_features(const std::vector<Tensor>& parts) {
  if (parts.empty())
    throw std::invalid_argument("concat_features: empty part list");
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.shape().rank() != 1)
      throw std::invalid_argument("concat_features: parts must be rank 1");
    total += p.numel();
  }
  std::vector<double> v;
  v.reserve(total);
  std::vector<std::size_t> sizes;
  for (const auto& p : parts) {
    v.insert(v.end(), p.values().begin(), p.values().end());
    sizes.push_back(p.numel());
  }
  return Tensor::from_op(Shape{total}, std::move(v), parts,
                         [sizes = std::move(sizes)](Node& n) {
                           std::size_t off = 0;
                           for (std::size_t k = 0; k < sizes.size(); ++k) {
                             Node& p = *n.parents[k];
                             if (p.requires_grad) {
                               ensure_grad(p);
                               for (std::size_t i = 0; i < sizes[k]; ++i)
                                 p.grad[i] += n.grad[off + i];
                             }
                             off += sizes[k];
                           }
                         });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty part list");
  require_rank2(parts[0], "concat_cols");
  const std::size_t N = parts[0].shape()[0];
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    require_rank2(p, "concat_cols");
    if (p.shape()[0] != N)
      throw std::invalid_argument("concat_cols: row count mismatch");
    widths.push_back(p.shape()[1]);
    total += p.shape()[1];
  }
  std::vector<double> v(N * total);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const std::size_t w = widths[k];
    for (std::size_t t = 0; t < N; ++t)
      for (std::size_t d = 0; d < w; ++d)
        v[t * total + off + d] = parts[k].at(t * w + d);
    off += w;
  }
  return Tensor::from_op(
      Shape{N, total}, std::move(v), parts,
      [widths = std::move(widths), total, N](Node& n) {
        std::size_t off2 = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
          Node& p = *n.parents[k];
          const std::size_t w = widths[k];
          if (p.requires_grad) {
            ensure_grad(p);
            for (std::size_t t = 0; t < N; ++t)
              for (std::size_t d = 0; d < w; ++d)
                p.grad[t * w + d] += n.grad[t * total + off2 + d];
          }
          off2 += w;
        }
      });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty part list");
  require_rank2(parts[0], "concat_rows");
  const std::size_t D = parts[0].shape()[1];
  std::size_t total = 0;
  std::vector<std::size_t> heights;
  for (const auto& p : parts) {
    require_rank2(p, "concat_rows");
    if (p.shape()[1] != D)
      throw std::invalid_argument("concat_rows: column count mismatch");
    heights.push_back(p.shape()[0]);
    total += p.shape()[0];
  }
  std::vector<double> v;
  v.reserve(total * D);
  for (const auto& p : parts)
    v.insert(v.end(), p.values().begin(), p.values().end());
  return Tensor::from_op(
      Shape{total, D}, std::move(v), parts,
      [heights = std::move(heights), D](Node& n) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < heights.size(); ++k) {
          Node& p = *n.parents[k];
          const std::size_t sz = heights[k] * D;
          if (p.requires_grad) {
            ensure_grad(p);
            for (std::size_t i = 0; i < sz; ++i) p.grad[i] += n.grad[off + i];
          }
          off += sz;
        }
      });
}

Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t len) {
  require_rank2(x, "slice_rows");
  const std::size_t N = x.shape()[0], D = x.shape()[1];
  if (len == 0 || start + len > N)
    throw std::out_of_range("slice_rows: invalid slice");
  std::vector<double> v(x.values().begin() + start * D,
                        x.values().begin() + (start + len) * D);
  return Tensor::from_op(Shape{len, D}, std::move(v), {x},
                         [start, len, D](Node& n) {
                           Node& p = *n.parents[0];
                           if (!p.requires_grad) return;
                           ensure_grad(p);
                           for (std::size_t i = 0; i < len * D; ++i)
                             p.grad[start * D + i] += n.grad[i];
                         });
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: empty row list");
  const std::size_t D = rows[0].numel();
  for (const auto& r : rows) {
    if (r.shape().rank() != 1 || r.numel() != D)
      throw std::invalid_argument("stack_rows: rows must be rank 1, equal size");
  }
  const std::size_t N = rows.size();
  std::vector<double> v(N * D);
  for (std::size_t t = 0; t < N; ++t)
    for (std::size_t d = 0; d < D; ++d) v[t * D + d] = rows[t].at(d);
  return Tensor::from_op(Shape{N, D}, std::move(v), rows, [D](Node& n) {
    for (std::size_t t = 0; t < n.parents.size(); ++t) {
      Node& p = *n.parents[t];
      if (!p.requires_grad) continue;
      ensure_grad(p);
      for (std::size_t d = 0; d < D; ++d) p.grad[d] += n.grad[t * D + d];
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank2(x, "linear");
  require_rank2(weight, "linear");
  const std::size_t N = x.shape()[0], Din = x.shape()[1];
  const std::size_t Dout = weight.shape()[1];
  if (weight.shape()[0] != Din)
    throw std::invalid_argument("linear: inner dimension mismatch " +
                                x.shape().str() + " vs " + weight.shape().str());
  if (bias.shape().rank() != 1 || bias.numel() != Dout)
    throw std::invalid_argument("linear: bias shape " + bias.shape().str() +
                                " does not match output dim " +
                                std::to_string(Dout));
  std::vector<double> v(N * Dout);
  for (std::size_t t = 0; t < N; ++t)
    for (std::size_t o = 0; o < Dout; ++o) {
      double s = bias.at(o);
      for (std::size_t i = 0; i < Din; ++i)
        s += x.at(t * Din + i) * weight.at(i * Dout + o);
      v[t * Dout + o] = s;
    }
  return Tensor::from_op(
      Shape{N, Dout}, std::move(v), {x, weight, bias},
      [N, Din, Dout](Node& n) {
        Node& px = *n.parents[0];
        Node& pw = *n.parents[1];
        Node& pb = *n.parents[2];
        if (px.requires_grad) {
          ensure_grad(px);
          for (std::size_t t = 0; t < N; ++t)
            for (std::size_t i = 0; i < Din; ++i) {
              double s = 0.0;
              for (std::size_t o = 0; o < Dout; ++o)
                s += n.grad[t * Dout + o] * pw.values[i * Dout + o];
              px.grad[t * Din + i] += s;
            }
        }
        if (pw.requires_grad) {
          ensure_grad(pw);
          for (std::size_t i = 0; i < Din; ++i)
            for (std::size_t o = 0; o < Dout; ++o) {
              double s = 0.0;
              for (std::size_t t = 0; t < N; ++t)
                s += px.values[t * Din + i] * n.grad[t * Dout + o];
              pw.grad[i * Dout + o] += s;
            }
        }
        if (pb.requires_grad) {
          ensure_grad(pb);
          for (std::size_t o = 0; o < Dout; ++o) {
            double s = 0.0;
            for (std::size_t t = 0; t < N; ++t) s += n.grad[t * Dout + o];
            pb.grad[o] += s;
          }
        }
      });
}

Tensor conv1d_causal(const Tensor& x, const Tensor& kernel,
                     const Tensor& bias) {
  require_rank2(x, "conv1d_causal");
  if (kernel.shape().rank() != 3)
    throw std::invalid_argument("conv1d_causal: kernel must be rank 3, got " +
                                kernel.shape().str());
  const std::size_t N = x.shape()[0], Din = x.shape()[1];
  const std::size_t W = kernel.shape()[0], Dout = kernel.shape()[2];
  if (kernel.shape()[1] != Din)
    throw std::invalid_argument("conv1d_causal: channel mismatch " +
                                x.shape().str() + " vs " +
                                kernel.shape().str());
  if (bias.shape().rank() != 1 || bias.numel() != Dout)
    throw std::invalid_argument("conv1d_causal: bias shape mismatch");
  if (W < 1) throw std::invalid_argument("conv1d_causal: empty kernel");

  // y[t][o] = b[o] + sum_w sum_i k[w][i][o] * x[t-W+1+w][i], zero outside.
  std::vector<double> v(N * Dout);
  for (std::size_t t = 0; t < N; ++t)
    for (std::size_t o = 0; o < Dout; ++o) {
      double s = bias.at(o);
      for (std::size_t w = 0; w < W; ++w) {
        const std::ptrdiff_t src = std::ptrdiff_t(t + w + 1) - std::ptrdiff_t(W);
        if (src < 0) continue;
        for (std::size_t i = 0; i < Din; ++i)
          s += kernel.at((w * Din + i) * Dout + o) * x.at(src * Din + i);
      }
      v[t * Dout + o] = s;
    }
  return Tensor::from_op(
      Shape{N, Dout}, std::move(v), {x, kernel, bias},
      [N, Din, W, Dout](Node& n) {
        Node& px = *n.parents[0];
        Node& pk = *n.parents[1];
        Node& pb = *n.parents[2];
        if (px.requires_grad) ensure_grad(px);
        if (pk.requires_grad) ensure_grad(pk);
        if (pb.requires_grad) ensure_grad(pb);
        for (std::size_t t = 0; t < N; ++t)
          for (std::size_t o = 0; o < Dout; ++o) {
            const double g = n.grad[t * Dout + o];
            if (g == 0.0) continue;
            if (pb.requires_grad) pb.grad[o] += g;
            for (std::size_t w = 0; w < W; ++w) {
              const std::ptrdiff_t src =
                  std::ptrdiff_t(t + w + 1) - std::ptrdiff_t(W);
              if (src < 0) continue;
              for (std::size_t i = 0; i < Din; ++i) {
                if (pk.requires_grad)
                  pk.grad[(w * Din + i) * Dout + o] += g * px.values[src * Din + i];
                if (px.requires_grad)
                  px.grad[src * Din + i] += g * pk.values[(w * Din + i) * Dout + o];
              }
            }
          }
      });
}

Tensor prefix_max_pool(const Tensor& f, std::size_t t) {
  require_rank2(f, "prefix_max_pool");
  const std::size_t N = f.shape()[0], D = f.shape()[1];
  if (t >= N) throw std::out_of_range("prefix_max_pool: t out of range");
  std::vector<double> v(D);
  std::vector<std::size_t> arg(D, 0);
  for (std::size_t d = 0; d < D; ++d) {
    double best = f.at(d);
    std::size_t bi = 0;
    for (std::size_t tau = 1; tau <= t; ++tau) {
      const double c = f.at(tau * D + d);
      if (c > best) {  // strict: first occurrence wins ties
        best = c;
        bi = tau;
      }
    }
    v[d] = best;
    arg[d] = bi;
  }
  return Tensor::from_op(Shape{D}, std::move(v), {f},
                         [arg = std::move(arg), D](Node& n) {
                           Node& p = *n.parents[0];
                           if (!p.requires_grad) return;
                           ensure_grad(p);
                           for (std::size_t d = 0; d < D; ++d)
                             p.grad[arg[d] * D + d] += n.grad[d];
                         });
}

Tensor prefix_max_rows(const Tensor& f) {
  require_rank2(f, "prefix_max_rows");
  const std::size_t N = f.shape()[0], D = f.shape()[1];
  std::vector<double> v(N * D);
  std::vector<std::size_t> arg(N * D);
  for (std::size_t d = 0; d < D; ++d) {
    double best = f.at(d);
    std::size_t bi = 0;
    for (std::size_t t = 0; t < N; ++t) {
      const double c = f.at(t * D + d);
      if (t > 0 && c > best) {
        best = c;
        bi = t;
      }
      v[t * D + d] = best;
      arg[t * D + d] = bi;
    }
  }
  return Tensor::from_op(Shape{N, D}, std::move(v), {f},
                         [arg = std::move(arg)](Node& n) {
                           Node& p = *n.parents[0];
                           if (!p.requires_grad) return;
                           ensure_grad(p);
                           const std::size_t D2 = n.shape[1];
                           for (std::size_t i = 0; i < n.grad.size(); ++i) {
                             const std::size_t d = i % D2;
                             p.grad[arg[i] * D2 + d] += n.grad[i];
                           }
                         });
}

Tensor softmax_rows(const Tensor& x) {
  require_rank2(x, "softmax_rows");
  const std::size_t N = x.shape()[0], C = x.shape()[1];
  std::vector<double> v(N * C);
  for (std::size_t t = 0; t < N; ++t) {
    double mx = x.at(t * C);
    for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, x.at(t * C + c));
    double z = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      v[t * C + c] = std::exp(x.at(t * C + c) - mx);
      z += v[t * C + c];
    }
    for (std::size_t c = 0; c < C; ++c) v[t * C + c] /= z;
  }
  std::vector<double> y = v;
  return Tensor::from_op(
      Shape{N, C}, std::move(v), {x}, [y = std::move(y), C](Node& n) {
        Node& p = *n.parents[0];
        if (!p.requires_grad) return;
        ensure_grad(p);
        const std::size_t N2 = n.shape[0];
        for (std::size_t t = 0; t < N2; ++t) {
          double gy = 0.0;
          for (std::size_t c = 0; c < C; ++c)
            gy += n.grad[t * C + c] * y[t * C + c];
          for (std::size_t c = 0; c < C; ++c)
            p.grad[t * C + c] += y[t * C + c] * (n.grad[t * C + c] - gy);
        }
      });
}

Tensor cross_entropy_with_logits(const Tensor& logits, std::size_t label) {
  require_rank2(logits, "cross_entropy_with_logits");
  const std::size_t N = logits.shape()[0], C = logits.shape()[1];
  if (label >= C)
    throw std::out_of_range("cross_entropy_with_logits: label out of range");
  std::vector<double> v(N);
  std::vector<double> soft(N * C);
  for (std::size_t t = 0; t < N; ++t) {
    double mx = logits.at(t * C);
    for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, logits.at(t * C + c));
    double z = 0.0;
    for (std::size_t c = 0; c < C; ++c) z += std::exp(logits.at(t * C + c) - mx);
    const double lse = mx + std::log(z);
    v[t] = lse - logits.at(t * C + label);
    for (std::size_t c = 0; c < C; ++c)
      soft[t * C + c] = std::exp(logits.at(t * C + c) - lse);
  }
  return Tensor::from_op(Shape{N}, std::move(v), {logits},
                         [soft = std::move(soft), label, C](Node& n) {
                           Node& p = *n.parents[0];
                           if (!p.requires_grad) return;
                           ensure_grad(p);
                           for (std::size_t t = 0; t < n.grad.size(); ++t) {
                             const double g = n.grad[t];
                             for (std::size_t c = 0; c < C; ++c) {
                               double d = soft[t * C + c];
                               if (c == label) d -= 1.0;
                               p.grad[t * C + c] += g * d;
                             }
                           }
                         });
}

Tensor dropout(const Tensor& x, double rate, bool training,
               std::mt19937_64* rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw std::invalid_argument("dropout: rate must be in [0,1)");
  if (!training || rate == 0.0) return x;
  if (rng == nullptr)
    throw std::invalid_argument("dropout: training mode requires an rng");
  const double keep = 1.0 - rate;
  std::vector<double> mask(x.numel());
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (double& m : mask) m = uni(*rng) < keep ? 1.0 / keep : 0.0;
  std::vector<double> v(x.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = x.at(i) * mask[i];
  return Tensor::from_op(x.shape(), std::move(v), {x},
                         [mask = std::move(mask)](Node& n) {
                           Node& p = *n.parents[0];
                           if (!p.requires_grad) return;
                           ensure_grad(p);
                           for (std::size_t i = 0; i < n.grad.size(); ++i)
                             p.grad[i] += n.grad[i] * mask[i];
                         });
}

BatchNormState::BatchNormState(std::size_t dim)
    : gamma(Tensor::full(Shape{dim}, 1.0, true)),
      beta(Tensor::zeros(Shape{dim}, true)),
      running_mean(dim, 0.0),
      running_var(dim, 1.0) {}

Tensor batch_norm(const Tensor& x, BatchNormState& state, bool training) {
  require_rank2(x, "batch_norm");
  const std::size_t B = x.shape()[0], D = x.shape()[1];
  if (D != state.gamma.numel())
    throw std::invalid_argument("batch_norm: feature dim mismatch");
  const double eps = state.eps;

  if (!training) {
    std::vector<double> v(B * D);
    std::vector<double> inv(D);
    for (std::size_t d = 0; d < D; ++d)
      inv[d] = 1.0 / std::sqrt(state.running_var[d] + eps);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t d = 0; d < D; ++d)
        v[b * D + d] = state.gamma.at(d) *
                           (x.at(b * D + d) - state.running_mean[d]) * inv[d] +
                       state.beta.at(d);
    std::vector<double> rm = state.running_mean;
    return Tensor::from_op(
        Shape{B, D}, std::move(v), {x, state.gamma, state.beta},
        [inv = std::move(inv), rm = std::move(rm), D](Node& n) {
          Node& px = *n.parents[0];
          Node& pg = *n.parents[1];
          Node& pb = *n.parents[2];
          const std::size_t B2 = n.shape[0];
          if (px.requires_grad) ensure_grad(px);
          if (pg.requires_grad) ensure_grad(pg);
          if (pb.requires_grad) ensure_grad(pb);
          for (std::size_t b = 0; b < B2; ++b)
            for (std::size_t d = 0; d < D; ++d) {
              const double g = n.grad[b * D + d];
              const double xhat = (px.values[b * D + d] - rm[d]) * inv[d];
              if (px.requires_grad)
                px.grad[b * D + d] += g * pg.values[d] * inv[d];
              if (pg.requires_grad) pg.grad[d] += g * xhat;
              if (pb.requires_grad) pb.grad[d] += g;
            }
        });
  }

  if (B < 2)
    throw std::invalid_argument(
        "batch_norm: training requires batch size > 1 (variance degenerate)");

  std::vector<double> mu(D, 0.0), var(D, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t d = 0; d < D; ++d) mu[d] += x.at(b * D + d);
  for (std::size_t d = 0; d < D; ++d) mu[d] /= double(B);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t d = 0; d < D; ++d) {
      const double c = x.at(b * D + d) - mu[d];
      var[d] += c * c;
    }
  for (std::size_t d = 0; d < D; ++d) var[d] /= double(B);

  const double m = state.momentum;
  for (std::size_t d = 0; d < D; ++d) {
    state.running_mean[d] = m * state.running_mean[d] + (1.0 - m) * mu[d];
    state.running_var[d] = m * state.running_var[d] + (1.0 - m) * var[d];
  }

  std::vector<double> inv(D), xhat(B * D), v(B * D);
  for (std::size_t d = 0; d < D; ++d) inv[d] = 1.0 / std::sqrt(var[d] + eps);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t d = 0; d < D; ++d) {
      xhat[b * D + d] = (x.at(b * D + d) - mu[d]) * inv[d];
      v[b * D + d] = state.gamma.at(d) * xhat[b * D + d] + state.beta.at(d);
    }
  return Tensor::from_op(
      Shape{B, D}, std::move(v), {x, state.gamma, state.beta},
      [xhat = std::move(xhat), inv = std::move(inv), D](Node& n) {
        Node& px = *n.parents[0];
        Node& pg = *n.parents[1];
        Node& pb = *n.parents[2];
        const std::size_t B2 = n.shape[0];
        std::vector<double> gsum(D, 0.0), gxsum(D, 0.0);
        for (std::size_t b = 0; b < B2; ++b)
          for (std::size_t d = 0; d < D; ++d) {
            gsum[d] += n.grad[b * D + d];
            gxsum[d] += n.grad[b * D + d] * xhat[b * D + d];
          }
        if (pg.requires_grad) {
          ensure_grad(pg);
          for (std::size_t d = 0; d < D; ++d) pg.grad[d] += gxsum[d];
        }
        if (pb.requires_grad) {
          ensure_grad(pb);
          for (std::size_t d = 0; d < D; ++d) pb.grad[d] += gsum[d];
        }
        if (px.requires_grad) {
          ensure_grad(px);
          for (std::size_t b = 0; b < B2; ++b)
            for (std::size_t d = 0; d < D; ++d) {
              const double t = double(B2) * n.grad[b * D + d] - gsum[d] -
                               xhat[b * D + d] * gxsum[d];
              px.grad[b * D + d] +=
                  pg.values[d] * inv[d] * t / double(B2);
            }
        }
      });
}

}  // namespace ehalt
