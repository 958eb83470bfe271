#include "ehalt/backbones.hpp"

#include <cmath>
#include <stdexcept>

namespace ehalt {

Tensor init_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(double(fan_in));
  std::uniform_real_distribution<double> uni(-bound, bound);
  std::vector<double> v(shape.numel());
  for (double& x : v) x = uni(rng);
  return Tensor::leaf(std::move(shape), std::move(v), true);
}

// ---------------------------------------------------------------------------
// Conv-shapelet backbone

ConvShapeletBackbone::ConvShapeletBackbone(const ConvShapeletConfig& cfg,
                                           std::mt19937_64& init_rng)
    : cfg_(cfg), bn_(std::size_t(cfg.hidden_dim())) {
  if (cfg.num_blocks < 1 || cfg.kernels_per_block < 1 || cfg.width_step < 1 ||
      cfg.input_dim < 1)
    throw std::invalid_argument("ConvShapeletConfig: counts must be >= 1");
  if (cfg.dropout_rate < 0.0 || cfg.dropout_rate >= 1.0)
    throw std::invalid_argument("ConvShapeletConfig: dropout rate in [0,1)");
  for (int l = 0; l < cfg.num_blocks; ++l) {
    const std::size_t w = std::size_t(cfg.kernel_width(l));
    const std::size_t din = std::size_t(cfg.input_dim);
    const std::size_t d = std::size_t(cfg.kernels_per_block);
    kernels_.push_back(init_uniform(Shape{w, din, d}, w * din, init_rng));
    biases_.push_back(Tensor::zeros(Shape{d}, true));
  }
}

std::vector<Tensor> Backbone::prefix_features_batch(
    const std::vector<const LabeledSeries*>& batch, bool training,
    std::mt19937_64* rng) {
  std::vector<Tensor> out;
  out.reserve(batch.size());
  for (const LabeledSeries* s : batch)
    out.push_back(prefix_features(s->values, s->length, training, rng));
  return out;
}

Tensor ConvShapeletBackbone::raw_features(const std::vector<double>& series,
                                          std::size_t n) {
  if (n < 1) throw std::invalid_argument("prefix_features: empty series");
  Tensor x = Tensor::leaf(Shape{n, std::size_t(cfg_.input_dim)},
                          std::vector<double>(series.begin(),
                                              series.begin() + n * cfg_.input_dim));
  std::vector<Tensor> pooled;
  pooled.reserve(kernels_.size());
  for (std::size_t l = 0; l < kernels_.size(); ++l) {
    Tensor f = conv1d_causal(x, kernels_[l], biases_[l]);
    pooled.push_back(prefix_max_rows(f));
  }
  return concat_cols(pooled);  // [N × L·d]
}

Tensor ConvShapeletBackbone::prefix_features(const std::vector<double>& series,
                                             std::size_t n, bool training,
                                             std::mt19937_64* rng) {
  Tensor h = batch_norm(raw_features(series, n), bn_, training);
  return dropout(h, cfg_.dropout_rate, training, rng);
}

std::vector<Tensor> ConvShapeletBackbone::prefix_features_batch(
    const std::vector<const LabeledSeries*>& batch, bool training,
    std::mt19937_64* rng) {
  if (batch.empty())
    throw std::invalid_argument("prefix_features_batch: empty batch");
  std::vector<Tensor> raw;
  raw.reserve(batch.size());
  for (const LabeledSeries* s : batch)
    raw.push_back(raw_features(s->values, s->length));
  // pool the normalization statistics over every prefix row in the batch
  Tensor all = batch_norm(concat_rows(raw), bn_, training);
  all = dropout(all, cfg_.dropout_rate, training, rng);
  std::vector<Tensor> out;
  out.reserve(batch.size());
  std::size_t off = 0;
  for (const LabeledSeries* s : batch) {
    out.push_back(slice_rows(all, off, s->length));
    off += s->length;
  }
  return out;
}

Tensor ConvShapeletBackbone::features_at(const std::vector<double>& series,
                                         std::size_t n, std::size_t t,
                                         bool training, std::mt19937_64* rng) {
  if (t >= n) throw std::out_of_range("features_at: t out of range");
  Tensor x = Tensor::leaf(Shape{n, std::size_t(cfg_.input_dim)},
                          std::vector<double>(series.begin(),
                                              series.begin() + n * cfg_.input_dim));
  std::vector<Tensor> pooled;
  pooled.reserve(kernels_.size());
  for (std::size_t l = 0; l < kernels_.size(); ++l) {
    Tensor f = conv1d_causal(x, kernels_[l], biases_[l]);
    pooled.push_back(prefix_max_pool(f, t));
  }
  Tensor h = concat_features(pooled);  // [L·d]
  Tensor hm = reshape(h, Shape{1, h.numel()});
  hm = batch_norm(hm, bn_, training);  // batch of 1: training mode rejects
  hm = dropout(hm, cfg_.dropout_rate, training, rng);
  return reshape(hm, Shape{h.numel()});
}

void ConvShapeletBackbone::named_params(NamedParams& out) {
  for (std::size_t l = 0; l < kernels_.size(); ++l) {
    out.emplace_back("conv.block" + std::to_string(l) + ".kernel", kernels_[l]);
    out.emplace_back("conv.block" + std::to_string(l) + ".bias", biases_[l]);
  }
  out.emplace_back("conv.bn.gamma", bn_.gamma);
  out.emplace_back("conv.bn.beta", bn_.beta);
}

// ---------------------------------------------------------------------------
// Stacked LSTM backbone

StackedLstmBackbone::StackedLstmBackbone(const LstmConfig& cfg,
                                         std::mt19937_64& init_rng)
    : cfg_(cfg) {
  if (cfg.num_layers < 1 || cfg.hidden_dim < 1 || cfg.input_dim < 1)
    throw std::invalid_argument("LstmConfig: counts must be >= 1");
  const std::size_t r = std::size_t(cfg.hidden_dim);
  for (int l = 0; l < cfg.num_layers; ++l) {
    const std::size_t in = l == 0 ? std::size_t(cfg.input_dim) : r;
    weight_.push_back(init_uniform(Shape{in + r, 4 * r}, in + r, init_rng));
    Tensor b = Tensor::zeros(Shape{4 * r}, true);
    // forget-gate bias init 1
    for (std::size_t i = r; i < 2 * r; ++i) b.mutable_values()[i] = 1.0;
    bias_.push_back(b);
  }
}

LstmState StackedLstmBackbone::initial_state() const {
  LstmState st;
  const std::size_t r = std::size_t(cfg_.hidden_dim);
  for (int l = 0; l < cfg_.num_layers; ++l) {
    st.h.push_back(Tensor::zeros(Shape{r}));
    st.c.push_back(Tensor::zeros(Shape{r}));
  }
  return st;
}

std::pair<Tensor, LstmState> StackedLstmBackbone::step(
    const Tensor& x_t, const LstmState& state) const {
  if (state.h.size() != std::size_t(cfg_.num_layers))
    throw std::invalid_argument("lstm step: state layer count mismatch");
  if (x_t.numel() != std::size_t(cfg_.input_dim))
    throw std::invalid_argument("lstm step: input dim mismatch, got " +
                                std::to_string(x_t.numel()) + " expected " +
                                std::to_string(cfg_.input_dim));
  const std::size_t r = std::size_t(cfg_.hidden_dim);
  LstmState next;
  Tensor input = x_t;
  for (int l = 0; l < cfg_.num_layers; ++l) {
    Tensor in = concat_features({input, state.h[l]});
    Tensor z = linear(reshape(in, Shape{1, in.numel()}), weight_[l], bias_[l]);
    Tensor i = sigmoid(reshape(slice_cols(z, 0, r), Shape{r}));
    Tensor f = sigmoid(reshape(slice_cols(z, r, r), Shape{r}));
    Tensor g = tanh(reshape(slice_cols(z, 2 * r, r), Shape{r}));
    Tensor o = sigmoid(reshape(slice_cols(z, 3 * r, r), Shape{r}));
    Tensor c = add(mul(f, state.c[l]), mul(i, g));
    Tensor h = mul(o, tanh(c));
    next.c.push_back(c);
    next.h.push_back(h);
    input = h;
  }
  return {next.h.back(), next};
}

// Fused forward/BPTT over the whole sequence. One graph node instead of
// O(N·layers) nodes; the step() path above is the reference implementation.
Tensor StackedLstmBackbone::prefix_features(const std::vector<double>& series,
                                            std::size_t n, bool /*training*/,
                                            std::mt19937_64* /*rng*/) {
  if (n < 1) throw std::invalid_argument("prefix_features: empty series");
  const std::size_t din = std::size_t(cfg_.input_dim);
  const std::size_t r = std::size_t(cfg_.hidden_dim);
  const std::size_t layers = std::size_t(cfg_.num_layers);

  // Cached activations per layer: gates i,f,o, candidate g, cell c, tanh(c),
  // hidden h, all [N×r].
  struct LayerCache {
    std::vector<double> ig, fg, og, gg, c, tc, h;
  };
  auto cache = std::make_shared<std::vector<LayerCache>>(layers);
  for (auto& lc : *cache) {
    lc.ig.assign(n * r, 0.0);
    lc.fg.assign(n * r, 0.0);
    lc.og.assign(n * r, 0.0);
    lc.gg.assign(n * r, 0.0);
    lc.c.assign(n * r, 0.0);
    lc.tc.assign(n * r, 0.0);
    lc.h.assign(n * r, 0.0);
  }

  auto sig = [](double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                    : std::exp(z) / (1.0 + std::exp(z));
  };

  std::vector<double> z(4 * r);
  for (std::size_t l = 0; l < layers; ++l) {
    LayerCache& lc = (*cache)[l];
    const std::size_t in_dim = l == 0 ? din : r;
    const auto& w = weight_[l].values();
    const auto& b = bias_[l].values();
    for (std::size_t t = 0; t < n; ++t) {
      const double* below =
          l == 0 ? series.data() + t * din : (*cache)[l - 1].h.data() + t * r;
      const double* h_prev = t == 0 ? nullptr : lc.h.data() + (t - 1) * r;
      for (std::size_t o = 0; o < 4 * r; ++o) z[o] = b[o];
      for (std::size_t i = 0; i < in_dim; ++i) {
        const double xi = below[i];
        if (xi == 0.0) continue;
        const double* wrow = w.data() + i * 4 * r;
        for (std::size_t o = 0; o < 4 * r; ++o) z[o] += xi * wrow[o];
      }
      if (h_prev) {
        for (std::size_t i = 0; i < r; ++i) {
          const double hi = h_prev[i];
          if (hi == 0.0) continue;
          const double* wrow = w.data() + (in_dim + i) * 4 * r;
          for (std::size_t o = 0; o < 4 * r; ++o) z[o] += hi * wrow[o];
        }
      }
      for (std::size_t j = 0; j < r; ++j) {
        const double ig = sig(z[j]);
        const double fg = sig(z[r + j]);
        const double gg = std::tanh(z[2 * r + j]);
        const double og = sig(z[3 * r + j]);
        const double c_prev = t == 0 ? 0.0 : lc.c[(t - 1) * r + j];
        const double c = fg * c_prev + ig * gg;
        const double tc = std::tanh(c);
        lc.ig[t * r + j] = ig;
        lc.fg[t * r + j] = fg;
        lc.gg[t * r + j] = gg;
        lc.og[t * r + j] = og;
        lc.c[t * r + j] = c;
        lc.tc[t * r + j] = tc;
        lc.h[t * r + j] = og * tc;
      }
    }
  }

  std::vector<double> out = cache->back().h;
  std::vector<Tensor> parents;
  for (std::size_t l = 0; l < layers; ++l) {
    parents.push_back(weight_[l]);
    parents.push_back(bias_[l]);
  }

  std::vector<double> x_copy(series.begin(), series.begin() + n * din);
  return Tensor::from_op(
      Shape{n, r}, std::move(out), parents,
      [cache, x_copy = std::move(x_copy), n, r, din,
       layers](detail::Node& node) {
        // dout: grad arriving at each layer's h over all t; top layer gets
        // the node grad, lower layers collect it from the layer above.
        std::vector<double> dout(node.grad);
        std::vector<double> dbelow(n * r, 0.0);
        std::vector<double> dh(r), dc(r), dz(4 * r);
        for (std::size_t l = layers; l-- > 0;) {
          const LayerCache& lc = (*cache)[l];
          const std::size_t in_dim = l == 0 ? din : r;
          detail::Node& wn = *node.parents[2 * l];
          detail::Node& bn = *node.parents[2 * l + 1];
          const bool want_w = wn.requires_grad;
          const bool want_b = bn.requires_grad;
          if (want_w) detail::ensure_grad(wn);
          if (want_b) detail::ensure_grad(bn);
          std::fill(dbelow.begin(), dbelow.end(), 0.0);
          std::fill(dh.begin(), dh.end(), 0.0);
          std::fill(dc.begin(), dc.end(), 0.0);
          for (std::size_t t = n; t-- > 0;) {
            for (std::size_t j = 0; j < r; ++j) {
              const std::size_t idx = t * r + j;
              const double dht = dout[idx] + dh[j];
              const double og = lc.og[idx], tc = lc.tc[idx];
              const double ig = lc.ig[idx], fg = lc.fg[idx], gg = lc.gg[idx];
              const double c_prev = t == 0 ? 0.0 : lc.c[idx - r];
              const double dct = dht * og * (1.0 - tc * tc) + dc[j];
              dz[j] = dct * gg * ig * (1.0 - ig);
              dz[r + j] = dct * c_prev * fg * (1.0 - fg);
              dz[2 * r + j] = dct * ig * (1.0 - gg * gg);
              dz[3 * r + j] = dht * tc * og * (1.0 - og);
              dc[j] = dct * fg;
            }
            if (want_b)
              for (std::size_t o = 0; o < 4 * r; ++o) bn.grad[o] += dz[o];
            const double* below = l == 0 ? x_copy.data() + t * din
                                         : (*cache)[l - 1].h.data() + t * r;
            const double* h_prev = t == 0 ? nullptr : lc.h.data() + (t - 1) * r;
            if (want_w) {
              for (std::size_t i = 0; i < in_dim; ++i) {
                const double xi = below[i];
                if (xi == 0.0) continue;
                double* wrow = wn.grad.data() + i * 4 * r;
                for (std::size_t o = 0; o < 4 * r; ++o) wrow[o] += xi * dz[o];
              }
              if (h_prev)
                for (std::size_t i = 0; i < r; ++i) {
                  const double hi = h_prev[i];
                  if (hi == 0.0) continue;
                  double* wrow = wn.grad.data() + (in_dim + i) * 4 * r;
                  for (std::size_t o = 0; o < 4 * r; ++o) wrow[o] += hi * dz[o];
                }
            }
            // propagate through W to the layer below and to h_{t-1}
            if (l > 0) {
              const auto& w = wn.values;
              double* db = dbelow.data() + t * r;
              for (std::size_t i = 0; i < in_dim; ++i) {
                const double* wrow = w.data() + i * 4 * r;
                double s = 0.0;
                for (std::size_t o = 0; o < 4 * r; ++o) s += wrow[o] * dz[o];
                db[i] += s;
              }
            }
            {
              const auto& w = wn.values;
              for (std::size_t i = 0; i < r; ++i) {
                const double* wrow = w.data() + (in_dim + i) * 4 * r;
                double s = 0.0;
                for (std::size_t o = 0; o < 4 * r; ++o) s += wrow[o] * dz[o];
                dh[i] = s;
              }
            }
          }
          if (l > 0) dout = dbelow;
        }
      });
}

Tensor StackedLstmBackbone::features_at(const std::vector<double>& series,
                                        std::size_t n, std::size_t t,
                                        bool training, std::mt19937_64* rng) {
  if (t >= n) throw std::out_of_range("features_at: t out of range");
  Tensor all = prefix_features(series, t + 1, training, rng);
  return row(all, t);
}

void StackedLstmBackbone::named_params(NamedParams& out) {
  for (std::size_t l = 0; l < weight_.size(); ++l) {
    out.emplace_back("lstm.layer" + std::to_string(l) + ".weight", weight_[l]);
    out.emplace_back("lstm.layer" + std::to_string(l) + ".bias", bias_[l]);
  }
}

}  // namespace ehalt
