#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "ehalt/tensor.hpp"

namespace ehalt {

// Elementwise / reductions ---------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor dot(const Tensor& a, const Tensor& b);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);

// Shape plumbing -------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape);
Tensor row(const Tensor& x, std::size_t i);            // [N×D] -> [D]
Tensor pick_col(const Tensor& x, std::size_t c);       // [N×C] -> [N]
Tensor slice_cols(const Tensor& x, std::size_t start,
                  std::size_t len);                    // [N×D] -> [N×len]
Tensor concat_features(const std::vector<Tensor>& parts);  // [D_i] -> [ΣD_i]
Tensor concat_cols(const std::vector<Tensor>& parts);  // [N×D_i] -> [N×ΣD_i]
Tensor concat_rows(const std::vector<Tensor>& parts);  // [N_i×D] -> [ΣN_i×D]
Tensor slice_rows(const Tensor& x, std::size_t start,
                  std::size_t len);                    // [N×D] -> [len×D]
Tensor stack_rows(const std::vector<Tensor>& rows);    // N of [D] -> [N×D]

// Layers ---------------------------------------------------------------------

// Row-wise affine map: x [N×D_in] @ weight [D_in×D_out] + bias [D_out].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Causal 1-D convolution. x [N×D_in], kernel [W×D_in×D_out], bias [D_out];
// the input is left-padded with W-1 zero frames so output t sees only
// x_0..x_t. W > N is allowed.
Tensor conv1d_causal(const Tensor& x, const Tensor& kernel, const Tensor& bias);

// Per-feature max over f[0..t]. Gradient goes to the first argmax.
Tensor prefix_max_pool(const Tensor& f, std::size_t t);  // [N×D] -> [D]
// All prefix maxima at once: out[t][d] = max(f[0..t][d]).
Tensor prefix_max_rows(const Tensor& f);  // [N×D] -> [N×D]

// Row softmax with max subtraction; rows sum to 1 within 1e-12.
Tensor softmax_rows(const Tensor& x);  // [N×C] -> [N×C]

// Per-row -log softmax(logits)[label], computed through log-sum-exp.
Tensor cross_entropy_with_logits(const Tensor& logits,
                                 std::size_t label);  // [N×C] -> [N]

// Inverted dropout; identity when training=false.
Tensor dropout(const Tensor& x, double rate, bool training,
               std::mt19937_64* rng);

struct BatchNormState {
  Tensor gamma;  // learnable scale [D]
  Tensor beta;   // learnable shift [D]
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.9;
  double eps = 1e-5;

  explicit BatchNormState(std::size_t dim);
};

// Feature-wise normalization over the batch axis of x [B×D]. Training uses
// batch statistics (B must be > 1) and updates the running estimates;
// inference uses the running estimates.
Tensor batch_norm(const Tensor& x, BatchNormState& state, bool training);

}  // namespace ehalt
