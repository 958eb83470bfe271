#pragma once

#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ehalt/dataio.hpp"
#include "ehalt/ops.hpp"
#include "ehalt/tensor.hpp"

namespace ehalt {

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

struct ConvShapeletConfig {
  int num_blocks = 4;        // L
  int kernels_per_block = 8; // d
  int width_step = 3;        // δ_w; block l (1-based) uses width l·δ_w
  int input_dim = 1;
  double dropout_rate = 0.5;

  int hidden_dim() const { return num_blocks * kernels_per_block; }
  int kernel_width(int block) const { return (block + 1) * width_step; }
};

struct LstmConfig {
  int num_layers = 2;  // n
  int hidden_dim = 32; // r
  int input_dim = 1;
};

class Backbone {
 public:
  virtual ~Backbone() = default;
  virtual int feature_dim() const = 0;
  // Hidden features for every prefix of the series: [N × feature_dim].
  // Row t depends only on x_0..x_t.
  virtual Tensor prefix_features(const std::vector<double>& series,
                                 std::size_t n, bool training,
                                 std::mt19937_64* rng) = 0;
  // Hidden feature vector for the single prefix x_0..x_t: [feature_dim].
  virtual Tensor features_at(const std::vector<double>& series, std::size_t n,
                             std::size_t t, bool training,
                             std::mt19937_64* rng) = 0;
  // Whole-minibatch variant; normalization statistics (when the backbone has
  // any) pool over every prefix row in the batch.
  virtual std::vector<Tensor> prefix_features_batch(
      const std::vector<const LabeledSeries*>& batch, bool training,
      std::mt19937_64* rng);
  virtual void named_params(NamedParams& out) = 0;
};

class ConvShapeletBackbone final : public Backbone {
 public:
  ConvShapeletBackbone(const ConvShapeletConfig& cfg, std::mt19937_64& init_rng);

  int feature_dim() const override { return cfg_.hidden_dim(); }
  Tensor prefix_features(const std::vector<double>& series, std::size_t n,
                         bool training, std::mt19937_64* rng) override;
  Tensor features_at(const std::vector<double>& series, std::size_t n,
                     std::size_t t, bool training,
                     std::mt19937_64* rng) override;
  std::vector<Tensor> prefix_features_batch(
      const std::vector<const LabeledSeries*>& batch, bool training,
      std::mt19937_64* rng) override;
  void named_params(NamedParams& out) override;

  const ConvShapeletConfig& config() const { return cfg_; }
  BatchNormState& bn_state() { return bn_; }

 private:
  // conv + prefix max pooling, before normalization and dropout
  Tensor raw_features(const std::vector<double>& series, std::size_t n);

  ConvShapeletConfig cfg_;
  std::vector<Tensor> kernels_;  // per block [w^l × D_in × d]
  std::vector<Tensor> biases_;   // per block [d]
  BatchNormState bn_;
};

struct LstmState {
  std::vector<Tensor> h;  // per layer [r]
  std::vector<Tensor> c;
};

class StackedLstmBackbone final : public Backbone {
 public:
  StackedLstmBackbone(const LstmConfig& cfg, std::mt19937_64& init_rng);

  int feature_dim() const override { return cfg_.hidden_dim; }
  Tensor prefix_features(const std::vector<double>& series, std::size_t n,
                         bool training, std::mt19937_64* rng) override;
  Tensor features_at(const std::vector<double>& series, std::size_t n,
                     std::size_t t, bool training,
                     std::mt19937_64* rng) override;
  void named_params(NamedParams& out) override;

  LstmState initial_state() const;
  // One timestep through the stack; returns the top hidden vector.
  std::pair<Tensor, LstmState> step(const Tensor& x_t,
                                    const LstmState& state) const;
  const LstmConfig& config() const { return cfg_; }

 private:
  LstmConfig cfg_;
  std::vector<Tensor> weight_;  // per layer [(in+r) × 4r], gates [i|f|g|o]
  std::vector<Tensor> bias_;    // per layer [4r], forget slice init 1
};

// Uniform ±1/sqrt(fan_in) initialization.
Tensor init_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng);

}  // namespace ehalt
