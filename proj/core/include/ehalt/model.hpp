#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>

#include "ehalt/backbones.hpp"
#include "ehalt/dataio.hpp"
#include "ehalt/tensor.hpp"

namespace ehalt {

enum class BackboneKind { kConvShapelet, kStackedLstm };

BackboneKind parse_backbone_kind(const std::string& name);
std::string backbone_kind_name(BackboneKind kind);

struct ModelConfig {
  BackboneKind kind = BackboneKind::kConvShapelet;
  ConvShapeletConfig conv;
  LstmConfig lstm;
  int num_classes = 2;

  int input_dim() const {
    return kind == BackboneKind::kConvShapelet ? conv.input_dim
                                               : lstm.input_dim;
  }
};

// Backbone plus the classification head θ_cl and stopping head θ_δ.
class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t init_seed);

  struct Forward {
    Tensor hidden;  // [N × H]
    Tensor logits;  // [N × C]
    Tensor probs;   // [N × C], rows sum to 1
    Tensor delta;   // [N], raw sigmoid outputs (no terminal override)
  };

  Forward forward(const std::vector<double>& series, std::size_t n,
                  bool training, std::mt19937_64* rng);
  Forward forward(const LabeledSeries& s, bool training, std::mt19937_64* rng);
  // Whole-minibatch forward; batch-norm statistics pool over the batch.
  std::vector<Forward> forward_batch(
      const std::vector<const LabeledSeries*>& batch, bool training,
      std::mt19937_64* rng);

  void init_late_stopping();

  NamedParams named_parameters();
  std::size_t parameter_count();

  const ModelConfig& config() const { return cfg_; }
  Backbone& backbone() { return *backbone_; }
  Tensor& cls_weight() { return cls_weight_; }
  Tensor& cls_bias() { return cls_bias_; }
  Tensor& stop_weight() { return stop_weight_; }
  Tensor& stop_bias() { return stop_bias_; }

  // Non-learnable state (batch-norm running statistics), for checkpoints.
  using NamedBuffers = std::vector<std::pair<std::string, std::vector<double>*>>;
  NamedBuffers named_buffers();

 private:
  ModelConfig cfg_;
  std::unique_ptr<Backbone> backbone_;
  Tensor cls_weight_, cls_bias_;    // θ_cl: [H×C], [C]
  Tensor stop_weight_, stop_bias_;  // θ_δ: [H×1], [1]
};

}  // namespace ehalt
