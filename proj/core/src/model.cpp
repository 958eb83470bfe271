#include "ehalt/model.hpp"

#include <stdexcept>

#include "ehalt/ops.hpp"

namespace ehalt {

BackboneKind parse_backbone_kind(const std::string& name) {
  if (name == "conv") return BackboneKind::kConvShapelet;
  if (name == "lstm") return BackboneKind::kStackedLstm;
  throw std::invalid_argument("unknown backbone: " + name);
}

std::string backbone_kind_name(BackboneKind kind) {
  return kind == BackboneKind::kConvShapelet ? "conv" : "lstm";
}

Model::Model(const ModelConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  if (cfg.num_classes < 2)
    throw std::invalid_argument("ModelConfig: need at least 2 classes");
  std::mt19937_64 rng(init_seed);
  if (cfg.kind == BackboneKind::kConvShapelet)
    backbone_ = std::make_unique<ConvShapeletBackbone>(cfg.conv, rng);
  else
    backbone_ = std::make_unique<StackedLstmBackbone>(cfg.lstm, rng);
  const std::size_t h = std::size_t(backbone_->feature_dim());
  const std::size_t c = std::size_t(cfg.num_classes);
  cls_weight_ = init_uniform(Shape{h, c}, h, rng);
  cls_bias_ = Tensor::zeros(Shape{c}, true);
  stop_weight_ = init_uniform(Shape{h, 1}, h, rng);
  stop_bias_ = Tensor::zeros(Shape{1}, true);
}

Model::Forward Model::forward(const std::vector<double>& series, std::size_t n,
                              bool training, std::mt19937_64* rng) {
  Forward f;
  f.hidden = backbone_->prefix_features(series, n, training, rng);
  f.logits = linear(f.hidden, cls_weight_, cls_bias_);
  f.probs = softmax_rows(f.logits);
  f.delta = sigmoid(reshape(linear(f.hidden, stop_weight_, stop_bias_),
                            Shape{n}));
  return f;
}

Model::Forward Model::forward(const LabeledSeries& s, bool training,
                              std::mt19937_64* rng) {
  if (s.dim != std::size_t(cfg_.input_dim()))
    throw std::invalid_argument("Model::forward: series dim " +
                                std::to_string(s.dim) + " != model input dim " +
                                std::to_string(cfg_.input_dim()));
  return forward(s.values, s.length, training, rng);
}

std::vector<Model::Forward> Model::forward_batch(
    const std::vector<const LabeledSeries*>& batch, bool training,
    std::mt19937_64* rng) {
  for (const LabeledSeries* s : batch)
    if (s->dim != std::size_t(cfg_.input_dim()))
      throw std::invalid_argument("Model::forward_batch: series dim " +
                                  std::to_string(s->dim) +
                                  " != model input dim " +
                                  std::to_string(cfg_.input_dim()));
  auto hidden = backbone_->prefix_features_batch(batch, training, rng);
  std::vector<Forward> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Forward f;
    f.hidden = hidden[i];
    f.logits = linear(f.hidden, cls_weight_, cls_bias_);
    f.probs = softmax_rows(f.logits);
    f.delta = sigmoid(reshape(linear(f.hidden, stop_weight_, stop_bias_),
                              Shape{batch[i]->length}));
    out.push_back(std::move(f));
  }
  return out;
}

void Model::init_late_stopping() {
  std::fill(stop_weight_.mutable_values().begin(),
            stop_weight_.mutable_values().end(), 0.0);
  stop_bias_.mutable_values()[0] = -5.0;
}

NamedParams Model::named_parameters() {
  NamedParams out;
  backbone_->named_params(out);
  out.emplace_back("head.cls.weight", cls_weight_);
  out.emplace_back("head.cls.bias", cls_bias_);
  out.emplace_back("head.stop.weight", stop_weight_);
  out.emplace_back("head.stop.bias", stop_bias_);
  return out;
}

std::size_t Model::parameter_count() {
  std::size_t n = 0;
  for (auto& [name, p] : named_parameters()) n += p.numel();
  return n;
}

Model::NamedBuffers Model::named_buffers() {
  NamedBuffers out;
  if (cfg_.kind == BackboneKind::kConvShapelet) {
    auto& conv = static_cast<ConvShapeletBackbone&>(*backbone_);
    out.emplace_back("conv.bn.running_mean", &conv.bn_state().running_mean);
    out.emplace_back("conv.bn.running_var", &conv.bn_state().running_var);
  }
  return out;
}

}  // namespace ehalt
