#include "ehalt/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace ehalt {

namespace {

constexpr const char* kMagic = "EHALT1";

nlohmann::json config_to_json(const ModelConfig& cfg) {
  nlohmann::json j;
  j["backbone"] = backbone_kind_name(cfg.kind);
  j["num_classes"] = cfg.num_classes;
  if (cfg.kind == BackboneKind::kConvShapelet) {
    j["conv"] = {{"num_blocks", cfg.conv.num_blocks},
                 {"kernels_per_block", cfg.conv.kernels_per_block},
                 {"width_step", cfg.conv.width_step},
                 {"input_dim", cfg.conv.input_dim},
                 {"dropout_rate", cfg.conv.dropout_rate}};
  } else {
    j["lstm"] = {{"num_layers", cfg.lstm.num_layers},
                 {"hidden_dim", cfg.lstm.hidden_dim},
                 {"input_dim", cfg.lstm.input_dim}};
  }
  return j;
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.kind = parse_backbone_kind(j.at("backbone").get<std::string>());
  cfg.num_classes = j.at("num_classes").get<int>();
  if (cfg.kind == BackboneKind::kConvShapelet) {
    const auto& c = j.at("conv");
    cfg.conv.num_blocks = c.at("num_blocks").get<int>();
    cfg.conv.kernels_per_block = c.at("kernels_per_block").get<int>();
    cfg.conv.width_step = c.at("width_step").get<int>();
    cfg.conv.input_dim = c.at("input_dim").get<int>();
    cfg.conv.dropout_rate = c.at("dropout_rate").get<double>();
  } else {
    const auto& l = j.at("lstm");
    cfg.lstm.num_layers = l.at("num_layers").get<int>();
    cfg.lstm.hidden_dim = l.at("hidden_dim").get<int>();
    cfg.lstm.input_dim = l.at("input_dim").get<int>();
  }
  return cfg;
}

}  // namespace

void save_checkpoint(Model& model, const std::string& path) {
  nlohmann::json j;
  j["config"] = config_to_json(model.config());
  nlohmann::json params = nlohmann::json::object();
  for (auto& [name, p] : model.named_parameters()) params[name] = p.values();
  j["params"] = std::move(params);
  nlohmann::json buffers = nlohmann::json::object();
  for (auto& [name, b] : model.named_buffers()) buffers[name] = *b;
  j["buffers"] = std::move(buffers);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out << kMagic << '\n' << j.dump(2) << '\n';
}

std::unique_ptr<Model> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  std::string magic;
  std::getline(in, magic);
  if (magic != kMagic)
    throw std::runtime_error("checkpoint " + path +
                             ": bad magic header (expected EHALT1)");
  nlohmann::json j;
  in >> j;

  auto model = std::make_unique<Model>(config_from_json(j.at("config")), 0);
  for (auto& [name, p] : model->named_parameters()) {
    const auto& arr = j.at("params").at(name);
    auto values = arr.get<std::vector<double>>();
    if (values.size() != p.numel())
      throw std::runtime_error("checkpoint " + path + ": parameter '" + name +
                               "' has wrong size");
    p.mutable_values() = std::move(values);
  }
  for (auto& [name, b] : model->named_buffers()) {
    const auto& arr = j.at("buffers").at(name);
    auto values = arr.get<std::vector<double>>();
    if (values.size() != b->size())
      throw std::runtime_error("checkpoint " + path + ": buffer '" + name +
                               "' has wrong size");
    *b = std::move(values);
  }
  return model;
}

}  // namespace ehalt
