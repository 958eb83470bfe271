#pragma once

#include <memory>
#include <string>

#include "ehalt/model.hpp"

namespace ehalt {

// Checkpoint file: "EHALT1" magic line followed by a JSON document holding
// the model config, named flat parameter arrays, and batch-norm running
// statistics. Writing is deterministic for identical model state.
void save_checkpoint(Model& model, const std::string& path);

std::unique_ptr<Model> load_checkpoint(const std::string& path);

}  // namespace ehalt
