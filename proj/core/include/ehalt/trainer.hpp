#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ehalt/dataio.hpp"
#include "ehalt/model.hpp"
#include "ehalt/objective.hpp"

namespace ehalt {

enum class TrainPhase { kClassification, kFinetune };

struct TrainConfig {
  TrainPhase phase = TrainPhase::kClassification;
  TradeOff alpha{0.8};        // finetune only
  double learning_rate = 0.01;
  int epochs = 30;
  int batch_size = 32;
  std::uint64_t seed = 0;
  double grad_clip_norm = 10.0;  // applied to the LSTM backbone only
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<std::vector<double>> m, v;  // per parameter, value-shaped
};

// One bias-corrected Adam update, in place. Moment buffers are allocated on
// first use; non-finite gradients abort with the parameter's name.
void adam_step(NamedParams& params, AdamState& state, double lr);

struct EpochLog {
  int epoch = 0;
  std::string phase;
  double loss = 0.0;
  double cls_loss = 0.0;
  double earliness_loss = 0.0;
  double train_acc = 0.0;
  std::optional<double> val_acc;
  long wall_ms = 0;
};

std::string epoch_log_json(const EpochLog& e);

using TrainLog = std::vector<EpochLog>;

// Phase 1: uniform-prefix cross-entropy over the classifier and backbone.
// The stopping head is left untouched. Deterministic given the seed.
TrainLog train_phase1(Model& model, const std::vector<LabeledSeries>& train,
                      const TrainConfig& cfg,
                      const std::vector<LabeledSeries>* val = nullptr);

// Phase 2: end-to-end fine-tuning of all parameters under the halting-
// weighted joint loss. Applies the late-stopping initialization to the
// stopping head before the first step.
TrainLog train_phase2(Model& model, const std::vector<LabeledSeries>& train,
                      const TrainConfig& cfg,
                      const std::vector<LabeledSeries>* val = nullptr);

// Accuracy of the full-length prediction argmax ŷ_T.
double full_length_accuracy(Model& model,
                            const std::vector<LabeledSeries>& split);

struct GridPoint {
  ModelConfig model;
  double learning_rate = 0.01;
};

struct CvRow {
  GridPoint point;
  std::vector<double> fold_accuracy;
  double mean_accuracy = 0.0;
  std::size_t parameter_count = 0;
};

struct CvResult {
  std::vector<CvRow> table;
  std::size_t best_index = 0;
};

// Stratified k-fold selection on the train split; each grid point is trained
// phase-1 only and scored by mean holdout accuracy. Ties go to the smaller
// parameter count, then grid order.
CvResult grid_search_cv(const Dataset& dataset,
                        const std::vector<GridPoint>& grid, int k, int epochs,
                        int batch_size, std::uint64_t seed);

}  // namespace ehalt
