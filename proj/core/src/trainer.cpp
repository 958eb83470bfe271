#include "ehalt/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ehalt/halting.hpp"
#include "ehalt/ops.hpp"

namespace ehalt {

namespace {

bool is_stop_head(const std::string& name) {
  return name.rfind("head.stop.", 0) == 0;
}

void zero_grads(NamedParams& params) {
  for (auto& [name, p] : params) p.zero_grad();
}

void clip_grad_norm(NamedParams& params, double max_norm) {
  double sq = 0.0;
  for (auto& [name, p] : params) {
    if (!p.has_grad()) continue;
    for (double g : p.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm <= max_norm || norm == 0.0) return;
  const double s = max_norm / norm;
  for (auto& [name, p] : params) {
    if (!p.has_grad()) continue;
    for (double& g : p.grad()) g *= s;
  }
}

int argmax_row(const Tensor& probs, std::size_t t) {
  const std::size_t c = probs.shape()[1];
  int best = 0;
  for (std::size_t i = 1; i < c; ++i)
    if (probs.at(t * c + i) > probs.at(t * c + std::size_t(best)))
      best = int(i);
  return best;
}

struct EpochStats {
  double loss = 0.0, cls = 0.0, earl = 0.0;
  int correct = 0, total = 0;
};

using Clock = std::chrono::steady_clock;

long elapsed_ms(Clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() -
                                                               t0)
      .count();
}

}  // namespace

void adam_step(NamedParams& params, AdamState& state, double lr) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].second.numel(), 0.0);
      state.v[i].assign(params[i].second.numel(), 0.0);
    }
  }
  if (state.m.size() != params.size())
    throw std::invalid_argument("adam_step: state/parameter count mismatch");
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, double(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& [name, p] = params[i];
    if (!p.has_grad()) continue;
    auto& values = p.mutable_values();
    const auto& grad = p.grad();
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grad[j];
      if (!std::isfinite(g))
        throw std::runtime_error("adam_step: non-finite gradient in '" + name +
                                 "' at index " + std::to_string(j));
      state.m[i][j] = state.beta1 * state.m[i][j] + (1.0 - state.beta1) * g;
      state.v[i][j] =
          state.beta2 * state.v[i][j] + (1.0 - state.beta2) * g * g;
      const double mhat = state.m[i][j] / bc1;
      const double vhat = state.v[i][j] / bc2;
      values[j] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

std::string epoch_log_json(const EpochLog& e) {
  std::ostringstream os;
  os.precision(17);
  os << "{\"epoch\":" << e.epoch << ",\"phase\":\"" << e.phase << "\""
     << ",\"loss\":" << e.loss << ",\"cls_loss\":" << e.cls_loss
     << ",\"earliness_loss\":" << e.earliness_loss
     << ",\"train_acc\":" << e.train_acc;
  if (e.val_acc) os << ",\"val_acc\":" << *e.val_acc;
  os << ",\"wall_ms\":" << e.wall_ms << "}";
  return os.str();
}

double full_length_accuracy(Model& model,
                            const std::vector<LabeledSeries>& split) {
  if (split.empty()) return 0.0;
  int correct = 0;
  for (const auto& s : split) {
    auto f = model.forward(s, false, nullptr);
    if (argmax_row(f.probs, s.length - 1) == s.label) ++correct;
  }
  return double(correct) / double(split.size());
}

namespace {

TrainLog run_training(Model& model, const std::vector<LabeledSeries>& train,
                      const TrainConfig& cfg,
                      const std::vector<LabeledSeries>* val) {
  if (train.empty()) throw std::invalid_argument("train: empty dataset");
  if (cfg.epochs < 0 || cfg.batch_size < 1 || !(cfg.learning_rate > 0.0))
    throw std::invalid_argument("train: bad config");
  const bool finetune = cfg.phase == TrainPhase::kFinetune;
  if (finetune && !(cfg.alpha.alpha >= 0.0 && cfg.alpha.alpha <= 1.0))
    throw std::invalid_argument("train: alpha must lie in [0,1]");

  NamedParams params;
  for (auto& [name, p] : model.named_parameters()) {
    if (!finetune && is_stop_head(name)) continue;  // phase 1: θ_δ untouched
    params.emplace_back(name, p);
  }
  if (finetune) model.init_late_stopping();

  const bool clip = model.config().kind == BackboneKind::kStackedLstm &&
                    cfg.grad_clip_norm > 0.0;
  AdamState adam;
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  TrainLog log;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = Clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    EpochStats stats;
    for (std::size_t start = 0; start < order.size();
         start += std::size_t(cfg.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + std::size_t(cfg.batch_size));
      const double inv_batch = 1.0 / double(stop - start);
      zero_grads(params);
      std::vector<const LabeledSeries*> batch;
      batch.reserve(stop - start);
      for (std::size_t bi = start; bi < stop; ++bi)
        batch.push_back(&train[order[bi]]);
      auto fwd = model.forward_batch(batch, true, &rng);
      // the batch shares one graph (batch-norm pools across it), so the
      // per-series losses are summed and backpropagated once
      Tensor batch_loss;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const LabeledSeries& s = *batch[i];
        auto& f = fwd[i];
        Tensor loss;
        if (!finetune) {
          // uniform-prefix cross entropy, exact mean over all prefixes
          loss = mean(cross_entropy_with_logits(f.logits,
                                                std::size_t(s.label)));
          stats.loss += loss.item();
          stats.cls += loss.item();
        } else {
          Tensor halt = halting_probabilities(f.delta);
          Tensor cls = sub(Tensor::full(Shape{s.length}, 1.0),
                           pick_col(f.probs, std::size_t(s.label)));
          loss = expected_loss(halt, cls, cfg.alpha);
          const auto comps =
              expected_loss_components(halt.values(), cls.values());
          stats.cls += comps.classification;
          stats.earl += comps.earliness;
        }
        if (argmax_row(f.probs, s.length - 1) == s.label) ++stats.correct;
        ++stats.total;
        if (!std::isfinite(loss.item()))
          throw std::runtime_error("train: loss diverged to non-finite value");
        batch_loss = i == 0 ? loss : add(batch_loss, loss);
      }
      backward(scale(batch_loss, inv_batch));
      if (clip) clip_grad_norm(params, cfg.grad_clip_norm);
      adam_step(params, adam, cfg.learning_rate);
    }

    EpochLog e;
    e.epoch = epoch;
    e.phase = finetune ? "finetune" : "classification";
    const double n = double(stats.total);
    e.cls_loss = stats.cls / n;
    e.earliness_loss = stats.earl / n;
    // overall loss is the α-blend of the logged components, exactly
    e.loss = finetune ? cfg.alpha.alpha * e.cls_loss +
                            (1.0 - cfg.alpha.alpha) * e.earliness_loss
                      : e.cls_loss;
    e.train_acc = double(stats.correct) / n;
    if (val) e.val_acc = full_length_accuracy(model, *val);
    e.wall_ms = elapsed_ms(t0);
    log.push_back(std::move(e));
  }
  return log;
}

}  // namespace

TrainLog train_phase1(Model& model, const std::vector<LabeledSeries>& train,
                      const TrainConfig& cfg,
                      const std::vector<LabeledSeries>* val) {
  TrainConfig c = cfg;
  c.phase = TrainPhase::kClassification;
  return run_training(model, train, c, val);
}

TrainLog train_phase2(Model& model, const std::vector<LabeledSeries>& train,
                      const TrainConfig& cfg,
                      const std::vector<LabeledSeries>* val) {
  TrainConfig c = cfg;
  c.phase = TrainPhase::kFinetune;
  return run_training(model, train, c, val);
}

CvResult grid_search_cv(const Dataset& dataset,
                        const std::vector<GridPoint>& grid, int k, int epochs,
                        int batch_size, std::uint64_t seed) {
  if (grid.empty()) throw std::invalid_argument("grid_search_cv: empty grid");
  auto folds = stratified_kfold(dataset.train, k, seed);

  CvResult result;
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    CvRow row;
    row.point = grid[gi];
    for (std::size_t fi = 0; fi < folds.size(); ++fi) {
      std::vector<LabeledSeries> fit, holdout;
      for (auto i : folds[fi].first) fit.push_back(dataset.train[i]);
      for (auto i : folds[fi].second) holdout.push_back(dataset.train[i]);
      const std::uint64_t run_seed =
          seed + 0x9e3779b97f4a7c15ull * (gi * folds.size() + fi + 1);
      Model model(grid[gi].model, run_seed);
      TrainConfig cfg;
      cfg.phase = TrainPhase::kClassification;
      cfg.learning_rate = grid[gi].learning_rate;
      cfg.epochs = epochs;
      cfg.batch_size = batch_size;
      cfg.seed = run_seed;
      train_phase1(model, fit, cfg);
      row.fold_accuracy.push_back(full_length_accuracy(model, holdout));
      if (row.parameter_count == 0) row.parameter_count = model.parameter_count();
    }
    row.mean_accuracy =
        std::accumulate(row.fold_accuracy.begin(), row.fold_accuracy.end(),
                        0.0) /
        double(row.fold_accuracy.size());
    result.table.push_back(std::move(row));
  }

  result.best_index = 0;
  for (std::size_t i = 1; i < result.table.size(); ++i) {
    const auto& a = result.table[i];
    const auto& b = result.table[result.best_index];
    if (a.mean_accuracy > b.mean_accuracy ||
        (a.mean_accuracy == b.mean_accuracy &&
         a.parameter_count < b.parameter_count))
      result.best_index = i;
  }
  return result;
}

}  // namespace ehalt
