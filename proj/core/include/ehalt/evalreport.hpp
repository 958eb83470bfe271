#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ehalt/dataio.hpp"
#include "ehalt/halting.hpp"
#include "ehalt/model.hpp"
#include "ehalt/objective.hpp"

namespace ehalt {

struct EvalRecord {
  std::string dataset;
  double alpha = 0.0;
  double accuracy = 0.0;   // fraction correct at the decision time
  double earliness = 0.0;  // mean t_stop / T
  double mean_cost = 0.0;  // mean per-series evaluation cost
  std::string stop_mode;
  std::uint64_t seed = 0;
};

struct CompetitorRow {
  std::string method;
  std::string dataset;
  double param = 0.0;  // the method's native earliness parameter
  double accuracy = 0.0;
  double earliness = 0.0;
};

// CSV with header method,dataset,param,accuracy,earliness.
std::vector<CompetitorRow> parse_competitor_csv(const std::string& path);

// Runs the stopping policy over a test split: per series, halting trace,
// decision time, classification at that time.
EvalRecord evaluate(Model& model, const std::vector<LabeledSeries>& split,
                    const std::string& dataset_name, double alpha,
                    StopMode mode, std::uint64_t seed,
                    std::vector<DecisionOutcome>* outcomes = nullptr);

struct DominationRow {
  std::string dataset;
  double our_cost = 0.0;
  double their_cost = 0.0;
};

struct DominationResult {
  int wins = 0;    // strictly lower cost
  int losses = 0;
  int ties = 0;    // equal cost, reported separately
  std::vector<DominationRow> matched;
  std::vector<std::string> unmatched;  // datasets present on one side only
};

// Per-dataset cost comparison at equal α. The competitor cost is recomputed
// as α·(1-accuracy) + (1-α)·earliness from their reported numbers.
DominationResult domination_table(const std::vector<EvalRecord>& ours,
                                  const std::vector<CompetitorRow>& theirs,
                                  double alpha);

// CSV of t, x_t (first channel), per-class ŷ_t, δ_t, B_t, P(t).
void export_trace(Model& model, const LabeledSeries& series,
                  const std::string& path);

// Long-format CSV (dataset, alpha, metric, ours, theirs) for accuracy,
// earliness and cost. Returns the number of data rows written.
std::size_t export_scatter(const std::vector<EvalRecord>& ours,
                           const std::vector<CompetitorRow>& theirs,
                           const std::string& path);

// Order-independent mean via pairwise summation.
double pairwise_mean(const std::vector<double>& values);

std::string eval_record_json(const EvalRecord& r);

}  // namespace ehalt
