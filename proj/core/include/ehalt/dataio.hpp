#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace ehalt {

// One observation sequence plus its class label.
struct LabeledSeries {
  std::vector<double> values;  // flat [N × D]
  std::size_t length = 0;      // N
  std::size_t dim = 1;         // D
  int label = 0;               // 0-based after remapping
  std::string original_label;  // raw token from file
};

struct Dataset {
  std::string name;
  std::vector<LabeledSeries> train;
  std::vector<LabeledSeries> test;
  int num_classes = 0;
  std::map<std::string, int> label_map;  // raw token -> index
};

// UCR-format text: one series per row, label token first, tab or comma
// delimited (sniffed). Labels are remapped to 0..C-1 by sorted raw order
// (numeric order when every token parses as a number). Trailing NaN runs are
// trimmed; interior NaNs and ragged rows are errors, as are test labels
// absent from the train split.
Dataset parse_ucr(const std::string& train_path, const std::string& test_path,
                  const std::string& name = "");

// Writes one split back in tab-delimited UCR form (round-trip support).
void write_ucr(const std::vector<LabeledSeries>& split,
               const std::string& path);

// Per-series, per-channel mean 0 / std 1; centered only when std < 1e-12.
void z_normalize(LabeledSeries& s);
void z_normalize(Dataset& ds);

// Stratified k-fold: per-class round-robin after a seeded shuffle.
// Returns k (fit, holdout) index pairs over the given split.
std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>>
stratified_kfold(const std::vector<LabeledSeries>& split, int k,
                 std::uint64_t seed);

// Two-class synthetic set: gaussian noise with a class-specific spike
// (up vs down, length N/10) injected at index floor(signal_pos·N). Before
// that index the classes are statistically identical.
Dataset synth_pattern_dataset(int n_per_class, int length, double signal_pos,
                              double noise_sigma, std::uint64_t seed);

}  // namespace ehalt
