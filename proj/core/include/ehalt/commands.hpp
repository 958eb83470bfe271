#pragma once

#include <cstdint>
#include <string>

namespace ehalt {

// Exit code for `compare` when the competitor reference file is missing.
inline constexpr int kExitReferenceDataRequired = 3;

struct TrainOptions {
  std::string data_dir;
  std::string backbone = "conv";
  int phase = 1;
  double alpha = 0.8;
  double learning_rate = 0.01;
  int epochs = 30;
  int batch_size = 32;
  std::uint64_t seed = 0;
  std::string out;           // checkpoint path
  std::string init;          // starting checkpoint (required for phase 2)
  std::string log_path;      // default: <out>.log.jsonl
  bool normalize = false;
  // backbone hyperparameters
  int conv_blocks = 4;
  int conv_kernels = 8;
  int conv_width_step = 3;
  double conv_dropout = 0.5;
  int lstm_layers = 2;
  int lstm_hidden = 32;
};

struct EvalOptions {
  std::string ckpt;
  std::string data_dir;
  double alpha = 0.8;
  std::string mode = "bernoulli";
  std::uint64_t seed = 0;
  std::string report;  // output JSON; stdout when empty
  bool normalize = false;
};

struct SweepOptions {
  std::string data_dir;
  std::string grid_file;
  int folds = 3;
  int epochs = 30;
  int batch_size = 32;
  std::uint64_t seed = 0;
  std::string report;  // output JSON; stdout when empty
  bool normalize = false;
};

struct TraceOptions {
  std::string ckpt;
  std::string data_dir;
  std::string split = "test";
  int index = 0;
  std::string out;
  bool normalize = false;
};

struct CompareOptions {
  std::string ours_glob;   // glob over eval report JSON files
  std::string theirs_csv;  // method,dataset,param,accuracy,earliness
  double alpha = 0.6;
  std::string method;      // optional filter
  std::string report;      // output JSON; stdout when empty
  std::string scatter;     // optional scatter CSV path
};

struct GenSynthOptions {
  std::string out_dir;
  int n_per_class = 200;
  int length = 100;
  double signal_pos = 0.3;
  double noise_sigma = 0.5;
  std::uint64_t seed = 0;
};

int cmd_train(const TrainOptions& opt);
int cmd_eval(const EvalOptions& opt);
int cmd_sweep(const SweepOptions& opt);
int cmd_trace(const TraceOptions& opt);
int cmd_compare(const CompareOptions& opt);
int cmd_gen_synth(const GenSynthOptions& opt);

}  // namespace ehalt
