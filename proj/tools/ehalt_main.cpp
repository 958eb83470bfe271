#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "ehalt/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Early time-series classification with a learned halting policy"};
  app.require_subcommand(1);

  ehalt::TrainOptions train;
  auto* t = app.add_subcommand("train", "Train a model (phase 1 or 2)");
  t->add_option("--data", train.data_dir, "Dataset directory (*_TRAIN/*_TEST)")
      ->required();
  t->add_option("--backbone", train.backbone, "conv | lstm")
      ->check(CLI::IsMember({"conv", "lstm"}));
  t->add_option("--phase", train.phase, "1 = classification, 2 = finetune")
      ->check(CLI::IsMember({1, 2}));
  t->add_option("--alpha", train.alpha, "Earliness/accuracy trade-off (phase 2)");
  t->add_option("--lr", train.learning_rate, "Adam learning rate");
  t->add_option("--epochs", train.epochs, "Training epochs");
  t->add_option("--batch", train.batch_size, "Batch size");
  t->add_option("--seed", train.seed, "Run seed");
  t->add_option("--out", train.out, "Output checkpoint path")->required();
  t->add_option("--init", train.init, "Starting checkpoint (phase 2)");
  t->add_option("--log", train.log_path, "Training log path (JSON lines)");
  t->add_flag("--normalize", train.normalize, "Per-series z-normalization");
  t->add_option("--conv-blocks", train.conv_blocks, "Conv blocks L");
  t->add_option("--conv-kernels", train.conv_kernels, "Kernels per block d");
  t->add_option("--conv-width-step", train.conv_width_step, "Width step");
  t->add_option("--conv-dropout", train.conv_dropout, "Dropout rate");
  t->add_option("--lstm-layers", train.lstm_layers, "LSTM layers n");
  t->add_option("--lstm-hidden", train.lstm_hidden, "LSTM hidden dim r");

  ehalt::EvalOptions eval;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a test split");
  e->add_option("--ckpt", eval.ckpt, "Checkpoint path")->required();
  e->add_option("--data", eval.data_dir, "Dataset directory")->required();
  e->add_option("--alpha", eval.alpha, "Trade-off for the reported cost");
  e->add_option("--mode", eval.mode, "bernoulli | threshold | expected")
      ->check(CLI::IsMember({"bernoulli", "threshold", "expected"}));
  e->add_option("--seed", eval.seed, "Sampling seed");
  e->add_option("--report", eval.report, "Report JSON path (stdout if unset)");
  e->add_flag("--normalize", eval.normalize, "Per-series z-normalization");

  ehalt::SweepOptions sweep;
  auto* s = app.add_subcommand("sweep", "Cross-validated grid search");
  s->add_option("--data", sweep.data_dir, "Dataset directory")->required();
  s->add_option("--grid", sweep.grid_file, "Grid JSON file")->required();
  s->add_option("--folds", sweep.folds, "Cross-validation folds");
  s->add_option("--epochs", sweep.epochs, "Phase-1 epochs per fold");
  s->add_option("--batch", sweep.batch_size, "Batch size");
  s->add_option("--seed", sweep.seed, "Run seed");
  s->add_option("--report", sweep.report, "CV table JSON path");
  s->add_flag("--normalize", sweep.normalize, "Per-series z-normalization");

  ehalt::TraceOptions trace;
  auto* tr = app.add_subcommand("trace", "Export per-timestep halting trace");
  tr->add_option("--ckpt", trace.ckpt, "Checkpoint path")->required();
  tr->add_option("--data", trace.data_dir, "Dataset directory")->required();
  tr->add_option("--split", trace.split, "train | test")
      ->check(CLI::IsMember({"train", "test"}));
  tr->add_option("--index", trace.index, "Series index")->required();
  tr->add_option("--out", trace.out, "Output CSV path")->required();
  tr->add_flag("--normalize", trace.normalize, "Per-series z-normalization");

  ehalt::CompareOptions cmp;
  auto* c = app.add_subcommand("compare", "Domination counts vs competitors");
  c->add_option("--ours", cmp.ours_glob, "Glob over eval report JSON files")
      ->required();
  c->add_option("--theirs", cmp.theirs_csv,
                "Competitor CSV (method,dataset,param,accuracy,earliness)")
      ->required();
  c->add_option("--alpha", cmp.alpha, "Trade-off for the cost comparison");
  c->add_option("--method", cmp.method, "Restrict to one competitor method");
  c->add_option("--report", cmp.report, "Report JSON path (stdout if unset)");
  c->add_option("--scatter", cmp.scatter, "Optional scatter CSV path");

  ehalt::GenSynthOptions synth;
  auto* g = app.add_subcommand("gen-synth", "Write a synthetic dataset");
  g->add_option("--out", synth.out_dir, "Output directory")->required();
  g->add_option("--per-class", synth.n_per_class, "Series per class");
  g->add_option("--length", synth.length, "Series length N");
  g->add_option("--pos", synth.signal_pos, "Pattern position fraction");
  g->add_option("--sigma", synth.noise_sigma, "Noise level");
  g->add_option("--seed", synth.seed, "Generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*t) return ehalt::cmd_train(train);
    if (*e) return ehalt::cmd_eval(eval);
    if (*s) return ehalt::cmd_sweep(sweep);
    if (*tr) return ehalt::cmd_trace(trace);
    if (*c) return ehalt::cmd_compare(cmp);
    if (*g) return ehalt::cmd_gen_synth(synth);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 1;
}
