#include "ehalt/commands.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include <json.hpp>

#include "ehalt/checkpoint.hpp"
#include "ehalt/dataio.hpp"
#include "ehalt/evalreport.hpp"
#include "ehalt/trainer.hpp"

namespace ehalt {

namespace fs = std::filesystem;

namespace {

bool contains(const std::string& s, const std::string& needle) {
  return s.find(needle) != std::string::npos;
}

// Locates <Name>_TRAIN.* / <Name>_TEST.* inside a directory.
Dataset load_dataset_dir(const std::string& dir, bool normalize) {
  std::string train_path, test_path, name;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string stem = entry.path().filename().string();
    if (contains(stem, "_TRAIN")) {
      train_path = entry.path().string();
      name = stem.substr(0, stem.find("_TRAIN"));
    } else if (contains(stem, "_TEST")) {
      test_path = entry.path().string();
    }
  }
  if (train_path.empty() || test_path.empty())
    throw std::runtime_error("no *_TRAIN / *_TEST files found in " + dir);
  Dataset ds = parse_ucr(train_path, test_path, name);
  if (normalize) z_normalize(ds);
  return ds;
}

ModelConfig model_config_from(const TrainOptions& opt, const Dataset& ds) {
  ModelConfig cfg;
  cfg.kind = parse_backbone_kind(opt.backbone);
  cfg.num_classes = ds.num_classes;
  cfg.conv.num_blocks = opt.conv_blocks;
  cfg.conv.kernels_per_block = opt.conv_kernels;
  cfg.conv.width_step = opt.conv_width_step;
  cfg.conv.dropout_rate = opt.conv_dropout;
  cfg.conv.input_dim = 1;
  cfg.lstm.num_layers = opt.lstm_layers;
  cfg.lstm.hidden_dim = opt.lstm_hidden;
  cfg.lstm.input_dim = 1;
  return cfg;
}

void write_or_print(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content << "\n";
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content << "\n";
}

std::vector<std::string> glob_files(const std::string& pattern) {
  fs::path p(pattern);
  fs::path dir = p.parent_path().empty() ? fs::path(".") : p.parent_path();
  const std::string base = p.filename().string();
  std::vector<std::string> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (fnmatch(base.c_str(), name.c_str(), 0) == 0)
      out.push_back(entry.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

int cmd_train(const TrainOptions& opt) {
  Dataset ds = load_dataset_dir(opt.data_dir, opt.normalize);

  std::unique_ptr<Model> model;
  if (!opt.init.empty()) {
    model = load_checkpoint(opt.init);
  } else if (opt.phase == 2) {
    throw std::runtime_error(
        "train: phase 2 requires --init with a phase-1 checkpoint");
  } else {
    model = std::make_unique<Model>(model_config_from(opt, ds), opt.seed);
  }

  TrainConfig cfg;
  cfg.alpha = TradeOff{opt.alpha};
  cfg.learning_rate = opt.learning_rate;
  cfg.epochs = opt.epochs;
  cfg.batch_size = opt.batch_size;
  cfg.seed = opt.seed;
  TrainLog log = opt.phase == 1 ? train_phase1(*model, ds.train, cfg)
                                : train_phase2(*model, ds.train, cfg);

  if (opt.out.empty()) throw std::runtime_error("train: --out is required");
  save_checkpoint(*model, opt.out);

  const std::string log_path =
      opt.log_path.empty() ? opt.out + ".log.jsonl" : opt.log_path;
  std::ofstream lf(log_path, std::ios::binary);
  if (!lf) throw std::runtime_error("cannot write " + log_path);
  for (const auto& e : log) lf << epoch_log_json(e) << "\n";

  std::cerr << "train: wrote " << opt.out << " and " << log_path << "\n";
  return 0;
}

int cmd_eval(const EvalOptions& opt) {
  auto model = load_checkpoint(opt.ckpt);
  Dataset ds = load_dataset_dir(opt.data_dir, opt.normalize);
  EvalRecord rec = evaluate(*model, ds.test, ds.name, opt.alpha,
                            parse_stop_mode(opt.mode), opt.seed);
  write_or_print(opt.report, eval_record_json(rec));
  return 0;
}

int cmd_sweep(const SweepOptions& opt) {
  Dataset ds = load_dataset_dir(opt.data_dir, opt.normalize);

  std::ifstream gf(opt.grid_file);
  if (!gf) throw std::runtime_error("cannot open grid file " + opt.grid_file);
  nlohmann::json gj;
  gf >> gj;
  std::vector<GridPoint> grid;
  for (const auto& item : gj) {
    GridPoint g;
    g.model.kind = parse_backbone_kind(item.at("backbone").get<std::string>());
    g.model.num_classes = ds.num_classes;
    if (g.model.kind == BackboneKind::kConvShapelet) {
      g.model.conv.num_blocks = item.value("num_blocks", 4);
      g.model.conv.kernels_per_block = item.value("kernels_per_block", 8);
      g.model.conv.width_step = item.value("width_step", 3);
      g.model.conv.dropout_rate = item.value("dropout_rate", 0.5);
    } else {
      g.model.lstm.num_layers = item.value("num_layers", 2);
      g.model.lstm.hidden_dim = item.value("hidden_dim", 32);
    }
    g.learning_rate = item.value("lr", 0.01);
    grid.push_back(g);
  }

  CvResult cv = grid_search_cv(ds, grid, opt.folds, opt.epochs, opt.batch_size,
                               opt.seed);

  nlohmann::json out;
  out["best_index"] = cv.best_index;
  out["table"] = nlohmann::json::array();
  for (std::size_t i = 0; i < cv.table.size(); ++i) {
    const auto& row = cv.table[i];
    nlohmann::json r;
    r["index"] = i;
    r["backbone"] = backbone_kind_name(row.point.model.kind);
    r["lr"] = row.point.learning_rate;
    r["mean_accuracy"] = row.mean_accuracy;
    r["fold_accuracy"] = row.fold_accuracy;
    r["parameter_count"] = row.parameter_count;
    if (row.point.model.kind == BackboneKind::kConvShapelet) {
      r["num_blocks"] = row.point.model.conv.num_blocks;
      r["kernels_per_block"] = row.point.model.conv.kernels_per_block;
      r["width_step"] = row.point.model.conv.width_step;
    } else {
      r["num_layers"] = row.point.model.lstm.num_layers;
      r["hidden_dim"] = row.point.model.lstm.hidden_dim;
    }
    out["table"].push_back(std::move(r));
  }
  write_or_print(opt.report, out.dump(2));
  return 0;
}

int cmd_trace(const TraceOptions& opt) {
  auto model = load_checkpoint(opt.ckpt);
  Dataset ds = load_dataset_dir(opt.data_dir, opt.normalize);
  const auto& split = opt.split == "train" ? ds.train : ds.test;
  if (opt.index < 0 || std::size_t(opt.index) >= split.size())
    throw std::runtime_error("trace: index out of range (split has " +
                             std::to_string(split.size()) + " series)");
  export_trace(*model, split[std::size_t(opt.index)], opt.out);
  std::cerr << "trace: wrote " << opt.out << "\n";
  return 0;
}

int cmd_compare(const CompareOptions& opt) {
  if (!fs::exists(opt.theirs_csv)) {
    std::cerr << "compare: reference data required: competitor results file '"
              << opt.theirs_csv
              << "' not found (supply the published per-dataset "
                 "accuracy/earliness CSV)\n";
    return kExitReferenceDataRequired;
  }
  auto theirs = parse_competitor_csv(opt.theirs_csv);
  if (!opt.method.empty()) {
    theirs.erase(std::remove_if(theirs.begin(), theirs.end(),
                                [&](const CompetitorRow& r) {
                                  return r.method != opt.method;
                                }),
                 theirs.end());
  }

  std::vector<EvalRecord> ours;
  for (const auto& path : glob_files(opt.ours_glob)) {
    std::ifstream in(path);
    nlohmann::json j;
    in >> j;
    EvalRecord r;
    r.dataset = j.at("dataset").get<std::string>();
    r.alpha = j.at("alpha").get<double>();
    r.accuracy = j.at("accuracy").get<double>();
    r.earliness = j.at("earliness").get<double>();
    r.mean_cost = j.at("mean_cost").get<double>();
    ours.push_back(std::move(r));
  }
  if (ours.empty())
    throw std::runtime_error("compare: no eval reports match " +
                             opt.ours_glob);

  // group competitor rows by method, one domination table each
  std::vector<std::string> methods;
  for (const auto& r : theirs)
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
      methods.push_back(r.method);

  nlohmann::json out;
  out["alpha"] = opt.alpha;
  out["methods"] = nlohmann::json::array();
  for (const auto& m : methods) {
    std::vector<CompetitorRow> rows;
    for (const auto& r : theirs)
      if (r.method == m) rows.push_back(r);
    DominationResult dom = domination_table(ours, rows, opt.alpha);
    nlohmann::json jm;
    jm["method"] = m;
    jm["wins"] = dom.wins;
    jm["losses"] = dom.losses;
    jm["ties"] = dom.ties;
    jm["unmatched"] = dom.unmatched;
    nlohmann::json md = nlohmann::json::array();
    for (const auto& row : dom.matched)
      md.push_back({{"dataset", row.dataset},
                    {"our_cost", row.our_cost},
                    {"their_cost", row.their_cost}});
    jm["matched"] = std::move(md);
    out["methods"].push_back(std::move(jm));
    if (!opt.scatter.empty()) export_scatter(ours, rows, opt.scatter);
  }
  write_or_print(opt.report, out.dump(2));
  return 0;
}

int cmd_gen_synth(const GenSynthOptions& opt) {
  Dataset ds = synth_pattern_dataset(opt.n_per_class, opt.length,
                                     opt.signal_pos, opt.noise_sigma, opt.seed);
  fs::create_directories(opt.out_dir);
  const fs::path dir(opt.out_dir);
  write_ucr(ds.train, (dir / "Synth_TRAIN.tsv").string());
  write_ucr(ds.test, (dir / "Synth_TEST.tsv").string());

  nlohmann::json meta;
  meta["generator"] = "synth_pattern_dataset";
  meta["n_per_class"] = opt.n_per_class;
  meta["length"] = opt.length;
  meta["signal_pos"] = opt.signal_pos;
  meta["noise_sigma"] = opt.noise_sigma;
  meta["seed"] = opt.seed;
  std::ofstream mf(dir / "Synth_meta.json");
  mf << meta.dump(2) << "\n";
  std::cerr << "gen-synth: wrote dataset to " << opt.out_dir << "\n";
  return 0;
}

}  // namespace ehalt
