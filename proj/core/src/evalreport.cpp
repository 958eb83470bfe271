#include "ehalt/evalreport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ehalt {

double pairwise_mean(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  std::function<double(std::size_t, std::size_t)> sum =
      [&](std::size_t lo, std::size_t hi) -> double {
    if (hi - lo <= 8) {
      double s = 0.0;
      for (std::size_t i = lo; i < hi; ++i) s += values[i];
      return s;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    return sum(lo, mid) + sum(mid, hi);
  };
  return sum(0, values.size()) / double(values.size());
}

std::vector<CompetitorRow> parse_competitor_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open competitor file " + path);
  std::vector<CompetitorRow> rows;
  std::string line;
  bool first = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
      line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> toks;
    std::string tok;
    std::istringstream ss(line);
    while (std::getline(ss, tok, ',')) toks.push_back(tok);
    if (first) {
      first = false;
      if (toks.size() >= 1 && toks[0] == "method") continue;  // header
    }
    if (toks.size() != 5)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected method,dataset,param,accuracy,"
                               "earliness");
    CompetitorRow r;
    r.method = toks[0];
    r.dataset = toks[1];
    r.param = std::stod(toks[2]);
    r.accuracy = std::stod(toks[3]);
    r.earliness = std::stod(toks[4]);
    rows.push_back(std::move(r));
  }
  return rows;
}

EvalRecord evaluate(Model& model, const std::vector<LabeledSeries>& split,
                    const std::string& dataset_name, double alpha,
                    StopMode mode, std::uint64_t seed,
                    std::vector<DecisionOutcome>* outcomes) {
  if (split.empty()) throw std::invalid_argument("evaluate: empty split");
  for (const auto& s : split)
    if (s.label < 0 || s.label >= model.config().num_classes)
      throw std::invalid_argument(
          "evaluate: series label outside the model's class range");

  std::mt19937_64 rng(seed);
  std::vector<double> costs, earliness;
  int correct = 0;
  const TradeOff a{alpha};
  for (const auto& s : split) {
    auto f = model.forward(s, false, nullptr);
    HaltingTrace trace = make_halting_trace(f.delta.values());
    const int t_stop = sample_stop(trace, mode, rng);
    const std::size_t c = std::size_t(model.config().num_classes);
    int pred = 0;
    for (std::size_t i = 1; i < c; ++i)
      if (f.probs.at(std::size_t(t_stop) * c + i) >
          f.probs.at(std::size_t(t_stop) * c + std::size_t(pred)))
        pred = int(i);
    DecisionOutcome o{pred, s.label, t_stop, int(s.length) - 1};
    if (outcomes) outcomes->push_back(o);
    if (pred == s.label) ++correct;
    costs.push_back(evaluation_cost(o, a));
    earliness.push_back(earliness_loss(o.t, o.horizon));
  }

  EvalRecord r;
  r.dataset = dataset_name;
  r.alpha = alpha;
  r.accuracy = double(correct) / double(split.size());
  r.earliness = pairwise_mean(earliness);
  r.mean_cost = pairwise_mean(costs);
  r.stop_mode = stop_mode_name(mode);
  r.seed = seed;
  return r;
}

DominationResult domination_table(const std::vector<EvalRecord>& ours,
                                  const std::vector<CompetitorRow>& theirs,
                                  double alpha) {
  std::map<std::string, double> our_cost, their_cost;
  for (const auto& r : ours)
    if (r.alpha == alpha) our_cost[r.dataset] = r.mean_cost;
  for (const auto& r : theirs)
    their_cost[r.dataset] =
        alpha * (1.0 - r.accuracy) + (1.0 - alpha) * r.earliness;

  DominationResult res;
  for (const auto& [ds, oc] : our_cost) {
    auto it = their_cost.find(ds);
    if (it == their_cost.end()) {
      res.unmatched.push_back(ds);
      continue;
    }
    res.matched.push_back({ds, oc, it->second});
    if (oc < it->second)
      ++res.wins;
    else if (oc > it->second)
      ++res.losses;
    else
      ++res.ties;
  }
  for (const auto& [ds, tc] : their_cost)
    if (!our_cost.count(ds)) res.unmatched.push_back(ds);
  std::sort(res.unmatched.begin(), res.unmatched.end());
  return res;
}

void export_trace(Model& model, const LabeledSeries& series,
                  const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  auto f = model.forward(series, false, nullptr);
  HaltingTrace trace = make_halting_trace(f.delta.values());
  const std::size_t c = std::size_t(model.config().num_classes);
  out << "t,x";
  for (std::size_t i = 0; i < c; ++i) out << ",yhat" << i;
  out << ",delta,budget,halt_prob\n";
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    out << ',' << buf;
  };
  for (std::size_t t = 0; t < series.length; ++t) {
    out << t;
    put(series.values[t * series.dim]);
    for (std::size_t i = 0; i < c; ++i) put(f.probs.at(t * c + i));
    put(trace.delta[t]);
    put(trace.budget[t]);
    put(trace.halt_prob[t]);
    out << '\n';
  }
}

std::size_t export_scatter(const std::vector<EvalRecord>& ours,
                           const std::vector<CompetitorRow>& theirs,
                           const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "dataset,alpha,metric,ours,theirs\n";
  std::size_t rows = 0;
  for (const auto& r : ours) {
    for (const auto& c : theirs) {
      if (c.dataset != r.dataset) continue;
      const double their_cost =
          r.alpha * (1.0 - c.accuracy) + (1.0 - r.alpha) * c.earliness;
      out << r.dataset << ',' << r.alpha << ",accuracy," << r.accuracy << ','
          << c.accuracy << '\n';
      out << r.dataset << ',' << r.alpha << ",earliness," << r.earliness << ','
          << c.earliness << '\n';
      out << r.dataset << ',' << r.alpha << ",cost," << r.mean_cost << ','
          << their_cost << '\n';
      rows += 3;
    }
  }
  if (rows == 0)
    std::cerr << "export_scatter: no matching datasets, wrote header only\n";
  return rows;
}

std::string eval_record_json(const EvalRecord& r) {
  std::ostringstream os;
  os.precision(17);
  os << "{\"dataset\":\"" << r.dataset << "\",\"alpha\":" << r.alpha
     << ",\"accuracy\":" << r.accuracy << ",\"earliness\":" << r.earliness
     << ",\"mean_cost\":" << r.mean_cost << ",\"stop_mode\":\"" << r.stop_mode
     << "\",\"seed\":" << r.seed << "}";
  return os.str();
}

}  // namespace ehalt
