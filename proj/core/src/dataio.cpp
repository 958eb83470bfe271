#include "ehalt/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ehalt {

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string tok;
  std::istringstream ss(line);
  while (std::getline(ss, tok, delim)) out.push_back(tok);
  return out;
}

char sniff_delimiter(const std::string& line) {
  if (line.find('\t') != std::string::npos) return '\t';
  if (line.find(',') != std::string::npos) return ',';
  return ' ';
}

bool parse_number(const std::string& tok, double& out) {
  if (tok.empty()) return false;
  char* end = nullptr;
  out = std::strtod(tok.c_str(), &end);
  return end == tok.c_str() + tok.size();
}

struct RawRow {
  std::string label;
  std::vector<double> values;  // NaN-trimmed
};

std::vector<RawRow> read_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<RawRow> rows;
  std::string line;
  std::size_t expected_tokens = 0;
  std::size_t lineno = 0;
  char delim = 0;
  while (std::getline(in, line)) {
    ++lineno;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
      line.pop_back();
    if (line.empty()) continue;
    if (delim == 0) delim = sniff_delimiter(line);
    auto toks = split_line(line, delim);
    if (toks.size() < 2)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": row needs a label and at least one value");
    if (expected_tokens == 0) expected_tokens = toks.size();
    if (toks.size() != expected_tokens)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": ragged row (" + std::to_string(toks.size()) +
                               " tokens, expected " +
                               std::to_string(expected_tokens) + ")");
    RawRow r;
    r.label = toks[0];
    r.values.reserve(toks.size() - 1);
    for (std::size_t i = 1; i < toks.size(); ++i) {
      double v;
      if (!parse_number(toks[i], v))
        throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                 ": bad numeric token '" + toks[i] + "'");
      r.values.push_back(v);
    }
    // trailing NaN run is padding for variable-length series
    while (!r.values.empty() && std::isnan(r.values.back()))
      r.values.pop_back();
    if (r.values.empty())
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": all values are NaN");
    for (double v : r.values)
      if (!std::isfinite(v))
        throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                 ": interior NaN/inf value");
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw std::runtime_error(path + ": no data rows");
  return rows;
}

std::map<std::string, int> build_label_map(const std::vector<RawRow>& rows) {
  std::set<std::string> raw;
  for (const auto& r : rows) raw.insert(r.label);
  std::vector<std::string> order(raw.begin(), raw.end());
  bool all_numeric = true;
  std::vector<double> nums(order.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    all_numeric = all_numeric && parse_number(order[i], nums[i]);
  if (all_numeric) {
    std::vector<std::size_t> idx(order.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return nums[a] < nums[b]; });
    std::vector<std::string> sorted;
    for (auto i : idx) sorted.push_back(order[i]);
    order = std::move(sorted);
  }
  std::map<std::string, int> m;
  for (std::size_t i = 0; i < order.size(); ++i) m[order[i]] = int(i);
  return m;
}

std::vector<LabeledSeries> to_series(const std::vector<RawRow>& rows,
                                     const std::map<std::string, int>& labels,
                                     const std::string& which) {
  std::vector<LabeledSeries> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    auto it = labels.find(r.label);
    if (it == labels.end())
      throw std::runtime_error("label '" + r.label + "' in " + which +
                               " split is absent from the train split");
    LabeledSeries s;
    s.values = r.values;
    s.length = r.values.size();
    s.dim = 1;
    s.label = it->second;
    s.original_label = r.label;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

Dataset parse_ucr(const std::string& train_path, const std::string& test_path,
                  const std::string& name) {
  auto train_rows = read_rows(train_path);
  auto test_rows = read_rows(test_path);
  Dataset ds;
  ds.name = name;
  ds.label_map = build_label_map(train_rows);
  ds.num_classes = int(ds.label_map.size());
  ds.train = to_series(train_rows, ds.label_map, "train");
  ds.test = to_series(test_rows, ds.label_map, "test");
  return ds;
}

void write_ucr(const std::vector<LabeledSeries>& split,
               const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  char buf[40];
  for (const auto& s : split) {
    out << s.original_label;
    for (double v : s.values) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << '\t' << buf;
    }
    out << '\n';
  }
}

void z_normalize(LabeledSeries& s) {
  const std::size_t n = s.length, d = s.dim;
  for (std::size_t ch = 0; ch < d; ++ch) {
    double mean = 0.0;
    for (std::size_t t = 0; t < n; ++t) mean += s.values[t * d + ch];
    mean /= double(n);
    double var = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double c = s.values[t * d + ch] - mean;
      var += c * c;
    }
    const double sd = std::sqrt(var / double(n));
    for (std::size_t t = 0; t < n; ++t) {
      s.values[t * d + ch] -= mean;
      if (sd >= 1e-12) s.values[t * d + ch] /= sd;
    }
  }
}

void z_normalize(Dataset& ds) {
  for (auto& s : ds.train) z_normalize(s);
  for (auto& s : ds.test) z_normalize(s);
}

std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>>
stratified_kfold(const std::vector<LabeledSeries>& split, int k,
                 std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("stratified_kfold: k must be >= 2");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < split.size(); ++i)
    by_class[split[i].label].push_back(i);
  for (const auto& [label, idx] : by_class)
    if (idx.size() < std::size_t(k))
      throw std::runtime_error("stratified_kfold: class " +
                               std::to_string(label) + " has only " +
                               std::to_string(idx.size()) +
                               " samples, need >= " + std::to_string(k));
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> folds;
  folds.resize(std::size_t(k));
  for (auto& [label, idx] : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < idx.size(); ++i)
      folds[i % std::size_t(k)].push_back(idx[i]);
  }
  std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>>
      out;
  for (int f = 0; f < k; ++f) {
    std::vector<std::size_t> fit, holdout = folds[std::size_t(f)];
    for (int g = 0; g < k; ++g)
      if (g != f)
        fit.insert(fit.end(), folds[std::size_t(g)].begin(),
                   folds[std::size_t(g)].end());
    std::sort(fit.begin(), fit.end());
    std::sort(holdout.begin(), holdout.end());
    out.emplace_back(std::move(fit), std::move(holdout));
  }
  return out;
}

Dataset synth_pattern_dataset(int n_per_class, int length, double signal_pos,
                              double noise_sigma, std::uint64_t seed) {
  if (!(signal_pos > 0.0 && signal_pos < 1.0))
    throw std::invalid_argument("synth_pattern_dataset: signal_pos in (0,1)");
  if (n_per_class < 1 || length < 2)
    throw std::invalid_argument("synth_pattern_dataset: bad sizes");
  const int pat_len = std::max(1, length / 10);
  const int pat_start = int(signal_pos * length);
  if (pat_start + pat_len > length)
    throw std::invalid_argument(
        "synth_pattern_dataset: pattern overruns series end");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset ds;
  ds.name = "synth";
  ds.num_classes = 2;
  ds.label_map = {{"0", 0}, {"1", 1}};

  auto make = [&](int cls) {
    LabeledSeries s;
    s.length = std::size_t(length);
    s.dim = 1;
    s.label = cls;
    s.original_label = std::to_string(cls);
    s.values.resize(std::size_t(length));
    for (auto& v : s.values) v = noise_sigma * noise(rng);
    const double amp = cls == 0 ? 1.0 : -1.0;
    for (int i = 0; i < pat_len; ++i) s.values[std::size_t(pat_start + i)] += amp;
    return s;
  };
  // interleave classes so splits of any prefix stay balanced
  for (int i = 0; i < n_per_class; ++i) {
    ds.train.push_back(make(0));
    ds.train.push_back(make(1));
  }
  for (int i = 0; i < n_per_class; ++i) {
    ds.test.push_back(make(0));
    ds.test.push_back(make(1));
  }
  return ds;
}

}  // namespace ehalt
