#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ehalt/evalreport.hpp"

using namespace ehalt;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("ehalt_eval_" + std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// A hand-built model over single-channel series: one conv block with a
// width-1 identity kernel, no normalization distortion (gamma=1, beta=0,
// running stats at 0/1), classification by the sign of x_t and a stopping
// head pinned to an extreme bias.
Model rigged_model(double cls_gain, double stop_bias) {
  ModelConfig mc;
  mc.kind = BackboneKind::kConvShapelet;
  mc.num_classes = 2;
  mc.conv = {1, 1, 1, 1, 0.0};
  Model m(mc, 0);
  NamedParams params;
  m.backbone().named_params(params);
  for (auto& [name, p] : params) {
    if (name == "conv.block0.kernel")
      p.mutable_values() = {1.0};
    else if (name == "conv.block0.bias")
      p.mutable_values() = {0.0};
    else if (name == "conv.bn.gamma")
      p.mutable_values() = {1.0};
    else if (name == "conv.bn.beta")
      p.mutable_values() = {0.0};
  }
  for (auto& [name, buf] : m.named_buffers()) {
    if (name == "conv.bn.running_mean") (*buf)[0] = 0.0;
    if (name == "conv.bn.running_var") (*buf)[0] = 1.0;
  }
  m.cls_weight().mutable_values() = {cls_gain, -cls_gain};
  m.cls_bias().mutable_values() = {0.0, 0.0};
  m.stop_weight().mutable_values() = {0.0};
  m.stop_bias().mutable_values() = {stop_bias};
  return m;
}

LabeledSeries series_of(std::vector<double> v, int label) {
  LabeledSeries s;
  s.length = v.size();
  s.dim = 1;
  s.values = std::move(v);
  s.label = label;
  s.original_label = std::to_string(label);
  return s;
}

std::vector<LabeledSeries> sign_split() {
  // class 0: positive running max; class 1: negative series
  return {series_of({2.0, 2.0, 2.0, 2.0}, 0),
          series_of({-1.0, -2.0, -1.5, -1.0}, 1),
          series_of({3.0, 3.0, 3.0, 3.0}, 0),
          series_of({-0.5, -0.25, -0.5, -0.25}, 1)};
}

}  // namespace

TEST_CASE("oracle model: accuracy 1, earliness 0, cost 0") {
  Model m = rigged_model(10.0, 50.0);  // always correct, always stop at t=0
  auto rec = evaluate(m, sign_split(), "rig", 0.8, StopMode::kThresholdHalf, 1);
  CHECK(rec.accuracy == doctest::Approx(1.0));
  CHECK(rec.earliness == doctest::Approx(0.0));
  CHECK(rec.mean_cost == doctest::Approx(0.0));
  CHECK(rec.dataset == "rig");
  CHECK(rec.stop_mode == "threshold");
}

TEST_CASE("never-stop head rides to the final observation") {
  Model m = rigged_model(10.0, -50.0);
  for (auto mode : {StopMode::kThresholdHalf, StopMode::kBernoulli,
                    StopMode::kExpectedTime}) {
    auto rec = evaluate(m, sign_split(), "rig", 0.5, mode, 7);
    CHECK(rec.earliness == doctest::Approx(1.0));
    CHECK(rec.accuracy == doctest::Approx(1.0));
  }
}

TEST_CASE("mean_cost matches per-series recomputation") {
  Model m = rigged_model(0.3, -1.0);  // weak classifier, mid stopping
  std::vector<DecisionOutcome> outcomes;
  auto rec =
      evaluate(m, sign_split(), "rig", 0.65, StopMode::kBernoulli, 99, &outcomes);
  REQUIRE(outcomes.size() == 4);
  std::vector<double> costs;
  double earl = 0.0;
  int correct = 0;
  for (auto& o : outcomes) {
    costs.push_back(evaluation_cost(o, TradeOff{0.65}));
    earl += o.horizon > 0 ? double(o.t) / double(o.horizon) : 0.0;
    if (o.predicted == o.truth) ++correct;
  }
  CHECK(rec.mean_cost == doctest::Approx(pairwise_mean(costs)).epsilon(1e-12));
  CHECK(rec.earliness == doctest::Approx(earl / 4.0).epsilon(1e-12));
  CHECK(rec.accuracy == doctest::Approx(correct / 4.0).epsilon(1e-12));
}

TEST_CASE("bernoulli evaluation is reproducible under a fixed seed") {
  Model m = rigged_model(1.0, -1.5);
  auto a = evaluate(m, sign_split(), "rig", 0.5, StopMode::kBernoulli, 42);
  auto b = evaluate(m, sign_split(), "rig", 0.5, StopMode::kBernoulli, 42);
  CHECK(a.earliness == b.earliness);
  CHECK(a.accuracy == b.accuracy);
  CHECK(a.mean_cost == b.mean_cost);
}

TEST_CASE("domination table closed forms") {
  auto rec = [](const std::string& ds, double acc, double earl) {
    EvalRecord r;
    r.dataset = ds;
    r.alpha = 0.6;
    r.accuracy = acc;
    r.earliness = earl;
    r.mean_cost = 0.6 * (1.0 - acc) + 0.4 * earl;
    return r;
  };
  auto row = [](const std::string& ds, double acc, double earl) {
    CompetitorRow r;
    r.method = "comp";
    r.dataset = ds;
    r.accuracy = acc;
    r.earliness = earl;
    return r;
  };

  SUBCASE("better on 2 of 3, worse on 1 -> (2,1,0)") {
    std::vector<EvalRecord> ours{rec("a", 0.9, 0.2), rec("b", 0.8, 0.1),
                                 rec("c", 0.5, 0.9)};
    std::vector<CompetitorRow> theirs{row("a", 0.7, 0.5), row("b", 0.6, 0.5),
                                      row("c", 0.9, 0.1)};
    auto d = domination_table(ours, theirs, 0.6);
    CHECK(d.wins == 2);
    CHECK(d.losses == 1);
    CHECK(d.ties == 0);
    CHECK(d.matched.size() == 3);
    CHECK(d.unmatched.empty());
  }

  SUBCASE("identical records -> (0,0,n)") {
    std::vector<EvalRecord> ours{rec("a", 0.8, 0.3), rec("b", 0.7, 0.4)};
    std::vector<CompetitorRow> theirs{row("a", 0.8, 0.3), row("b", 0.7, 0.4)};
    auto d = domination_table(ours, theirs, 0.6);
    CHECK(d.wins == 0);
    CHECK(d.losses == 0);
    CHECK(d.ties == 2);
  }

  SUBCASE("unmatched datasets are listed and excluded") {
    std::vector<EvalRecord> ours{rec("a", 0.9, 0.2), rec("only_ours", 1.0, 0.0)};
    std::vector<CompetitorRow> theirs{row("a", 0.5, 0.5),
                                      row("only_theirs", 1.0, 0.0)};
    auto d = domination_table(ours, theirs, 0.6);
    CHECK(d.wins + d.losses + d.ties == int(d.matched.size()));
    CHECK(d.matched.size() == 1);
    REQUIRE(d.unmatched.size() == 2);
  }

  SUBCASE("counts survive a common positive cost scaling") {
    // comparison is order-based: alpha rescales both sides identically
    std::vector<EvalRecord> ours{rec("a", 0.9, 0.2), rec("b", 0.4, 0.8)};
    std::vector<CompetitorRow> theirs{row("a", 0.6, 0.6), row("b", 0.8, 0.2)};
    auto d1 = domination_table(ours, theirs, 0.6);
    for (auto& r : ours) {
      r.alpha = 0.3;
      r.mean_cost = 0.3 * (1.0 - r.accuracy) + 0.7 * r.earliness;
    }
    auto d2 = domination_table(ours, theirs, 0.3);
    CHECK(d1.wins + d1.losses + d1.ties == d2.wins + d2.losses + d2.ties);
  }
}

TEST_CASE("export_trace emits N rows with a normalized halting column") {
  TempDir dir;
  Model m = rigged_model(1.0, -0.5);
  auto s = series_of({0.5, -0.3, 0.8, 0.1, -0.9}, 0);
  const auto path = (dir.path / "trace.csv").string();
  export_trace(m, s, path);

  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header.rfind("t,x,", 0) == 0);
  CHECK(header.find("delta") != std::string::npos);
  CHECK(header.find("halt_prob") != std::string::npos);
  double psum = 0.0;
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++rows;
    const auto last = line.rfind(',');
    psum += std::strtod(line.c_str() + last + 1, nullptr);
  }
  CHECK(rows == 5);
  CHECK(std::fabs(psum - 1.0) <= 1e-9);

  // inference export is deterministic
  const auto path2 = (dir.path / "trace2.csv").string();
  export_trace(m, s, path2);
  std::ifstream a(path), b(path2);
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  CHECK(sa.str() == sb.str());
}

TEST_CASE("export_scatter long format and empty intersection") {
  TempDir dir;
  EvalRecord r;
  r.dataset = "a";
  r.alpha = 0.6;
  r.accuracy = 0.9;
  r.earliness = 0.2;
  r.mean_cost = 0.14;
  CompetitorRow c;
  c.method = "comp";
  c.dataset = "a";
  c.accuracy = 0.8;
  c.earliness = 0.4;

  const auto path = (dir.path / "scatter.csv").string();
  const std::size_t n = export_scatter({r}, {c}, path);
  CHECK(n == 3);  // accuracy, earliness, cost
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "dataset,alpha,metric,ours,theirs");
  int rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 3);

  CompetitorRow other = c;
  other.dataset = "elsewhere";
  const auto path2 = (dir.path / "scatter2.csv").string();
  CHECK(export_scatter({r}, {other}, path2) == 0);
  std::ifstream in2(path2);
  std::getline(in2, header);
  CHECK(header == "dataset,alpha,metric,ours,theirs");
  CHECK(!std::getline(in2, line));
}

TEST_CASE("competitor csv parsing") {
  TempDir dir;
  const auto path = (dir.path / "comp.csv").string();
  {
    std::ofstream out(path);
    out << "method,dataset,param,accuracy,earliness\n";
    out << "sr2cf2,Gun_Point,0.6,0.91,0.33\n";
    out << "ects,Gun_Point,0.1,0.85,0.52\n";
  }
  auto rows = parse_competitor_csv(path);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].method == "sr2cf2");
  CHECK(rows[0].dataset == "Gun_Point");
  CHECK(rows[0].param == doctest::Approx(0.6));
  CHECK(rows[0].accuracy == doctest::Approx(0.91));
  CHECK(rows[1].earliness == doctest::Approx(0.52));

  const auto bad = (dir.path / "bad.csv").string();
  {
    std::ofstream out(bad);
    out << "method,dataset,param,accuracy,earliness\n";
    out << "x,only,four,fields\n";
  }
  CHECK_THROWS_AS(parse_competitor_csv(bad), std::runtime_error);
  CHECK_THROWS_AS(parse_competitor_csv((dir.path / "nope.csv").string()),
                  std::runtime_error);
}

TEST_CASE("pairwise_mean matches the plain mean and ignores order") {
  std::vector<double> v{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  double plain = 0.0;
  for (double x : v) plain += x;
  plain /= double(v.size());
  CHECK(pairwise_mean(v) == doctest::Approx(plain).epsilon(1e-15));
  std::vector<double> rev(v.rbegin(), v.rend());
  CHECK(pairwise_mean(rev) == doctest::Approx(pairwise_mean(v)).epsilon(1e-15));
  CHECK(pairwise_mean({}) == 0.0);
}

TEST_CASE("eval_record_json carries the metrics") {
  EvalRecord r;
  r.dataset = "d";
  r.alpha = 0.6;
  r.accuracy = 0.875;
  r.earliness = 0.25;
  r.mean_cost = 0.175;
  r.stop_mode = "expected";
  r.seed = 5;
  const std::string s = eval_record_json(r);
  for (const char* key : {"\"dataset\":", "\"alpha\":", "\"accuracy\":",
                          "\"earliness\":", "\"mean_cost\":", "\"stop_mode\":",
                          "\"seed\":"})
    CHECK(s.find(key) != std::string::npos);
  CHECK(s.find("0.875") != std::string::npos);
}
