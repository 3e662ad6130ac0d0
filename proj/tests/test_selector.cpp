#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "fedscope/errors.hpp"
#include "fedscope/rng.hpp"
#include "fedscope/selector.hpp"

using namespace fedscope;
using namespace fedscope::selector;

namespace {

std::vector<RunRecord> reference_records() {
  std::vector<telemetry::ReportRow> rows =
      telemetry::parse_report_csv(std::string(FEDSCOPE_DATA_DIR) + "/reference_metrics.csv");
  return from_rows(rows);
}

RunRecord make(const std::string& model, const std::string& agg, double f1, double e, double t) {
  RunRecord r;
  r.model = model;
  r.aggregator = agg;
  r.accuracy = f1;
  r.recall = f1;
  r.precision = f1;
  r.f1 = f1;
  r.energy_wh = e;
  r.time_s = t;
  return r;
}

std::size_t find(const std::vector<RunRecord>& records, const std::string& model,
                 const std::string& agg) {
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records[i].model == model && records[i].aggregator == agg) return i;
  REQUIRE(false);
  return records.size();
}

}  // namespace

TEST_CASE("the bundled reference table loads with nine configurations") {
  std::vector<RunRecord> records = reference_records();
  REQUIRE(records.size() == 9);
  std::size_t i = find(records, "EfficientNet-B0", "fedavg");
  CHECK(records[i].f1 == 0.8535);
  CHECK(records[i].energy_wh == 163.39);
  CHECK(records[i].time_s == 4216.38);
  CHECK(records[i].label() == "EfficientNet-B0+fedavg");
  for (const RunRecord& r : records) r.validate();
}

TEST_CASE("normalization pins extremes to 0 and 1 and interpolates in between") {
  std::vector<RunRecord> records = reference_records();
  std::vector<NormalizedRecord> norm = normalize(records);
  REQUIRE(norm.size() == records.size());

  std::size_t e_lo = find(records, "MobileNetV3-Large", "fedprox");  // 142.73 Wh
  std::size_t e_hi = find(records, "ResNet-50", "fedavg");           // 575.12 Wh
  CHECK(norm[e_lo].energy == 0.0);
  CHECK(norm[e_hi].energy == 1.0);
  CHECK(norm[e_hi].f1 == 1.0);     // also the best F1
  CHECK(norm[e_hi].time == 1.0);   // and the slowest

  std::size_t effb0 = find(records, "EfficientNet-B0", "fedavg");
  CHECK(norm[effb0].energy ==
        doctest::Approx((163.39 - 142.73) / (575.12 - 142.73)).epsilon(1e-12));
}

TEST_CASE("a metric that never varies is normalized to zero everywhere") {
  std::vector<RunRecord> records = {make("a", "x", 0.5, 10.0, 100.0),
                                    make("b", "x", 0.7, 10.0, 200.0)};
  std::vector<NormalizedRecord> norm = normalize(records);
  CHECK(norm[0].energy == 0.0);
  CHECK(norm[1].energy == 0.0);
  CHECK(norm[0].time == 0.0);
  CHECK(norm[1].time == 1.0);
}

TEST_CASE("equal weights reproduce the frozen scores and winner") {
  std::vector<RunRecord> records = reference_records();
  std::vector<RankedEntry> ranking = select_weighted(records, {});

  // Scores keyed by label; frozen from an independent recomputation.
  struct Expect {
    const char* model;
    const char* agg;
    double score;
  };
  const Expect expected[] = {
      {"EfficientNet-B0", "fedavg", 0.180598},   {"EfficientNet-B0", "fedprox", 0.303382},
      {"EfficientNet-B0", "fedavgm", 0.338708},  {"ResNet-50", "fedavg", 0.666667},
      {"ResNet-50", "fedprox", 0.510096},        {"ResNet-50", "fedavgm", 0.605120},
      {"MobileNetV3-Large", "fedavg", 0.187179}, {"MobileNetV3-Large", "fedprox", 0.158132},
      {"MobileNetV3-Large", "fedavgm", 0.351195},
  };
  for (const Expect& e : expected) {
    std::size_t idx = find(records, e.model, e.agg);
    bool seen = false;
    for (const RankedEntry& entry : ranking)
      if (entry.index == idx) {
        CHECK(entry.score == doctest::Approx(e.score).epsilon(1e-4));
        seen = true;
      }
    CHECK(seen);
  }

  REQUIRE(!ranking.empty());
  CHECK(records[ranking.front().index].label() == "MobileNetV3-Large+fedprox");
  CHECK(ranking.front().score == doctest::Approx(0.158132).epsilon(1e-4));
  // Ascending scores throughout.
  for (std::size_t i = 1; i < ranking.size(); ++i)
    CHECK(ranking[i - 1].score <= ranking[i].score);
}

TEST_CASE("corner weights reduce to single-axis selections") {
  std::vector<RunRecord> records = reference_records();

  LambdaWeights quality{0.0, 0.0, 1.0};
  CHECK(records[select_weighted(records, quality).front().index].label() == "ResNet-50+fedavg");

  LambdaWeights energy{1.0, 0.0, 0.0};
  CHECK(records[select_weighted(records, energy).front().index].label() ==
        "MobileNetV3-Large+fedprox");

  LambdaWeights time{0.0, 1.0, 0.0};
  CHECK(records[select_weighted(records, time).front().index].label() ==
        "MobileNetV3-Large+fedavgm");
}

TEST_CASE("scaling every weight by a constant keeps the ranking") {
  std::vector<RunRecord> records = reference_records();
  std::vector<RankedEntry> a = select_weighted(records, {1.0 / 3, 1.0 / 3, 1.0 / 3});
  std::vector<RankedEntry> b = select_weighted(records, {2.0, 2.0, 2.0});
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].index == b[i].index);
}

TEST_CASE("affine rescaling of a raw metric cannot change the ranking") {
  std::vector<RunRecord> records = reference_records();
  std::vector<RunRecord> shifted = records;
  for (RunRecord& r : shifted) r.energy_wh = 3.5 * r.energy_wh + 40.0;

  LambdaWeights lambda{0.5, 0.2, 0.3};
  std::vector<RankedEntry> a = select_weighted(records, lambda);
  std::vector<RankedEntry> b = select_weighted(shifted, lambda);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].index == b[i].index);
    CHECK(a[i].score == doctest::Approx(b[i].score).epsilon(1e-9));
  }
}

TEST_CASE("constrained selection picks the best F1 inside the budget box") {
  std::vector<RunRecord> records = reference_records();

  // 200 Wh excludes everything but EfficientNet-B0+fedavg and the two cheap
  // MobileNetV3 rows; 5000 s then drops MobileNetV3+fedavg.
  std::size_t i = select_constrained(records, 200.0, 5000.0);
  CHECK(records[i].label() == "MobileNetV3-Large+fedprox");

  // Loose budgets admit everything, so the global F1 maximum wins.
  i = select_constrained(records, 1000.0, 20000.0);
  CHECK(records[i].label() == "ResNet-50+fedavg");
  i = select_constrained(records, 1e18, 1e18);
  CHECK(records[i].label() == "ResNet-50+fedavg");
}

TEST_CASE("infeasible budgets explain which limit cannot be met") {
  std::vector<RunRecord> records = reference_records();

  // Cheapest configuration costs 142.73 Wh.
  CHECK_THROWS_WITH_AS(static_cast<void>(select_constrained(records, 100.0, 1e18)),
                       doctest::Contains("energy limit"), infeasible_error);
  // Fastest configuration takes 4202.8 s.
  CHECK_THROWS_WITH_AS(static_cast<void>(select_constrained(records, 1e18, 100.0)),
                       doctest::Contains("time limit"), infeasible_error);
  // Each limit is individually satisfiable but never by one record.
  CHECK_THROWS_WITH_AS(static_cast<void>(select_constrained(records, 150.0, 4300.0)),
                       doctest::Contains("together"), infeasible_error);

  CHECK_THROWS_AS(static_cast<void>(select_constrained(records, -1.0, 10.0)), validation_error);
  CHECK_THROWS_AS(static_cast<void>(select_constrained({}, 1.0, 1.0)), validation_error);
}

TEST_CASE("efficiency is F1 per watt-hour at full precision") {
  std::vector<RunRecord> records = reference_records();
  for (const RunRecord& r : records) CHECK(eta(r) == r.f1 / r.energy_wh);

  CHECK(eta(make("m", "a", 1.0, 1.0, 1.0)) == 1.0);
  CHECK_THROWS_AS(eta(make("m", "a", 0.5, 0.0, 1.0)), validation_error);
}

TEST_CASE("three-decimal efficiency matches the published column") {
  std::vector<RunRecord> records = reference_records();
  struct Expect {
    const char* model;
    const char* agg;
    const char* shown;
  };
  const Expect expected[] = {
      {"EfficientNet-B0", "fedavg", "0.005"},   {"EfficientNet-B0", "fedprox", "0.004"},
      {"EfficientNet-B0", "fedavgm", "0.003"},  {"ResNet-50", "fedavg", "0.002"},
      {"ResNet-50", "fedprox", "0.002"},        {"ResNet-50", "fedavgm", "0.002"},
      {"MobileNetV3-Large", "fedavg", "0.005"}, {"MobileNetV3-Large", "fedprox", "0.006"},
      {"MobileNetV3-Large", "fedavgm", "0.005"},
  };
  for (const Expect& e : expected)
    CHECK(round3(eta(records[find(records, e.model, e.agg)])) == e.shown);
  CHECK(round3(0.0005) == "0.001");
  CHECK(round3(1.0) == "1.000");
}

TEST_CASE("pareto front handles trivial sets") {
  std::vector<RunRecord> one = {make("only", "x", 0.5, 10.0, 10.0)};
  CHECK(pareto_front(one) == std::vector<std::size_t>{0});

  // Second record is better on every axis, so the first drops out.
  std::vector<RunRecord> pair = {make("worse", "x", 0.4, 20.0, 30.0),
                                 make("better", "x", 0.6, 10.0, 20.0)};
  CHECK(pareto_front(pair) == std::vector<std::size_t>{1});

  // Incomparable records both stay.
  std::vector<RunRecord> mixed = {make("fast", "x", 0.4, 20.0, 10.0),
                                  make("strong", "x", 0.9, 30.0, 40.0)};
  CHECK(pareto_front(mixed).size() == 2);
  CHECK(pareto_front(mixed).front() == 1);  // descending F1

  CHECK_THROWS_AS(pareto_front({}), validation_error);
}

TEST_CASE("the reference table keeps seven of nine configurations on the front") {
  std::vector<RunRecord> records = reference_records();
  std::vector<std::size_t> front = pareto_front(records);
  REQUIRE(front.size() == 7);

  const char* order[] = {
      "ResNet-50+fedavg",          "ResNet-50+fedprox",         "ResNet-50+fedavgm",
      "MobileNetV3-Large+fedavg",  "MobileNetV3-Large+fedprox", "EfficientNet-B0+fedavg",
      "MobileNetV3-Large+fedavgm",
  };
  for (std::size_t i = 0; i < front.size(); ++i)
    CHECK(records[front[i]].label() == order[i]);

  // The two dominated rows are EfficientNet-B0 under fedprox and fedavgm.
  std::set<std::size_t> kept(front.begin(), front.end());
  CHECK(!kept.count(find(records, "EfficientNet-B0", "fedprox")));
  CHECK(!kept.count(find(records, "EfficientNet-B0", "fedavgm")));
}

TEST_CASE("every strictly positive weighting picks a front member") {
  std::vector<RunRecord> records = reference_records();
  std::vector<std::size_t> front = pareto_front(records);
  std::set<std::size_t> kept(front.begin(), front.end());

  rng::Stream draws(909);
  for (int trial = 0; trial < 50; ++trial) {
    LambdaWeights lambda{0.01 + draws.next_unit(), 0.01 + draws.next_unit(),
                         0.01 + draws.next_unit()};
    std::size_t winner = select_weighted(records, lambda).front().index;
    CHECK(kept.count(winner) == 1);
  }
}

TEST_CASE("records and weights are validated") {
  CHECK_THROWS_AS(make("m", "a", 1.2, 1.0, 1.0).validate(), validation_error);
  CHECK_THROWS_AS(make("m", "a", -0.1, 1.0, 1.0).validate(), validation_error);
  CHECK_THROWS_AS(make("m", "a", 0.5, 0.0, 1.0).validate(), validation_error);
  CHECK_THROWS_AS(make("m", "a", 0.5, 1.0, -3.0).validate(), validation_error);

  CHECK_THROWS_AS((LambdaWeights{0.0, 0.0, 0.0}.validate()), validation_error);
  CHECK_THROWS_AS((LambdaWeights{-0.1, 0.5, 0.6}.validate()), validation_error);
  CHECK_THROWS_AS(normalize({}), validation_error);
  CHECK_THROWS_AS(select_weighted({}, {}), validation_error);
}
