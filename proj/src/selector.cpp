#include "fedscope/selector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "fedscope/errors.hpp"

namespace fedscope::selector {

void RunRecord::validate() const {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(accuracy) || !in_unit(recall) || !in_unit(precision) || !in_unit(f1))
    throw validation_error("record " + label() + ": metrics must lie in [0, 1]");
  if (!(energy_wh > 0.0)) throw validation_error("record " + label() + ": energy must be positive");
  if (!(time_s > 0.0)) throw validation_error("record " + label() + ": time must be positive");
}

std::vector<RunRecord> from_rows(const std::vector<telemetry::ReportRow>& rows) {
  std::vector<RunRecord> records;
  records.reserve(rows.size());
  for (const telemetry::ReportRow& row : rows) {
    RunRecord r;
    r.model = row.model;
    r.aggregator = row.aggregator;
    r.accuracy = row.accuracy;
    r.recall = row.recall;
    r.precision = row.precision;
    r.f1 = row.f1;
    r.energy_wh = row.total_energy_wh;
    r.time_s = row.total_time_s;
    r.validate();
    records.push_back(std::move(r));
  }
  return records;
}

void LambdaWeights::validate() const {
  if (l1 < 0.0 || l2 < 0.0 || l3 < 0.0)
    throw validation_error("lambda weights must be non-negative");
  if (l1 == 0.0 && l2 == 0.0 && l3 == 0.0)
    throw validation_error("at least one lambda weight must be positive");
}

namespace {

double rescale(double value, double lo, double hi) {
  if (hi == lo) return 0.0;  // constant column: no influence on the score
  return (value - lo) / (hi - lo);
}

}  // namespace

std::vector<NormalizedRecord> normalize(const std::vector<RunRecord>& records) {
  if (records.empty()) throw validation_error("normalize: no records");
  double e_lo = records[0].energy_wh, e_hi = e_lo;
  double t_lo = records[0].time_s, t_hi = t_lo;
  double f_lo = records[0].f1, f_hi = f_lo;
  for (const RunRecord& r : records) {
    r.validate();
    e_lo = std::min(e_lo, r.energy_wh);
    e_hi = std::max(e_hi, r.energy_wh);
    t_lo = std::min(t_lo, r.time_s);
    t_hi = std::max(t_hi, r.time_s);
    f_lo = std::min(f_lo, r.f1);
    f_hi = std::max(f_hi, r.f1);
  }
  std::vector<NormalizedRecord> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    NormalizedRecord n;
    n.index = i;
    n.energy = rescale(records[i].energy_wh, e_lo, e_hi);
    n.time = rescale(records[i].time_s, t_lo, t_hi);
    n.f1 = rescale(records[i].f1, f_lo, f_hi);
    out.push_back(n);
  }
  return out;
}

double objective(const NormalizedRecord& norm, const LambdaWeights& lambda) {
  lambda.validate();
  return lambda.l1 * norm.energy + lambda.l2 * norm.time + lambda.l3 * (1.0 - norm.f1);
}

bool tie_before(const RunRecord& a, const RunRecord& b) {
  if (a.f1 != b.f1) return a.f1 > b.f1;
  if (a.energy_wh != b.energy_wh) return a.energy_wh < b.energy_wh;
  if (a.time_s != b.time_s) return a.time_s < b.time_s;
  if (a.model != b.model) return a.model < b.model;
  return a.aggregator < b.aggregator;
}

std::vector<RankedEntry> select_weighted(const std::vector<RunRecord>& records,
                                         const LambdaWeights& lambda) {
  lambda.validate();
  std::vector<NormalizedRecord> norms = normalize(records);
  std::vector<RankedEntry> ranking;
  ranking.reserve(norms.size());
  for (const NormalizedRecord& n : norms)
    ranking.push_back({n.index, n, objective(n, lambda)});
  std::sort(ranking.begin(), ranking.end(), [&](const RankedEntry& a, const RankedEntry& b) {
    if (a.score != b.score) return a.score < b.score;
    return tie_before(records[a.index], records[b.index]);
  });
  return ranking;
}

std::size_t select_constrained(const std::vector<RunRecord>& records, double e_max, double t_max) {
  if (records.empty()) throw validation_error("select: no records");
  if (!(e_max > 0.0) || !(t_max > 0.0))
    throw validation_error("select: limits must be positive");

  std::size_t best = records.size();
  double e_min = std::numeric_limits<double>::infinity();
  double t_min = e_min;
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].validate();
    e_min = std::min(e_min, records[i].energy_wh);
    t_min = std::min(t_min, records[i].time_s);
    if (records[i].energy_wh > e_max || records[i].time_s > t_max) continue;
    if (best == records.size() || tie_before(records[i], records[best])) best = i;
  }
  if (best != records.size()) return best;

  std::string reason;
  if (e_min > e_max)
    reason += "energy limit " + telemetry::format_double(e_max) + " Wh is below the minimum " +
              telemetry::format_double(e_min) + " Wh";
  if (t_min > t_max) {
    if (!reason.empty()) reason += "; ";
    reason += "time limit " + telemetry::format_double(t_max) + " s is below the minimum " +
              telemetry::format_double(t_min) + " s";
  }
  if (reason.empty())
    reason = "no configuration satisfies both E <= " + telemetry::format_double(e_max) +
             " Wh and T <= " + telemetry::format_double(t_max) + " s together";
  throw infeasible_error("no feasible configuration: " + reason);
}

double eta(const RunRecord& record) {
  if (!(record.energy_wh > 0.0))
    throw validation_error("eta: energy must be positive for " + record.label());
  return record.f1 / record.energy_wh;
}

std::string round3(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", value);
  return buf;
}

std::vector<std::size_t> pareto_front(const std::vector<RunRecord>& records) {
  if (records.empty()) throw validation_error("pareto: no records");
  for (const RunRecord& r : records) r.validate();

  auto dominates = [](const RunRecord& a, const RunRecord& b) {
    bool no_worse = a.f1 >= b.f1 && a.energy_wh <= b.energy_wh && a.time_s <= b.time_s;
    bool better = a.f1 > b.f1 || a.energy_wh < b.energy_wh || a.time_s < b.time_s;
    return no_worse && better;
  };

  std::vector<std::size_t> front;
  for (std::size_t i = 0; i < records.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < records.size() && !dominated; ++j)
      if (j != i && dominates(records[j], records[i])) dominated = true;
    if (!dominated) front.push_back(i);
  }
  std::sort(front.begin(), front.end(), [&](std::size_t a, std::size_t b) {
    return tie_before(records[a], records[b]);
  });
  return front;
}

}  // namespace fedscope::selector
