#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fedscope/telemetry.hpp"

namespace fedscope::selector {

// One evaluated configuration: a (model, aggregator) label with its quality
// metrics and resource totals.
struct RunRecord {
  std::string model;
  std::string aggregator;
  double accuracy = 0.0;
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  double energy_wh = 0.0;
  double time_s = 0.0;

  std::string label() const { return model + "+" + aggregator; }
  void validate() const;  // metrics in [0,1], energy and time positive
};

std::vector<RunRecord> from_rows(const std::vector<telemetry::ReportRow>& rows);

struct LambdaWeights {
  double l1 = 1.0 / 3.0;  // weight on normalized energy
  double l2 = 1.0 / 3.0;  // weight on normalized time
  double l3 = 1.0 / 3.0;  // weight on 1 - normalized F1

  void validate() const;  // nonnegative, not all zero
};

// Min-max normalized view of one record. A metric that is constant across
// the record set maps to 0 for every record, so it cannot influence the
// score.
struct NormalizedRecord {
  std::size_t index = 0;  // into the source record vector
  double energy = 0.0;
  double time = 0.0;
  double f1 = 0.0;
};

std::vector<NormalizedRecord> normalize(const std::vector<RunRecord>& records);

// score = l1 * energy + l2 * time + l3 * (1 - f1), all normalized.
double objective(const NormalizedRecord& norm, const LambdaWeights& lambda);

// Fixed total preference order for breaking score ties: higher F1, then
// lower energy, then lower time, then lexicographic (model, aggregator).
bool tie_before(const RunRecord& a, const RunRecord& b);

struct RankedEntry {
  std::size_t index = 0;
  NormalizedRecord norm;
  double score = 0.0;
};

// All records ordered by ascending score (ties via tie_before); the winner
// is the first entry.
std::vector<RankedEntry> select_weighted(const std::vector<RunRecord>& records,
                                         const LambdaWeights& lambda);

// Highest-F1 record with energy_wh <= e_max and time_s <= t_max. An empty
// feasible set raises infeasible_error naming the constraint(s) that no
// record can satisfy.
std::size_t select_constrained(const std::vector<RunRecord>& records, double e_max, double t_max);

// F1 per watt-hour.
double eta(const RunRecord& record);

// Three-decimal display form used next to full-precision values.
std::string round3(double value);

// Indices of records no other record dominates (F1 up, energy down, time
// down), ordered by descending F1 (ties via tie_before).
std::vector<std::size_t> pareto_front(const std::vector<RunRecord>& records);

}  // namespace fedscope::selector
