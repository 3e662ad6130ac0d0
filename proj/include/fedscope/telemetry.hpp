#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedscope/energy.hpp"
#include "fedscope/hierarchy.hpp"
#include "fedscope/synthdata.hpp"

namespace fedscope::telemetry {

// Truth-major count matrix over the flat (group, disease) label space.
struct ConfusionMatrix {
  int classes = 0;
  std::vector<std::int64_t> counts;

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int k)
      : classes(k), counts(static_cast<std::size_t>(k) * static_cast<std::size_t>(k), 0) {}
  std::int64_t& at(int truth, int pred) {
    return counts[static_cast<std::size_t>(truth) * classes + pred];
  }
  std::int64_t at(int truth, int pred) const {
    return counts[static_cast<std::size_t>(truth) * classes + pred];
  }
  std::int64_t total() const;
};

struct MetricSummary {
  double accuracy = 0.0;
  double recall = 0.0;     // macro mean over all classes
  double precision = 0.0;  // macro mean over all classes
  double f1 = 0.0;         // macro mean of per-class F1
};

// Macro averaging: per-class precision/recall/F1 with the 0/0 -> 0
// convention, then the unweighted mean over every class in the label space
// (classes absent from truth and predictions contribute 0).
MetricSummary metrics_from(const ConfusionMatrix& m);

struct EvalResult {
  MetricSummary metrics;
  ConfusionMatrix confusion;
};

// Runs the two-stage model over the given dataset rows. use_case 0 keeps
// images clean; 1..5 applies that degradation to every image, each sample
// seeded by derive_seed(seed, "corrupt", {use_case, sample id}) so results
// do not depend on evaluation order.
EvalResult evaluate(const hierarchy::HierarchicalModel& model, const synthdata::Dataset& dataset,
                    const std::vector<std::int32_t>& rows, int use_case, std::uint64_t seed,
                    const synthdata::CorruptionRecipe& recipe = {});

// Shortest decimal form that parses back to exactly the same double.
std::string format_double(double value);

// One line of the final report, mirroring the summary-table shape.
struct ReportRow {
  std::string model;       // configuration label; evaluation variants append "+ucN"
  std::string aggregator;  // fedavg | fedprox | fedavgm
  double accuracy = 0.0;
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  double total_energy_wh = 0.0;
  double total_time_s = 0.0;
  double eta = 0.0;
};

inline constexpr const char* kReportHeader =
    "model,aggregator,accuracy,recall,precision,f1,total_energy_wh,total_time_s,eta";
inline constexpr const char* kRoundHeader =
    "session,round,participants,train_loss,val_loss,val_acc,cum_energy_wh,cum_time_s";

// Comment lines (if any) are written first, each prefixed "# ". Numbers use
// format_double so a parse-back reproduces the exact doubles.
void write_report_csv(const std::string& path, const std::vector<ReportRow>& rows,
                      const std::vector<std::string>& comments = {});
void write_round_log_csv(const std::string& path, const std::vector<hierarchy::RoundLog>& rows,
                         const std::vector<std::string>& comments = {});

// Parses a report CSV produced by write_report_csv or any file with the same
// header; '#' lines are skipped. Header mismatch is a validation error,
// unreadable files an I/O error.
std::vector<ReportRow> parse_report_csv(const std::string& path);

}  // namespace fedscope::telemetry
