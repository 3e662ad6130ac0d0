#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "fedscope/config.hpp"
#include "fedscope/hierarchy.hpp"
#include "fedscope/selector.hpp"
#include "fedscope/telemetry.hpp"

namespace fedscope::commands {

// Generates the configured dataset and writes it (plus its manifest) under
// out_dir as dataset.fsds. The config must carry an inline dataset spec.
void cmd_gen_data(const config::ExperimentConfig& cfg, const std::string& out_dir,
                  std::ostream& log);

// Everything one (model, strategy) cell produces: the final report rows
// (clean plus one per requested use case), the per-round log, and the model.
struct RunArtifacts {
  std::vector<telemetry::ReportRow> rows;
  std::vector<hierarchy::RoundLog> rounds;
  hierarchy::HierarchicalModel model;
};

// Trains and evaluates one cell. Every cell uses the same master seed, so
// strategy and backbone comparisons are seed-matched; determinism comes from
// the session/round/client derivation chain underneath.
RunArtifacts run_cell(const synthdata::Dataset& dataset, const synthdata::Split& split,
                      const synthdata::PartitionResult& partition,
                      const config::ExperimentConfig& cfg, const config::ModelChoice& model,
                      const fedcore::StrategyConfig& strategy, std::uint64_t master_seed);

// Single-cell experiment: writes report.csv, rounds.csv, and model.fshm
// under out_dir. The config must hold exactly one model and one strategy.
void cmd_run(const config::ExperimentConfig& cfg, std::uint64_t master_seed,
             const std::string& out_dir, std::ostream& log);

// Full model x strategy grid in declaration order; one combined report.csv
// plus per-cell round logs and models. A failing cell aborts the sweep with
// that cell named.
void cmd_sweep(const config::ExperimentConfig& cfg, std::uint64_t master_seed,
               const std::string& out_dir, std::ostream& log);

struct SelectOptions {
  std::string mode;  // weighted | constrained | eta | pareto
  selector::LambdaWeights lambda;
  double e_max = 0.0;  // constrained mode
  double t_max = 0.0;
};

// Selection over a report CSV: prints the normalized audit trail, the
// mode-specific ranking, and a final "winner:" line.
void cmd_select(const std::string& csv_path, const SelectOptions& options, std::ostream& out);

// Plain-text rendering of a report CSV.
void cmd_report(const std::string& csv_path, std::ostream& out);

}  // namespace fedscope::commands
