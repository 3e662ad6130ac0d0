#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedscope/energy.hpp"
#include "fedscope/fedcore.hpp"
#include "fedscope/synthdata.hpp"

namespace fedscope::config {

// A named hidden-layer stack; the name labels report rows.
struct ModelChoice {
  std::string name;
  std::vector<int> hidden;
};

// Built-in stacks: mlp-small [32], mlp-medium [64, 32], mlp-large [128, 64].
ModelChoice model_preset(const std::string& name);

// One experiment, declaratively: the data source, the federation shape, the
// model/strategy grid, the evaluation corruption list, and the power model.
// A single-entry grid behaves exactly like a plain run.
struct ExperimentConfig {
  synthdata::DatasetSpec dataset;  // generated on the fly unless a path is given
  std::string dataset_path;        // when set, load this file instead
  int clients = 10;
  fedcore::FedConfig fed;          // rounds, epochs, batch, optimizer, threads
  std::vector<ModelChoice> models;
  std::vector<fedcore::StrategyConfig> strategies;
  std::vector<int> use_cases;      // corruption variants evaluated after training
  telemetry::PowerModel power;
  std::optional<std::uint64_t> seed;  // master training seed

  void validate() const;
};

// The built-in desk-scale experiment: default dataset, 10 clients, 30 rounds,
// 5 local epochs, batch 64, mlp-small under fedavg, every use case.
ExperimentConfig default_config();

// JSON file / text loaders. Unknown keys are rejected so typos cannot pass
// silently. Absent keys keep the default_config values.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);

// Master-seed resolution, strongest first: explicit override (the --seed
// flag), the config file, the FEDSCOPE_SEED environment variable, then 0.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& override_seed,
                           const ExperimentConfig& cfg);

// Deterministic provenance comments echoed into every generated CSV: the
// effective configuration, one "key: value" line per setting. Wallclock
// energy adds an explicit non-reproducibility warning.
std::vector<std::string> echo_lines(const ExperimentConfig& cfg, std::uint64_t master_seed);

// Parses "all", "none", or a single digit 1..5 into a use-case list edit.
std::vector<int> parse_use_case_list(const std::vector<std::string>& tokens);

}  // namespace fedscope::config
