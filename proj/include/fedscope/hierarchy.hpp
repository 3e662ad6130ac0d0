#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedscope/energy.hpp"
#include "fedscope/fedcore.hpp"
#include "fedscope/numerics.hpp"
#include "fedscope/synthdata.hpp"

namespace fedscope::hierarchy {

// All pixels of a dataset as one row-per-sample matrix (row = sample
// position); training and evaluation index into it.
numerics::Matrix pixel_matrix(const synthdata::Dataset& dataset);

// One federated training session: the router (session 0, group classifier
// over all training data) or a specialist (session g+1, disease classifier
// over group g only, labels relabeled to within-group indices).
struct SessionPlan {
  int session_id = 0;
  int group = -1;  // -1 for the router
  int classes = 0;
  numerics::ModelSpec model;
  int rounds = 0;
  int local_epochs = 0;
  std::vector<int> labels;                // per dataset row; -1 outside the session
  std::vector<fedcore::ClientTask> tasks; // participating clients, filtered rows
  std::vector<int> val_rows;              // session-filtered validation rows
};

// 1 + G plans, router first, then groups ascending. A client joins session
// g+1 only if its shard holds at least one sample of group g; every client
// with a non-empty shard joins the router session.
std::vector<SessionPlan> plan_sessions(const synthdata::Dataset& dataset,
                                       const synthdata::Split& split,
                                       const synthdata::PartitionResult& partition,
                                       const std::vector<int>& hidden,
                                       const fedcore::FedConfig& config);

struct HierarchicalModel {
  numerics::ModelSpec router_spec;
  numerics::ParamSet router;
  std::vector<numerics::ModelSpec> specialist_specs;  // indexed by group
  std::vector<numerics::ParamSet> specialists;

  int groups() const { return static_cast<int>(specialists.size()); }
  void validate() const;
};

// Group = argmax of router logits, then disease = argmax of that group's
// specialist. Argmax ties resolve to the lowest index.
struct Prediction {
  int group = 0;
  int disease = 0;
};
Prediction predict(const HierarchicalModel& model, const std::vector<double>& image);

struct RoundLog {
  int session = 0;
  int round = 0;
  int participants = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;  // training objective (smoothed CE) on clean val rows
  double val_acc = 0.0;   // session-task accuracy on clean val rows
  double cum_energy_wh = 0.0;  // experiment-level running totals
  double cum_time_s = 0.0;
};

struct TrainResult {
  HierarchicalModel model;
  std::vector<RoundLog> rounds;
  telemetry::EnergyLedger ledger;
};

// Runs every plan sequentially in plan order on one shared ledger. Seed
// chain, fixed so reruns and tests can reproduce any stage: session seed =
// derive_seed(seed, "session", {session_id}); initial server parameters use
// derive_seed(session_seed, "init"); round r client c trains with
// derive_seed(session_seed, "client", {r, c}).
TrainResult train_hierarchy(const synthdata::Dataset& dataset,
                            const std::vector<SessionPlan>& plans,
                            const fedcore::StrategyConfig& strategy,
                            const fedcore::FedConfig& config,
                            const telemetry::PowerModel& power, std::uint64_t seed);

// Model container round-trip. Binary layout: magic "FSHM", u32 version,
// router (spec then parameters), u32 group count, then each specialist.
// Specs are u32 fields (input, hidden count, hidden sizes, classes);
// parameters are little-endian f64, layer by layer, weights then biases.
// A JSON sidecar at path + ".meta.json" records strategy and seed.
struct ModelMeta {
  std::string strategy;
  std::uint64_t seed = 0;
};
void write_model(const HierarchicalModel& model, const ModelMeta& meta, const std::string& path);
HierarchicalModel read_model(const std::string& path, ModelMeta* meta = nullptr);

}  // namespace fedscope::hierarchy
