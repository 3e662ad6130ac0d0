#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedscope/energy.hpp"
#include "fedscope/numerics.hpp"

namespace fedscope::fedcore {

enum class StrategyKind { fedavg, fedprox, fedavgm };

StrategyKind parse_strategy(const std::string& text);
std::string strategy_name(StrategyKind kind);

struct StrategyConfig {
  StrategyKind kind = StrategyKind::fedavg;
  double mu = 0.01;             // proximal pull toward the broadcast model
  double server_lr = 0.3;       // server-side step on the pseudo-gradient
  double server_momentum = 0.3;

  void validate() const;  // mu >= 0, server_lr > 0, momentum in [0, 1)
};

struct FedConfig {
  int rounds = 30;
  int local_epochs = 5;
  int batch_size = 64;
  numerics::AdamConfig opt;
  double label_smoothing = 0.1;
  double backward_factor = 2.0;  // backward cost as a multiple of forward
  int threads = 1;               // clients trained concurrently per round

  void validate() const;
};

// Rows and labels for one training session. Labels are already in the
// session's own space (group ids for the router, within-group disease
// indices for a specialist).
struct TrainContext {
  const numerics::Matrix* data = nullptr;
  const std::vector<int>* labels = nullptr;
  int classes = 0;
};

struct ClientUpdate {
  int client_id = 0;
  numerics::ParamSet params;
  std::int64_t n = 0;                // samples used
  std::vector<double> epoch_losses;  // mean training loss per local epoch
};

struct ServerState {
  numerics::ParamSet global;
  numerics::ParamSet momentum;  // zeros until fedavgm touches it
  int round = 0;
};

ServerState init_server(const numerics::ModelSpec& spec, std::uint64_t seed);

// One client's local pass: epochs x ceil(n/batch) Adam steps on smoothed
// cross-entropy, optimizer state fresh each call. Batch order per epoch is a
// seeded shuffle of the client's rows (ascending order first, then
// Fisher-Yates with derive_seed(seed, "batch", {epoch})). Under fedprox every
// gradient gains mu * (w - broadcast global).
ClientUpdate local_train(const TrainContext& ctx, const std::vector<int>& rows, int client_id,
                         const numerics::ParamSet& global, const StrategyConfig& strategy,
                         const FedConfig& config, std::uint64_t seed);

// Sample-count-weighted mean, reduced in ascending client id order no matter
// how the updates are passed in.
numerics::ParamSet aggregate_fedavg(const std::vector<ClientUpdate>& updates);

// Server momentum on the pseudo-gradient d = global - weighted average:
// v <- beta*v + d, then w <- global - lr*v. With beta=0 and lr=1 this reduces
// algebraically to plain averaging; that path assigns the average directly so
// the equivalence is exact in floating point too.
void aggregate_fedavgm(const std::vector<ClientUpdate>& updates, ServerState& server,
                       double server_lr, double server_momentum);

struct ClientTask {
  int client_id = 0;
  std::vector<int> rows;  // indices into TrainContext::data
};

struct RoundStats {
  int participants = 0;
  double train_loss = 0.0;  // sample-weighted mean of final-epoch client losses
};

// One full round: broadcast, local training (optionally threaded; results are
// slotted by task index so the thread count never changes the outcome),
// aggregation per strategy, plus ledger events. Each client contributes one
// compute event (flops = epochs * n * forward_flops * (1 + backward_factor))
// flanked by a download and an upload of param_count * 4 bytes each.
RoundStats run_round(ServerState& server, const TrainContext& ctx,
                     const std::vector<ClientTask>& tasks, const StrategyConfig& strategy,
                     const FedConfig& config, std::uint64_t session_seed, int session_id,
                     int round_index, telemetry::EnergyLedger& ledger);

}  // namespace fedscope::fedcore
