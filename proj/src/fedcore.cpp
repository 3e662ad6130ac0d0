#include "fedscope/fedcore.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

#include "fedscope/errors.hpp"
#include "fedscope/rng.hpp"

namespace fedscope::fedcore {

StrategyKind parse_strategy(const std::string& text) {
  if (text == "fedavg") return StrategyKind::fedavg;
  if (text == "fedprox") return StrategyKind::fedprox;
  if (text == "fedavgm") return StrategyKind::fedavgm;
  throw validation_error("unknown aggregation strategy '" + text +
                         "' (expected fedavg, fedprox, or fedavgm)");
}

std::string strategy_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::fedavg: return "fedavg";
    case StrategyKind::fedprox: return "fedprox";
    case StrategyKind::fedavgm: return "fedavgm";
  }
  return "?";
}

void StrategyConfig::validate() const {
  if (mu < 0.0) throw validation_error("strategy: mu must be non-negative");
  if (!(server_lr > 0.0)) throw validation_error("strategy: server learning rate must be positive");
  if (server_momentum < 0.0 || server_momentum >= 1.0)
    throw validation_error("strategy: server momentum must lie in [0, 1)");
}

void FedConfig::validate() const {
  if (rounds < 0) throw validation_error("fed config: rounds must be non-negative");
  if (local_epochs < 1) throw validation_error("fed config: local epochs must be positive");
  if (batch_size < 1) throw validation_error("fed config: batch size must be positive");
  if (label_smoothing < 0.0 || label_smoothing >= 1.0)
    throw validation_error("fed config: label smoothing must lie in [0, 1)");
  if (backward_factor < 0.0) throw validation_error("fed config: backward factor must be non-negative");
  if (threads < 1) throw validation_error("fed config: threads must be positive");
}

ServerState init_server(const numerics::ModelSpec& spec, std::uint64_t seed) {
  ServerState s;
  s.global = numerics::init_params(spec, seed);
  s.momentum = numerics::zeros_like(s.global);
  return s;
}

ClientUpdate local_train(const TrainContext& ctx, const std::vector<int>& rows, int client_id,
                         const numerics::ParamSet& global, const StrategyConfig& strategy,
                         const FedConfig& config, std::uint64_t seed) {
  strategy.validate();
  config.validate();
  if (ctx.data == nullptr || ctx.labels == nullptr)
    throw validation_error("local_train: missing training context");
  if (rows.empty()) throw validation_error("local_train: client has no samples");

  const numerics::Matrix& data = *ctx.data;
  const std::vector<int>& labels = *ctx.labels;

  std::vector<int> order = rows;
  std::sort(order.begin(), order.end());  // stable base independent of caller order

  ClientUpdate update;
  update.client_id = client_id;
  update.n = static_cast<std::int64_t>(rows.size());
  update.params = global;

  numerics::AdamState opt_state = numerics::AdamState::init(update.params, config.opt);
  numerics::Proximal prox{strategy.kind == StrategyKind::fedprox ? strategy.mu : 0.0, &global};

  const int features = data.cols;
  for (int epoch = 0; epoch < config.local_epochs; ++epoch) {
    rng::Stream stream(rng::derive_seed(seed, "batch", {static_cast<std::uint64_t>(epoch)}));
    rng::shuffle(order, stream);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      std::size_t count = std::min(order.size() - start, static_cast<std::size_t>(config.batch_size));
      numerics::Matrix batch(static_cast<int>(count), features);
      std::vector<int> y(count);
      for (std::size_t i = 0; i < count; ++i) {
        int row = order[start + i];
        std::copy_n(data.data.begin() + static_cast<std::ptrdiff_t>(row) * features, features,
                    batch.data.begin() + static_cast<std::ptrdiff_t>(i) * features);
        y[i] = labels[static_cast<std::size_t>(row)];
      }
      double loss = 0.0;
      numerics::ParamSet grads =
          numerics::gradient(update.params, batch, y, config.label_smoothing, &prox, &loss);
      numerics::adam_step(update.params, opt_state, grads);
      loss_sum += loss * static_cast<double>(count);
    }
    update.epoch_losses.push_back(loss_sum / static_cast<double>(order.size()));
  }
  return update;
}

namespace {

// Updates viewed in ascending client id order; duplicate ids rejected.
std::vector<const ClientUpdate*> ordered_view(const std::vector<ClientUpdate>& updates) {
  if (updates.empty()) throw validation_error("aggregation: no client updates");
  std::vector<const ClientUpdate*> view;
  view.reserve(updates.size());
  for (const ClientUpdate& u : updates) {
    if (u.n < 1) throw validation_error("aggregation: client update without samples");
    view.push_back(&u);
  }
  std::sort(view.begin(), view.end(),
            [](const ClientUpdate* a, const ClientUpdate* b) { return a->client_id < b->client_id; });
  for (std::size_t i = 1; i < view.size(); ++i)
    if (view[i]->client_id == view[i - 1]->client_id)
      throw validation_error("aggregation: duplicate client id");
  return view;
}

}  // namespace

numerics::ParamSet aggregate_fedavg(const std::vector<ClientUpdate>& updates) {
  std::vector<const ClientUpdate*> view = ordered_view(updates);
  std::int64_t total = 0;
  for (const ClientUpdate* u : view) total += u->n;
  std::vector<const numerics::ParamSet*> sets;
  std::vector<double> weights;
  sets.reserve(view.size());
  weights.reserve(view.size());
  for (const ClientUpdate* u : view) {
    sets.push_back(&u->params);
    weights.push_back(static_cast<double>(u->n) / static_cast<double>(total));
  }
  return numerics::weighted_average(sets, weights);
}

void aggregate_fedavgm(const std::vector<ClientUpdate>& updates, ServerState& server,
                       double server_lr, double server_momentum) {
  numerics::ParamSet avg = aggregate_fedavg(updates);
  numerics::check_same_shape(server.global, avg);
  numerics::check_same_shape(server.global, server.momentum);

  numerics::ParamSet delta = numerics::difference(server.global, avg);
  // v <- beta*v + delta
  for (std::size_t l = 0; l < delta.layers.size(); ++l) {
    numerics::Layer& v = server.momentum.layers[l];
    const numerics::Layer& d = delta.layers[l];
    for (std::size_t j = 0; j < v.w.size(); ++j) v.w[j] = server_momentum * v.w[j] + d.w[j];
    for (std::size_t j = 0; j < v.b.size(); ++j) v.b[j] = server_momentum * v.b[j] + d.b[j];
  }
  if (server_momentum == 0.0 && server_lr == 1.0) {
    // w - 1*(w - avg) is exactly avg; computing it that way keeps the
    // documented reduction to plain averaging bit-exact.
    server.global = std::move(avg);
  } else {
    numerics::add_scaled(server.global, server.momentum, -server_lr);
  }
  ++server.round;
}

RoundStats run_round(ServerState& server, const TrainContext& ctx,
                     const std::vector<ClientTask>& tasks, const StrategyConfig& strategy,
                     const FedConfig& config, std::uint64_t session_seed, int session_id,
                     int round_index, telemetry::EnergyLedger& ledger) {
  strategy.validate();
  config.validate();
  std::vector<const ClientTask*> active;
  for (const ClientTask& t : tasks)
    if (!t.rows.empty()) active.push_back(&t);
  if (active.empty()) throw validation_error("run_round: no participating clients");
  std::sort(active.begin(), active.end(),
            [](const ClientTask* a, const ClientTask* b) { return a->client_id < b->client_id; });

  std::vector<ClientUpdate> updates(active.size());
  std::vector<double> walls(active.size(), 0.0);

  auto train_one = [&](std::size_t i) {
    const ClientTask& task = *active[i];
    std::uint64_t seed = rng::derive_seed(session_seed, "client",
                                          {static_cast<std::uint64_t>(round_index),
                                           static_cast<std::uint64_t>(task.client_id)});
    auto t0 = std::chrono::steady_clock::now();
    updates[i] = local_train(ctx, task.rows, task.client_id, server.global, strategy, config, seed);
    walls[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  int workers = std::min<int>(config.threads, static_cast<int>(active.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < active.size(); ++i) train_one(i);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t i = static_cast<std::size_t>(t); i < active.size();
             i += static_cast<std::size_t>(workers))
          train_one(i);
      });
    for (std::thread& th : pool) th.join();
  }

  // Ledger entries in ascending client id order regardless of who finished
  // first: download, compute, upload per client.
  const std::int64_t payload = server.global.coord_count() * 4;
  // Forward cost from the actual layer shapes: 2 * in * out per layer.
  double fwd_flops = 0.0;
  for (const numerics::Layer& l : server.global.layers)
    fwd_flops += 2.0 * static_cast<double>(l.in) * static_cast<double>(l.out);
  for (std::size_t i = 0; i < active.size(); ++i) {
    const ClientUpdate& u = updates[i];
    std::int64_t flops = static_cast<std::int64_t>(
        static_cast<double>(config.local_epochs) * static_cast<double>(u.n) * fwd_flops *
        (1.0 + config.backward_factor));
    ledger.add({session_id, round_index, u.client_id, telemetry::EventKind::communication, 0.0,
                payload, 0});
    ledger.add({session_id, round_index, u.client_id, telemetry::EventKind::compute, walls[i], 0,
                flops});
    ledger.add({session_id, round_index, u.client_id, telemetry::EventKind::communication, 0.0,
                payload, 0});
  }

  RoundStats stats;
  stats.participants = static_cast<int>(active.size());
  double weighted = 0.0;
  std::int64_t total = 0;
  for (const ClientUpdate& u : updates) {
    weighted += u.epoch_losses.back() * static_cast<double>(u.n);
    total += u.n;
  }
  stats.train_loss = weighted / static_cast<double>(total);

  switch (strategy.kind) {
    case StrategyKind::fedavg:
    case StrategyKind::fedprox:
      server.global = aggregate_fedavg(updates);
      ++server.round;
      break;
    case StrategyKind::fedavgm:
      aggregate_fedavgm(updates, server, strategy.server_lr, strategy.server_momentum);
      break;
  }
  return stats;
}

}  // namespace fedscope::fedcore
