#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fedscope/errors.hpp"
#include "fedscope/fedcore.hpp"
#include "fedscope/rng.hpp"
#include "fedscope/synthdata.hpp"

using namespace fedscope;
using namespace fedscope::fedcore;

namespace {

// Small training setup shared by the tests: group labels of a tiny synthetic
// dataset, all rows in one matrix.
struct Fixture {
  synthdata::Dataset dataset;
  numerics::Matrix data;
  std::vector<int> labels;
  TrainContext ctx;
  numerics::ModelSpec model;

  Fixture() {
    synthdata::DatasetSpec spec;
    spec.groups = 2;
    spec.diseases_per_group = {2, 2};
    spec.samples_per_class = 15;
    spec.side = 4;
    spec.margin = 0.8;
    spec.noise = 0.15;
    spec.seed = 303;
    dataset = synthdata::generate(spec);

    data = numerics::Matrix(static_cast<int>(dataset.samples.size()), spec.pixel_count());
    labels.resize(dataset.samples.size());
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
      for (int p = 0; p < spec.pixel_count(); ++p)
        data.at(static_cast<int>(i), p) = dataset.samples[i].pixels[static_cast<std::size_t>(p)];
      labels[i] = dataset.samples[i].group;
    }
    ctx = TrainContext{&data, &labels, spec.groups};
    model = numerics::ModelSpec{spec.pixel_count(), {8}, spec.groups};
  }

  std::vector<int> rows_of(int from, int to) const {
    std::vector<int> rows(static_cast<std::size_t>(to - from));
    std::iota(rows.begin(), rows.end(), from);
    return rows;
  }
};

FedConfig quick_config() {
  FedConfig c;
  c.rounds = 2;
  c.local_epochs = 2;
  c.batch_size = 8;
  return c;
}

ClientUpdate make_update(int id, double value, std::int64_t n) {
  ClientUpdate u;
  u.client_id = id;
  u.n = n;
  numerics::Layer l;
  l.in = 1;
  l.out = 1;
  l.w = {value};
  l.b = {0.0};
  u.params.layers.push_back(l);
  u.epoch_losses = {0.0};
  return u;
}

ServerState scalar_server(double value) {
  ServerState s;
  numerics::Layer l;
  l.in = 1;
  l.out = 1;
  l.w = {value};
  l.b = {0.0};
  s.global.layers.push_back(l);
  s.momentum = numerics::zeros_like(s.global);
  return s;
}

}  // namespace

TEST_CASE("zero learning rate leaves the broadcast model untouched") {
  Fixture f;
  numerics::ParamSet global = numerics::init_params(f.model, 1);
  FedConfig config = quick_config();
  config.opt.lr = 0.0;
  config.opt.weight_decay = 0.0;
  ClientUpdate u = local_train(f.ctx, f.rows_of(0, 20), 0, global, {}, config, 9);
  CHECK(numerics::bit_identical(u.params, global));
  CHECK(u.n == 20);
  CHECK(u.epoch_losses.size() == 2);
}

TEST_CASE("fedprox with mu zero trains bit-identically to fedavg") {
  Fixture f;
  numerics::ParamSet global = numerics::init_params(f.model, 2);
  FedConfig config = quick_config();

  StrategyConfig prox;
  prox.kind = StrategyKind::fedprox;
  prox.mu = 0.0;
  ClientUpdate a = local_train(f.ctx, f.rows_of(0, 24), 0, global, {}, config, 5);
  ClientUpdate b = local_train(f.ctx, f.rows_of(0, 24), 0, global, prox, config, 5);
  CHECK(numerics::bit_identical(a.params, b.params));
}

TEST_CASE("fedprox with positive mu changes the result") {
  Fixture f;
  numerics::ParamSet global = numerics::init_params(f.model, 2);
  FedConfig config = quick_config();
  StrategyConfig prox;
  prox.kind = StrategyKind::fedprox;
  prox.mu = 0.5;
  ClientUpdate a = local_train(f.ctx, f.rows_of(0, 24), 0, global, {}, config, 5);
  ClientUpdate b = local_train(f.ctx, f.rows_of(0, 24), 0, global, prox, config, 5);
  CHECK(!numerics::bit_identical(a.params, b.params));
}

TEST_CASE("local training equals a straight-line centralized run with the same seed") {
  Fixture f;
  numerics::ParamSet global = numerics::init_params(f.model, 3);
  FedConfig config = quick_config();
  config.local_epochs = 3;
  std::vector<int> rows = f.rows_of(4, 40);
  const std::uint64_t seed = 1234;

  // The documented procedure, written out directly against the numerics API:
  // rows sorted ascending, per-epoch Fisher-Yates with the derived seed,
  // consecutive batches, fresh Adam state.
  numerics::ParamSet expected = global;
  numerics::AdamState st = numerics::AdamState::init(expected, config.opt);
  std::vector<int> order = rows;
  std::sort(order.begin(), order.end());
  for (int epoch = 0; epoch < config.local_epochs; ++epoch) {
    rng::Stream stream(rng::derive_seed(seed, "batch", {static_cast<std::uint64_t>(epoch)}));
    rng::shuffle(order, stream);
    for (std::size_t start = 0; start < order.size(); start += 8) {
      std::size_t count = std::min<std::size_t>(8, order.size() - start);
      numerics::Matrix batch(static_cast<int>(count), f.data.cols);
      std::vector<int> y(count);
      for (std::size_t i = 0; i < count; ++i) {
        int row = order[start + i];
        for (int c = 0; c < f.data.cols; ++c)
          batch.at(static_cast<int>(i), c) = f.data.at(row, c);
        y[i] = f.labels[static_cast<std::size_t>(row)];
      }
      numerics::ParamSet g = numerics::gradient(expected, batch, y, config.label_smoothing);
      numerics::adam_step(expected, st, g);
    }
  }

  ClientUpdate u = local_train(f.ctx, rows, 0, global, {}, config, seed);
  CHECK(numerics::bit_identical(u.params, expected));
}

TEST_CASE("local training is deterministic and caller-order independent") {
  Fixture f;
  numerics::ParamSet global = numerics::init_params(f.model, 4);
  FedConfig config = quick_config();
  std::vector<int> rows = f.rows_of(0, 30);
  std::vector<int> reversed(rows.rbegin(), rows.rend());
  ClientUpdate a = local_train(f.ctx, rows, 0, global, {}, config, 6);
  ClientUpdate b = local_train(f.ctx, reversed, 0, global, {}, config, 6);
  CHECK(numerics::bit_identical(a.params, b.params));
}

TEST_CASE("weighted averaging matches hand values") {
  std::vector<ClientUpdate> equal{make_update(0, 0.0, 5), make_update(1, 4.0, 5)};
  CHECK(aggregate_fedavg(equal).layers[0].w[0] == 2.0);

  std::vector<ClientUpdate> skewed{make_update(0, 0.0, 1), make_update(1, 4.0, 3)};
  CHECK(aggregate_fedavg(skewed).layers[0].w[0] == 3.0);

  std::vector<ClientUpdate> single{make_update(7, 1.25, 10)};
  CHECK(aggregate_fedavg(single).layers[0].w[0] == 1.25);
}

TEST_CASE("aggregation ignores the order updates arrive in") {
  std::vector<ClientUpdate> inorder{make_update(0, 1.0, 2), make_update(1, 2.0, 3),
                                    make_update(2, 4.0, 5)};
  std::vector<ClientUpdate> shuffled{inorder[2], inorder[0], inorder[1]};
  numerics::ParamSet a = aggregate_fedavg(inorder);
  numerics::ParamSet b = aggregate_fedavg(shuffled);
  CHECK(numerics::bit_identical(a, b));
}

TEST_CASE("averaging identical updates reproduces them exactly") {
  Fixture f;
  numerics::ParamSet trained = numerics::init_params(f.model, 99);
  std::vector<ClientUpdate> updates;
  for (int id = 0; id < 3; ++id) {
    ClientUpdate u;
    u.client_id = id;
    u.n = 12;
    u.params = trained;
    u.epoch_losses = {0.0};
    updates.push_back(std::move(u));
  }
  CHECK(numerics::bit_identical(aggregate_fedavg(updates), trained));
}

TEST_CASE("the average stays inside the elementwise client envelope") {
  rng::Stream seeds(2718);
  numerics::ModelSpec spec{3, {2}, 2};
  for (int trial = 0; trial < 8; ++trial) {
    std::vector<ClientUpdate> updates;
    for (int id = 0; id < 4; ++id) {
      ClientUpdate u;
      u.client_id = id;
      u.n = 1 + static_cast<std::int64_t>(seeds.next_below(9));
      u.params = numerics::init_params(spec, seeds.next_u64());
      u.epoch_losses = {0.0};
      updates.push_back(std::move(u));
    }
    numerics::ParamSet avg = aggregate_fedavg(updates);
    for (std::int64_t c = 0; c < avg.coord_count(); ++c) {
      double lo = 1e300, hi = -1e300;
      for (const ClientUpdate& u : updates) {
        lo = std::min(lo, u.params.get_coord(c));
        hi = std::max(hi, u.params.get_coord(c));
      }
      CHECK(avg.get_coord(c) >= lo - 1e-12);
      CHECK(avg.get_coord(c) <= hi + 1e-12);
    }
  }
}

TEST_CASE("aggregation rejects bad input") {
  CHECK_THROWS_AS(aggregate_fedavg({}), validation_error);

  std::vector<ClientUpdate> dup{make_update(1, 0.0, 2), make_update(1, 1.0, 2)};
  CHECK_THROWS_AS(aggregate_fedavg(dup), validation_error);

  ClientUpdate other = make_update(1, 1.0, 2);
  other.params.layers[0].w.push_back(0.0);
  other.params.layers[0].in = 2;
  std::vector<ClientUpdate> mismatched{make_update(0, 0.0, 2), other};
  CHECK_THROWS_AS(aggregate_fedavg(mismatched), dimension_error);
}

TEST_CASE("server momentum update matches the hand-applied rule") {
  // global 1, average 0, empty momentum: d = 1, v = 1, w = 1 - 0.3*1 = 0.7.
  ServerState s = scalar_server(1.0);
  std::vector<ClientUpdate> updates{make_update(0, 0.0, 4)};
  aggregate_fedavgm(updates, s, 0.3, 0.3);
  CHECK(s.global.layers[0].w[0] == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(s.momentum.layers[0].w[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s.round == 1);

  // Second application from the new state: avg 0 again, d = 0.7,
  // v = 0.3*1 + 0.7 = 1, w = 0.7 - 0.3.
  aggregate_fedavgm(updates, s, 0.3, 0.3);
  CHECK(s.global.layers[0].w[0] == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("momentum-free unit-step server update is plain averaging, bit for bit") {
  Fixture f;
  ServerState a = init_server(f.model, 42);
  ServerState b = init_server(f.model, 42);
  rng::Stream seeds(5);
  for (int round = 0; round < 4; ++round) {
    std::vector<ClientUpdate> updates;
    for (int id = 0; id < 3; ++id) {
      ClientUpdate u;
      u.client_id = id;
      u.n = 2 + static_cast<std::int64_t>(seeds.next_below(7));
      u.params = numerics::init_params(f.model, seeds.next_u64());
      u.epoch_losses = {0.0};
      updates.push_back(std::move(u));
    }
    a.global = aggregate_fedavg(updates);
    ++a.round;
    aggregate_fedavgm(updates, b, 1.0, 0.0);
    CHECK(numerics::bit_identical(a.global, b.global));
  }
}

TEST_CASE("zero pseudo-gradient leaves the model exactly in place") {
  ServerState s = scalar_server(0.625);
  std::vector<ClientUpdate> updates{make_update(0, 0.625, 4)};
  aggregate_fedavgm(updates, s, 0.3, 0.3);
  CHECK(s.global.layers[0].w[0] == 0.625);
}

TEST_CASE("one-client rounds adopt that client's parameters") {
  Fixture f;
  ServerState server = init_server(f.model, 7);
  numerics::ParamSet broadcast = server.global;
  FedConfig config = quick_config();
  telemetry::EnergyLedger ledger;
  std::vector<ClientTask> tasks{{0, f.rows_of(0, 25)}};

  RoundStats stats = run_round(server, f.ctx, tasks, {}, config, 11, 0, 0, ledger);
  CHECK(stats.participants == 1);

  std::uint64_t seed = rng::derive_seed(11, "client", {0, 0});
  ClientUpdate expected = local_train(f.ctx, f.rows_of(0, 25), 0, broadcast, {}, config, seed);
  CHECK(numerics::bit_identical(server.global, expected.params));
  CHECK(server.round == 1);
}

TEST_CASE("round telemetry records three events per client with exact payloads") {
  Fixture f;
  ServerState server = init_server(f.model, 8);
  FedConfig config = quick_config();
  telemetry::EnergyLedger ledger;
  std::vector<ClientTask> tasks{{0, f.rows_of(0, 10)}, {1, f.rows_of(10, 30)}};
  run_round(server, f.ctx, tasks, {}, config, 12, 3, 0, ledger);

  REQUIRE(ledger.events().size() == 6);
  const std::int64_t payload = server.global.coord_count() * 4;
  double fwd = f.model.forward_flops_per_sample();

  // Client 0: download, compute, upload — in that order.
  CHECK(ledger.events()[0].kind == telemetry::EventKind::communication);
  CHECK(ledger.events()[0].bytes == payload);
  CHECK(ledger.events()[1].kind == telemetry::EventKind::compute);
  CHECK(ledger.events()[1].flops ==
        static_cast<std::int64_t>(config.local_epochs * 10 * fwd * (1.0 + config.backward_factor)));
  CHECK(ledger.events()[2].bytes == payload);
  CHECK(ledger.events()[3].actor == 1);
  CHECK(ledger.events()[4].flops ==
        static_cast<std::int64_t>(config.local_epochs * 20 * fwd * (1.0 + config.backward_factor)));
  for (const auto& e : ledger.events()) CHECK(e.session == 3);

  // Per client per round: one download plus one upload.
  std::int64_t bytes_client0 = 0;
  for (const auto& e : ledger.events())
    if (e.actor == 0 && e.kind == telemetry::EventKind::communication) bytes_client0 += e.bytes;
  CHECK(bytes_client0 == 2 * payload);
}

TEST_CASE("rounds are deterministic and independent of the thread count") {
  Fixture f;
  FedConfig serial = quick_config();
  serial.threads = 1;
  FedConfig threaded = quick_config();
  threaded.threads = 4;

  for (StrategyKind kind : {StrategyKind::fedavg, StrategyKind::fedprox, StrategyKind::fedavgm}) {
    StrategyConfig strategy;
    strategy.kind = kind;
    ServerState a = init_server(f.model, 21);
    ServerState b = init_server(f.model, 21);
    telemetry::EnergyLedger la, lb;
    std::vector<ClientTask> tasks{
        {0, f.rows_of(0, 12)}, {1, f.rows_of(12, 30)}, {2, f.rows_of(30, 60)}};
    for (int round = 0; round < 2; ++round) {
      run_round(a, f.ctx, tasks, strategy, serial, 33, 0, round, la);
      run_round(b, f.ctx, tasks, strategy, threaded, 33, 0, round, lb);
    }
    CHECK(numerics::bit_identical(a.global, b.global));
    CHECK(numerics::bit_identical(a.momentum, b.momentum));
    // Flop-proxy totals never see the measured walls, so they match exactly.
    telemetry::PowerModel model;
    CHECK(energy_total(la, model).energy_wh == energy_total(lb, model).energy_wh);
    CHECK(energy_total(la, model).time_s == energy_total(lb, model).time_s);
  }
}

TEST_CASE("training loss trends down over rounds on separable data") {
  Fixture f;
  ServerState server = init_server(f.model, 30);
  FedConfig config = quick_config();
  config.local_epochs = 2;
  telemetry::EnergyLedger ledger;
  std::vector<ClientTask> tasks{{0, f.rows_of(0, 30)}, {1, f.rows_of(30, 60)}};

  double first = 0.0, last = 0.0;
  for (int round = 0; round < 6; ++round) {
    RoundStats stats = run_round(server, f.ctx, tasks, {}, config, 40, 0, round, ledger);
    if (round == 0) first = stats.train_loss;
    last = stats.train_loss;
  }
  CHECK(last < first);
}

TEST_CASE("a round with no participants is a configuration error") {
  Fixture f;
  ServerState server = init_server(f.model, 9);
  telemetry::EnergyLedger ledger;
  std::vector<ClientTask> empty_tasks{{0, {}}, {1, {}}};
  CHECK_THROWS_AS(run_round(server, f.ctx, empty_tasks, {}, quick_config(), 1, 0, 0, ledger),
                  validation_error);
}

TEST_CASE("strategy and fed config validation") {
  StrategyConfig s;
  s.mu = -0.1;
  CHECK_THROWS_AS(s.validate(), validation_error);
  s = StrategyConfig{};
  s.server_lr = 0.0;
  CHECK_THROWS_AS(s.validate(), validation_error);
  s = StrategyConfig{};
  s.server_momentum = 1.0;
  CHECK_THROWS_AS(s.validate(), validation_error);

  FedConfig c;
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), validation_error);
  c = FedConfig{};
  c.local_epochs = 0;
  CHECK_THROWS_AS(c.validate(), validation_error);
  c = FedConfig{};
  c.threads = 0;
  CHECK_THROWS_AS(c.validate(), validation_error);

  CHECK(parse_strategy("fedavg") == StrategyKind::fedavg);
  CHECK(parse_strategy("fedprox") == StrategyKind::fedprox);
  CHECK(parse_strategy("fedavgm") == StrategyKind::fedavgm);
  CHECK(strategy_name(StrategyKind::fedavgm) == "fedavgm");
  CHECK_THROWS_AS(parse_strategy("fedsgd"), validation_error);
}
