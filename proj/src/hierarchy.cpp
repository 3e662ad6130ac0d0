#include "fedscope/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "fedscope/detail/bytes.hpp"
#include "fedscope/errors.hpp"
#include "fedscope/rng.hpp"
#include "json.hpp"

namespace fedscope::hierarchy {

numerics::Matrix pixel_matrix(const synthdata::Dataset& dataset) {
  const int pixels = dataset.spec.pixel_count();
  numerics::Matrix m(static_cast<int>(dataset.samples.size()), pixels);
  for (std::size_t i = 0; i < dataset.samples.size(); ++i)
    for (int p = 0; p < pixels; ++p)
      m.at(static_cast<int>(i), p) = dataset.samples[i].pixels[static_cast<std::size_t>(p)];
  return m;
}

std::vector<SessionPlan> plan_sessions(const synthdata::Dataset& dataset,
                                       const synthdata::Split& split,
                                       const synthdata::PartitionResult& partition,
                                       const std::vector<int>& hidden,
                                       const fedcore::FedConfig& config) {
  config.validate();
  const synthdata::DatasetSpec& spec = dataset.spec;
  const int pixels = spec.pixel_count();

  // Verify every group is represented in training data before planning.
  std::vector<std::int64_t> group_train_count(static_cast<std::size_t>(spec.groups), 0);
  for (std::int32_t pos : split.train)
    ++group_train_count[static_cast<std::size_t>(dataset.samples[static_cast<std::size_t>(pos)].group)];
  for (int g = 0; g < spec.groups; ++g)
    if (group_train_count[static_cast<std::size_t>(g)] == 0)
      throw validation_error("group " + std::to_string(g) + " has no training samples");

  std::vector<SessionPlan> plans;
  plans.reserve(static_cast<std::size_t>(spec.groups) + 1);

  // Session 0: the router classifies groups over every training sample.
  {
    SessionPlan plan;
    plan.session_id = 0;
    plan.group = -1;
    plan.classes = spec.groups;
    plan.model = numerics::ModelSpec{pixels, hidden, spec.groups};
    plan.rounds = config.rounds;
    plan.local_epochs = config.local_epochs;
    plan.labels.assign(dataset.samples.size(), -1);
    for (std::size_t i = 0; i < dataset.samples.size(); ++i)
      plan.labels[i] = dataset.samples[i].group;
    for (const synthdata::ClientShard& shard : partition.shards) {
      if (shard.indices.empty()) continue;
      fedcore::ClientTask task;
      task.client_id = shard.client_id;
      task.rows.assign(shard.indices.begin(), shard.indices.end());
      plan.tasks.push_back(std::move(task));
    }
    plan.val_rows.assign(split.val.begin(), split.val.end());
    plans.push_back(std::move(plan));
  }

  // Sessions 1..G: one disease specialist per group; a client participates
  // only when its shard holds at least one sample of the group.
  for (int g = 0; g < spec.groups; ++g) {
    SessionPlan plan;
    plan.session_id = g + 1;
    plan.group = g;
    plan.classes = spec.diseases_per_group[static_cast<std::size_t>(g)];
    plan.model = numerics::ModelSpec{pixels, hidden, plan.classes};
    plan.rounds = config.rounds;
    plan.local_epochs = config.local_epochs;
    plan.labels.assign(dataset.samples.size(), -1);
    for (std::size_t i = 0; i < dataset.samples.size(); ++i)
      if (dataset.samples[i].group == g) plan.labels[i] = dataset.samples[i].disease;
    for (const synthdata::ClientShard& shard : partition.shards) {
      fedcore::ClientTask task;
      task.client_id = shard.client_id;
      for (std::int32_t pos : shard.indices)
        if (dataset.samples[static_cast<std::size_t>(pos)].group == g) task.rows.push_back(pos);
      if (!task.rows.empty()) plan.tasks.push_back(std::move(task));
    }
    for (std::int32_t pos : split.val)
      if (dataset.samples[static_cast<std::size_t>(pos)].group == g) plan.val_rows.push_back(pos);
    plans.push_back(std::move(plan));
  }
  return plans;
}

void HierarchicalModel::validate() const {
  if (specialists.size() != specialist_specs.size())
    throw validation_error("model: specialist spec/parameter count mismatch");
  if (router.output_classes() != groups())
    throw validation_error("model: router classes do not match the specialist count");
  for (std::size_t g = 0; g < specialists.size(); ++g) {
    if (specialists[g].input_dim() != router.input_dim())
      throw validation_error("model: specialist input dimension differs from the router");
    if (specialists[g].output_classes() != specialist_specs[g].classes)
      throw validation_error("model: specialist output does not match its spec");
  }
}

namespace {

int argmax_lowest(const numerics::Matrix& logits, int row) {
  int best = 0;
  for (int c = 1; c < logits.cols; ++c)
    if (logits.at(row, c) > logits.at(row, best)) best = c;
  return best;
}

// Session-task loss and accuracy over the plan's validation rows.
void validation_metrics(const numerics::ParamSet& params, const numerics::Matrix& data,
                        const SessionPlan& plan, double smoothing, double* loss, double* acc) {
  if (plan.val_rows.empty()) {
    *loss = 0.0;
    *acc = 0.0;
    return;
  }
  numerics::Matrix batch(static_cast<int>(plan.val_rows.size()), data.cols);
  std::vector<int> labels(plan.val_rows.size());
  for (std::size_t i = 0; i < plan.val_rows.size(); ++i) {
    int row = plan.val_rows[i];
    std::copy_n(data.data.begin() + static_cast<std::ptrdiff_t>(row) * data.cols, data.cols,
                batch.data.begin() + static_cast<std::ptrdiff_t>(i) * data.cols);
    labels[i] = plan.labels[static_cast<std::size_t>(row)];
  }
  numerics::Matrix logits = numerics::forward(params, batch);
  *loss = numerics::loss_smoothed_ce(logits, labels, smoothing);
  int hits = 0;
  for (int r = 0; r < logits.rows; ++r)
    if (argmax_lowest(logits, r) == labels[static_cast<std::size_t>(r)]) ++hits;
  *acc = static_cast<double>(hits) / static_cast<double>(logits.rows);
}

}  // namespace

TrainResult train_hierarchy(const synthdata::Dataset& dataset,
                            const std::vector<SessionPlan>& plans,
                            const fedcore::StrategyConfig& strategy,
                            const fedcore::FedConfig& config,
                            const telemetry::PowerModel& power, std::uint64_t seed) {
  strategy.validate();
  config.validate();
  power.validate();
  if (plans.empty()) throw validation_error("train_hierarchy: no session plans");

  numerics::Matrix data = pixel_matrix(dataset);
  TrainResult result;
  result.model.specialist_specs.resize(plans.size() - 1);
  result.model.specialists.resize(plans.size() - 1);

  for (const SessionPlan& plan : plans) {
    std::uint64_t session_seed =
        rng::derive_seed(seed, "session", {static_cast<std::uint64_t>(plan.session_id)});
    fedcore::ServerState server =
        fedcore::init_server(plan.model, rng::derive_seed(session_seed, "init"));

    fedcore::TrainContext ctx{&data, &plan.labels, plan.classes};
    for (int round = 0; round < plan.rounds; ++round) {
      fedcore::RoundStats stats = fedcore::run_round(server, ctx, plan.tasks, strategy, config,
                                                     session_seed, plan.session_id, round,
                                                     result.ledger);
      RoundLog log;
      log.session = plan.session_id;
      log.round = round;
      log.participants = stats.participants;
      log.train_loss = stats.train_loss;
      validation_metrics(server.global, data, plan, config.label_smoothing, &log.val_loss,
                         &log.val_acc);
      telemetry::EnergyTotals totals = telemetry::energy_total(result.ledger, power);
      log.cum_energy_wh = totals.energy_wh;
      log.cum_time_s = totals.time_s;
      result.rounds.push_back(log);
    }

    if (plan.group < 0) {
      result.model.router_spec = plan.model;
      result.model.router = std::move(server.global);
    } else {
      result.model.specialist_specs[static_cast<std::size_t>(plan.group)] = plan.model;
      result.model.specialists[static_cast<std::size_t>(plan.group)] = std::move(server.global);
    }
  }
  result.model.validate();
  return result;
}

Prediction predict(const HierarchicalModel& model, const std::vector<double>& image) {
  if (static_cast<int>(image.size()) != model.router.input_dim())
    throw dimension_error("predict: image size does not match the model input");
  numerics::Matrix batch(1, static_cast<int>(image.size()));
  batch.data = image;

  Prediction p;
  numerics::Matrix router_logits = numerics::forward(model.router, batch);
  p.group = argmax_lowest(router_logits, 0);
  numerics::Matrix disease_logits =
      numerics::forward(model.specialists[static_cast<std::size_t>(p.group)], batch);
  p.disease = argmax_lowest(disease_logits, 0);
  return p;
}

namespace {

constexpr char kMagic[4] = {'F', 'S', 'H', 'M'};
constexpr std::uint32_t kVersion = 1;

void put_spec(std::string& buf, const numerics::ModelSpec& spec) {
  detail::put_u32(buf, static_cast<std::uint32_t>(spec.input_dim));
  detail::put_u32(buf, static_cast<std::uint32_t>(spec.hidden.size()));
  for (int h : spec.hidden) detail::put_u32(buf, static_cast<std::uint32_t>(h));
  detail::put_u32(buf, static_cast<std::uint32_t>(spec.classes));
}

void put_params(std::string& buf, const numerics::ParamSet& params) {
  for (const numerics::Layer& l : params.layers) {
    for (double v : l.w) detail::put_f64(buf, v);
    for (double v : l.b) detail::put_f64(buf, v);
  }
}

numerics::ModelSpec read_spec(detail::ByteReader& r) {
  numerics::ModelSpec spec;
  spec.input_dim = static_cast<int>(r.u32());
  std::uint32_t hidden = r.u32();
  if (hidden > 64) throw io_error("corrupt model file: " + r.path());
  spec.hidden.resize(hidden);
  for (int& h : spec.hidden) h = static_cast<int>(r.u32());
  spec.classes = static_cast<int>(r.u32());
  spec.validate();
  return spec;
}

numerics::ParamSet read_params(detail::ByteReader& r, const numerics::ModelSpec& spec) {
  numerics::ParamSet params;
  for (auto [in, out] : spec.layer_dims()) {
    numerics::Layer l;
    l.in = in;
    l.out = out;
    l.w.resize(static_cast<std::size_t>(in) * out);
    l.b.resize(static_cast<std::size_t>(out));
    for (double& v : l.w) v = r.f64();
    for (double& v : l.b) v = r.f64();
    params.layers.push_back(std::move(l));
  }
  if (!params.all_finite()) throw io_error("non-finite parameters in model file: " + r.path());
  return params;
}

std::string meta_path(const std::string& path) { return path + ".meta.json"; }

}  // namespace

void write_model(const HierarchicalModel& model, const ModelMeta& meta, const std::string& path) {
  model.validate();
  std::string buf;
  buf.append(kMagic, 4);
  detail::put_u32(buf, kVersion);
  put_spec(buf, model.router_spec);
  put_params(buf, model.router);
  detail::put_u32(buf, static_cast<std::uint32_t>(model.groups()));
  for (int g = 0; g < model.groups(); ++g) {
    put_spec(buf, model.specialist_specs[static_cast<std::size_t>(g)]);
    put_params(buf, model.specialists[static_cast<std::size_t>(g)]);
  }
  detail::write_file(path, buf);

  nlohmann::json j = {{"format", "FSHM"},
                      {"version", kVersion},
                      {"strategy", meta.strategy},
                      {"seed", meta.seed},
                      {"groups", model.groups()}};
  detail::write_file(meta_path(path), j.dump(2) + "\n");
}

HierarchicalModel read_model(const std::string& path, ModelMeta* meta) {
  detail::ByteReader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw io_error("not a model file: " + path);
  if (r.u32() != kVersion) throw io_error("unsupported model file version: " + path);

  HierarchicalModel model;
  model.router_spec = read_spec(r);
  model.router = read_params(r, model.router_spec);
  std::uint32_t groups = r.u32();
  if (groups == 0 || groups > 1'000'000) throw io_error("corrupt model file: " + path);
  model.specialist_specs.resize(groups);
  model.specialists.resize(groups);
  for (std::uint32_t g = 0; g < groups; ++g) {
    model.specialist_specs[g] = read_spec(r);
    model.specialists[g] = read_params(r, model.specialist_specs[g]);
  }
  model.validate();

  if (meta != nullptr) {
    std::ifstream min(meta_path(path));
    if (min) {
      try {
        nlohmann::json j;
        min >> j;
        meta->strategy = j.value("strategy", std::string{});
        meta->seed = j.value("seed", std::uint64_t{0});
      } catch (const nlohmann::json::exception& e) {
        throw io_error("bad model metadata " + meta_path(path) + ": " + e.what());
      }
    }
  }
  return model;
}

}  // namespace fedscope::hierarchy
