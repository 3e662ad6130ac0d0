#include "fedscope/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "fedscope/errors.hpp"
#include "fedscope/telemetry.hpp"

namespace fedscope::config {

using nlohmann::json;

ModelChoice model_preset(const std::string& name) {
  if (name == "mlp-small") return {name, {32}};
  if (name == "mlp-medium") return {name, {64, 32}};
  if (name == "mlp-large") return {name, {128, 64}};
  throw validation_error("unknown model preset '" + name +
                         "' (expected mlp-small, mlp-medium, or mlp-large)");
}

void ExperimentConfig::validate() const {
  if (clients < 1) throw validation_error("config: clients must be at least 1");
  fed.validate();
  power.validate();
  if (dataset_path.empty()) dataset.validate();
  if (models.empty()) throw validation_error("config: at least one model is required");
  for (const ModelChoice& m : models) {
    if (m.name.empty()) throw validation_error("config: model names must be non-empty");
    for (int h : m.hidden)
      if (h < 1) throw validation_error("config: hidden sizes must be positive in " + m.name);
  }
  if (strategies.empty()) throw validation_error("config: at least one strategy is required");
  for (const fedcore::StrategyConfig& s : strategies) s.validate();
  for (int uc : use_cases)
    if (uc < 1 || uc > 5)
      throw validation_error("config: use cases must lie in 1..5");
}

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  cfg.models = {model_preset("mlp-small")};
  cfg.strategies = {fedcore::StrategyConfig{}};
  cfg.use_cases = {1, 2, 3, 4, 5};
  return cfg;
}

namespace {

[[noreturn]] void fail(const std::string& origin, const std::string& what) {
  throw validation_error(origin + ": " + what);
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& origin,
                const std::string& where) {
  for (const auto& item : j.items())
    if (!allowed.count(item.key()))
      fail(origin, "unknown key '" + item.key() + "' in " + where);
}

template <typename T>
T get_number(const json& j, const std::string& key, T fallback, const std::string& origin) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number()) fail(origin, "'" + key + "' must be a number");
  return v.get<T>();
}

synthdata::DatasetSpec parse_dataset_spec(const json& j, const std::string& origin) {
  check_keys(j,
             {"groups", "diseases_per_group", "samples_per_class", "side", "margin", "noise",
              "seed"},
             origin, "dataset");
  synthdata::DatasetSpec spec;
  spec.groups = get_number<int>(j, "groups", spec.groups, origin);
  if (j.contains("diseases_per_group")) {
    if (!j.at("diseases_per_group").is_array())
      fail(origin, "'diseases_per_group' must be an array");
    spec.diseases_per_group = j.at("diseases_per_group").get<std::vector<int>>();
  } else {
    spec.diseases_per_group.assign(static_cast<std::size_t>(std::max(spec.groups, 0)), 3);
  }
  spec.samples_per_class = get_number<int>(j, "samples_per_class", spec.samples_per_class, origin);
  spec.side = get_number<int>(j, "side", spec.side, origin);
  spec.margin = get_number<double>(j, "margin", spec.margin, origin);
  spec.noise = get_number<double>(j, "noise", spec.noise, origin);
  spec.seed = get_number<std::uint64_t>(j, "seed", spec.seed, origin);
  return spec;
}

ModelChoice parse_model(const json& j, const std::string& origin) {
  if (j.is_string()) return model_preset(j.get<std::string>());
  if (!j.is_object()) fail(origin, "a model must be a preset name or an object");
  check_keys(j, {"name", "hidden"}, origin, "model");
  ModelChoice m;
  if (!j.contains("name") || !j.at("name").is_string())
    fail(origin, "a model object needs a string 'name'");
  m.name = j.at("name").get<std::string>();
  if (j.contains("hidden")) {
    if (!j.at("hidden").is_array()) fail(origin, "'hidden' must be an array of layer sizes");
    m.hidden = j.at("hidden").get<std::vector<int>>();
  }
  return m;
}

fedcore::StrategyConfig parse_strategy_entry(const json& j, const std::string& origin) {
  fedcore::StrategyConfig s;
  if (j.is_string()) {
    s.kind = fedcore::parse_strategy(j.get<std::string>());
    return s;
  }
  if (!j.is_object()) fail(origin, "a strategy must be a name or an object");
  check_keys(j, {"kind", "mu", "server_lr", "server_momentum"}, origin, "strategy");
  if (!j.contains("kind") || !j.at("kind").is_string())
    fail(origin, "a strategy object needs a string 'kind'");
  s.kind = fedcore::parse_strategy(j.at("kind").get<std::string>());
  s.mu = get_number<double>(j, "mu", s.mu, origin);
  s.server_lr = get_number<double>(j, "server_lr", s.server_lr, origin);
  s.server_momentum = get_number<double>(j, "server_momentum", s.server_momentum, origin);
  return s;
}

telemetry::PowerModel parse_power(const json& j, const std::string& origin) {
  check_keys(j,
             {"mode", "active_watts", "idle_watts", "idle_gaps", "joules_per_flop",
              "joules_per_byte", "flops_per_second", "bytes_per_second"},
             origin, "power");
  telemetry::PowerModel p;
  if (j.contains("mode")) {
    if (!j.at("mode").is_string()) fail(origin, "'mode' must be a string");
    p.mode = telemetry::parse_power_mode(j.at("mode").get<std::string>());
  }
  p.active_watts = get_number<double>(j, "active_watts", p.active_watts, origin);
  p.idle_watts = get_number<double>(j, "idle_watts", p.idle_watts, origin);
  if (j.contains("idle_gaps")) {
    if (!j.at("idle_gaps").is_boolean()) fail(origin, "'idle_gaps' must be a boolean");
    p.idle_gaps = j.at("idle_gaps").get<bool>();
  }
  p.joules_per_flop = get_number<double>(j, "joules_per_flop", p.joules_per_flop, origin);
  p.joules_per_byte = get_number<double>(j, "joules_per_byte", p.joules_per_byte, origin);
  p.flops_per_second = get_number<double>(j, "flops_per_second", p.flops_per_second, origin);
  p.bytes_per_second = get_number<double>(j, "bytes_per_second", p.bytes_per_second, origin);
  return p;
}

numerics::AdamConfig parse_optimizer(const json& j, const std::string& origin) {
  if (j.is_string()) {
    std::string name = j.get<std::string>();
    if (name == "desk") return numerics::AdamConfig{};
    if (name == "replication") return numerics::replication_profile();
    fail(origin, "unknown optimizer profile '" + name + "' (expected desk or replication)");
  }
  if (!j.is_object()) fail(origin, "'optimizer' must be a profile name or an object");
  check_keys(j, {"lr", "beta1", "beta2", "eps", "weight_decay"}, origin, "optimizer");
  numerics::AdamConfig opt;
  opt.lr = get_number<double>(j, "lr", opt.lr, origin);
  opt.beta1 = get_number<double>(j, "beta1", opt.beta1, origin);
  opt.beta2 = get_number<double>(j, "beta2", opt.beta2, origin);
  opt.eps = get_number<double>(j, "eps", opt.eps, origin);
  opt.weight_decay = get_number<double>(j, "weight_decay", opt.weight_decay, origin);
  return opt;
}

std::vector<int> parse_use_cases_json(const json& j, const std::string& origin) {
  if (j.is_string()) {
    std::string text = j.get<std::string>();
    if (text == "all") return {1, 2, 3, 4, 5};
    if (text == "none") return {};
    fail(origin, "'use_cases' string must be 'all' or 'none'");
  }
  if (!j.is_array()) fail(origin, "'use_cases' must be 'all', 'none', or an array");
  std::vector<int> ucs = j.get<std::vector<int>>();
  std::sort(ucs.begin(), ucs.end());
  ucs.erase(std::unique(ucs.begin(), ucs.end()), ucs.end());
  return ucs;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(origin, std::string("not valid JSON (") + e.what() + ")");
  }
  if (!j.is_object()) fail(origin, "the top level must be an object");
  check_keys(j,
             {"dataset", "clients", "rounds", "local_epochs", "batch_size", "label_smoothing",
              "backward_factor", "threads", "optimizer", "model", "models", "strategy",
              "strategies", "use_cases", "power", "seed"},
             origin, "the config");

  ExperimentConfig cfg = default_config();
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    if (!d.is_object()) fail(origin, "'dataset' must be an object");
    if (d.contains("path")) {
      check_keys(d, {"path"}, origin, "dataset");
      if (!d.at("path").is_string()) fail(origin, "dataset 'path' must be a string");
      cfg.dataset_path = d.at("path").get<std::string>();
    } else {
      cfg.dataset = parse_dataset_spec(d, origin);
    }
  }
  cfg.clients = get_number<int>(j, "clients", cfg.clients, origin);
  cfg.fed.rounds = get_number<int>(j, "rounds", cfg.fed.rounds, origin);
  cfg.fed.local_epochs = get_number<int>(j, "local_epochs", cfg.fed.local_epochs, origin);
  cfg.fed.batch_size = get_number<int>(j, "batch_size", cfg.fed.batch_size, origin);
  cfg.fed.label_smoothing =
      get_number<double>(j, "label_smoothing", cfg.fed.label_smoothing, origin);
  cfg.fed.backward_factor =
      get_number<double>(j, "backward_factor", cfg.fed.backward_factor, origin);
  cfg.fed.threads = get_number<int>(j, "threads", cfg.fed.threads, origin);
  if (j.contains("optimizer")) cfg.fed.opt = parse_optimizer(j.at("optimizer"), origin);

  if (j.contains("model") && j.contains("models"))
    fail(origin, "give either 'model' or 'models', not both");
  if (j.contains("model")) cfg.models = {parse_model(j.at("model"), origin)};
  if (j.contains("models")) {
    if (!j.at("models").is_array() || j.at("models").empty())
      fail(origin, "'models' must be a non-empty array");
    cfg.models.clear();
    for (const json& entry : j.at("models")) cfg.models.push_back(parse_model(entry, origin));
  }

  if (j.contains("strategy") && j.contains("strategies"))
    fail(origin, "give either 'strategy' or 'strategies', not both");
  if (j.contains("strategy")) cfg.strategies = {parse_strategy_entry(j.at("strategy"), origin)};
  if (j.contains("strategies")) {
    if (!j.at("strategies").is_array() || j.at("strategies").empty())
      fail(origin, "'strategies' must be a non-empty array");
    cfg.strategies.clear();
    for (const json& entry : j.at("strategies"))
      cfg.strategies.push_back(parse_strategy_entry(entry, origin));
  }

  if (j.contains("use_cases")) cfg.use_cases = parse_use_cases_json(j.at("use_cases"), origin);
  if (j.contains("power")) {
    if (!j.at("power").is_object()) fail(origin, "'power' must be an object");
    cfg.power = parse_power(j.at("power"), origin);
  }
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned())
      fail(origin, "'seed' must be a non-negative integer");
    cfg.seed = j.at("seed").get<std::uint64_t>();
  }

  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& override_seed,
                           const ExperimentConfig& cfg) {
  if (override_seed) return *override_seed;
  if (cfg.seed) return *cfg.seed;
  if (const char* env = std::getenv("FEDSCOPE_SEED")) {
    std::string text(env);
    char* end = nullptr;
    errno = 0;
    unsigned long long value = std::strtoull(text.c_str(), &end, 10);
    if (text.empty() || end != text.c_str() + text.size() || errno != 0)
      throw validation_error("FEDSCOPE_SEED must be a decimal unsigned integer, got '" + text +
                             "'");
    return static_cast<std::uint64_t>(value);
  }
  return 0;
}

namespace {

std::string fmt(double v) { return telemetry::format_double(v); }

std::string join_ints(const std::vector<int>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(values[i]);
  }
  return out;
}

std::string describe_strategy(const fedcore::StrategyConfig& s) {
  std::string name = fedcore::strategy_name(s.kind);
  if (s.kind == fedcore::StrategyKind::fedprox) return name + "(mu=" + fmt(s.mu) + ")";
  if (s.kind == fedcore::StrategyKind::fedavgm)
    return name + "(beta=" + fmt(s.server_momentum) + ",lr=" + fmt(s.server_lr) + ")";
  return name;
}

}  // namespace

std::vector<std::string> echo_lines(const ExperimentConfig& cfg, std::uint64_t master_seed) {
  std::vector<std::string> lines;
  // Thread count is deliberately not echoed: parallelism must never change
  // what an experiment produces, so it is not part of its identity.
  lines.push_back("clients=" + std::to_string(cfg.clients) + " rounds=" +
                  std::to_string(cfg.fed.rounds) + " local_epochs=" +
                  std::to_string(cfg.fed.local_epochs) + " batch_size=" +
                  std::to_string(cfg.fed.batch_size) + " label_smoothing=" +
                  fmt(cfg.fed.label_smoothing));
  lines.push_back("optimizer: lr=" + fmt(cfg.fed.opt.lr) + " beta1=" + fmt(cfg.fed.opt.beta1) +
                  " beta2=" + fmt(cfg.fed.opt.beta2) + " eps=" + fmt(cfg.fed.opt.eps) +
                  " weight_decay=" + fmt(cfg.fed.opt.weight_decay));
  if (!cfg.dataset_path.empty()) {
    lines.push_back("dataset: file=" + cfg.dataset_path);
  } else {
    lines.push_back("dataset: groups=" + std::to_string(cfg.dataset.groups) + " diseases=" +
                    join_ints(cfg.dataset.diseases_per_group) + " samples_per_class=" +
                    std::to_string(cfg.dataset.samples_per_class) + " side=" +
                    std::to_string(cfg.dataset.side) + " margin=" + fmt(cfg.dataset.margin) +
                    " noise=" + fmt(cfg.dataset.noise) + " seed=" +
                    std::to_string(cfg.dataset.seed));
  }
  std::string models = "models:";
  for (const ModelChoice& m : cfg.models)
    models += " " + m.name + "[" + join_ints(m.hidden) + "]";
  lines.push_back(models);
  std::string strategies = "strategies:";
  for (const fedcore::StrategyConfig& s : cfg.strategies)
    strategies += " " + describe_strategy(s);
  lines.push_back(strategies);
  lines.push_back("use_cases: " +
                  (cfg.use_cases.empty() ? std::string("none") : join_ints(cfg.use_cases)));
  if (cfg.power.mode == telemetry::PowerMode::flop_proxy) {
    lines.push_back("power: flop-proxy joules_per_flop=" + fmt(cfg.power.joules_per_flop) +
                    " joules_per_byte=" + fmt(cfg.power.joules_per_byte) + " flops_per_second=" +
                    fmt(cfg.power.flops_per_second) + " bytes_per_second=" +
                    fmt(cfg.power.bytes_per_second));
  } else {
    lines.push_back("power: wallclock active_watts=" + fmt(cfg.power.active_watts) +
                    " idle_watts=" + fmt(cfg.power.idle_watts) + " idle_gaps=" +
                    (cfg.power.idle_gaps ? "on" : "off"));
    lines.push_back("warning: wallclock energy depends on live timing; this report is not "
                    "reproducible run to run");
  }
  lines.push_back("master_seed: " + std::to_string(master_seed));
  return lines;
}

std::vector<int> parse_use_case_list(const std::vector<std::string>& tokens) {
  std::vector<int> ucs;
  bool saw_keyword = false;
  for (const std::string& token : tokens) {
    if (token == "all") {
      ucs = {1, 2, 3, 4, 5};
      saw_keyword = true;
    } else if (token == "none") {
      ucs.clear();
      saw_keyword = true;
    } else {
      ucs.push_back(synthdata::parse_use_case(token));
    }
  }
  if (saw_keyword && tokens.size() > 1)
    throw validation_error("--uc 'all'/'none' cannot be combined with other values");
  std::sort(ucs.begin(), ucs.end());
  ucs.erase(std::unique(ucs.begin(), ucs.end()), ucs.end());
  return ucs;
}

}  // namespace fedscope::config
