#include "fedscope/commands.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <iomanip>
#include <vector>

#include "fedscope/errors.hpp"
#include "fedscope/rng.hpp"

namespace fedscope::commands {

namespace {

namespace fs = std::filesystem;

void ensure_dir(const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw io_error("cannot create output directory " + out_dir + ": " + ec.message());
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

// Model/strategy names become file-name fragments; keep them shell-safe.
std::string slug(const std::string& text) {
  std::string out;
  for (char c : text)
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' ? c : '_');
  return out;
}

struct Pipeline {
  synthdata::Dataset dataset;
  synthdata::Split split;
  synthdata::PartitionResult partition;
};

// Data side of an experiment. Generation, splitting, and partitioning are
// keyed by the dataset seed so the same data feeds every training seed.
Pipeline prepare_data(const config::ExperimentConfig& cfg) {
  Pipeline p;
  p.dataset = cfg.dataset_path.empty() ? synthdata::generate(cfg.dataset)
                                       : synthdata::read_dataset(cfg.dataset_path);
  p.split = synthdata::split(p.dataset, p.dataset.spec.seed);
  p.partition = synthdata::partition(p.dataset, p.split.train, cfg.clients, p.dataset.spec.seed);
  return p;
}

telemetry::ReportRow make_row(const std::string& model_label, const std::string& aggregator,
                              const telemetry::MetricSummary& m,
                              const telemetry::EnergyTotals& totals) {
  telemetry::ReportRow row;
  row.model = model_label;
  row.aggregator = aggregator;
  row.accuracy = m.accuracy;
  row.recall = m.recall;
  row.precision = m.precision;
  row.f1 = m.f1;
  row.total_energy_wh = totals.energy_wh;
  row.total_time_s = totals.time_s;
  // Zero-round sanity runs spend no energy; efficiency is reported as 0 then.
  if (totals.energy_wh > 0.0) {
    selector::RunRecord record;
    record.model = model_label;
    record.aggregator = aggregator;
    record.f1 = m.f1;
    record.energy_wh = totals.energy_wh;
    record.time_s = totals.time_s;
    row.eta = selector::eta(record);
  }
  return row;
}

}  // namespace

void cmd_gen_data(const config::ExperimentConfig& cfg, const std::string& out_dir,
                  std::ostream& log) {
  if (!cfg.dataset_path.empty())
    throw validation_error("gen-data needs an inline dataset spec, not a dataset file path");
  ensure_dir(out_dir);
  synthdata::Dataset dataset = synthdata::generate(cfg.dataset);
  std::string path = join_path(out_dir, "dataset.fsds");
  synthdata::write_dataset(dataset, path);
  log << "wrote " << path << " (" << dataset.samples.size() << " samples, seed "
      << dataset.spec.seed << ")\n";
  log << "wrote " << path << ".manifest.json\n";
}

RunArtifacts run_cell(const synthdata::Dataset& dataset, const synthdata::Split& split,
                      const synthdata::PartitionResult& partition,
                      const config::ExperimentConfig& cfg, const config::ModelChoice& model,
                      const fedcore::StrategyConfig& strategy, std::uint64_t master_seed) {
  std::vector<hierarchy::SessionPlan> plans =
      hierarchy::plan_sessions(dataset, split, partition, model.hidden, cfg.fed);
  hierarchy::TrainResult trained =
      hierarchy::train_hierarchy(dataset, plans, strategy, cfg.fed, cfg.power, master_seed);
  telemetry::EnergyTotals totals = telemetry::energy_total(trained.ledger, cfg.power);

  RunArtifacts artifacts;
  artifacts.rounds = trained.rounds;

  const std::string aggregator = fedcore::strategy_name(strategy.kind);
  const std::uint64_t eval_seed = rng::derive_seed(master_seed, "eval");
  telemetry::EvalResult clean = telemetry::evaluate(trained.model, dataset, split.test, 0, eval_seed);
  artifacts.rows.push_back(make_row(model.name, aggregator, clean.metrics, totals));
  for (int uc : cfg.use_cases) {
    telemetry::EvalResult hit =
        telemetry::evaluate(trained.model, dataset, split.test, uc, eval_seed);
    artifacts.rows.push_back(
        make_row(model.name + "+uc" + std::to_string(uc), aggregator, hit.metrics, totals));
  }
  artifacts.model = std::move(trained.model);
  return artifacts;
}

void cmd_run(const config::ExperimentConfig& cfg, std::uint64_t master_seed,
             const std::string& out_dir, std::ostream& log) {
  if (cfg.models.size() != 1 || cfg.strategies.size() != 1)
    throw validation_error("run takes a single model and strategy; use sweep for grids");
  ensure_dir(out_dir);
  Pipeline p = prepare_data(cfg);
  RunArtifacts cell =
      run_cell(p.dataset, p.split, p.partition, cfg, cfg.models[0], cfg.strategies[0], master_seed);

  std::vector<std::string> comments = config::echo_lines(cfg, master_seed);
  std::string report_path = join_path(out_dir, "report.csv");
  telemetry::write_report_csv(report_path, cell.rows, comments);
  telemetry::write_round_log_csv(join_path(out_dir, "rounds.csv"), cell.rounds, comments);
  std::string model_path = join_path(out_dir, "model.fshm");
  hierarchy::write_model(cell.model, {fedcore::strategy_name(cfg.strategies[0].kind), master_seed},
                         model_path);
  log << "wrote " << report_path << " (" << cell.rows.size() << " rows), "
      << join_path(out_dir, "rounds.csv") << ", " << model_path << "\n";
}

void cmd_sweep(const config::ExperimentConfig& cfg, std::uint64_t master_seed,
               const std::string& out_dir, std::ostream& log) {
  ensure_dir(out_dir);
  Pipeline p = prepare_data(cfg);
  std::vector<std::string> comments = config::echo_lines(cfg, master_seed);

  std::vector<telemetry::ReportRow> combined;
  for (const config::ModelChoice& model : cfg.models) {
    for (const fedcore::StrategyConfig& strategy : cfg.strategies) {
      const std::string cell_name =
          slug(model.name) + "_" + fedcore::strategy_name(strategy.kind);
      auto named = [&](const char* what) {
        return "sweep cell " + model.name + " x " + fedcore::strategy_name(strategy.kind) +
               " failed: " + what;
      };
      RunArtifacts cell;
      try {
        cell = run_cell(p.dataset, p.split, p.partition, cfg, model, strategy, master_seed);
      } catch (const io_error& e) {
        throw io_error(named(e.what()));
      } catch (const infeasible_error& e) {
        throw infeasible_error(named(e.what()));
      } catch (const validation_error& e) {
        throw validation_error(named(e.what()));
      }
      combined.insert(combined.end(), cell.rows.begin(), cell.rows.end());

      std::vector<std::string> cell_comments = comments;
      cell_comments.push_back("cell: " + model.name + " " +
                              fedcore::strategy_name(strategy.kind));
      telemetry::write_round_log_csv(join_path(out_dir, "rounds_" + cell_name + ".csv"),
                                     cell.rounds, cell_comments);
      hierarchy::write_model(cell.model,
                             {fedcore::strategy_name(strategy.kind), master_seed},
                             join_path(out_dir, "model_" + cell_name + ".fshm"));
      log << "cell " << model.name << " x " << fedcore::strategy_name(strategy.kind) << ": "
          << cell.rows.size() << " rows\n";
    }
  }
  std::string report_path = join_path(out_dir, "report.csv");
  telemetry::write_report_csv(report_path, combined, comments);
  log << "wrote " << report_path << " (" << combined.size() << " rows)\n";
}

namespace {

std::string label_of(const selector::RunRecord& r) { return r.model + "," + r.aggregator; }

void print_audit(const std::vector<selector::RunRecord>& records,
                 const std::vector<selector::NormalizedRecord>& norm, std::ostream& out) {
  out << "records: " << records.size() << "\n";
  out << "# label energy_wh time_s f1 norm_energy norm_time norm_f1\n";
  for (const selector::NormalizedRecord& n : norm) {
    const selector::RunRecord& r = records[n.index];
    out << label_of(r) << " " << telemetry::format_double(r.energy_wh) << " "
        << telemetry::format_double(r.time_s) << " " << telemetry::format_double(r.f1) << " "
        << telemetry::format_double(n.energy) << " " << telemetry::format_double(n.time) << " "
        << telemetry::format_double(n.f1) << "\n";
  }
}

}  // namespace

void cmd_select(const std::string& csv_path, const SelectOptions& options, std::ostream& out) {
  std::vector<selector::RunRecord> records =
      selector::from_rows(telemetry::parse_report_csv(csv_path));
  std::vector<selector::NormalizedRecord> norm = selector::normalize(records);
  print_audit(records, norm, out);

  if (options.mode == "weighted") {
    options.lambda.validate();
    out << "mode: weighted lambda=" << telemetry::format_double(options.lambda.l1) << ","
        << telemetry::format_double(options.lambda.l2) << ","
        << telemetry::format_double(options.lambda.l3) << "\n";
    std::vector<selector::RankedEntry> ranking = selector::select_weighted(records, options.lambda);
    for (std::size_t i = 0; i < ranking.size(); ++i)
      out << "rank " << i + 1 << ": " << label_of(records[ranking[i].index])
          << " score=" << telemetry::format_double(ranking[i].score) << "\n";
    out << "winner: " << label_of(records[ranking.front().index]) << "\n";
    return;
  }
  if (options.mode == "constrained") {
    out << "mode: constrained emax=" << telemetry::format_double(options.e_max)
        << " tmax=" << telemetry::format_double(options.t_max) << "\n";
    for (const selector::RunRecord& r : records) {
      bool e_ok = r.energy_wh <= options.e_max;
      bool t_ok = r.time_s <= options.t_max;
      out << label_of(r) << " "
          << (e_ok && t_ok ? "feasible"
                           : std::string("violates ") + (!e_ok && !t_ok ? "energy+time"
                                                         : !e_ok       ? "energy"
                                                                       : "time"))
          << "\n";
    }
    std::size_t winner = selector::select_constrained(records, options.e_max, options.t_max);
    out << "winner: " << label_of(records[winner]) << "\n";
    return;
  }
  if (options.mode == "eta") {
    out << "mode: eta\n";
    std::vector<std::size_t> order(records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      double ea = selector::eta(records[a]);
      double eb = selector::eta(records[b]);
      if (ea != eb) return ea > eb;
      return selector::tie_before(records[a], records[b]);
    });
    for (std::size_t idx : order) {
      double value = selector::eta(records[idx]);
      out << label_of(records[idx]) << " eta=" << telemetry::format_double(value)
          << " eta3=" << selector::round3(value) << "\n";
    }
    out << "winner: " << label_of(records[order.front()]) << "\n";
    return;
  }
  if (options.mode == "pareto") {
    out << "mode: pareto\n";
    std::vector<std::size_t> front = selector::pareto_front(records);
    for (std::size_t i = 0; i < front.size(); ++i)
      out << "front " << i + 1 << ": " << label_of(records[front[i]])
          << " f1=" << telemetry::format_double(records[front[i]].f1) << "\n";
    out << "front size: " << front.size() << "\n";
    out << "winner: " << label_of(records[front.front()]) << "\n";
    return;
  }
  throw validation_error("unknown selection mode '" + options.mode +
                         "' (expected weighted, constrained, eta, or pareto)");
}

void cmd_report(const std::string& csv_path, std::ostream& out) {
  std::vector<telemetry::ReportRow> rows = telemetry::parse_report_csv(csv_path);
  if (rows.empty()) throw validation_error("report: no data rows in " + csv_path);

  std::size_t model_w = 5, agg_w = 10;
  for (const telemetry::ReportRow& r : rows) {
    model_w = std::max(model_w, r.model.size());
    agg_w = std::max(agg_w, r.aggregator.size());
  }
  out << std::left << std::setw(static_cast<int>(model_w) + 2) << "model"
      << std::setw(static_cast<int>(agg_w) + 2) << "aggregator" << std::right << std::setw(9)
      << "acc" << std::setw(9) << "recall" << std::setw(9) << "prec" << std::setw(9) << "f1"
      << std::setw(12) << "energy_wh" << std::setw(12) << "time_s" << std::setw(8) << "eta"
      << "\n";
  out << std::fixed;
  for (const telemetry::ReportRow& r : rows) {
    out << std::left << std::setw(static_cast<int>(model_w) + 2) << r.model
        << std::setw(static_cast<int>(agg_w) + 2) << r.aggregator << std::right
        << std::setprecision(4) << std::setw(9) << r.accuracy << std::setw(9) << r.recall
        << std::setw(9) << r.precision << std::setw(9) << r.f1 << std::setprecision(2)
        << std::setw(12) << r.total_energy_wh << std::setw(12) << r.total_time_s
        << std::setprecision(3) << std::setw(8) << r.eta << "\n";
  }
  out.unsetf(std::ios::fixed);
  out << rows.size() << " rows\n";
}

}  // namespace fedscope::commands
