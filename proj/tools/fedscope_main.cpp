#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fedscope/commands.hpp"
#include "fedscope/config.hpp"
#include "fedscope/errors.hpp"

namespace {

// Exit codes are a scripting contract: 0 success, 2 validation, 3 infeasible
// selection, 4 I/O.
constexpr int kValidationExit = 2;
constexpr int kInfeasibleExit = 3;
constexpr int kIoExit = 4;

struct Cli {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> use_cases;
  std::string energy;
  std::optional<int> threads;

  std::string csv_path;
  std::string mode;
  std::vector<double> lambda;
  double e_max = 0.0;
  double t_max = 0.0;
};

void add_experiment_flags(CLI::App* cmd, Cli& cli, bool training) {
  cmd->add_option("--config", cli.config_path, "experiment config file (JSON)");
  cmd->add_option("--seed", cli.seed, "seed override");
  cmd->add_option("--out", cli.out_dir, "output directory")->capture_default_str();
  if (training) {
    cmd->add_option("--uc", cli.use_cases,
                    "evaluation use cases: 1..5, 'all', or 'none' (repeatable)");
    cmd->add_option("--energy", cli.energy, "energy mode: flop-proxy or wallclock");
    cmd->add_option("--threads", cli.threads, "clients trained concurrently per round");
  }
}

fedscope::config::ExperimentConfig effective_config(const Cli& cli) {
  fedscope::config::ExperimentConfig cfg = cli.config_path.empty()
                                               ? fedscope::config::default_config()
                                               : fedscope::config::load_config(cli.config_path);
  if (!cli.use_cases.empty())
    cfg.use_cases = fedscope::config::parse_use_case_list(cli.use_cases);
  if (!cli.energy.empty()) cfg.power.mode = fedscope::telemetry::parse_power_mode(cli.energy);
  if (cli.threads) cfg.fed.threads = *cli.threads;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fedscope: hierarchical federated learning simulator and configuration selector"};
  app.require_subcommand(1);
  Cli cli;

  CLI::App* gen = app.add_subcommand("gen-data", "generate the configured dataset");
  add_experiment_flags(gen, cli, false);

  CLI::App* run = app.add_subcommand("run", "train and evaluate one configuration");
  add_experiment_flags(run, cli, true);

  CLI::App* sweep = app.add_subcommand("sweep", "train and evaluate a model x strategy grid");
  add_experiment_flags(sweep, cli, true);

  CLI::App* select = app.add_subcommand("select", "pick a configuration from a report CSV");
  select->add_option("csv", cli.csv_path, "report CSV")->required();
  select->add_option("--mode", cli.mode, "weighted | constrained | eta | pareto")->required();
  select->add_option("--lambda", cli.lambda, "weights for energy, time, 1-F1")->expected(3);
  select->add_option("--emax", cli.e_max, "energy budget in Wh (constrained mode)");
  select->add_option("--tmax", cli.t_max, "time budget in seconds (constrained mode)");

  CLI::App* report = app.add_subcommand("report", "render a report CSV as text");
  report->add_option("csv", cli.csv_path, "report CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kValidationExit;
  }

  try {
    if (gen->parsed()) {
      fedscope::config::ExperimentConfig cfg = effective_config(cli);
      if (cli.seed) cfg.dataset.seed = *cli.seed;  // gen-data's only seed is the data seed
      fedscope::commands::cmd_gen_data(cfg, cli.out_dir, std::cout);
    } else if (run->parsed() || sweep->parsed()) {
      fedscope::config::ExperimentConfig cfg = effective_config(cli);
      std::uint64_t seed = fedscope::config::resolve_seed(cli.seed, cfg);
      if (run->parsed())
        fedscope::commands::cmd_run(cfg, seed, cli.out_dir, std::cout);
      else
        fedscope::commands::cmd_sweep(cfg, seed, cli.out_dir, std::cout);
    } else if (select->parsed()) {
      fedscope::commands::SelectOptions options;
      options.mode = cli.mode;
      if (cli.lambda.size() == 3) {
        options.lambda.l1 = cli.lambda[0];
        options.lambda.l2 = cli.lambda[1];
        options.lambda.l3 = cli.lambda[2];
      }
      options.e_max = cli.e_max;
      options.t_max = cli.t_max;
      fedscope::commands::cmd_select(cli.csv_path, options, std::cout);
    } else if (report->parsed()) {
      fedscope::commands::cmd_report(cli.csv_path, std::cout);
    }
  } catch (const fedscope::infeasible_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInfeasibleExit;
  } catch (const fedscope::io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoExit;
  } catch (const fedscope::validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidationExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
