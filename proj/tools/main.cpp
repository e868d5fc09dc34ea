#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"
#include "trnr/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"trnr: patch clustering, task-driven training and evaluation for image restoration"};
  app.require_subcommand(1);

  std::string preset = "default";
  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;

  app.add_option("--preset", preset, "Starting configuration: default, derain, denoise, desk")
      ->capture_default_str();
  app.add_option("-c,--config", config_file, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--set", overrides, "Override a config value, e.g. --set train.alpha=0.01");
  app.add_option("--threads", threads, "Worker threads (default: $TRNR_THREADS or config)")
      ->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "Random seed");
  app.add_option("-o,--out", out_dir, "Output directory");

  auto* cluster = app.add_subcommand("cluster", "Cluster training patches and write the cluster manifest");
  auto* simulate = app.add_subcommand("simulate", "Patch utilization of RIS/RPS/RCS, analytic and Monte-Carlo");

  auto* train = app.add_subcommand("train", "Train with TRNR or a data-driven baseline");
  std::optional<std::string> strategy;
  std::optional<std::int64_t> iterations;
  train->add_option("--strategy", strategy, "trnr, ris, rps or rcs");
  train->add_option("--iterations", iterations, "Outer iterations")->check(CLI::NonNegativeNumber);

  auto* eval = app.add_subcommand("eval", "Score a checkpoint on the test images");
  std::string checkpoint;
  std::optional<std::string> dump_dir;
  eval->add_option("checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--dump", dump_dir, "Directory for restored images");

  auto* report = app.add_subcommand("report", "Summarize run logs and run the strategy comparison and sweeps");
  std::vector<std::string> logs;
  bool no_sweeps = false;
  report->add_option("--log", logs, "run.jsonl files to summarize")->check(CLI::ExistingFile);
  report->add_flag("--no-sweeps", no_sweeps, "Only summarize logs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (threads) overrides.push_back("threads=" + std::to_string(*threads));
    if (seed) overrides.push_back("seed=" + std::to_string(*seed));
    if (out_dir) overrides.push_back("paths.out_dir=\"" + *out_dir + "\"");
    if (strategy) overrides.push_back("train.strategy=\"" + *strategy + "\"");
    if (iterations) overrides.push_back("train.iterations=" + std::to_string(*iterations));

    const auto cfg = trnr::cli::resolve_config(preset, config_file, overrides);
    const trnr::cli::Context ctx{cfg, trnr::config::config_hash(cfg), std::cout, std::cerr};

    if (*cluster) return trnr::cli::cmd_cluster(ctx);
    if (*simulate) return trnr::cli::cmd_simulate(ctx);
    if (*train) return trnr::cli::cmd_train(ctx);
    if (*eval) {
      std::optional<std::filesystem::path> dump;
      if (dump_dir) dump = *dump_dir;
      return trnr::cli::cmd_eval(ctx, checkpoint, dump);
    }
    if (*report) {
      std::vector<std::filesystem::path> paths(logs.begin(), logs.end());
      return trnr::cli::cmd_report(ctx, paths, !no_sweeps);
    }
  } catch (const trnr::DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
