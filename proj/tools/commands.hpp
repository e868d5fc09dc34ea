#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "trnr/config.hpp"
#include "trnr/train/pipeline.hpp"

namespace trnr::cli {

struct Context {
  config::RunConfig cfg;
  std::string hash;
  std::ostream& out;
  std::ostream& log;
};

/// Preset, then config file, then TRNR_THREADS, then explicit overrides.
config::RunConfig resolve_config(const std::string& preset, const std::filesystem::path& file,
                                 const std::vector<std::string>& overrides);

/// Training and test images from the configured manifests, or synthetic ones.
train::ExperimentData load_data(const config::RunConfig& cfg);

int cmd_cluster(const Context& ctx);
int cmd_simulate(const Context& ctx);
int cmd_train(const Context& ctx);
int cmd_eval(const Context& ctx, const std::filesystem::path& checkpoint, const std::optional<std::filesystem::path>& dump_dir);
int cmd_report(const Context& ctx, const std::vector<std::filesystem::path>& logs, bool run_sweeps);

}  // namespace trnr::cli
