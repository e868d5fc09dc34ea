#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace trnr::train {

struct IterationLog {
  std::int64_t iter = 0;
  double outer_loss = 0.0;
  /// Per-task training loss at theta and at the adapted theta_j (TRNR only;
  /// `inner_after` is empty when post-adaptation logging is off).
  std::vector<double> inner_before;
  std::vector<double> inner_after;
  double wall_ms = 0.0;
};

/// Append-only log of one training run, serialized as JSON lines: a header
/// object followed by one object per outer iteration.
struct RunRecord {
  std::string mode;  // "trnr", "ris", "rps" or "rcs"
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<std::string> deviation_flags;
  nlohmann::json config = nlohmann::json::object();
  std::vector<IterationLog> iterations;

  void append(IterationLog log);
  [[nodiscard]] std::vector<double> outer_losses() const;

  void write_jsonl(std::ostream& out) const;
  static RunRecord read_jsonl(std::istream& in);
};

/// Trailing moving average with a window of `window` samples; element i
/// averages samples (i-window, i]. Output has size - window + 1 entries.
std::vector<double> moving_average(const std::vector<double>& values, std::size_t window);

}  // namespace trnr::train
