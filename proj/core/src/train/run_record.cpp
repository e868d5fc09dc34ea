#include "trnr/train/run_record.hpp"

#include <istream>
#include <ostream>

#include "trnr/error.hpp"

namespace trnr::train {

void RunRecord::append(IterationLog log) {
  require(iterations.empty() || log.iter > iterations.back().iter, "run record is append-only",
          "iteration " + std::to_string(log.iter) + " after " +
              (iterations.empty() ? std::string("none") : std::to_string(iterations.back().iter)));
  iterations.push_back(std::move(log));
}

std::vector<double> RunRecord::outer_losses() const {
  std::vector<double> out;
  out.reserve(iterations.size());
  for (const auto& it : iterations) out.push_back(it.outer_loss);
  return out;
}

void RunRecord::write_jsonl(std::ostream& out) const {
  nlohmann::json header = {{"type", "run"},
                           {"mode", mode},
                           {"seed", seed},
                           {"config_hash", config_hash},
                           {"deviation_flags", deviation_flags},
                           {"config", config}};
  out << header.dump() << '\n';
  for (const auto& it : iterations) {
    nlohmann::json j = {{"type", "iter"},
                        {"iter", it.iter},
                        {"outer_loss", it.outer_loss},
                        {"inner_before", it.inner_before},
                        {"inner_after", it.inner_after},
                        {"wall_ms", it.wall_ms}};
    out << j.dump() << '\n';
  }
}

RunRecord RunRecord::read_jsonl(std::istream& in) {
  RunRecord rec;
  std::string line;
  bool have_header = false;
  try {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (type == "run") {
        rec.mode = j.at("mode").get<std::string>();
        rec.seed = j.at("seed").get<std::uint64_t>();
        rec.config_hash = j.at("config_hash").get<std::string>();
        rec.deviation_flags = j.at("deviation_flags").get<std::vector<std::string>>();
        rec.config = j.value("config", nlohmann::json::object());
        have_header = true;
      } else if (type == "iter") {
        IterationLog it;
        it.iter = j.at("iter").get<std::int64_t>();
        it.outer_loss = j.at("outer_loss").get<double>();
        it.inner_before = j.at("inner_before").get<std::vector<double>>();
        it.inner_after = j.at("inner_after").get<std::vector<double>>();
        it.wall_ms = j.at("wall_ms").get<double>();
        rec.append(std::move(it));
      } else {
        fail("malformed run record", "unknown line type " + type);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail("malformed run record", e.what());
  }
  require(have_header, "malformed run record", "missing header line");
  return rec;
}

std::vector<double> moving_average(const std::vector<double>& values, std::size_t window) {
  require(window >= 1, "invalid window");
  std::vector<double> out;
  if (values.size() < window) return out;
  out.reserve(values.size() - window + 1);
  for (std::size_t end = window; end <= values.size(); ++end) {
    double s = 0.0;
    for (std::size_t i = end - window; i < end; ++i) s += values[i];
    out.push_back(s / static_cast<double>(window));
  }
  return out;
}

}  // namespace trnr::train
