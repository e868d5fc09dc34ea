#pragma once

// Binary checkpoint container:
//   "TRNRCKPT" | u32 version | u64 header length | JSON header | raw values
// The JSON header carries the model config, tensor names/shapes/offsets, the
// value dtype, optimizer step, RNG state and run provenance. Values are
// little-endian, parameters first, then Adam first/second moments if present.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "trnr/nn/model.hpp"
#include "trnr/nn/optim.hpp"

namespace trnr::nn {

enum class Dtype { f32, f64 };

struct Checkpoint {
  ModelConfig config;
  ParamSet params;
  std::optional<AdamState> adam;
  std::string rng_state;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::int64_t iteration = 0;
  nlohmann::json metadata = nlohmann::json::object();
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path, Dtype dtype = Dtype::f64);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace trnr::nn
