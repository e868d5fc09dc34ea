#include "trnr/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "trnr/error.hpp"

namespace trnr::nn {

namespace {

constexpr char kMagic[8] = {'T', 'R', 'N', 'R', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T read_pod(std::istream& in, const std::string& where) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) fail("malformed checkpoint", where);
  return v;
}

void write_values(std::ostream& out, const ParamSet& ps, Dtype dtype) {
  for (const auto& p : ps) {
    if (dtype == Dtype::f64) {
      out.write(reinterpret_cast<const char*>(p.values.data()), static_cast<std::streamsize>(p.values.size() * 8));
    } else {
      for (double v : p.values) write_pod(out, static_cast<float>(v));
    }
  }
}

void read_values(std::istream& in, ParamSet& ps, Dtype dtype) {
  for (auto& p : ps) {
    if (dtype == Dtype::f64) {
      in.read(reinterpret_cast<char*>(p.values.data()), static_cast<std::streamsize>(p.values.size() * 8));
      if (!in) fail("malformed checkpoint", "truncated values for " + p.name);
    } else {
      for (double& v : p.values) v = read_pod<float>(in, "truncated values for " + p.name);
    }
  }
}

}  // namespace

nlohmann::json to_json(const ModelConfig& cfg) {
  return {{"architecture", to_string(cfg.architecture)},
          {"image_channels", cfg.image_channels},
          {"stages", cfg.stages},
          {"channels", cfg.channels},
          {"kernel", cfg.kernel},
          {"dilations", cfg.dilations},
          {"leaky_slope", cfg.leaky_slope},
          {"se_reduction", cfg.se_reduction},
          {"normalization", to_string(cfg.normalization)},
          {"activation", to_string(cfg.activation)}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  try {
    cfg.architecture = architecture_from_string(j.at("architecture").get<std::string>());
    cfg.image_channels = j.at("image_channels").get<int>();
    cfg.stages = j.at("stages").get<int>();
    cfg.channels = j.at("channels").get<int>();
    cfg.kernel = j.at("kernel").get<int>();
    cfg.dilations = j.at("dilations").get<std::vector<int>>();
    cfg.leaky_slope = j.at("leaky_slope").get<double>();
    cfg.se_reduction = j.at("se_reduction").get<int>();
    cfg.normalization = normalization_from_string(j.at("normalization").get<std::string>());
    cfg.activation = activation_from_string(j.at("activation").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    fail("invalid config", std::string("model config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path, Dtype dtype) {
  nlohmann::json header;
  header["model"] = to_json(ckpt.config);
  header["dtype"] = dtype == Dtype::f64 ? "f64" : "f32";
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& p : ckpt.params) tensors.push_back({{"name", p.name}, {"shape", p.shape}});
  header["params"] = tensors;
  if (ckpt.adam) {
    ckpt.params.check_layout(ckpt.adam->m, "checkpoint optimizer state");
    header["optimizer"] = {{"kind", "adam"}, {"step", ckpt.adam->step}};
  } else {
    header["optimizer"] = nullptr;
  }
  header["rng_state"] = ckpt.rng_state;
  header["seed"] = ckpt.seed;
  header["config_hash"] = ckpt.config_hash;
  header["iteration"] = ckpt.iteration;
  header["metadata"] = ckpt.metadata;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) fail("write failed", path.string());
  out.write(kMagic, sizeof kMagic);
  write_pod(out, kCheckpointVersion);
  write_pod(out, static_cast<std::uint64_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  write_values(out, ckpt.params, dtype);
  if (ckpt.adam) {
    write_values(out, ckpt.adam->m, dtype);
    write_values(out, ckpt.adam->v, dtype);
  }
  if (!out) fail("write failed", path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("unreadable file", path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) fail("malformed checkpoint", "bad magic in " + path.string());
  const auto version = read_pod<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) fail("malformed checkpoint", "unsupported version " + std::to_string(version));
  const auto len = read_pod<std::uint64_t>(in, "header length");
  if (len > (1ULL << 30)) fail("malformed checkpoint", "header too large");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) fail("malformed checkpoint", "truncated header");

  Checkpoint ckpt;
  Dtype dtype = Dtype::f64;
  try {
    const auto header = nlohmann::json::parse(text);
    ckpt.config = model_config_from_json(header.at("model"));
    const auto d = header.at("dtype").get<std::string>();
    if (d != "f64" && d != "f32") fail("malformed checkpoint", "unknown dtype " + d);
    dtype = d == "f64" ? Dtype::f64 : Dtype::f32;
    for (const auto& t : header.at("params")) ckpt.params.add(t.at("name").get<std::string>(), t.at("shape").get<std::vector<int>>());
    if (!header.at("optimizer").is_null()) {
      ckpt.adam = AdamState::for_params(ckpt.params);
      ckpt.adam->step = header["optimizer"].at("step").get<std::int64_t>();
    }
    ckpt.rng_state = header.at("rng_state").get<std::string>();
    ckpt.seed = header.at("seed").get<std::uint64_t>();
    ckpt.config_hash = header.at("config_hash").get<std::string>();
    ckpt.iteration = header.at("iteration").get<std::int64_t>();
    ckpt.metadata = header.at("metadata");
  } catch (const nlohmann::json::exception& e) {
    fail("malformed checkpoint", e.what());
  }
  read_values(in, ckpt.params, dtype);
  if (ckpt.adam) {
    read_values(in, ckpt.adam->m, dtype);
    read_values(in, ckpt.adam->v, dtype);
  }
  return ckpt;
}

}  // namespace trnr::nn
