#include "trnr/config.hpp"

#include <algorithm>
#include <fstream>

#include "trnr/error.hpp"
#include "trnr/rng.hpp"

namespace trnr::config {

using nlohmann::json;

namespace {

std::string dtype_name(nn::Dtype d) { return d == nn::Dtype::f32 ? "f32" : "f64"; }

nn::Dtype dtype_from_string(const std::string& s) {
  if (s == "f32") return nn::Dtype::f32;
  if (s == "f64") return nn::Dtype::f64;
  fail("invalid config", "unknown dtype '" + s + "'");
}

json spec_to_json(const sampler::SamplerSpec& s) {
  return {{"strategy", sampler::to_string(s.strategy)},
          {"images", s.images},
          {"patches_per_image", s.patches_per_image},
          {"batch", s.batch},
          {"cluster_sizes", s.cluster_sizes}};
}

sampler::SamplerSpec spec_from_json(const json& j) {
  static const std::vector<std::string> keys{"strategy", "images", "patches_per_image", "batch", "cluster_sizes"};
  require(j.is_object(), "invalid config", "sampler spec must be an object");
  for (const auto& [k, v] : j.items()) {
    require(std::find(keys.begin(), keys.end(), k) != keys.end(), "invalid config",
            "unknown key 'simulate.specs[]." + k + "'");
  }
  sampler::SamplerSpec s;
  s.strategy = sampler::strategy_from_string(j.value("strategy", std::string("ris")));
  s.images = j.value("images", std::int64_t{0});
  s.patches_per_image = j.value("patches_per_image", std::int64_t{0});
  s.batch = j.value("batch", std::int64_t{0});
  s.cluster_sizes = j.value("cluster_sizes", std::vector<std::int64_t>{});
  return s;
}

void check_keys(const json& given, const json& known, const std::string& prefix) {
  for (const auto& [k, v] : given.items()) {
    const std::string path = prefix.empty() ? k : prefix + "." + k;
    require(known.contains(k), "invalid config", "unknown key '" + path + "'");
    if (v.is_object() && known.at(k).is_object()) check_keys(v, known.at(k), path);
  }
}

void merge_into(json& base, const json& given) {
  for (const auto& [k, v] : given.items()) {
    if (v.is_object() && base[k].is_object()) {
      merge_into(base[k], v);
    } else {
      base[k] = v;
    }
  }
}

template <class T>
std::optional<T> opt(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<T>();
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::vector<sampler::SamplerSpec> default_specs() {
  std::vector<std::int64_t> sizes;
  for (int i = 0; i < 100; ++i) sizes.push_back(i % 3 == 0 ? 1 : (i % 3 == 1 ? 2 : 20));
  return {{sampler::Strategy::ris, 200, 459, 16, {}},
          {sampler::Strategy::rps, 200, 459, 16, {}},
          {sampler::Strategy::rcs, 0, 0, 10, sizes}};
}

}  // namespace

std::filesystem::path RunConfig::cluster_manifest_path() const {
  if (!cluster_manifest.empty()) return cluster_manifest;
  return std::filesystem::path(out_dir) / "clusters.tsv";
}

json to_json(const RunConfig& c) {
  const auto& e = c.experiment;
  const auto& t = e.train;
  json specs = json::array();
  for (const auto& s : c.simulate.specs) specs.push_back(spec_to_json(s));
  json strategies = json::array();
  for (auto s : c.report.strategies) strategies.push_back(train::to_string(s));
  json nr = json::array();
  for (const auto& [n, r] : c.report.nr_grid) nr.push_back({n, r});
  return {
      {"seed", c.seed},
      {"threads", c.threads},
      {"data",
       {{"train_manifest", c.data.train_manifest},
        {"test_manifest", c.data.test_manifest},
        {"grayscale", c.data.grayscale},
        {"noise_sigma", c.data.noise.sigma},
        {"noise_blind_max", opt_json(c.data.noise.blind_max)},
        {"synthetic_train", c.data.synthetic_train},
        {"synthetic_test", c.data.synthetic_test},
        {"synthetic_size", c.data.synthetic_size}}},
      {"patch", {{"size", e.patch_size}, {"stride", e.patch_stride}}},
      {"cluster",
       {{"max_clusters", e.cluster.max_clusters},
        {"threshold", opt_json(e.cluster.threshold)},
        {"rho", e.cluster.rho},
        {"metric", cluster::to_string(e.cluster.metric)},
        {"w_euclidean", e.cluster.w_euclidean},
        {"w_kl", e.cluster.w_kl},
        {"histogram_bins", e.cluster.histogram_bins},
        {"epsilon", e.cluster.epsilon},
        {"update_newest_center", e.cluster.update_newest_center}}},
      {"model", nn::to_json(e.model)},
      {"task",
       {{"n", t.task.n_clusters},
        {"k", t.task.k_shots},
        {"val_shots", t.task.val_shots},
        {"allow_replacement", t.task.allow_replacement}}},
      {"train",
       {{"strategy", train::to_string(e.strategy)},
        {"alpha", t.alpha},
        {"beta", t.beta},
        {"inner_steps", t.inner_steps},
        {"tasks_per_iteration", t.tasks_per_iteration},
        {"lambda", t.lambda},
        {"iterations", t.iterations},
        {"outer_optimizer", train::to_string(t.outer_optimizer)},
        {"order", train::to_string(t.order)},
        {"batch_size", t.batch_size},
        {"log_post_adapt", t.log_post_adapt},
        {"divergence_factor", t.divergence_factor},
        {"checkpoint_every", c.checkpoint_every},
        {"checkpoint_dtype", dtype_name(c.checkpoint_dtype)}}},
      {"eval", {{"tile", e.tiles.tile}, {"overlap", e.tiles.overlap}}},
      {"simulate", {{"specs", specs}, {"k_grid", c.simulate.k_grid}, {"trials", c.simulate.trials}}},
      {"report",
       {{"strategies", strategies},
        {"seeds", c.report.seeds},
        {"nr_grid", nr},
        {"lambdas", c.report.lambdas},
        {"dataset_sizes", c.report.dataset_sizes}}},
      {"paths", {{"out_dir", c.out_dir}, {"cluster_manifest", c.cluster_manifest}}},
  };
}

RunConfig from_json(const json& given) {
  require(given.is_object(), "invalid config", "configuration must be a JSON object");
  json j = to_json(preset("default"));
  check_keys(given, j, "");
  merge_into(j, given);

  RunConfig c;
  try {
    c.seed = j.at("seed").get<std::uint64_t>();
    c.threads = j.at("threads").get<int>();
    const auto& d = j.at("data");
    c.data.train_manifest = d.at("train_manifest").get<std::string>();
    c.data.test_manifest = d.at("test_manifest").get<std::string>();
    c.data.grayscale = d.at("grayscale").get<bool>();
    c.data.noise.sigma = d.at("noise_sigma").get<double>();
    c.data.noise.blind_max = opt<double>(d.at("noise_blind_max"));
    c.data.synthetic_train = d.at("synthetic_train").get<int>();
    c.data.synthetic_test = d.at("synthetic_test").get<int>();
    c.data.synthetic_size = d.at("synthetic_size").get<int>();

    auto& e = c.experiment;
    e.patch_size = j.at("patch").at("size").get<int>();
    e.patch_stride = j.at("patch").at("stride").get<int>();
    const auto& cl = j.at("cluster");
    e.cluster.max_clusters = cl.at("max_clusters").get<int>();
    e.cluster.threshold = opt<double>(cl.at("threshold"));
    e.cluster.rho = cl.at("rho").get<double>();
    e.cluster.metric = cluster::metric_from_string(cl.at("metric").get<std::string>());
    e.cluster.w_euclidean = cl.at("w_euclidean").get<double>();
    e.cluster.w_kl = cl.at("w_kl").get<double>();
    e.cluster.histogram_bins = cl.at("histogram_bins").get<int>();
    e.cluster.epsilon = cl.at("epsilon").get<double>();
    e.cluster.update_newest_center = cl.at("update_newest_center").get<bool>();
    e.model = nn::model_config_from_json(j.at("model"));

    auto& t = e.train;
    const auto& tk = j.at("task");
    t.task.n_clusters = tk.at("n").get<int>();
    t.task.k_shots = tk.at("k").get<int>();
    t.task.val_shots = tk.at("val_shots").get<int>();
    t.task.allow_replacement = tk.at("allow_replacement").get<bool>();
    const auto& tr = j.at("train");
    e.strategy = train::training_strategy_from_string(tr.at("strategy").get<std::string>());
    t.alpha = tr.at("alpha").get<double>();
    t.beta = tr.at("beta").get<double>();
    t.inner_steps = tr.at("inner_steps").get<int>();
    t.tasks_per_iteration = tr.at("tasks_per_iteration").get<int>();
    t.lambda = tr.at("lambda").get<double>();
    t.iterations = tr.at("iterations").get<std::int64_t>();
    t.outer_optimizer = train::outer_optimizer_from_string(tr.at("outer_optimizer").get<std::string>());
    t.order = train::order_from_string(tr.at("order").get<std::string>());
    t.batch_size = tr.at("batch_size").get<int>();
    t.log_post_adapt = tr.at("log_post_adapt").get<bool>();
    t.divergence_factor = tr.at("divergence_factor").get<double>();
    c.checkpoint_every = tr.at("checkpoint_every").get<std::int64_t>();
    c.checkpoint_dtype = dtype_from_string(tr.at("checkpoint_dtype").get<std::string>());
    t.seed = c.seed;
    t.threads = c.threads;
    e.tiles.tile = j.at("eval").at("tile").get<int>();
    e.tiles.overlap = j.at("eval").at("overlap").get<int>();

    const auto& sim = j.at("simulate");
    for (const auto& s : sim.at("specs")) c.simulate.specs.push_back(spec_from_json(s));
    c.simulate.k_grid = sim.at("k_grid").get<std::vector<std::int64_t>>();
    c.simulate.trials = sim.at("trials").get<std::int64_t>();

    const auto& rep = j.at("report");
    c.report.strategies.clear();
    for (const auto& s : rep.at("strategies")) c.report.strategies.push_back(train::training_strategy_from_string(s));
    c.report.seeds = rep.at("seeds").get<std::vector<std::uint64_t>>();
    c.report.nr_grid.clear();
    for (const auto& p : rep.at("nr_grid")) {
      require(p.is_array() && p.size() == 2, "invalid config", "report.nr_grid entries are [N, R] pairs");
      c.report.nr_grid.emplace_back(p[0].get<int>(), p[1].get<int>());
    }
    c.report.lambdas = rep.at("lambdas").get<std::vector<double>>();
    c.report.dataset_sizes = rep.at("dataset_sizes").get<std::vector<int>>();

    c.out_dir = j.at("paths").at("out_dir").get<std::string>();
    c.cluster_manifest = j.at("paths").at("cluster_manifest").get<std::string>();
  } catch (const json::exception& ex) {
    fail("invalid config", ex.what());
  }

  require(c.threads >= 1, "invalid config", "threads must be >= 1");
  require(c.experiment.patch_size >= 1 && c.experiment.patch_stride >= 1, "invalid config",
          "patch size and stride must be positive");
  require(c.simulate.trials >= 1, "invalid config", "simulate.trials must be >= 1");
  require(c.data.synthetic_size >= 1, "invalid config", "synthetic_size must be >= 1");
  require(c.data.noise.sigma >= 0.0, "negative sigma");
  c.experiment.cluster.validate();
  c.experiment.train.validate();
  return c;
}

RunConfig preset(const std::string& name) {
  RunConfig c;
  c.simulate.specs = default_specs();
  c.simulate.k_grid = {0, 1, 2, 4, 8, 12};
  auto& e = c.experiment;
  auto& t = e.train;
  if (name == "default") return c;
  if (name == "derain") {
    c.data.grayscale = false;
    e.model.image_channels = 3;
    e.model.stages = 4;
    e.model.channels = 48;
    e.patch_size = 64;
    e.patch_stride = 16;
    t.task = {12, 1, 1, false};
    t.tasks_per_iteration = 5;
    t.lambda = 5.0;
    t.alpha = t.beta = 1e-3;
    t.iterations = 50000;
    c.report.nr_grid = {{4, 5}, {8, 5}, {12, 5}, {12, 3}, {12, 7}};
    return c;
  }
  if (name == "denoise") {
    c.data.grayscale = true;
    e.model.stages = 4;
    e.model.channels = 48;
    e.patch_size = 64;
    e.patch_stride = 16;
    t.task = {70, 1, 1, false};
    t.tasks_per_iteration = 3;
    t.lambda = 0.0;
    t.alpha = t.beta = 1e-3;
    t.iterations = 50000;
    return c;
  }
  if (name == "desk") {
    c.data.grayscale = true;
    c.data.synthetic_train = 10;
    c.data.synthetic_test = 4;
    c.data.synthetic_size = 64;
    e.model.stages = 1;
    e.model.channels = 8;
    e.patch_size = 16;
    e.patch_stride = 8;
    e.cluster.max_clusters = 32;
    t.task = {8, 1, 1, true};
    t.tasks_per_iteration = 3;
    t.lambda = 0.0;
    t.iterations = 2000;
    t.batch_size = 8;
    c.report.seeds = {0, 1, 2, 3, 4};
    c.report.nr_grid = {{4, 3}, {8, 1}, {8, 3}};
    c.report.lambdas = {0.0, 1.0, 5.0};
    c.report.dataset_sizes = {4, 7, 10};
    return c;
  }
  fail("invalid config", "unknown preset '" + name + "'");
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  require(eq != std::string::npos && eq > 0, "invalid config", "override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    require(node->is_object() && node->contains(part), "invalid config", "unknown key '" + key + "'");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = value;
}

RunConfig resolve(const std::string& preset_name, const std::filesystem::path& file,
                  const std::vector<std::string>& overrides) {
  json j = to_json(preset(preset_name));
  if (!file.empty()) {
    std::ifstream in(file);
    require(static_cast<bool>(in), "unreadable file", file.string());
    json given = json::parse(in, nullptr, false);
    require(!given.is_discarded() && given.is_object(), "invalid config", "cannot parse " + file.string());
    check_keys(given, j, "");
    merge_into(j, given);
  }
  for (const auto& o : overrides) apply_override(j, o);
  return from_json(j);
}

std::string config_hash(const RunConfig& cfg) {
  json j = to_json(cfg);
  j.erase("threads");
  return fnv1a_hex(j.dump());
}

}  // namespace trnr::config
