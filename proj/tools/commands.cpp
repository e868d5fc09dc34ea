#include "commands.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "trnr/cluster.hpp"
#include "trnr/error.hpp"
#include "trnr/nn/checkpoint.hpp"
#include "trnr/parallel.hpp"
#include "trnr/sampler.hpp"
#include "trnr/train/ablation.hpp"
#include "trnr/train/evaluate.hpp"
#include "trnr/train/run_record.hpp"

namespace trnr::cli {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  require(static_cast<bool>(f), "write failed", path.string());
  return f;
}

void write_resolved(const Context& ctx) {
  auto f = open_out(fs::path(ctx.cfg.out_dir) / "config.json");
  auto j = config::to_json(ctx.cfg);
  j["config_hash"] = ctx.hash;
  f << j.dump(2) << '\n';
  ctx.log << "config_hash=" << ctx.hash << " seed=" << ctx.cfg.seed << " threads=" << ctx.cfg.threads << '\n';
}

std::vector<imageio::PairedSample> load_split(const std::string& manifest, const config::RunConfig& cfg,
                                              std::uint64_t stream) {
  return imageio::load_dataset(imageio::read_manifest(manifest), cfg.data.grayscale, cfg.data.noise,
                               derive_seed(cfg.seed, stream));
}

}  // namespace

config::RunConfig resolve_config(const std::string& preset, const fs::path& file,
                                 const std::vector<std::string>& overrides) {
  std::vector<std::string> all;
  if (const char* env = std::getenv("TRNR_THREADS"); env && *env) all.push_back("threads=" + std::to_string(default_threads()));
  if (!file.empty()) {
    std::ifstream in(file);
    require(static_cast<bool>(in), "unreadable file", file.string());
    const auto given = nlohmann::json::parse(in, nullptr, false);
    require(!given.is_discarded(), "invalid config", "cannot parse " + file.string());
    if (given.contains("threads")) all.clear();
  }
  all.insert(all.end(), overrides.begin(), overrides.end());
  return config::resolve(preset, file, all);
}

train::ExperimentData load_data(const config::RunConfig& cfg) {
  if (cfg.data.train_manifest.empty()) {
    const int channels = cfg.data.grayscale ? 1 : 3;
    return train::synthetic_experiment_data(cfg.data.synthetic_train, cfg.data.synthetic_test,
                                            cfg.data.synthetic_size, channels, cfg.data.noise.sigma, cfg.seed);
  }
  train::ExperimentData d;
  d.train = load_split(cfg.data.train_manifest, cfg, 20);
  if (!cfg.data.test_manifest.empty()) d.test = load_split(cfg.data.test_manifest, cfg, 21);
  return d;
}

int cmd_cluster(const Context& ctx) {
  write_resolved(ctx);
  const auto& e = ctx.cfg.experiment;
  const auto data = load_data(ctx.cfg);
  auto universe = train::make_patch_universe(data.train, e.patch_size, e.patch_stride);
  require(!universe.patches.empty(), "invalid config", "dataset yields no patches");
  Rng rng = make_rng(ctx.cfg.seed, 4);
  auto set = cluster::cluster_patches(universe.patches, e.cluster, rng, nullptr, ctx.cfg.threads);
  set.seed = ctx.cfg.seed;
  set.config_hash = ctx.hash;
  const auto path = ctx.cfg.cluster_manifest_path();
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  cluster::save_cluster_manifest(set, path);
  cluster::load_cluster_manifest(path).validate();

  const auto st = cluster::cluster_stats(set);
  ctx.out << "images\t" << data.train.size() << '\n'
          << "patches\t" << st.total << '\n'
          << "clusters\t" << st.cluster_count << '\n'
          << "threshold\t" << set.threshold << '\n'
          << "size_min\t" << st.min_size << '\n'
          << "size_mean\t" << st.mean_size << '\n'
          << "size_max\t" << st.max_size << '\n'
          << "rare_clusters\t" << st.rare_count << '\n'
          << "manifest\t" << path.string() << '\n';
  return 0;
}

int cmd_simulate(const Context& ctx) {
  write_resolved(ctx);
  const auto& sim = ctx.cfg.simulate;
  require(!sim.specs.empty(), "invalid sampler spec", "no sampler specs configured");
  const auto report = sampler::utilization_report(sim.specs, sim.k_grid, sim.trials, ctx.cfg.seed, ctx.cfg.threads);
  const auto path = fs::path(ctx.cfg.out_dir) / "utilization.csv";
  auto f = open_out(path);
  f << "# seed=" << ctx.cfg.seed << " config_hash=" << ctx.hash << '\n' << report.to_csv();
  ctx.out << report.to_csv();
  return 0;
}

int cmd_train(const Context& ctx) {
  write_resolved(ctx);
  const auto& cfg = ctx.cfg;
  const auto& e = cfg.experiment;
  const fs::path out_dir = cfg.out_dir;

  std::optional<cluster::ClusterSet> clusters;
  if (e.strategy == train::Strategy::trnr || e.strategy == train::Strategy::rcs) {
    const auto path = cfg.cluster_manifest_path();
    require(fs::exists(path), "missing manifest",
            path.string() + " not found; run `trnr cluster` first or set paths.cluster_manifest");
    clusters = cluster::load_cluster_manifest(path);
  }

  auto data = load_data(cfg);
  data.test.clear();

  auto trace = open_out(out_dir / "tasks.csv");
  trace << "# seed=" << cfg.seed << " config_hash=" << ctx.hash << '\n' << "iter,task_id,clusters,train,val\n";

  auto checkpoint_of = [&](std::int64_t iter, const nn::ParamSet& params, const nn::AdamState& adam,
                           const Rng& rng) {
    nn::Checkpoint ck;
    ck.config = e.model;
    ck.params = params;
    ck.adam = adam;
    ck.rng_state = rng_state(rng);
    ck.seed = cfg.seed;
    ck.config_hash = ctx.hash;
    ck.iteration = iter;
    ck.metadata = {{"strategy", train::to_string(e.strategy)}};
    return ck;
  };

  train::TrainHooks hooks;
  hooks.task_trace = e.strategy == train::Strategy::trnr ? &trace : nullptr;
  hooks.checkpoint_every = cfg.checkpoint_every;
  hooks.checkpoint = [&](std::int64_t iter, const nn::ParamSet& p, const nn::AdamState& a, const Rng& r) {
    nn::save_checkpoint(checkpoint_of(iter, p, a, r), out_dir / "checkpoint.ckpt", cfg.checkpoint_dtype);
  };
  const std::int64_t every = std::max<std::int64_t>(1, cfg.experiment.train.iterations / 10);
  hooks.on_iteration = [&](const train::IterationLog& l) {
    if (l.iter % every == 0) ctx.log << "iter " << l.iter << " loss " << l.outer_loss << '\n';
  };

  auto result = train::run_experiment(e, data, hooks, clusters ? &*clusters : nullptr);
  auto& rec = result.train.record;
  rec.config_hash = ctx.hash;
  rec.config = config::to_json(cfg);
  if (e.model.normalization == nn::Normalization::affine) rec.deviation_flags.push_back("affine_norm_instead_of_bn");
  rec.deviation_flags.push_back("float64_training");
  {
    auto f = open_out(out_dir / "run.jsonl");
    rec.write_jsonl(f);
  }
  auto final_ck = checkpoint_of(e.train.iterations, result.train.params, result.train.adam, result.train.rng);
  final_ck.metadata["deviation_flags"] = rec.deviation_flags;
  nn::save_checkpoint(final_ck, out_dir / "model.ckpt", cfg.checkpoint_dtype);

  const auto losses = rec.outer_losses();
  ctx.out << "strategy\t" << train::to_string(e.strategy) << '\n'
          << "iterations\t" << losses.size() << '\n';
  if (!losses.empty()) ctx.out << "final_loss\t" << losses.back() << '\n';
  ctx.out << "checkpoint\t" << (out_dir / "model.ckpt").string() << '\n';
  return 0;
}

int cmd_eval(const Context& ctx, const fs::path& checkpoint, const std::optional<fs::path>& dump_dir) {
  write_resolved(ctx);
  const auto ck = nn::load_checkpoint(checkpoint);
  const auto model = train::model_from_checkpoint(ck, ctx.cfg.experiment.model);
  auto data = load_data(ctx.cfg);
  require(!data.test.empty(), "invalid config", "no test images configured");

  std::vector<imageio::Image> restored;
  auto table = train::evaluate(model.config, model.params, data.test, ctx.cfg.experiment.tiles,
                               dump_dir ? &restored : nullptr);
  auto noisy = train::evaluate_degraded(data.test);
  table.seed = noisy.seed = ctx.cfg.seed;
  table.config_hash = noisy.config_hash = ctx.hash;

  const fs::path out_dir = ctx.cfg.out_dir;
  {
    auto f = open_out(out_dir / "metrics.csv");
    table.write_csv(f);
  }
  {
    auto f = open_out(out_dir / "metrics_degraded.csv");
    noisy.write_csv(f);
  }
  if (dump_dir) {
    fs::create_directories(*dump_dir);
    for (std::size_t i = 0; i < restored.size(); ++i) {
      imageio::save_image(restored[i], *dump_dir / (data.test[i].id + ".png"));
    }
  }
  table.write_csv(ctx.out);
  ctx.out << "degraded_mean_psnr\t" << noisy.mean_psnr() << '\n'
          << "degraded_mean_ssim\t" << noisy.mean_ssim() << '\n';
  return 0;
}

int cmd_report(const Context& ctx, const std::vector<fs::path>& logs, bool run_sweeps) {
  write_resolved(ctx);
  if (!logs.empty()) {
    ctx.out << "log,mode,seed,config_hash,iterations,first_loss,final_loss,final_ma50\n";
    for (const auto& p : logs) {
      std::ifstream in(p);
      require(static_cast<bool>(in), "unreadable file", p.string());
      const auto rec = train::RunRecord::read_jsonl(in);
      const auto losses = rec.outer_losses();
      const auto ma = train::moving_average(losses, std::min<std::size_t>(50, std::max<std::size_t>(1, losses.size())));
      ctx.out << p.string() << ',' << rec.mode << ',' << rec.seed << ',' << rec.config_hash << ',' << losses.size()
              << ',' << (losses.empty() ? 0.0 : losses.front()) << ',' << (losses.empty() ? 0.0 : losses.back())
              << ',' << (ma.empty() ? 0.0 : ma.back()) << '\n';
    }
  }
  if (!run_sweeps) return 0;

  const auto& cfg = ctx.cfg;
  const auto data = load_data(cfg);
  require(!data.test.empty(), "invalid config", "report needs held-out test images");
  train::AblationTable all;
  all.config_hash = ctx.hash;
  auto append = [&](train::AblationTable t) {
    for (auto& r : t.rows) all.rows.push_back(std::move(r));
  };
  ctx.log << "comparing strategies over " << cfg.report.seeds.size() << " seed(s)\n";
  append(train::compare_strategies(cfg.experiment, data, cfg.report.strategies, cfg.report.seeds));
  if (!cfg.report.nr_grid.empty()) append(train::sweep_nr(cfg.experiment, data, cfg.report.nr_grid));
  if (!cfg.report.lambdas.empty()) append(train::sweep_lambda(cfg.experiment, data, cfg.report.lambdas));
  if (!cfg.report.dataset_sizes.empty()) {
    append(train::sweep_dataset_size(cfg.experiment, data, cfg.report.dataset_sizes));
  }
  {
    auto f = open_out(fs::path(cfg.out_dir) / "report.csv");
    all.write_csv(f);
  }
  all.write_csv(ctx.out);
  const auto ord = train::strategy_ordering(all, "rcs", "ris", 0.05);
  if (ord.seeds > 0) {
    ctx.out << "# rcs<=ris*(1+0.05) on " << ord.agree << "/" << ord.seeds << " seeds\n";
  }
  return 0;
}

}  // namespace trnr::cli
