#include "trnr/train/ablation.hpp"

#include <cstdio>
#include <map>
#include <ostream>

#include "trnr/error.hpp"

namespace trnr::train {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

AblationRow run_row(const ExperimentConfig& cfg, const ExperimentData& data, std::string sweep,
                    std::string setting) {
  const auto r = run_experiment(cfg, data);
  return {std::move(sweep), std::move(setting), to_string(cfg.strategy), cfg.train.seed,
          r.val_loss,       r.eval.mean_psnr(),  r.eval.mean_ssim(),     r.noisy.mean_psnr()};
}

}  // namespace

void AblationTable::write_csv(std::ostream& out) const {
  const std::uint64_t seed = rows.empty() ? 0 : rows.front().seed;
  out << "# seed=" << seed << " config_hash=" << config_hash << '\n';
  out << "sweep,setting,strategy,seed,val_loss,psnr,ssim,noisy_psnr\n";
  for (const auto& r : rows) {
    out << r.sweep << ',' << r.setting << ',' << r.strategy << ',' << r.seed << ',' << fmt(r.val_loss) << ','
        << fmt(r.psnr) << ',' << fmt(r.ssim) << ',' << fmt(r.noisy_psnr) << '\n';
  }
}

AblationTable compare_strategies(const ExperimentConfig& base, const ExperimentData& data,
                                 const std::vector<Strategy>& strategies, const std::vector<std::uint64_t>& seeds) {
  AblationTable t;
  for (auto seed : seeds) {
    for (auto s : strategies) {
      auto cfg = base;
      cfg.strategy = s;
      cfg.train.seed = seed;
      t.rows.push_back(run_row(cfg, data, "strategy", to_string(s)));
    }
  }
  return t;
}

AblationTable sweep_nr(const ExperimentConfig& base, const ExperimentData& data,
                       const std::vector<std::pair<int, int>>& grid) {
  AblationTable t;
  for (const auto& [n, r] : grid) {
    auto cfg = base;
    cfg.strategy = Strategy::trnr;
    cfg.train.task.n_clusters = n;
    cfg.train.tasks_per_iteration = r;
    t.rows.push_back(run_row(cfg, data, "nr", "N=" + std::to_string(n) + ";R=" + std::to_string(r)));
  }
  return t;
}

AblationTable sweep_lambda(const ExperimentConfig& base, const ExperimentData& data,
                           const std::vector<double>& lambdas) {
  AblationTable t;
  for (double l : lambdas) {
    auto cfg = base;
    cfg.train.lambda = l;
    t.rows.push_back(run_row(cfg, data, "lambda", "lambda=" + fmt(l)));
  }
  return t;
}

AblationTable sweep_dataset_size(const ExperimentConfig& base, const ExperimentData& data,
                                 const std::vector<int>& sizes) {
  AblationTable t;
  for (int n : sizes) {
    require(n >= 1 && static_cast<std::size_t>(n) <= data.train.size(), "invalid config",
            "dataset size " + std::to_string(n) + " outside [1, " + std::to_string(data.train.size()) + "]");
    ExperimentData sub{{data.train.begin(), data.train.begin() + n}, data.test};
    t.rows.push_back(run_row(base, sub, "dataset_size", "images=" + std::to_string(n)));
  }
  return t;
}

OrderingCheck strategy_ordering(const AblationTable& table, const std::string& a, const std::string& b, double eps) {
  std::map<std::uint64_t, std::pair<const AblationRow*, const AblationRow*>> by_seed;
  for (const auto& r : table.rows) {
    if (r.sweep != "strategy") continue;
    if (r.strategy == a) by_seed[r.seed].first = &r;
    if (r.strategy == b) by_seed[r.seed].second = &r;
  }
  OrderingCheck c;
  for (const auto& [seed, pair] : by_seed) {
    if (!pair.first || !pair.second) continue;
    ++c.seeds;
    if (pair.first->val_loss <= pair.second->val_loss * (1.0 + eps)) ++c.agree;
  }
  return c;
}

}  // namespace trnr::train
