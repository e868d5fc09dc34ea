#include "trnr/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "trnr/error.hpp"
#include "trnr/parallel.hpp"

namespace trnr::sampler {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::ris: return "ris";
    case Strategy::rps: return "rps";
    case Strategy::rcs: return "rcs";
  }
  return "ris";
}

Strategy strategy_from_string(const std::string& s) {
  if (s == "ris" || s == "RIS") return Strategy::ris;
  if (s == "rps" || s == "RPS") return Strategy::rps;
  if (s == "rcs" || s == "RCS") return Strategy::rcs;
  fail("unknown sampling strategy", s);
}

std::int64_t SamplerSpec::total_patches() const {
  if (strategy == Strategy::rcs) {
    return std::accumulate(cluster_sizes.begin(), cluster_sizes.end(), std::int64_t{0});
  }
  return images * patches_per_image;
}

std::int64_t SamplerSpec::iterations_per_epoch() const {
  switch (strategy) {
    case Strategy::ris: return images / batch;
    case Strategy::rps: return images * patches_per_image / batch;
    case Strategy::rcs: return total_patches() / batch;
  }
  return 0;
}

void SamplerSpec::validate() const {
  const std::string tag = "invalid sampler spec";
  require(batch >= 1, tag, "batch size must be positive");
  if (strategy == Strategy::rcs) {
    require(!cluster_sizes.empty(), tag, "RCS needs cluster sizes");
    for (auto n : cluster_sizes) require(n >= 1, tag, "cluster sizes must be positive");
    require(batch <= clusters(), tag,
            "RCS requires B <= C (B=" + std::to_string(batch) + ", C=" + std::to_string(clusters()) + ")");
  } else {
    require(images >= 1 && patches_per_image >= 1, tag, "image and patch counts must be positive");
    if (strategy == Strategy::ris) {
      require(batch <= images, tag,
              "RIS requires B <= m (B=" + std::to_string(batch) + ", m=" + std::to_string(images) + ")");
    } else {
      require(batch <= images * patches_per_image, tag, "RPS requires B <= mP");
    }
  }
}

std::vector<std::size_t> choose_distinct(std::size_t n, std::size_t k, Rng& rng) {
  require(k <= n, "invalid draw", "cannot choose " + std::to_string(k) + " of " + std::to_string(n));
  std::vector<std::size_t> out;
  out.reserve(k);
  const auto contains_small = [&](std::size_t v) {
    return std::find(out.begin(), out.end(), v) != out.end();
  };
  std::unordered_set<std::size_t> big;
  const bool use_set = k > 64;
  for (std::size_t j = n - k; j < n; ++j) {
    const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
    const bool seen = use_set ? big.count(t) > 0 : contains_small(t);
    const std::size_t v = seen ? j : t;
    out.push_back(v);
    if (use_set) big.insert(v);
  }
  return out;
}

std::vector<std::size_t> ris_sample(const PatchGroups& images, std::size_t batch, Rng& rng) {
  require(batch <= images.size(), "invalid sampler spec",
          "RIS requires B <= m (B=" + std::to_string(batch) + ", m=" + std::to_string(images.size()) + ")");
  std::vector<std::size_t> out;
  out.reserve(batch);
  for (std::size_t img : choose_distinct(images.size(), batch, rng)) {
    const auto& patches = images[img];
    require(!patches.empty(), "invalid sampler spec", "image without patches");
    out.push_back(patches[std::uniform_int_distribution<std::size_t>(0, patches.size() - 1)(rng)]);
  }
  return out;
}

RpsEpoch::RpsEpoch(std::vector<std::size_t> ids, Rng& rng) : order_(std::move(ids)) {
  // Fisher-Yates with the generator directly, so streams are stable.
  for (std::size_t i = order_.size(); i > 1; --i) {
    const std::size_t j = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
    std::swap(order_[i - 1], order_[j]);
  }
}

RpsEpoch::RpsEpoch(std::size_t total, Rng& rng)
    : RpsEpoch(
          [total] {
            std::vector<std::size_t> v(total);
            std::iota(v.begin(), v.end(), std::size_t{0});
            return v;
          }(),
          rng) {}

std::vector<std::size_t> RpsEpoch::next(std::size_t batch) {
  if (!can_draw(batch)) {
    fail("epoch exhausted", std::to_string(order_.size() - cursor_) + " ids left, batch of " +
                                std::to_string(batch) + " requested");
  }
  std::vector<std::size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                               order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + batch));
  cursor_ += batch;
  return out;
}

std::vector<std::size_t> rcs_sample(const std::vector<std::vector<std::size_t>>& clusters, std::size_t batch,
                                    Rng& rng) {
  require(batch <= clusters.size(), "invalid sampler spec",
          "RCS requires B <= C (B=" + std::to_string(batch) + ", C=" + std::to_string(clusters.size()) + ")");
  std::vector<std::size_t> out;
  out.reserve(batch);
  for (std::size_t j : choose_distinct(clusters.size(), batch, rng)) {
    const auto& members = clusters[j];
    require(!members.empty(), "invalid sampler spec", "empty cluster");
    out.push_back(members[std::uniform_int_distribution<std::size_t>(0, members.size() - 1)(rng)]);
  }
  return out;
}

double p_unuse_analytic(const SamplerSpec& spec, std::int64_t k, std::size_t target_cluster) {
  spec.validate();
  require(k >= 0, "invalid iteration", std::to_string(k));
  const std::int64_t te = spec.iterations_per_epoch();
  require(k <= te, "k exceeds T_e", "k=" + std::to_string(k) + ", T_e=" + std::to_string(te));
  const double B = static_cast<double>(spec.batch);
  switch (spec.strategy) {
    case Strategy::ris:
      return std::pow(1.0 - B / static_cast<double>(spec.total_patches()), static_cast<double>(k));
    case Strategy::rps:
      return 1.0 - static_cast<double>(k) * B / static_cast<double>(spec.total_patches());
    case Strategy::rcs: {
      require(target_cluster < spec.cluster_sizes.size(), "invalid target cluster");
      const double nj = static_cast<double>(spec.cluster_sizes[target_cluster]);
      return std::pow(1.0 - B / (static_cast<double>(spec.clusters()) * nj), static_cast<double>(k));
    }
  }
  return 1.0;
}

namespace {

constexpr std::int64_t kRpsTrialCap = 16;

Estimate binomial(std::int64_t hits, std::int64_t trials) {
  Estimate e;
  e.trials = trials;
  e.value = static_cast<double>(hits) / static_cast<double>(trials);
  e.stderr_ = std::sqrt(e.value * (1.0 - e.value) / static_cast<double>(trials));
  return e;
}

// Sums per-worker counts in a fixed order so the result is independent of
// the worker count.
template <class TrialFn>
std::int64_t count_hits(std::int64_t trials, int threads, TrialFn&& trial) {
  const std::size_t workers = static_cast<std::size_t>(std::max(1, threads));
  std::vector<std::int64_t> partial(workers, 0);
  parallel_for(workers, threads, [&](std::size_t w) {
    std::int64_t h = 0;
    for (std::int64_t t = static_cast<std::int64_t>(w); t < trials; t += static_cast<std::int64_t>(workers))
      h += trial(static_cast<std::uint64_t>(t)) ? 1 : 0;
    partial[w] = h;
  });
  return std::accumulate(partial.begin(), partial.end(), std::int64_t{0});
}

}  // namespace

Estimate simulate_unuse(const SamplerSpec& spec, std::int64_t k, std::int64_t trials, std::uint64_t seed,
                        std::size_t target_cluster, int threads) {
  spec.validate();
  require(trials >= 1, "invalid trial count", std::to_string(trials));
  require(k >= 0, "invalid iteration", std::to_string(k));
  const auto B = static_cast<std::size_t>(spec.batch);

  switch (spec.strategy) {
    case Strategy::ris: {
      PatchGroups groups(static_cast<std::size_t>(spec.images));
      std::size_t id = 0;
      for (auto& g : groups) {
        g.resize(static_cast<std::size_t>(spec.patches_per_image));
        for (auto& p : g) p = id++;
      }
      const std::size_t designated = groups[0][0];
      const auto hits = count_hits(trials, threads, [&](std::uint64_t t) {
        Rng rng = make_rng(seed, t);
        for (std::int64_t it = 0; it < k; ++it) {
          const auto batch = ris_sample(groups, B, rng);
          if (std::find(batch.begin(), batch.end(), designated) != batch.end()) return false;
        }
        return true;
      });
      return binomial(hits, trials);
    }
    case Strategy::rps: {
      const auto total = static_cast<std::size_t>(spec.total_patches());
      require(static_cast<std::size_t>(k) * B <= total, "k exceeds T_e");
      const std::int64_t runs = std::min(trials, kRpsTrialCap);
      double sum = 0.0;
      for (std::int64_t t = 0; t < runs; ++t) {
        Rng rng = make_rng(seed, static_cast<std::uint64_t>(t));
        RpsEpoch epoch(total, rng);
        std::vector<char> used(total, 0);
        for (std::int64_t it = 0; it < k; ++it)
          for (std::size_t id : epoch.next(B)) used[id] = 1;
        const auto n_used = static_cast<std::size_t>(std::count(used.begin(), used.end(), 1));
        sum += static_cast<double>(total - n_used) / static_cast<double>(total);
      }
      Estimate e;
      e.trials = runs;
      e.value = sum / static_cast<double>(runs);
      e.stderr_ = 0.0;
      return e;
    }
    case Strategy::rcs: {
      require(target_cluster < spec.cluster_sizes.size(), "invalid target cluster");
      std::vector<std::vector<std::size_t>> clusters(spec.cluster_sizes.size());
      std::size_t id = 0;
      for (std::size_t j = 0; j < clusters.size(); ++j) {
        clusters[j].resize(static_cast<std::size_t>(spec.cluster_sizes[j]));
        for (auto& p : clusters[j]) p = id++;
      }
      const std::size_t designated = clusters[target_cluster][0];
      const auto hits = count_hits(trials, threads, [&](std::uint64_t t) {
        Rng rng = make_rng(seed, t);
        for (std::int64_t it = 0; it < k; ++it) {
          const auto batch = rcs_sample(clusters, B, rng);
          if (std::find(batch.begin(), batch.end(), designated) != batch.end()) return false;
        }
        return true;
      });
      return binomial(hits, trials);
    }
  }
  return {};
}

std::string UtilizationReport::to_csv() const {
  std::ostringstream os;
  os << "strategy,k,analytic,estimate,stderr,trials,seed\n";
  char buf[256];
  for (const auto& r : rows) {
    if (r.estimate.trials > 0) {
      std::snprintf(buf, sizeof buf, "%s,%lld,%.9g,%.9g,%.9g,%lld,%llu\n", r.label.c_str(),
                    static_cast<long long>(r.k), r.analytic, r.estimate.value, r.estimate.stderr_,
                    static_cast<long long>(r.estimate.trials), static_cast<unsigned long long>(r.seed));
    } else {
      std::snprintf(buf, sizeof buf, "%s,%lld,%.9g,,,0,%llu\n", r.label.c_str(), static_cast<long long>(r.k),
                    r.analytic, static_cast<unsigned long long>(r.seed));
    }
    os << buf;
  }
  return os.str();
}

UtilizationReport utilization_report(const std::vector<SamplerSpec>& specs, const std::vector<std::int64_t>& k_grid,
                                     std::int64_t trials, std::uint64_t seed, int threads) {
  UtilizationReport report;
  for (std::size_t s = 0; s < specs.size(); ++s) {
    const auto& spec = specs[s];
    spec.validate();
    const std::int64_t te = spec.iterations_per_epoch();
    const std::uint64_t spec_seed = derive_seed(seed, s);
    for (std::int64_t k : k_grid) {
      if (k < 0 || k > te) continue;
      UtilizationRow row;
      row.label = to_string(spec.strategy);
      row.strategy = spec.strategy;
      row.k = k;
      row.analytic = p_unuse_analytic(spec, k);
      row.seed = spec_seed;
      if (trials > 0) row.estimate = simulate_unuse(spec, k, trials, spec_seed, 0, threads);
      report.rows.push_back(row);
    }
    if (spec.strategy == Strategy::ris) {
      const double floor = std::exp(-1.0 / static_cast<double>(spec.patches_per_image));
      report.ris_floor.push_back(floor);
      UtilizationRow row;
      row.label = "ris_floor";
      row.strategy = Strategy::ris;
      row.k = te;
      row.analytic = floor;
      row.seed = spec_seed;
      report.rows.push_back(row);
    }
  }
  return report;
}

}  // namespace trnr::sampler
