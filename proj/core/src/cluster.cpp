#include "trnr/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "trnr/error.hpp"
#include "trnr/parallel.hpp"

namespace trnr::cluster {

namespace {

std::vector<double> histogram(std::span<const double> v, int bins, double epsilon) {
  std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
  for (double x : v) {
    int b = static_cast<int>(std::floor(std::clamp(x, 0.0, 1.0) * bins));
    h[static_cast<std::size_t>(std::min(b, bins - 1))] += 1.0;
  }
  const double n = static_cast<double>(v.size());
  const double norm = 1.0 + bins * epsilon;
  for (double& x : h) x = (x / n + epsilon) / norm;
  return h;
}

double symmetric_kl(const std::vector<double>& p, const std::vector<double>& q) {
  // 0.5 * (KL(p||q) + KL(q||p)) = 0.5 * sum (p - q)(log p - log q)
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - q[i]) * (std::log(p[i]) - std::log(q[i]));
  return std::max(0.0, 0.5 * s);
}

bool uses_kl(const ClusterConfig& cfg) {
  return cfg.metric == Metric::kl_histogram ||
         (cfg.metric == Metric::weighted_sum && cfg.w_kl != 0.0);
}

bool uses_euclidean(const ClusterConfig& cfg) {
  return cfg.metric == Metric::euclidean ||
         (cfg.metric == Metric::weighted_sum && cfg.w_euclidean != 0.0);
}

double combine(const ClusterConfig& cfg, double euc, double kl) {
  switch (cfg.metric) {
    case Metric::euclidean: return euc;
    case Metric::kl_histogram: return kl;
    case Metric::weighted_sum: return cfg.w_euclidean * euc + cfg.w_kl * kl;
  }
  return euc;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string to_string(Metric m) {
  switch (m) {
    case Metric::euclidean: return "euclidean";
    case Metric::kl_histogram: return "kl_histogram";
    case Metric::weighted_sum: return "weighted_sum";
  }
  return "euclidean";
}

Metric metric_from_string(const std::string& s) {
  if (s == "euclidean") return Metric::euclidean;
  if (s == "kl_histogram") return Metric::kl_histogram;
  if (s == "weighted_sum") return Metric::weighted_sum;
  fail("unknown metric", s);
}

void ClusterConfig::validate() const {
  require(max_clusters >= 1, "invalid cluster config", "max_clusters must be >= 1");
  require(!threshold || *threshold > 0.0, "invalid cluster config", "threshold must be > 0");
  require(rho > 0.0 && rho < 1.0, "invalid cluster config", "rho must lie in (0,1)");
  require(histogram_bins >= 1, "invalid cluster config", "histogram_bins must be >= 1");
  require(epsilon > 0.0, "invalid cluster config", "epsilon must be > 0");
  require(w_euclidean >= 0.0 && w_kl >= 0.0, "invalid cluster config", "weights must be >= 0");
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double symmetric_kl_histogram(std::span<const double> a, std::span<const double> b, int bins,
                              double epsilon) {
  require(a.size() == b.size(), "shape mismatch");
  return symmetric_kl(histogram(a, bins, epsilon), histogram(b, bins, epsilon));
}

double patch_distance(std::span<const double> a, std::span<const double> b, const ClusterConfig& cfg) {
  require(a.size() == b.size(), "shape mismatch",
          std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  const double euc = uses_euclidean(cfg) ? euclidean_distance(a, b) : 0.0;
  const double kl = uses_kl(cfg) ? symmetric_kl_histogram(a, b, cfg.histogram_bins, cfg.epsilon) : 0.0;
  return combine(cfg, euc, kl);
}

std::vector<std::size_t> ClusterSet::sizes() const {
  std::vector<std::size_t> s;
  s.reserve(clusters.size());
  for (const auto& c : clusters) s.push_back(c.size());
  return s;
}

std::vector<int> ClusterSet::labels() const {
  std::vector<int> out(patch_ids.size(), -1);
  for (std::size_t j = 0; j < clusters.size(); ++j)
    for (std::size_t p : clusters[j]) out.at(p) = static_cast<int>(j);
  return out;
}

void ClusterSet::validate() const {
  std::vector<char> seen(patch_ids.size(), 0);
  std::size_t total = 0;
  for (const auto& c : clusters) {
    require(!c.empty(), "partition violation", "empty cluster");
    for (std::size_t p : c) {
      require(p < seen.size(), "partition violation", "patch index out of range");
      require(!seen[p], "partition violation", "patch " + patch_ids[p] + " appears twice");
      seen[p] = 1;
      ++total;
    }
  }
  require(total == patch_ids.size(), "partition violation", "unassigned patches");
  require(centers.size() == clusters.size(), "partition violation", "center count mismatch");
}

double calibrate_threshold(std::span<const imageio::Patch> patches, const ClusterConfig& cfg, Rng& rng,
                           std::size_t subsample, double quantile) {
  require(patches.size() >= 2, "empty input", "threshold calibration needs at least two patches");
  std::vector<std::size_t> idx(patches.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const std::size_t n = std::min(subsample, idx.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  std::vector<double> d;
  d.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      d.push_back(patch_distance(patches[idx[i]].clean, patches[idx[j]].clean, cfg));
  const auto k = static_cast<std::size_t>(quantile * static_cast<double>(d.size() - 1));
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
  // A zero threshold would violate T > 0 on degenerate (all-identical) data.
  return std::max(d[k], std::numeric_limits<double>::min());
}

ClusterSet cluster_patches(std::span<imageio::Patch> patches, const ClusterConfig& cfg, Rng& rng,
                           std::vector<TraceStep>* trace, int threads) {
  cfg.validate();
  require(!patches.empty(), "empty input", "cluster_patches needs at least one patch");
  const std::size_t dim = patches.front().clean.size();
  for (const auto& p : patches) require(p.clean.size() == dim, "shape mismatch", "patch " + p.id());

  ClusterSet set;
  set.max_clusters = cfg.max_clusters;
  set.threshold = cfg.threshold ? *cfg.threshold : calibrate_threshold(patches, cfg, rng);
  set.rho = cfg.rho;
  set.metric = cfg.metric;
  set.histogram_bins = cfg.histogram_bins;
  set.patch_size = patches.front().size;
  set.channels = patches.front().channels;
  set.patch_ids.reserve(patches.size());
  for (const auto& p : patches) set.patch_ids.push_back(p.id());

  const bool kl = uses_kl(cfg);
  const bool euc = uses_euclidean(cfg);
  std::vector<std::vector<double>> center_hist;

  const auto open_cluster = [&](std::size_t p) {
    set.clusters.push_back({p});
    set.centers.push_back(patches[p].clean);
    if (kl) center_hist.push_back(histogram(patches[p].clean, cfg.histogram_bins, cfg.epsilon));
  };

  std::uniform_int_distribution<std::size_t> pick(0, patches.size() - 1);
  const std::size_t first = pick(rng);
  open_cluster(first);
  if (trace) trace->push_back({first, 0, true, -1});

  const int C = cfg.max_clusters;
  std::vector<double> dist;
  for (std::size_t k = 0; k < patches.size(); ++k) {
    if (k == first) continue;
    const auto& block = patches[k].clean;
    std::vector<double> hist;
    if (kl) hist = histogram(block, cfg.histogram_bins, cfg.epsilon);

    const std::size_t count = set.clusters.size();
    dist.assign(count, 0.0);
    const auto eval = [&](std::size_t j) {
      const double e = euc ? euclidean_distance(block, set.centers[j]) : 0.0;
      const double q = kl ? symmetric_kl(hist, center_hist[j]) : 0.0;
      dist[j] = combine(cfg, e, q);
    };
    if (threads > 1 && count * dim >= (1U << 18)) {
      parallel_for(count, threads, eval);
    } else {
      for (std::size_t j = 0; j < count; ++j) eval(j);
    }
    // lowest index wins ties
    std::size_t best = 0;
    for (std::size_t j = 1; j < count; ++j)
      if (dist[j] < dist[best]) best = j;

    const int idx = static_cast<int>(count);  // number of open clusters
    if (dist[best] < set.threshold || idx >= C) {
      set.clusters[best].push_back(k);
      int updated = -1;
      if (idx < C) {
        const std::size_t target = cfg.update_newest_center ? count - 1 : best;
        auto& r = set.centers[target];
        for (std::size_t i = 0; i < dim; ++i) r[i] = (1.0 - cfg.rho) * r[i] + cfg.rho * block[i];
        if (kl) center_hist[target] = histogram(r, cfg.histogram_bins, cfg.epsilon);
        updated = static_cast<int>(target);
      }
      if (trace) trace->push_back({k, static_cast<int>(best), false, updated});
    } else {
      open_cluster(k);
      if (trace) trace->push_back({k, idx, true, -1});
    }
  }

  for (std::size_t j = 0; j < set.clusters.size(); ++j) {
    std::sort(set.clusters[j].begin(), set.clusters[j].end());
    for (std::size_t p : set.clusters[j]) patches[p].cluster_id = static_cast<int>(j);
  }
  return set;
}

ClusterStats cluster_stats(const ClusterSet& set) {
  ClusterStats s;
  s.cluster_count = set.clusters.size();
  if (s.cluster_count == 0) return s;
  s.min_size = std::numeric_limits<std::size_t>::max();
  for (const auto& c : set.clusters) {
    s.total += c.size();
    s.min_size = std::min(s.min_size, c.size());
    s.max_size = std::max(s.max_size, c.size());
  }
  s.mean_size = static_cast<double>(s.total) / static_cast<double>(s.cluster_count);
  const int C = set.max_clusters > 0 ? set.max_clusters : static_cast<int>(s.cluster_count);
  const double rare_limit = static_cast<double>(s.total) / C;
  for (const auto& c : set.clusters)
    if (static_cast<double>(c.size()) < rare_limit) ++s.rare_count;
  return s;
}

// Layout:
//   # trnr cluster manifest v1
//   key <tab> value           (header: C, T, rho, metric, bins, patch_size, ...)
//   patches <tab> count
//   patch_id <tab> cluster_id (one per patch, in patch-index order)
//   centers <tab> count <tab> dim
//   v v v ...                 (one line per center)
void save_cluster_manifest(const ClusterSet& set, const std::filesystem::path& path) {
  set.validate();
  std::ofstream out(path);
  if (!out) fail("write failed", path.string());
  out << "# trnr cluster manifest v1\n";
  out << "C\t" << set.max_clusters << "\n";
  out << "T\t" << fmt_double(set.threshold) << "\n";
  out << "rho\t" << fmt_double(set.rho) << "\n";
  out << "metric\t" << to_string(set.metric) << "\n";
  out << "bins\t" << set.histogram_bins << "\n";
  out << "patch_size\t" << set.patch_size << "\n";
  out << "channels\t" << set.channels << "\n";
  out << "seed\t" << set.seed << "\n";
  out << "config_hash\t" << (set.config_hash.empty() ? "-" : set.config_hash) << "\n";
  out << "patches\t" << set.patch_ids.size() << "\n";
  const auto labels = set.labels();
  for (std::size_t i = 0; i < set.patch_ids.size(); ++i)
    out << set.patch_ids[i] << '\t' << labels[i] << '\n';
  const std::size_t dim = set.centers.empty() ? 0 : set.centers.front().size();
  out << "centers\t" << set.centers.size() << '\t' << dim << "\n";
  for (const auto& c : set.centers) {
    for (std::size_t i = 0; i < c.size(); ++i) out << (i ? " " : "") << fmt_double(c[i]);
    out << '\n';
  }
  if (!out) fail("write failed", path.string());
}

ClusterSet load_cluster_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("unreadable file", path.string());
  ClusterSet set;
  std::string line;
  int lineno = 0;
  const auto malformed = [&](const std::string& why) {
    fail("malformed manifest", path.string() + ":" + std::to_string(lineno) + " " + why);
  };
  const auto split = [](const std::string& s, char sep) {
    std::vector<std::string> f;
    std::stringstream ss(s);
    std::string x;
    while (std::getline(ss, x, sep)) f.push_back(x);
    return f;
  };
  const auto to_ll = [&](const std::string& s) {
    char* end = nullptr;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (s.empty() || *end != '\0') malformed("expected integer, got '" + s + "'");
    return v;
  };
  const auto to_d = [&](const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0') malformed("expected number, got '" + s + "'");
    return v;
  };

  std::getline(in, line);
  ++lineno;
  if (line.rfind("# trnr cluster manifest", 0) != 0) malformed("missing header");

  std::size_t npatches = 0;
  bool have_patches = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line, '\t');
    if (f.size() < 2) malformed("expected key/value");
    const std::string& key = f[0];
    if (key == "C") set.max_clusters = static_cast<int>(to_ll(f[1]));
    else if (key == "T") set.threshold = to_d(f[1]);
    else if (key == "rho") set.rho = to_d(f[1]);
    else if (key == "metric") set.metric = metric_from_string(f[1]);
    else if (key == "bins") set.histogram_bins = static_cast<int>(to_ll(f[1]));
    else if (key == "patch_size") set.patch_size = static_cast<int>(to_ll(f[1]));
    else if (key == "channels") set.channels = static_cast<int>(to_ll(f[1]));
    else if (key == "seed") set.seed = static_cast<std::uint64_t>(std::strtoull(f[1].c_str(), nullptr, 10));
    else if (key == "config_hash") set.config_hash = f[1] == "-" ? "" : f[1];
    else if (key == "patches") {
      npatches = static_cast<std::size_t>(to_ll(f[1]));
      have_patches = true;
      break;
    } else {
      malformed("unknown header key '" + key + "'");
    }
  }
  if (!have_patches) malformed("missing patches section");

  std::unordered_map<std::string, std::size_t> seen;
  std::vector<int> labels;
  labels.reserve(npatches);
  set.patch_ids.reserve(npatches);
  for (std::size_t i = 0; i < npatches; ++i) {
    if (!std::getline(in, line)) malformed("truncated patch list");
    ++lineno;
    const auto f = split(line, '\t');
    if (f.size() != 2) malformed("expected patch_id<TAB>cluster_id");
    if (!seen.emplace(f[0], i).second) fail("partition violation", "duplicate patch id " + f[0]);
    const long long c = to_ll(f[1]);
    if (c < 0) malformed("negative cluster id");
    set.patch_ids.push_back(f[0]);
    labels.push_back(static_cast<int>(c));
  }

  if (!std::getline(in, line)) malformed("missing centers section");
  ++lineno;
  const auto hdr = split(line, '\t');
  if (hdr.size() != 3 || hdr[0] != "centers") malformed("expected centers header");
  const auto ncenters = static_cast<std::size_t>(to_ll(hdr[1]));
  const auto dim = static_cast<std::size_t>(to_ll(hdr[2]));
  set.clusters.assign(ncenters, {});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (static_cast<std::size_t>(labels[i]) >= ncenters) malformed("cluster id out of range");
    set.clusters[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  set.centers.reserve(ncenters);
  for (std::size_t j = 0; j < ncenters; ++j) {
    if (!std::getline(in, line)) malformed("truncated centers");
    ++lineno;
    std::vector<double> c;
    c.reserve(dim);
    for (const auto& tok : split(line, ' ')) c.push_back(to_d(tok));
    if (c.size() != dim) malformed("center has wrong dimension");
    set.centers.push_back(std::move(c));
  }
  set.validate();
  return set;
}

}  // namespace trnr::cluster
