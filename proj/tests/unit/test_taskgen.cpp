#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "temp_dir.hpp"
#include "trnr/taskgen.hpp"

using namespace trnr;
using namespace trnr::taskgen;

namespace {

cluster::ClusterSet make_set(const std::vector<std::size_t>& sizes) {
  cluster::ClusterSet s;
  s.max_clusters = static_cast<int>(sizes.size());
  std::size_t id = 0;
  for (auto n : sizes) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i) {
      members.push_back(id);
      s.patch_ids.push_back("p" + std::to_string(id++));
    }
    s.clusters.push_back(members);
    s.centers.push_back({0.0});
  }
  return s;
}

int cluster_of(const cluster::ClusterSet& s, std::size_t id) {
  for (std::size_t j = 0; j < s.clusters.size(); ++j)
    if (std::find(s.clusters[j].begin(), s.clusters[j].end(), id) != s.clusters[j].end()) return static_cast<int>(j);
  return -1;
}

}  // namespace

TEST(Task, FullScaleShape) {
  const auto set = make_set(std::vector<std::size_t>(30, 4));
  Rng rng = make_rng(1);
  const auto t = sample_task(set, {12, 1, 1, false}, rng);
  EXPECT_EQ(t.cluster_ids.size(), 12u);
  EXPECT_EQ(t.train_ids.size(), 12u);
  EXPECT_EQ(t.val_ids.size(), 12u);
  EXPECT_EQ(std::set<int>(t.cluster_ids.begin(), t.cluster_ids.end()).size(), 12u);
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_EQ(cluster_of(set, t.train_ids[i]), t.cluster_ids[i]);
    EXPECT_EQ(cluster_of(set, t.val_ids[i]), t.cluster_ids[i]);
    EXPECT_EQ(std::count(t.val_ids.begin(), t.val_ids.end(), t.train_ids[i]), 0);
  }
  EXPECT_FALSE(t.with_replacement);
}

TEST(Task, CoversAllClustersWhenNEqualsC) {
  const auto set = make_set({2, 3, 5, 2});
  Rng rng = make_rng(2);
  const auto t = sample_task(set, {4, 1, 1, false}, rng);
  EXPECT_EQ(std::set<int>(t.cluster_ids.begin(), t.cluster_ids.end()), (std::set<int>{0, 1, 2, 3}));
}

TEST(Task, TwoPatchClusterSplitsOnePerSide) {
  const auto set = make_set({2});
  Rng rng = make_rng(3);
  const auto t = sample_task(set, {1, 1, 1, false}, rng);
  std::set<std::size_t> both{t.train_ids[0], t.val_ids[0]};
  EXPECT_EQ(both, (std::set<std::size_t>{0, 1}));
}

TEST(Task, Errors) {
  const auto set = make_set({1, 3});
  Rng rng = make_rng(4);
  EXPECT_THROW_TAG(sample_task(set, {3, 1, 1, false}, rng), "N exceeds cluster count");
  EXPECT_THROW_TAG(sample_task(set, {2, 1, 1, false}, rng), "insufficient patches");
  const auto t = sample_task(set, {2, 1, 1, true}, rng);
  EXPECT_TRUE(t.with_replacement);
  EXPECT_EQ(t.train_ids.size(), 2u);
}

TEST(TaskBatch, SizesAndDeterminism) {
  const auto set = make_set(std::vector<std::size_t>(20, 3));
  Rng a = make_rng(5), b = make_rng(5);
  const auto ta = sample_task_batch(set, {12, 1, 1, false}, 5, a);
  const auto tb = sample_task_batch(set, {12, 1, 1, false}, 5, b);
  ASSERT_EQ(ta.size(), 5u);
  std::size_t total = 0;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    total += ta[i].train_ids.size();
    EXPECT_EQ(ta[i].train_ids, tb[i].train_ids);
    EXPECT_EQ(ta[i].val_ids, tb[i].val_ids);
  }
  EXPECT_EQ(total, 60u);
  Rng c = make_rng(6);
  EXPECT_EQ(sample_task_batch(set, {1, 1, 1, false}, 1, c).size(), 1u);
}

TEST(TaskBatch, UniformClusterInclusion) {
  const std::size_t C = 20;
  const int N = 5, trials = 20000;
  const auto set = make_set(std::vector<std::size_t>(C, 2));
  Rng rng = make_rng(7);
  std::vector<int> counts(C, 0);
  for (int t = 0; t < trials; ++t)
    for (int j : sample_task(set, {N, 1, 1, false}, rng).cluster_ids) ++counts[static_cast<std::size_t>(j)];
  const double q = static_cast<double>(N) / C;
  const double se = std::sqrt(q * (1 - q) / trials);
  for (int c : counts) EXPECT_NEAR(c / static_cast<double>(trials), q, 3.5 * se);
}

TEST(TaskTrace, Format) {
  const auto set = make_set({2, 2});
  Rng rng = make_rng(8);
  const auto tasks = sample_task_batch(set, {2, 1, 1, false}, 2, rng, 10);
  std::ostringstream os;
  write_task_trace(os, 3, tasks);
  std::istringstream is(os.str());
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    EXPECT_EQ(line.rfind("3," + std::to_string(10 + n) + ",", 0), 0u);
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 4);
    ++n;
  }
  EXPECT_EQ(n, 2);
}
