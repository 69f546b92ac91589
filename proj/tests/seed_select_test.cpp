/* Copyright 2026 The racdet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "racdet/seed_select.hpp"

namespace racdet {
namespace {

constexpr SeedStrategy kAll[] = {SeedStrategy::centroid, SeedStrategy::random_per_cluster,
                                 SeedStrategy::uniform_random};

std::vector<ImageRecord> random_pool(Rng& rng, std::size_t n, std::size_t dim) {
  std::vector<ImageRecord> pool;
  for (std::size_t i = 0; i < n; ++i) pool.push_back({"img" + std::to_string(i), oracle::random_embedding(rng, dim), {}});
  return pool;
}

// G tight blobs of `per` images; blob_of maps image_id -> generator blob.
std::vector<ImageRecord> blob_pool(Rng& rng, std::size_t g, std::size_t per, std::map<std::string, std::size_t>& blob_of) {
  std::vector<ImageRecord> pool;
  for (std::size_t b = 0; b < g; ++b) {
    std::vector<double> center(16);
    for (auto& c : center) c = 10.0 * rng.normal();
    for (std::size_t i = 0; i < per; ++i) {
      std::vector<float> v(16);
      for (std::size_t j = 0; j < 16; ++j) v[j] = static_cast<float>(center[j] + 0.2 * rng.normal());
      const std::string id = "b" + std::to_string(b) + "_" + std::to_string(i);
      pool.push_back({id, EmbeddingVector(v), {}});
      blob_of[id] = b;
    }
  }
  return pool;
}

TEST(SelectSeeds, PoolSmallerThanBudgetIsClamped) {
  Rng rng(1);
  const auto pool = random_pool(rng, 1, 8);
  for (auto s : kAll) EXPECT_EQ(select_seeds(pool, 10, s, 3), std::vector<std::string>{"img0"});
}

TEST(SelectSeeds, BudgetEqualToPoolTakesEverything) {
  Rng rng(2);
  const auto pool = random_pool(rng, 12, 8);
  for (auto s : kAll) {
    auto ids = select_seeds(pool, 12, s, 3);
    std::sort(ids.begin(), ids.end());
    std::vector<std::string> all;
    for (const auto& p : pool) all.push_back(p.image_id);
    std::sort(all.begin(), all.end());
    EXPECT_EQ(ids, all);
  }
}

TEST(SelectSeeds, CentroidStrategyTakesOnePerBlob) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    std::map<std::string, std::size_t> blob_of;
    const auto pool = blob_pool(rng, 10, 10, blob_of);
    const auto ids = select_seeds(pool, 10, SeedStrategy::centroid, seed);
    std::set<std::size_t> blobs;
    for (const auto& id : ids) blobs.insert(blob_of.at(id));
    EXPECT_EQ(blobs.size(), 10u) << "seed " << seed;
  }
}

TEST(SelectSeeds, CentroidPicksNearestMember) {
  Rng rng(4);
  const auto pool = random_pool(rng, 60, 6);
  const auto ids = select_seeds(pool, 5, SeedStrategy::centroid, 9);
  std::vector<EmbeddingVector> pts;
  for (const auto& p : pool) pts.push_back(p.embedding);
  const auto cl = kmeans(pts, KMeansConfig{5, 100, 1e-4, 9});
  ASSERT_EQ(ids.size(), 5u);
  for (std::size_t c = 0; c < 5; ++c) {
    double best = 1e300;
    std::string arg;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (cl.assignment[i] != c) continue;
      double d = 0.0;
      for (std::size_t j = 0; j < 6; ++j) {
        const double diff = pool[i].embedding.values()[j] - cl.centroids[c][j];
        d += diff * diff;
      }
      if (d < best) {
        best = d;
        arg = pool[i].image_id;
      }
    }
    EXPECT_EQ(ids[c], arg);
  }
}

TEST(SelectSeeds, RandomPerClusterDrawsFromEachCluster) {
  Rng rng(5);
  std::map<std::string, std::size_t> blob_of;
  const auto pool = blob_pool(rng, 6, 15, blob_of);
  const auto ids = select_seeds(pool, 6, SeedStrategy::random_per_cluster, 21);
  std::set<std::size_t> blobs;
  for (const auto& id : ids) blobs.insert(blob_of.at(id));
  EXPECT_EQ(blobs.size(), 6u);
}

TEST(SelectSeeds, Errors) {
  EXPECT_THROW(select_seeds({}, 3, SeedStrategy::centroid, 0), Error);
  Rng rng(6);
  const auto pool = random_pool(rng, 4, 3);
  EXPECT_THROW(select_seeds(pool, 0, SeedStrategy::centroid, 0), Error);
}

TEST(SelectSeeds, NoDuplicatesNeverOverBudgetDeterministic) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed + 50);
    const std::size_t n = 1 + rng.index(80);
    const auto pool = random_pool(rng, n, 1 + rng.index(10));
    const std::size_t budget = 1 + rng.index(30);
    for (auto s : kAll) {
      const auto ids = select_seeds(pool, budget, s, seed);
      EXPECT_EQ(ids.size(), std::min(budget, n));
      EXPECT_EQ(std::set<std::string>(ids.begin(), ids.end()).size(), ids.size());
      EXPECT_EQ(select_seeds(pool, budget, s, seed), ids);
    }
  }
}

TEST(SelectSeeds, DuplicateEmbeddingsStillFillBudget) {
  std::vector<ImageRecord> pool;
  for (int i = 0; i < 8; ++i) pool.push_back({"d" + std::to_string(i), EmbeddingVector({1.0f, 1.0f}), {}});
  for (auto s : kAll) {
    const auto ids = select_seeds(pool, 5, s, 1);
    EXPECT_EQ(ids.size(), 5u);
    EXPECT_EQ(std::set<std::string>(ids.begin(), ids.end()).size(), 5u);
  }
}

TEST(SeedStrategy, ParsesNamesAndAliases) {
  EXPECT_EQ(parse_seed_strategy("centroid"), SeedStrategy::centroid);
  EXPECT_EQ(parse_seed_strategy("cluster"), SeedStrategy::random_per_cluster);
  EXPECT_EQ(parse_seed_strategy("random"), SeedStrategy::uniform_random);
  EXPECT_EQ(to_string(SeedStrategy::random_per_cluster), "random_per_cluster");
  EXPECT_THROW(parse_seed_strategy("nope"), Error);
}

}  // namespace
}  // namespace racdet
