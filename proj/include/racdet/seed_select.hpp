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
#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "racdet/error.hpp"
#include "racdet/kmeans.hpp"
#include "racdet/random.hpp"
#include "racdet/types.hpp"

namespace racdet {

enum class SeedStrategy {
  centroid,            // image nearest each k-means centroid
  random_per_cluster,  // one uniformly random member per cluster
  uniform_random,      // no clustering; baseline
};

inline std::string_view to_string(SeedStrategy s) {
  switch (s) {
    case SeedStrategy::centroid: return "centroid";
    case SeedStrategy::random_per_cluster: return "random_per_cluster";
    case SeedStrategy::uniform_random: return "uniform_random";
  }
  return "?";
}

inline SeedStrategy parse_seed_strategy(std::string_view s) {
  if (s == "centroid") return SeedStrategy::centroid;
  if (s == "random_per_cluster" || s == "cluster") return SeedStrategy::random_per_cluster;
  if (s == "uniform_random" || s == "random") return SeedStrategy::uniform_random;
  throw Error("unknown seed strategy '" + std::string(s) + "'");
}

struct SeedSelectOptions {
  std::size_t max_iter = 100;
  double tol = 1e-4;
};

/// Picks which pool images to label. Clusters the pool's image embeddings into
/// `budget` clusters and takes one representative per cluster (or samples
/// uniformly for the baseline). Returns min(budget, |pool|) distinct ids,
/// ordered by cluster index (selection order for uniform_random).
inline std::vector<std::string> select_seeds(std::span<const ImageRecord> pool, std::size_t budget,
                                             SeedStrategy strategy, std::uint64_t rng_seed,
                                             const SeedSelectOptions& opts = {}) {
  if (pool.empty()) throw Error("seed pool is empty");
  if (budget < 1) throw Error("seed budget must be >= 1");

  std::vector<std::string> out;
  if (budget >= pool.size()) {
    for (const auto& img : pool) out.push_back(img.image_id);
    return out;
  }

  Rng pick_rng(mix_seed(rng_seed, 1));
  if (strategy == SeedStrategy::uniform_random) {
    std::vector<std::size_t> idx(pool.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    // Partial Fisher-Yates: first `budget` slots are a uniform sample.
    for (std::size_t i = 0; i < budget; ++i) {
      const std::size_t j = i + pick_rng.index(idx.size() - i);
      std::swap(idx[i], idx[j]);
      out.push_back(pool[idx[i]].image_id);
    }
    return out;
  }

  PointMatrix pts;
  pts.rows = pool.size();
  pts.dim = pool.front().embedding.dim();
  pts.data.reserve(pts.rows * pts.dim);
  for (const auto& img : pool) {
    if (img.embedding.dim() != pts.dim) throw Error("seed pool has mixed embedding dimensions");
    pts.data.insert(pts.data.end(), img.embedding.values().begin(), img.embedding.values().end());
  }
  const Clustering cl = kmeans(pts, KMeansConfig{budget, opts.max_iter, opts.tol, rng_seed});

  std::vector<std::vector<std::size_t>> members(budget);
  for (std::size_t i = 0; i < pool.size(); ++i) members[cl.assignment[i]].push_back(i);

  std::vector<bool> taken(pool.size(), false);
  for (std::size_t c = 0; c < budget; ++c) {
    if (members[c].empty()) continue;
    std::size_t pick = members[c].front();
    if (strategy == SeedStrategy::centroid) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i : members[c]) {
        const double d = detail::squared_distance(pts.row(i), cl.centroids[c]);
        if (d < best) {
          best = d;
          pick = i;
        }
      }
    } else {
      pick = members[c][pick_rng.index(members[c].size())];
    }
    taken[pick] = true;
    out.push_back(pool[pick].image_id);
  }
  // Only reachable with duplicate embeddings that leave clusters empty.
  for (std::size_t i = 0; i < pool.size() && out.size() < budget; ++i) {
    if (!taken[i]) {
      taken[i] = true;
      out.push_back(pool[i].image_id);
    }
  }
  return out;
}

}  // namespace racdet
