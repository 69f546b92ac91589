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

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "racdet/error.hpp"
#include "racdet/random.hpp"
#include "racdet/types.hpp"

namespace racdet {

struct KMeansConfig {
  std::size_t k = 1;
  std::size_t max_iter = 100;
  // Stop once the relative inertia improvement of an iteration drops below tol.
  double tol = 1e-4;
  std::uint64_t rng_seed = 0;
};

struct Clustering {
  std::vector<std::vector<double>> centroids;
  std::vector<std::size_t> assignment;
  double inertia = 0.0;
  std::size_t iterations_run = 0;
  // Inertia after the initial assignment and after every Lloyd iteration.
  std::vector<double> inertia_history;
};

/// Row-major point matrix in double precision.
struct PointMatrix {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<double> data;

  std::span<const double> row(std::size_t i) const { return {data.data() + i * dim, dim}; }

  static PointMatrix from(std::span<const EmbeddingVector> points) {
    PointMatrix m;
    m.rows = points.size();
    m.dim = points.empty() ? 0 : points.front().dim();
    m.data.reserve(m.rows * m.dim);
    for (const auto& p : points) {
      if (p.dim() != m.dim) {
        throw Error("dimension mismatch: " + std::to_string(p.dim()) + " != " + std::to_string(m.dim));
      }
      m.data.insert(m.data.end(), p.values().begin(), p.values().end());
    }
    return m;
  }
};

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

inline std::vector<std::vector<double>> kmeanspp_init(const PointMatrix& pts, std::size_t k, Rng& rng) {
  const std::size_t n = pts.rows;
  std::vector<std::vector<double>> centers;
  std::vector<bool> chosen(n, false);
  auto take = [&](std::size_t i) {
    chosen[i] = true;
    auto r = pts.row(i);
    centers.emplace_back(r.begin(), r.end());
  };
  take(rng.index(n));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(pts.row(i), centers[0]);
  while (centers.size() < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double cum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        cum += d2[i];
        pick = i;
        if (cum > target) break;
      }
    } else {
      // All points coincide with a center; fall back to an unchosen index.
      std::vector<std::size_t> rest;
      for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i]) rest.push_back(i);
      }
      pick = rest[rng.index(rest.size())];
    }
    take(pick);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(pts.row(i), centers.back()));
  }
  return centers;
}

// Nearest-centroid assignment; ties go to the lowest cluster index. Returns
// inertia summed in point order.
inline double assign(const PointMatrix& pts, const std::vector<std::vector<double>>& centers,
                     std::vector<std::size_t>& assignment, std::vector<double>& cost) {
  double inertia = 0.0;
  for (std::size_t i = 0; i < pts.rows; ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t c = 0; c < centers.size(); ++c) {
      const double d = squared_distance(pts.row(i), centers[c]);
      if (d < best) {
        best = d;
        arg = c;
      }
    }
    assignment[i] = arg;
    cost[i] = best;
    inertia += best;
  }
  return inertia;
}

}  // namespace detail

/// Lloyd's k-means from a k-means++ start, Euclidean distance. Deterministic
/// for a fixed (point order, config). Emptied clusters are re-seeded with the
/// point of the largest cluster that lies farthest from that cluster's centroid.
inline Clustering kmeans(const PointMatrix& pts, const KMeansConfig& cfg) {
  if (cfg.k < 1) throw Error("k must be >= 1");
  if (cfg.max_iter < 1) throw Error("max_iter must be >= 1");
  if (!(cfg.tol >= 0.0)) throw Error("tol must be >= 0");
  if (pts.rows < cfg.k) {
    throw Error("kmeans needs at least k points (" + std::to_string(pts.rows) + " < " + std::to_string(cfg.k) + ")");
  }
  const std::size_t n = pts.rows;
  const std::size_t k = cfg.k;
  Rng rng(cfg.rng_seed);

  Clustering out;
  out.centroids = detail::kmeanspp_init(pts, k, rng);
  out.assignment.assign(n, 0);
  std::vector<double> cost(n);
  double inertia = detail::assign(pts, out.centroids, out.assignment, cost);
  out.inertia_history.push_back(inertia);

  std::vector<std::size_t> counts(k);
  for (std::size_t it = 0; it < cfg.max_iter; ++it) {
    // Update step.
    std::vector<std::vector<double>> sums(k, std::vector<double>(pts.dim, 0.0));
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto r = pts.row(i);
      auto& s = sums[out.assignment[i]];
      for (std::size_t d = 0; d < pts.dim; ++d) s[d] += r[d];
      ++counts[out.assignment[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t d = 0; d < pts.dim; ++d) out.centroids[c][d] = sums[c][d] / static_cast<double>(counts[c]);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t largest = 0;
      for (std::size_t l = 1; l < k; ++l) {
        if (counts[l] > counts[largest]) largest = l;
      }
      if (counts[largest] < 2) break;
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (out.assignment[i] != largest) continue;
        const double d = detail::squared_distance(pts.row(i), out.centroids[largest]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      auto r = pts.row(far);
      out.centroids[c].assign(r.begin(), r.end());
      out.assignment[far] = c;
      --counts[largest];
      ++counts[c];
    }

    const double next = detail::assign(pts, out.centroids, out.assignment, cost);
    assert(next <= inertia);
    out.inertia_history.push_back(next);
    out.iterations_run = it + 1;
    const double prev = inertia;
    inertia = next;
    if (prev <= 0.0 || (prev - next) / prev < cfg.tol) break;
  }
  out.inertia = inertia;
  return out;
}

inline Clustering kmeans(std::span<const EmbeddingVector> points, const KMeansConfig& cfg) {
  return kmeans(PointMatrix::from(points), cfg);
}

}  // namespace racdet
