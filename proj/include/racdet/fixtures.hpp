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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "racdet/error.hpp"
#include "racdet/io.hpp"
#include "racdet/random.hpp"
#include "racdet/types.hpp"

// Synthetic Gaussian domains standing in for real detector output. Crop
// embeddings are drawn around per-class means; image embeddings around
// per-context means. All draws come from one seeded Rng, so a (spec, seed)
// pair fully determines the dataset.
namespace racdet::fixtures {

struct DomainSpec {
  std::size_t dim = 32;
  std::size_t num_classes = 6;
  std::size_t num_contexts = 3;
  // Sampling weights per context; empty means uniform.
  std::vector<double> context_weights;
  // Classes that may appear in each context; empty means every class.
  std::vector<std::vector<int>> context_classes;

  // Crop embeddings: base_norm * u0 + class mean + (class, context) offset +
  // noise. Class means are pairwise class_separation * sigma apart; noise is
  // N(0, sigma^2) inside the class subspace and off_subspace_sigma elsewhere.
  double class_separation = 8.0;
  double sigma = 1.0;
  double off_subspace_sigma = 0.1;
  double base_norm = 20.0;
  double context_offset = 0.0;  // in units of sigma

  // Image embeddings: context_norm * a_t + N(0, image_sigma^2).
  double context_norm = 10.0;
  double image_sigma = 0.3;

  std::size_t min_classes_per_image = 1;
  std::size_t max_classes_per_image = 2;
  std::size_t min_objects_per_class = 1;
  std::size_t max_objects_per_class = 3;

  std::size_t pool_images = 600;
  std::size_t query_images = 200;

  double image_size = 1024.0;
  double min_proposal_score = 0.5;
  double max_proposal_score = 1.0;
  double box_jitter = 2.0;  // pixels

  std::uint64_t seed = 0;
};

struct SyntheticDataset {
  Manifest manifest;
  std::vector<PoolCandidate> pool;
  std::vector<InstanceRecord> pool_instances;
  std::vector<ImageRecord> queries;
  std::vector<Proposal> proposals;
  std::vector<GroundTruth> groundtruth;
};

inline std::vector<std::string> default_class_names(std::size_t n) {
  static const std::vector<std::string> kNames{"PL", "BD", "BR", "GTF", "SV", "LV", "SH", "TC", "BC",
                                               "ST", "SBF", "RA", "HA", "SP", "HC", "CC", "AP", "HP"};
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(i < kNames.size() ? kNames[i] : "C" + std::to_string(i));
  return out;
}

/// Well-separated domain: 6 classes 8 sigma apart over 3 equally likely contexts.
inline DomainSpec easy_domain(std::uint64_t seed) {
  DomainSpec s;
  s.seed = seed;
  return s;
}

/// Overlapping domain: class means 2 sigma apart, appearance shifted per
/// context, rare contexts. Needs a larger, more diverse bank.
inline DomainSpec hard_domain(std::uint64_t seed) {
  DomainSpec s;
  s.class_separation = 2.0;
  s.context_offset = 1.5;
  s.context_weights = {0.6, 0.3, 0.1};
  s.seed = seed;
  return s;
}

/// Two classes with the same appearance that never share a context.
inline DomainSpec lookalike_domain(std::uint64_t seed) {
  DomainSpec s;
  s.num_classes = 2;
  s.num_contexts = 2;
  s.context_classes = {{0}, {1}};
  s.class_separation = 0.0;
  s.min_classes_per_image = 1;
  s.max_classes_per_image = 1;
  s.pool_images = 200;
  s.seed = seed;
  return s;
}

namespace detail {

inline std::vector<double> gaussian(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  for (auto& x : v) x = rng.normal();
  return v;
}

// Gram-Schmidt on Gaussian draws.
inline std::vector<std::vector<double>> orthonormal_basis(Rng& rng, std::size_t count, std::size_t dim) {
  std::vector<std::vector<double>> basis;
  while (basis.size() < count) {
    auto v = gaussian(rng, dim);
    for (const auto& b : basis) {
      double p = 0.0;
      for (std::size_t i = 0; i < dim; ++i) p += v[i] * b[i];
      for (std::size_t i = 0; i < dim; ++i) v[i] -= p * b[i];
    }
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n < 1e-6) continue;
    for (auto& x : v) x /= n;
    basis.push_back(std::move(v));
  }
  return basis;
}

inline void axpy(std::vector<double>& y, double a, const std::vector<double>& x) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

inline EmbeddingVector to_embedding(const std::vector<double>& v) {
  return EmbeddingVector(std::vector<float>(v.begin(), v.end()));
}

inline std::size_t pick_weighted(Rng& rng, const std::vector<double>& w) {
  double total = 0.0;
  for (double x : w) total += x;
  double r = rng.uniform() * total;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (r < w[i]) return i;
    r -= w[i];
  }
  return w.size() - 1;
}

class Generator {
 public:
  explicit Generator(const DomainSpec& spec) : spec_(spec), rng_(spec.seed) {
    const std::size_t c = spec.num_classes;
    const std::size_t t = spec.num_contexts;
    if (spec.dim < c + 2) throw Error("fixture dim too small for the class count");
    if (c < 1 || t < 1) throw Error("fixture needs at least one class and one context");
    if (!spec.context_weights.empty() && spec.context_weights.size() != t) throw Error("context_weights size mismatch");
    if (!spec.context_classes.empty() && spec.context_classes.size() != t) throw Error("context_classes size mismatch");

    // Crop space: u0, then one axis per class spanning the noisy subspace.
    auto crop_basis = orthonormal_basis(rng_, c + 1, spec.dim);
    base_ = crop_basis[0];
    class_axes_.assign(crop_basis.begin() + 1, crop_basis.end());
    class_means_.assign(c, std::vector<double>(spec.dim, 0.0));
    for (std::size_t k = 0; k < c; ++k) {
      axpy(class_means_[k], spec.base_norm, base_);
      axpy(class_means_[k], spec.class_separation * spec.sigma / std::sqrt(2.0), class_axes_[k]);
    }
    // Per-(class, context) shifts live outside u0 and the class subspace.
    offsets_.assign(c, std::vector<std::vector<double>>(t, std::vector<double>(spec.dim, 0.0)));
    for (std::size_t k = 0; k < c; ++k) {
      for (std::size_t s = 0; s < t; ++s) {
        auto v = gaussian(rng_, spec.dim);
        project_out(v);
        double n = 0.0;
        for (double x : v) n += x * x;
        n = std::sqrt(n);
        for (std::size_t i = 0; i < spec.dim; ++i) offsets_[k][s][i] = v[i] / n * spec.context_offset * spec.sigma;
      }
    }
    context_axes_ = orthonormal_basis(rng_, t, spec.dim);
    names_ = default_class_names(c);
  }

  SyntheticDataset run() {
    SyntheticDataset ds;
    ds.manifest = Manifest{spec_.dim, ClassTable(names_), 1};
    for (std::size_t i = 0; i < spec_.pool_images; ++i) {
      Scene sc = scene("pool_" + pad(i));
      PoolCandidate cand{sc.image, {}};
      for (int cls : sc.classes) cand.class_hints.push_back(names_[static_cast<std::size_t>(cls)]);
      for (std::size_t o = 0; o < sc.objects.size(); ++o) {
        const auto& obj = sc.objects[o];
        ds.pool_instances.push_back(InstanceRecord{sc.image.image_id + "/obj_" + std::to_string(o), sc.image.image_id,
                                                   obj.box, ds.manifest.classes.label(obj.cls), obj.embedding});
      }
      ds.pool.push_back(std::move(cand));
    }
    for (std::size_t i = 0; i < spec_.query_images; ++i) {
      Scene sc = scene("query_" + pad(i));
      for (const auto& obj : sc.objects) {
        ds.groundtruth.push_back(GroundTruth{sc.image.image_id, obj.box, ds.manifest.classes.label(obj.cls)});
        const double j = spec_.box_jitter;
        BBox pb(clampf(obj.box.x_min() + rng_.uniform(-j, j)), clampf(obj.box.y_min() + rng_.uniform(-j, j)),
                clampf(obj.box.x_max() + rng_.uniform(-j, j)), clampf(obj.box.y_max() + rng_.uniform(-j, j)));
        const auto score = static_cast<float>(rng_.uniform(spec_.min_proposal_score, spec_.max_proposal_score));
        ds.proposals.push_back(Proposal{sc.image.image_id, pb, score, crop(obj.cls, sc.context), std::nullopt});
      }
      ds.queries.push_back(std::move(sc.image));
    }
    return ds;
  }

 private:
  struct Object {
    int cls;
    BBox box;
    EmbeddingVector embedding;
  };
  struct Scene {
    ImageRecord image;
    std::size_t context;
    std::vector<int> classes;
    std::vector<Object> objects;
  };

  static std::string pad(std::size_t i) {
    std::string s = std::to_string(i);
    return std::string(s.size() < 5 ? 5 - s.size() : 0, '0') + s;
  }

  float clampf(double v) const {
    return static_cast<float>(std::min(std::max(v, 0.0), spec_.image_size));
  }

  void project_out(std::vector<double>& v) const {
    auto remove = [&](const std::vector<double>& b) {
      double p = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) p += v[i] * b[i];
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= p * b[i];
    };
    remove(base_);
    for (const auto& a : class_axes_) remove(a);
  }

  EmbeddingVector crop(int cls, std::size_t context) {
    const auto k = static_cast<std::size_t>(cls);
    std::vector<double> v = class_means_[k];
    axpy(v, 1.0, offsets_[k][context]);
    auto off = gaussian(rng_, spec_.dim);
    project_out(off);
    axpy(v, spec_.off_subspace_sigma, off);
    for (const auto& a : class_axes_) axpy(v, spec_.sigma * rng_.normal(), a);
    return to_embedding(v);
  }

  Scene scene(std::string id) {
    Scene sc;
    sc.context = spec_.context_weights.empty() ? rng_.index(spec_.num_contexts) : pick_weighted(rng_, spec_.context_weights);
    std::vector<double> img(spec_.dim, 0.0);
    axpy(img, spec_.context_norm, context_axes_[sc.context]);
    for (auto& x : img) x += spec_.image_sigma * rng_.normal();
    sc.image = ImageRecord{std::move(id), to_embedding(img), std::nullopt};

    std::vector<int> allowed;
    if (spec_.context_classes.empty()) {
      for (std::size_t k = 0; k < spec_.num_classes; ++k) allowed.push_back(static_cast<int>(k));
    } else {
      allowed = spec_.context_classes[sc.context];
    }
    rng_.shuffle(allowed);
    const std::size_t want = spec_.min_classes_per_image +
                             rng_.index(spec_.max_classes_per_image - spec_.min_classes_per_image + 1);
    allowed.resize(std::min(want, allowed.size()));
    sc.classes = allowed;

    // Objects occupy distinct cells of a 4x4 grid, so boxes never overlap.
    std::vector<std::size_t> cells(16);
    for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = i;
    rng_.shuffle(cells);
    std::size_t next_cell = 0;
    const double cell = spec_.image_size / 4.0;
    for (int cls : sc.classes) {
      const std::size_t count = spec_.min_objects_per_class +
                                rng_.index(spec_.max_objects_per_class - spec_.min_objects_per_class + 1);
      for (std::size_t o = 0; o < count && next_cell < cells.size(); ++o) {
        const std::size_t c = cells[next_cell++];
        const double w = rng_.uniform(0.25, 0.8) * cell;
        const double h = rng_.uniform(0.25, 0.8) * cell;
        const double x0 = static_cast<double>(c % 4) * cell + rng_.uniform(0.05 * cell, cell - w - 0.05 * cell);
        const double y0 = static_cast<double>(c / 4) * cell + rng_.uniform(0.05 * cell, cell - h - 0.05 * cell);
        BBox box(static_cast<float>(x0), static_cast<float>(y0), static_cast<float>(x0 + w), static_cast<float>(y0 + h));
        sc.objects.push_back(Object{cls, box, crop(cls, sc.context)});
      }
    }
    return sc;
  }

  DomainSpec spec_;
  Rng rng_;
  std::vector<double> base_;
  std::vector<std::vector<double>> class_axes_;
  std::vector<std::vector<double>> class_means_;
  std::vector<std::vector<std::vector<double>>> offsets_;
  std::vector<std::vector<double>> context_axes_;
  std::vector<std::string> names_;
};

}  // namespace detail

inline SyntheticDataset generate(const DomainSpec& spec) { return detail::Generator(spec).run(); }

}  // namespace racdet::fixtures
