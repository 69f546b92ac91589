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
// Brute-force reference implementations used as test oracles. Nothing here
// calls the retrieval or evaluation code it is used to check.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "racdet/memory_bank.hpp"
#include "racdet/random.hpp"
#include "racdet/types.hpp"

namespace racdet::oracle {

inline EmbeddingVector random_embedding(Rng& rng, std::size_t dim) {
  std::vector<float> v(dim);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return EmbeddingVector(std::move(v));
}

inline BBox random_box(Rng& rng, double extent = 200.0) {
  const double x0 = rng.uniform(0.0, extent);
  const double y0 = rng.uniform(0.0, extent);
  return BBox(static_cast<float>(x0), static_cast<float>(y0), static_cast<float>(x0 + rng.uniform(5.0, 80.0)),
              static_cast<float>(y0 + rng.uniform(5.0, 80.0)));
}

struct Ranked {
  std::string id;
  double similarity;
};

// Score everything, sort everything, then filter and cut.
inline std::vector<Ranked> full_sort(std::vector<Ranked> all, std::size_t limit, double thresh) {
  std::sort(all.begin(), all.end(), [](const Ranked& a, const Ranked& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.id < b.id;
  });
  std::vector<Ranked> out;
  for (const auto& r : all) {
    if (r.similarity >= thresh) out.push_back(r);
  }
  if (out.size() > limit) out.resize(limit);
  return out;
}

inline std::vector<Ranked> context_topk(const EmbeddingVector& q, const std::vector<ImageRecord>& images, std::size_t k,
                                        double thresh) {
  std::vector<Ranked> all;
  for (const auto& img : images) all.push_back({img.image_id, cosine_similarity(q, img.embedding)});
  return full_sort(std::move(all), k, thresh);
}

inline std::vector<Ranked> instance_topn(const EmbeddingVector& q, const std::vector<InstanceRecord>& instances,
                                         const std::set<std::string>& allowed, std::size_t n, double thresh) {
  std::vector<Ranked> all;
  for (const auto& inst : instances) {
    if (allowed.count(inst.image_id) != 0) all.push_back({inst.instance_id, cosine_similarity(q, inst.embedding)});
  }
  return full_sort(std::move(all), n, thresh);
}

// Every detection's winning instance must live in one of its context images.
inline std::size_t constraint_violations(const std::vector<ClassifiedDetection>& dets, const BankSnapshot& bank) {
  std::map<std::string, std::string> owner;
  for (const auto& inst : bank.instances()) owner[inst.instance_id] = inst.image_id;
  std::size_t bad = 0;
  for (const auto& d : dets) {
    auto it = owner.find(d.match_instance_id);
    if (it == owner.end() ||
        std::find(d.context_image_ids.begin(), d.context_image_ids.end(), it->second) == d.context_image_ids.end()) {
      ++bad;
    }
  }
  return bad;
}

inline double box_iou(const BBox& a, const BBox& b) {
  const double w = std::max(0.0, std::min<double>(a.x_max(), b.x_max()) - std::max<double>(a.x_min(), b.x_min()));
  const double h = std::max(0.0, std::min<double>(a.y_max(), b.y_max()) - std::max<double>(a.y_min(), b.y_min()));
  const double inter = w * h;
  const double ua = (static_cast<double>(a.x_max()) - a.x_min()) * (static_cast<double>(a.y_max()) - a.y_min());
  const double ub = (static_cast<double>(b.x_max()) - b.x_min()) * (static_cast<double>(b.y_max()) - b.y_min());
  return inter <= 0.0 ? 0.0 : inter / (ua + ub - inter);
}

// AP by definition: at each of the 101 recall levels, the best precision
// reached at any rank whose recall is at least that level.
inline double ap_101(const std::vector<bool>& ranked_tp, std::size_t num_gt) {
  double sum = 0.0;
  for (int r = 0; r <= 100; ++r) {
    const double level = r / 100.0;
    double best = 0.0;
    for (std::size_t end = 1; end <= ranked_tp.size(); ++end) {
      std::size_t tp = 0;
      for (std::size_t i = 0; i < end; ++i) tp += ranked_tp[i] ? 1 : 0;
      const double recall = static_cast<double>(tp) / static_cast<double>(num_gt);
      if (recall >= level) best = std::max(best, static_cast<double>(tp) / static_cast<double>(end));
    }
    sum += best;
  }
  return sum / 101.0;
}

struct BruteReport {
  std::vector<std::optional<double>> ap, ar;
  double mean_ap = 0.0, mean_ar = 0.0;
};

// Quadratic reference for a single IoU threshold: rank by repeated selection
// of the best remaining detection, cap per image, greedy-match per
// (image, class), then AP/AR by definition.
inline BruteReport evaluate(const std::vector<ClassifiedDetection>& dets, const std::vector<GroundTruth>& gts,
                            std::size_t num_classes, double iou_thresh, std::size_t max_dets) {
  auto before = [](const ClassifiedDetection& a, const ClassifiedDetection& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.image_id != b.image_id) return a.image_id < b.image_id;
    const float ka[4] = {a.bbox.x_min(), a.bbox.y_min(), a.bbox.x_max(), a.bbox.y_max()};
    const float kb[4] = {b.bbox.x_min(), b.bbox.y_min(), b.bbox.x_max(), b.bbox.y_max()};
    return std::lexicographical_compare(ka, ka + 4, kb, kb + 4);
  };
  std::vector<std::size_t> rank;
  std::vector<bool> done(dets.size(), false);
  for (std::size_t step = 0; step < dets.size(); ++step) {
    std::size_t best = dets.size();
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (!done[i] && (best == dets.size() || before(dets[i], dets[best]))) best = i;
    }
    done[best] = true;
    rank.push_back(best);
  }
  std::map<std::string, std::size_t> per_image;
  std::vector<std::size_t> kept;
  for (std::size_t i : rank) {
    if (per_image[dets[i].image_id]++ < max_dets) kept.push_back(i);
  }
  std::vector<bool> tp(dets.size(), false);
  std::vector<bool> gt_used(gts.size(), false);
  for (std::size_t i : kept) {
    double best = -1.0;
    std::size_t arg = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gt_used[g] || gts[g].image_id != dets[i].image_id || gts[g].label.id != dets[i].label.id) continue;
      const double v = box_iou(dets[i].bbox, gts[g].bbox);
      if (v >= iou_thresh && v > best) {
        best = v;
        arg = g;
      }
    }
    if (arg != gts.size()) {
      gt_used[arg] = true;
      tp[i] = true;
    }
  }
  BruteReport rep;
  rep.ap.assign(num_classes, std::nullopt);
  rep.ar.assign(num_classes, std::nullopt);
  std::size_t present = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::size_t num_gt = 0;
    for (const auto& g : gts) num_gt += g.label.id == static_cast<int>(c) ? 1 : 0;
    if (num_gt == 0) continue;
    std::vector<bool> flags;
    std::size_t hits = 0;
    for (std::size_t i : kept) {
      if (dets[i].label.id != static_cast<int>(c)) continue;
      flags.push_back(tp[i]);
      hits += tp[i] ? 1 : 0;
    }
    rep.ap[c] = ap_101(flags, num_gt);
    rep.ar[c] = static_cast<double>(hits) / static_cast<double>(num_gt);
    rep.mean_ap += *rep.ap[c];
    rep.mean_ar += *rep.ar[c];
    ++present;
  }
  if (present > 0) {
    rep.mean_ap /= static_cast<double>(present);
    rep.mean_ar /= static_cast<double>(present);
  }
  return rep;
}

struct EvalScene {
  std::vector<ClassifiedDetection> dets;
  std::vector<GroundTruth> gts;
};

// Small scenes with nearby boxes, coarse scores (ties) and repeated boxes.
inline EvalScene random_eval_scene(Rng& rng, const ClassTable& classes, std::size_t max_boxes) {
  const auto nc = classes.size();
  EvalScene s;
  const std::size_t images = 1 + rng.index(4);
  const std::size_t ngt = rng.index(max_boxes / 2 + 1);
  for (std::size_t i = 0; i < ngt; ++i) {
    s.gts.push_back({"img" + std::to_string(rng.index(images)), random_box(rng, 60.0),
                     classes.label(static_cast<int>(rng.index(nc)))});
  }
  const std::size_t ndet = rng.index(max_boxes - ngt + 1);
  for (std::size_t i = 0; i < ndet; ++i) {
    ClassifiedDetection d;
    if (!s.gts.empty() && rng.uniform() < 0.6) {
      const auto& g = s.gts[rng.index(s.gts.size())];
      const float j = static_cast<float>(rng.uniform(-4.0, 4.0));
      d.image_id = g.image_id;
      d.bbox = BBox(std::max(0.0f, g.bbox.x_min() + j), g.bbox.y_min(), g.bbox.x_max() + j, g.bbox.y_max());
      d.label = rng.uniform() < 0.8 ? g.label : classes.label(static_cast<int>(rng.index(nc)));
    } else {
      d.image_id = "img" + std::to_string(rng.index(images));
      d.bbox = random_box(rng, 60.0);
      d.label = classes.label(static_cast<int>(rng.index(nc)));
    }
    d.score = static_cast<double>(rng.index(10)) / 10.0;
    s.dets.push_back(d);
  }
  return s;
}

}  // namespace racdet::oracle
