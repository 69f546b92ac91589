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
#include <cstddef>
#include <iomanip>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "racdet/error.hpp"
#include "racdet/io.hpp"
#include "racdet/types.hpp"

namespace racdet {

struct EvalConfig {
  // AP and AR are averaged over these IoU thresholds; one entry by default.
  std::vector<double> iou_thresholds{0.5};
  std::size_t max_dets_per_image = 100;
  ClassTable classes;

  void validate() const {
    if (iou_thresholds.empty()) throw Error("at least one IoU threshold is required");
    for (double t : iou_thresholds) {
      if (!(t > 0.0 && t <= 1.0)) throw Error("IoU thresholds must lie in (0, 1]");
    }
    if (max_dets_per_image < 1) throw Error("max_dets_per_image must be >= 1");
  }
};

struct ClassCounts {
  std::size_t num_gt = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

/// Per-class AP/AR indexed by class id. A class without ground truth has no
/// AP/AR (nullopt) and does not enter the means.
struct EvalReport {
  ClassTable classes;
  std::vector<double> iou_thresholds;
  std::vector<std::optional<double>> per_class_ap;
  std::vector<std::optional<double>> per_class_ar;
  double mean_ap = 0.0;
  double mean_ar = 0.0;
  // Counts at the first IoU threshold.
  std::vector<ClassCounts> counts;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

struct RankedFlag {
  double score = 0.0;
  bool tp = false;
};

inline double iou(const BBox& a, const BBox& b) {
  const double ix = std::min<double>(a.x_max(), b.x_max()) - std::max<double>(a.x_min(), b.x_min());
  const double iy = std::min<double>(a.y_max(), b.y_max()) - std::max<double>(a.y_min(), b.y_min());
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  return inter / (a.area() + b.area() - inter);
}

namespace detail {

// Total order used everywhere detections are ranked: score desc, then
// image_id, then bbox lexicographic.
inline bool det_before(const ClassifiedDetection& a, const ClassifiedDetection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.image_id != b.image_id) return a.image_id < b.image_id;
  return a.bbox < b.bbox;
}

// Greedy matching of detections already in rank order against one image's
// ground truth of one class.
inline std::vector<bool> greedy_match(std::span<const BBox> ranked_dets, std::span<const BBox> gts,
                                      double iou_thresh) {
  std::vector<bool> flags(ranked_dets.size(), false);
  std::vector<bool> used(gts.size(), false);
  for (std::size_t d = 0; d < ranked_dets.size(); ++d) {
    double best = -1.0;
    std::size_t arg = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g]) continue;
      const double v = iou(ranked_dets[d], gts[g]);
      if (v >= iou_thresh && v > best) {
        best = v;
        arg = g;
      }
    }
    if (arg != gts.size()) {
      used[arg] = true;
      flags[d] = true;
    }
  }
  return flags;
}

}  // namespace detail

/// TP/FP flag per detection (aligned with the input order) for detections and
/// ground truth of a single image and class. Detections are matched in
/// descending score; each claims the unmatched ground truth of highest
/// IoU >= iou_thresh.
inline std::vector<bool> match_detections(std::span<const ClassifiedDetection> dets, std::span<const BBox> gts,
                                          double iou_thresh) {
  std::vector<std::size_t> order(dets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return detail::det_before(dets[a], dets[b]); });
  std::vector<BBox> ranked;
  ranked.reserve(order.size());
  for (std::size_t i : order) ranked.push_back(dets[i].bbox);
  const auto ranked_flags = detail::greedy_match(ranked, gts, iou_thresh);
  std::vector<bool> flags(dets.size());
  for (std::size_t r = 0; r < order.size(); ++r) flags[order[r]] = ranked_flags[r];
  return flags;
}

/// 101-point interpolated AP: precision is replaced by its running maximum
/// from the right, then sampled at recall 0, 0.01, ..., 1. Entries are ranked
/// by descending score (stable). Returns nullopt when num_gt is 0.
inline std::optional<double> average_precision(std::span<const RankedFlag> flags, std::size_t num_gt) {
  if (num_gt == 0) return std::nullopt;
  std::vector<RankedFlag> ranked(flags.begin(), flags.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedFlag& a, const RankedFlag& b) { return a.score > b.score; });
  std::vector<double> recall(ranked.size());
  std::vector<double> precision(ranked.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (ranked[i].tp) ++tp;
    recall[i] = static_cast<double>(tp) / static_cast<double>(num_gt);
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  for (std::size_t i = precision.size(); i > 1; --i) precision[i - 2] = std::max(precision[i - 2], precision[i - 1]);
  double sum = 0.0;
  for (int r = 0; r <= 100; ++r) {
    const double level = r / 100.0;
    auto it = std::lower_bound(recall.begin(), recall.end(), level);
    if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return sum / 101.0;
}

/// Dataset-level evaluation. Detections are ranked by the total order
/// (score desc, image_id, bbox); each image keeps its top max_dets_per_image.
/// AR is the pooled recall of the kept detections.
inline EvalReport evaluate(std::span<const ClassifiedDetection> dets, std::span<const GroundTruth> gts,
                           const EvalConfig& cfg) {
  cfg.validate();
  const std::size_t num_classes = cfg.classes.size();
  for (const auto& d : dets) {
    if (!cfg.classes.contains(d.label)) throw Error("class-table mismatch: detection label '" + d.label.name + "'");
  }
  for (const auto& g : gts) {
    if (!cfg.classes.contains(g.label)) throw Error("class-table mismatch: ground-truth label '" + g.label.name + "'");
  }

  std::vector<std::size_t> order(dets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return detail::det_before(dets[a], dets[b]); });

  // Per-image cap, applied in rank order.
  std::map<std::string, std::size_t> kept_per_image;
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    if (kept_per_image[dets[i].image_id]++ < cfg.max_dets_per_image) kept.push_back(i);
  }

  using Key = std::pair<int, std::string>;
  std::map<Key, std::vector<std::size_t>> det_groups;  // rank order preserved
  for (std::size_t i : kept) det_groups[{dets[i].label.id, dets[i].image_id}].push_back(i);
  std::map<Key, std::vector<BBox>> gt_groups;
  std::vector<std::size_t> num_gt(num_classes, 0);
  for (const auto& g : gts) {
    gt_groups[{g.label.id, g.image_id}].push_back(g.bbox);
    ++num_gt[static_cast<std::size_t>(g.label.id)];
  }

  EvalReport rep;
  rep.classes = cfg.classes;
  rep.iou_thresholds = cfg.iou_thresholds;
  rep.per_class_ap.assign(num_classes, std::nullopt);
  rep.per_class_ar.assign(num_classes, std::nullopt);
  rep.counts.assign(num_classes, ClassCounts{});
  std::vector<double> ap_sum(num_classes, 0.0);
  std::vector<double> ar_sum(num_classes, 0.0);

  static const std::vector<BBox> kNoGt;
  for (std::size_t t = 0; t < cfg.iou_thresholds.size(); ++t) {
    std::vector<bool> is_tp(dets.size(), false);
    for (const auto& [key, members] : det_groups) {
      std::vector<BBox> boxes;
      boxes.reserve(members.size());
      for (std::size_t i : members) boxes.push_back(dets[i].bbox);
      auto it = gt_groups.find(key);
      const auto& gt_boxes = it == gt_groups.end() ? kNoGt : it->second;
      const auto flags = detail::greedy_match(boxes, gt_boxes, cfg.iou_thresholds[t]);
      for (std::size_t m = 0; m < members.size(); ++m) is_tp[members[m]] = flags[m];
    }
    std::vector<std::vector<RankedFlag>> per_class(num_classes);
    for (std::size_t i : kept) per_class[static_cast<std::size_t>(dets[i].label.id)].push_back({dets[i].score, is_tp[i]});
    for (std::size_t c = 0; c < num_classes; ++c) {
      std::size_t tp = 0;
      for (const auto& f : per_class[c]) tp += f.tp ? 1 : 0;
      if (t == 0) rep.counts[c] = ClassCounts{num_gt[c], tp, per_class[c].size() - tp, num_gt[c] - tp};
      if (num_gt[c] == 0) continue;
      ap_sum[c] += *average_precision(per_class[c], num_gt[c]);
      ar_sum[c] += static_cast<double>(tp) / static_cast<double>(num_gt[c]);
    }
  }

  const double nt = static_cast<double>(cfg.iou_thresholds.size());
  std::size_t present = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (num_gt[c] == 0) continue;
    rep.per_class_ap[c] = ap_sum[c] / nt;
    rep.per_class_ar[c] = ar_sum[c] / nt;
    rep.mean_ap += *rep.per_class_ap[c];
    rep.mean_ar += *rep.per_class_ar[c];
    ++present;
  }
  if (present > 0) {
    rep.mean_ap /= static_cast<double>(present);
    rep.mean_ar /= static_cast<double>(present);
  }
  return rep;
}

inline json report_json(const EvalReport& r) {
  json per_class = json::array();
  for (std::size_t c = 0; c < r.classes.size(); ++c) {
    json e = {{"label", r.classes.names()[c]},
              {"num_gt", r.counts[c].num_gt},
              {"tp", r.counts[c].tp},
              {"fp", r.counts[c].fp},
              {"fn", r.counts[c].fn}};
    e["AP"] = r.per_class_ap[c] ? json(*r.per_class_ap[c]) : json(nullptr);
    e["AR"] = r.per_class_ar[c] ? json(*r.per_class_ar[c]) : json(nullptr);
    per_class.push_back(std::move(e));
  }
  return {{"mAP", r.mean_ap}, {"mAR", r.mean_ar}, {"iou_thresholds", r.iou_thresholds}, {"per_class", per_class}};
}

/// Fixed-width table in percent: mAP, mAR, then one AP column per class.
/// Classes without ground truth show "-".
inline std::string report_table(const EvalReport& r) {
  std::vector<std::string> head{"mAP", "mAR"};
  std::vector<std::string> row;
  auto pct = [](double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(1) << v * 100.0;
    return s.str();
  };
  row.push_back(pct(r.mean_ap));
  row.push_back(pct(r.mean_ar));
  for (std::size_t c = 0; c < r.classes.size(); ++c) {
    head.push_back(r.classes.names()[c]);
    row.push_back(r.per_class_ap[c] ? pct(*r.per_class_ap[c]) : "-");
  }
  std::ostringstream out;
  for (int line = 0; line < 2; ++line) {
    const auto& cells = line == 0 ? head : row;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const std::size_t w = std::max<std::size_t>({6, head[i].size() + 1, row[i].size() + 1});
      out << std::setw(static_cast<int>(w)) << cells[i];
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace racdet
