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
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "racdet/error.hpp"
#include "racdet/eval.hpp"
#include "racdet/io.hpp"
#include "racdet/memory_bank.hpp"
#include "racdet/pipeline.hpp"
#include "racdet/rac.hpp"
#include "racdet/seed_select.hpp"

namespace racdet {

/// One ablation axis and the values to sweep. Values keep their JSON form
/// until applied: integers for db_size/per_class/k/n, strings for strategy,
/// floats for thresholds and w1.
struct SweepSpec {
  std::string axis;
  std::vector<json> values;
};

inline const std::vector<std::string>& sweep_axes() {
  static const std::vector<std::string> kAxes{"db_size", "per_class", "strategy", "k",
                                              "n",       "context_thresh", "instance_thresh", "w1"};
  return kAxes;
}

/// Machine-readable run settings. Relative paths in a config file resolve
/// against the file's directory.
struct RunConfig {
  std::filesystem::path bank;
  std::filesystem::path manifest;
  std::filesystem::path images;
  std::filesystem::path instances;
  std::filesystem::path pool;
  std::filesystem::path pool_instances;
  std::filesystem::path queries;
  std::filesystem::path proposals;
  std::filesystem::path groundtruth;
  std::filesystem::path detections;

  RacParams rac;
  std::vector<double> iou_thresholds{0.5};
  std::size_t max_dets_per_image = 100;
  BankBudget budget;
  SeedStrategy strategy = SeedStrategy::random_per_cluster;
  std::uint64_t seed = 0;
  std::optional<SweepSpec> sweep;
};

namespace detail {

template <class T>
void maybe(const json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return;
  try {
    out = it->template get<T>();
  } catch (const json::exception&) {
    throw Error(std::string("config field '") + key + "' has the wrong type");
  }
}

inline void maybe_path(const json& j, const char* key, const std::filesystem::path& base, std::filesystem::path& out) {
  std::string s;
  maybe(j, key, s);
  if (s.empty()) return;
  std::filesystem::path p(s);
  out = p.is_absolute() ? p : base / p;
}

}  // namespace detail

inline RunConfig parse_run_config(const json& j, const std::filesystem::path& base = {}) {
  if (!j.is_object()) throw Error("config must be a JSON object");
  RunConfig c;
  detail::maybe_path(j, "bank", base, c.bank);
  detail::maybe_path(j, "manifest", base, c.manifest);
  detail::maybe_path(j, "images", base, c.images);
  detail::maybe_path(j, "instances", base, c.instances);
  detail::maybe_path(j, "pool", base, c.pool);
  detail::maybe_path(j, "pool_instances", base, c.pool_instances);
  detail::maybe_path(j, "queries", base, c.queries);
  detail::maybe_path(j, "proposals", base, c.proposals);
  detail::maybe_path(j, "groundtruth", base, c.groundtruth);
  detail::maybe_path(j, "detections", base, c.detections);
  if (auto it = j.find("rac"); it != j.end()) {
    detail::maybe(*it, "k", c.rac.k);
    detail::maybe(*it, "n", c.rac.n);
    detail::maybe(*it, "context_thresh", c.rac.context_thresh);
    detail::maybe(*it, "instance_thresh", c.rac.instance_thresh);
    detail::maybe(*it, "w1", c.rac.w1);
    detail::maybe(*it, "w2", c.rac.w2);
  }
  if (auto it = j.find("eval"); it != j.end()) {
    detail::maybe(*it, "iou_thresholds", c.iou_thresholds);
    detail::maybe(*it, "max_dets_per_image", c.max_dets_per_image);
  }
  if (auto it = j.find("budget"); it != j.end()) detail::maybe(*it, "max_images_per_class", c.budget.max_images_per_class);
  std::string strategy;
  detail::maybe(j, "strategy", strategy);
  if (!strategy.empty()) c.strategy = parse_seed_strategy(strategy);
  detail::maybe(j, "seed", c.seed);
  if (auto it = j.find("sweep"); it != j.end()) {
    SweepSpec s;
    detail::maybe(*it, "axis", s.axis);
    std::vector<json> values;
    detail::maybe(*it, "values", values);
    s.values = std::move(values);
    c.sweep = std::move(s);
  }
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(path.string() + ": malformed config: " + e.what());
  }
  return parse_run_config(j, path.parent_path());
}

inline EvalConfig eval_config(const RunConfig& c, const ClassTable& classes) {
  EvalConfig e;
  e.iou_thresholds = c.iou_thresholds;
  e.max_dets_per_image = c.max_dets_per_image;
  e.classes = classes;
  return e;
}

struct AblationRow {
  std::string axis;
  std::string value;
  double mean_ap = 0.0;
  double mean_ar = 0.0;
};

/// One pipeline run per sweep value, all with the config's seed. Axes
/// db_size (total images, split evenly per class), per_class and strategy
/// rebuild the bank from the workload's pool; parameter axes reuse
/// `fixed_bank` when given, else build one bank from the pool with the
/// configured budget and strategy.
inline std::vector<AblationRow> run_ablation(const Workload& w, const BankSnapshot* fixed_bank, const RunConfig& cfg) {
  if (!cfg.sweep) throw Error("ablate needs a sweep axis");
  const auto& sweep = *cfg.sweep;
  const auto& axes = sweep_axes();
  if (std::find(axes.begin(), axes.end(), sweep.axis) == axes.end()) throw Error("unknown sweep axis '" + sweep.axis + "'");
  if (sweep.values.empty()) throw Error("sweep has no values");
  const bool bank_axis = sweep.axis == "db_size" || sweep.axis == "per_class" || sweep.axis == "strategy";
  if ((bank_axis || fixed_bank == nullptr) && w.pool.empty()) {
    throw Error("sweep axis '" + sweep.axis + "' needs a candidate pool");
  }
  const EvalConfig eval_cfg = eval_config(cfg, w.manifest.classes);

  std::optional<MemoryBank> shared;
  if (!bank_axis && fixed_bank == nullptr) {
    const auto ids = select_bank_images(w.pool, w.manifest.classes, cfg.budget.max_images_per_class, cfg.strategy, cfg.seed);
    shared.emplace(build_bank(w.manifest, images_of(w.pool), w.pool_instances, ids));
  }

  std::vector<AblationRow> rows;
  for (const auto& v : sweep.values) {
    const std::string label = v.is_string() ? v.get<std::string>() : v.dump();
    try {
      RacParams params = cfg.rac;
      std::size_t per_class = cfg.budget.max_images_per_class;
      SeedStrategy strategy = cfg.strategy;
      auto as_count = [&]() {
        if (!v.is_number_integer() || v.get<long long>() < 1) throw Error("expected a positive integer");
        return v.get<std::size_t>();
      };
      auto as_real = [&]() {
        if (!v.is_number()) throw Error("expected a number");
        return v.get<double>();
      };
      if (sweep.axis == "db_size") {
        per_class = std::max<std::size_t>(1, as_count() / std::max<std::size_t>(1, w.manifest.classes.size()));
      } else if (sweep.axis == "per_class") {
        per_class = as_count();
      } else if (sweep.axis == "strategy") {
        if (!v.is_string()) throw Error("expected a strategy name");
        strategy = parse_seed_strategy(v.get<std::string>());
      } else if (sweep.axis == "k") {
        params.k = as_count();
      } else if (sweep.axis == "n") {
        params.n = as_count();
      } else if (sweep.axis == "context_thresh") {
        params.context_thresh = as_real();
      } else if (sweep.axis == "instance_thresh") {
        params.instance_thresh = as_real();
      } else if (sweep.axis == "w1") {
        params.w1 = as_real();
        params.w2 = 1.0 - params.w1;
      }
      params.validate();
      RunResult r;
      if (bank_axis) {
        r = run_from_pool(w, per_class, strategy, cfg.seed, params, eval_cfg);
      } else {
        r = evaluate_bank(w, fixed_bank ? *fixed_bank : *shared->snapshot(), params, eval_cfg);
      }
      rows.push_back(AblationRow{sweep.axis, label, r.report.mean_ap, r.report.mean_ar});
    } catch (const Error& e) {
      throw Error("ablation failed at " + sweep.axis + "=" + label + ": " + e.what());
    }
  }
  return rows;
}

inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "axis,value,mAP,mAR\n";
  for (const auto& r : rows) {
    out += r.axis + "," + r.value + "," + json(r.mean_ap).dump() + "," + json(r.mean_ar).dump() + "\n";
  }
  return out;
}

}  // namespace racdet
