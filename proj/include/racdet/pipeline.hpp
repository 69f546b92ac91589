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
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "racdet/error.hpp"
#include "racdet/eval.hpp"
#include "racdet/memory_bank.hpp"
#include "racdet/rac.hpp"
#include "racdet/random.hpp"
#include "racdet/seed_select.hpp"
#include "racdet/types.hpp"

namespace racdet {

/// Per-class seed selection over a candidate pool. Each class is pooled from
/// the candidates whose hints name it and gets its own derived seed; the
/// union is returned in first-selected order. Candidates without any hints
/// form a single pool. `warnings` (optional) receives budget shortfalls.
inline std::vector<std::string> select_bank_images(std::span<const PoolCandidate> pool, const ClassTable& classes,
                                                   std::size_t per_class_budget, SeedStrategy strategy,
                                                   std::uint64_t rng_seed,
                                                   std::vector<std::string>* warnings = nullptr) {
  if (pool.empty()) throw Error("seed pool is empty");
  const bool hinted = std::any_of(pool.begin(), pool.end(), [](const PoolCandidate& c) { return !c.class_hints.empty(); });

  std::vector<std::pair<std::string, std::vector<ImageRecord>>> groups;
  if (!hinted) {
    std::vector<ImageRecord> all;
    for (const auto& c : pool) all.push_back(c.image);
    groups.emplace_back("", std::move(all));
  } else {
    for (const auto& c : pool) {
      for (const auto& h : c.class_hints) {
        if (!classes.find(h)) throw Error("candidate '" + c.image.image_id + "' hints unknown class '" + h + "'");
      }
    }
    for (const auto& name : classes.names()) {
      std::vector<ImageRecord> members;
      for (const auto& c : pool) {
        if (std::find(c.class_hints.begin(), c.class_hints.end(), name) != c.class_hints.end()) members.push_back(c.image);
      }
      groups.emplace_back(name, std::move(members));
    }
  }

  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& [name, members] = groups[g];
    const std::string what = name.empty() ? std::string("pool") : "class " + name;
    if (members.empty()) {
      if (warnings) warnings->push_back(what + ": no candidates");
      continue;
    }
    if (members.size() < per_class_budget && warnings) {
      warnings->push_back(what + ": pool of " + std::to_string(members.size()) + " is smaller than budget " +
                          std::to_string(per_class_budget) + ", taking all");
    }
    for (auto& id : select_seeds(members, per_class_budget, strategy, mix_seed(rng_seed, g))) {
      if (seen.insert(id).second) out.push_back(std::move(id));
    }
  }
  return out;
}

/// Builds a bank from image and instance records. With `keep`, only those
/// images (and their instances) are stored. Instances of images absent from
/// `images` are an error.
inline MemoryBank build_bank(const Manifest& manifest, std::span<const ImageRecord> images,
                             std::span<const InstanceRecord> instances,
                             const std::optional<std::vector<std::string>>& keep = std::nullopt) {
  std::unordered_set<std::string> known;
  for (const auto& img : images) known.insert(img.image_id);
  std::unordered_set<std::string> selected;
  if (keep) {
    for (const auto& id : *keep) {
      if (known.count(id) == 0) throw Error("selected image '" + id + "' is not in the image file");
      selected.insert(id);
    }
  }
  MemoryBank bank(manifest);
  for (const auto& img : images) {
    if (!keep || selected.count(img.image_id) != 0) bank.add_image(img);
  }
  for (const auto& inst : instances) {
    if (known.count(inst.image_id) == 0) {
      throw Error("instance '" + inst.instance_id + "' references unknown image '" + inst.image_id + "'");
    }
    if (!keep || selected.count(inst.image_id) != 0) bank.add_instance(inst);
  }
  return bank;
}

inline std::vector<ImageRecord> images_of(std::span<const PoolCandidate> pool) {
  std::vector<ImageRecord> out;
  out.reserve(pool.size());
  for (const auto& c : pool) out.push_back(c.image);
  return out;
}

namespace detail {

// Runs fn(i) for i in [0, n) on up to `threads` workers. fn must only write
// to slot i of its outputs.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < threads; ++w) {
      workers.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < n; i = next++) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
          next = n;
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace detail

/// Classifies every query image's proposals against one snapshot. Output is
/// grouped by query image in input order; within an image the
/// classify_proposals order holds. Proposals naming an image that is not
/// among the queries are an error listing those ids.
inline std::vector<ClassifiedDetection> classify_dataset(std::span<const ImageRecord> queries,
                                                         std::span<const Proposal> proposals,
                                                         const BankSnapshot& bank, const RacParams& params,
                                                         ContextMode mode = ContextMode::two_stage,
                                                         std::size_t threads = 0) {
  params.validate();
  std::unordered_map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (!slot.emplace(queries[i].image_id, i).second) {
      throw Error("duplicate query image_id '" + queries[i].image_id + "'");
    }
  }
  std::vector<std::vector<Proposal>> grouped(queries.size());
  std::set<std::string> unknown;
  for (const auto& p : proposals) {
    auto it = slot.find(p.image_id);
    if (it == slot.end()) {
      unknown.insert(p.image_id);
      continue;
    }
    grouped[it->second].push_back(p);
  }
  if (!unknown.empty()) {
    std::string msg = "proposals reference unknown image_id(s):";
    for (const auto& id : unknown) msg += " " + id;
    throw Error(msg);
  }
  std::vector<std::vector<ClassifiedDetection>> per_image(queries.size());
  detail::parallel_for(queries.size(), threads, [&](std::size_t i) {
    if (!grouped[i].empty()) per_image[i] = classify_proposals(queries[i], grouped[i], bank, params, mode);
  });
  std::vector<ClassifiedDetection> out;
  for (auto& v : per_image) {
    for (auto& d : v) out.push_back(std::move(d));
  }
  return out;
}

/// Everything one ablation run needs: a labeled candidate pool to build
/// banks from, and an evaluation split.
struct Workload {
  Manifest manifest;
  std::vector<PoolCandidate> pool;
  std::vector<InstanceRecord> pool_instances;
  std::vector<ImageRecord> queries;
  std::vector<Proposal> proposals;
  std::vector<GroundTruth> groundtruth;
};

struct RunResult {
  std::size_t bank_images = 0;
  std::size_t bank_instances = 0;
  std::vector<ClassifiedDetection> detections;
  EvalReport report;
};

inline RunResult evaluate_bank(const Workload& w, const BankSnapshot& bank, const RacParams& params,
                               const EvalConfig& eval_cfg, ContextMode mode = ContextMode::two_stage) {
  RunResult r;
  r.bank_images = bank.images().size();
  r.bank_instances = bank.instances().size();
  r.detections = classify_dataset(w.queries, w.proposals, bank, params, mode);
  r.report = evaluate(r.detections, w.groundtruth, eval_cfg);
  return r;
}

/// select seeds -> build bank -> classify -> evaluate.
inline RunResult run_from_pool(const Workload& w, std::size_t per_class_budget, SeedStrategy strategy,
                               std::uint64_t rng_seed, const RacParams& params, const EvalConfig& eval_cfg) {
  const auto ids = select_bank_images(w.pool, w.manifest.classes, per_class_budget, strategy, rng_seed);
  const auto images = images_of(w.pool);
  const MemoryBank bank = build_bank(w.manifest, images, w.pool_instances, ids);
  return evaluate_bank(w, *bank.snapshot(), params, eval_cfg);
}

}  // namespace racdet
