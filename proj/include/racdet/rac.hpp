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
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "racdet/error.hpp"
#include "racdet/memory_bank.hpp"
#include "racdet/types.hpp"

namespace racdet {

/// Retrieval-augmented classification knobs. Defaults: k=50, n=1, context 0.1,
/// instance 0.8, w=0.5/0.5.
struct RacParams {
  std::size_t k = 50;  // context images kept
  std::size_t n = 1;   // instances voting
  double context_thresh = 0.1;
  double instance_thresh = 0.8;
  double w1 = 0.5;  // proposal-score weight
  double w2 = 0.5;  // cosine weight

  void validate() const {
    if (k < 1) throw Error("k must be >= 1");
    if (n < 1) throw Error("n must be >= 1");
    if (!(context_thresh >= -1.0 && context_thresh <= 1.0)) throw Error("context_thresh must lie in [-1, 1]");
    if (!(instance_thresh >= -1.0 && instance_thresh <= 1.0)) throw Error("instance_thresh must lie in [-1, 1]");
    if (!(w1 >= 0.0 && w1 <= 1.0) || !(w2 >= 0.0 && w2 <= 1.0)) throw Error("fusion weights must lie in [0, 1]");
    if (std::abs(w1 + w2 - 1.0) > 1e-9) throw Error("fusion weights must sum to 1");
  }
};

struct ContextMatch {
  std::string image_id;
  double similarity = 0.0;

  friend bool operator==(const ContextMatch&, const ContextMatch&) = default;
};

struct InstanceMatch {
  std::string instance_id;
  ClassLabel label;
  double similarity = 0.0;

  friend bool operator==(const InstanceMatch&, const InstanceMatch&) = default;
};

struct VoteResult {
  ClassLabel label;
  InstanceMatch top_match;
};

/// Whether instance retrieval is restricted to the retrieved context images
/// (the normal pipeline) or scans the whole bank (ablation only).
enum class ContextMode { two_stage, context_free };

namespace detail {

struct Scored {
  std::size_t index;
  double similarity;
};

// Similarity descending, then index ascending. Snapshot indices follow id
// order, so this is the id tie-break.
inline bool ranks_before(const Scored& a, const Scored& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  return a.index < b.index;
}

inline void keep_top(std::vector<Scored>& v, std::size_t limit) {
  if (v.size() > limit) {
    std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(limit), v.end(), ranks_before);
    v.resize(limit);
  } else {
    std::sort(v.begin(), v.end(), ranks_before);
  }
}

inline void check_query_dim(std::size_t got, const BankSnapshot& bank) {
  if (got != bank.dim()) {
    throw Error("dimension mismatch: " + std::to_string(got) + " != " + std::to_string(bank.dim()));
  }
}

inline std::vector<Scored> context_scan(const EmbeddingVector& query, const BankSnapshot& bank, std::size_t k,
                                        double thresh) {
  check_query_dim(query.dim(), bank);
  std::vector<Scored> hits;
  const auto q = query.values();
  for (std::size_t i = 0; i < bank.images().size(); ++i) {
    const double s = cosine_from_parts(dot(q, bank.image_row(i)), query.norm(), bank.image_norm(i));
    if (s >= thresh) hits.push_back({i, s});
  }
  keep_top(hits, k);
  return hits;
}

inline std::vector<Scored> instance_scan(const EmbeddingVector& query, const BankSnapshot& bank,
                                         std::span<const std::size_t> image_indices, std::size_t n,
                                         double thresh) {
  check_query_dim(query.dim(), bank);
  std::vector<Scored> hits;
  const auto q = query.values();
  for (std::size_t img : image_indices) {
    for (std::size_t j : bank.instances_of(img)) {
      const double s = cosine_from_parts(dot(q, bank.instance_row(j)), query.norm(), bank.instance_norm(j));
      if (s >= thresh) hits.push_back({j, s});
    }
  }
  keep_top(hits, n);
  return hits;
}

inline std::vector<std::size_t> resolve_images(std::span<const std::string> ids, const BankSnapshot& bank) {
  std::vector<std::size_t> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto idx = bank.image_index(id);
    if (!idx) throw Error("allowed image '" + id + "' is not in the bank");
    out.push_back(*idx);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline std::vector<InstanceMatch> to_instance_matches(const std::vector<Scored>& hits, const BankSnapshot& bank) {
  std::vector<InstanceMatch> out;
  out.reserve(hits.size());
  for (const auto& h : hits) {
    const auto& inst = bank.instances()[h.index];
    out.push_back({inst.instance_id, inst.label, h.similarity});
  }
  return out;
}

}  // namespace detail

/// Stage 1: exact cosine scan over every bank image, drop those below
/// `context_thresh`, sort descending (ties by ascending image_id), keep `k`.
inline std::vector<ContextMatch> context_retrieve(const EmbeddingVector& query, const BankSnapshot& bank,
                                                  std::size_t k, double context_thresh) {
  std::vector<ContextMatch> out;
  for (const auto& h : detail::context_scan(query, bank, k, context_thresh)) {
    out.push_back({bank.images()[h.index].image_id, h.similarity});
  }
  return out;
}

inline std::vector<ContextMatch> context_retrieve(const ImageRecord& query, const BankSnapshot& bank, std::size_t k,
                                                  double context_thresh) {
  return context_retrieve(query.embedding, bank, k, context_thresh);
}

/// Stage 2: cosine against instances owned by `allowed_images` only, filtered
/// by `instance_thresh`, sorted descending (ties by ascending instance_id),
/// truncated to `n`.
inline std::vector<InstanceMatch> instance_retrieve(const EmbeddingVector& query, const BankSnapshot& bank,
                                                    std::span<const std::string> allowed_images, std::size_t n,
                                                    double instance_thresh) {
  const auto images = detail::resolve_images(allowed_images, bank);
  return detail::to_instance_matches(detail::instance_scan(query, bank, images, n, instance_thresh), bank);
}

inline std::vector<InstanceMatch> instance_retrieve(const Proposal& proposal, const BankSnapshot& bank,
                                                    std::span<const std::string> allowed_images, std::size_t n,
                                                    double instance_thresh) {
  return instance_retrieve(proposal.embedding, bank, allowed_images, n, instance_thresh);
}

/// Plurality vote over the matches' labels. A tie goes to the tied label that
/// holds the single best match; `top_match` is the best match of the winner.
inline VoteResult vote(std::span<const InstanceMatch> matches) {
  if (matches.empty()) throw Error("vote needs at least one match");
  auto better = [](const InstanceMatch& a, const InstanceMatch& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.instance_id < b.instance_id;
  };
  std::map<int, std::size_t> counts;
  std::map<int, const InstanceMatch*> best;
  for (const auto& m : matches) {
    ++counts[m.label.id];
    auto& b = best[m.label.id];
    if (b == nullptr || better(m, *b)) b = &m;
  }
  int winner = counts.begin()->first;
  for (const auto& [label, count] : counts) {
    const std::size_t wc = counts[winner];
    if (count > wc || (count == wc && better(*best[label], *best[winner]))) winner = label;
  }
  return VoteResult{best[winner]->label, *best[winner]};
}

/// w1 * proposal_score + w2 * max(cosine, 0), clamped to [0, 1].
inline double fuse_score(double proposal_score, double cosine_score, double w1, double w2) {
  if (std::abs(w1 + w2 - 1.0) > 1e-9) throw Error("fusion weights must sum to 1");
  return std::clamp(w1 * proposal_score + w2 * std::max(cosine_score, 0.0), 0.0, 1.0);
}

/// Full pipeline for one query image: one context retrieval, then per proposal
/// an instance retrieval inside the context set, a vote and a fused score.
/// Proposals without a surviving instance match are dropped. Output is sorted
/// by fused score descending, ties in proposal input order.
inline std::vector<ClassifiedDetection> classify_proposals(const ImageRecord& query_image,
                                                           std::span<const Proposal> proposals,
                                                           const BankSnapshot& bank, const RacParams& params,
                                                           ContextMode mode = ContextMode::two_stage) {
  params.validate();
  detail::check_query_dim(query_image.embedding.dim(), bank);
  for (const auto& p : proposals) {
    if (p.image_id != query_image.image_id) {
      throw Error("proposal for image '" + p.image_id + "' passed with query image '" + query_image.image_id + "'");
    }
    check_score(p.proposal_score, "proposal_score");
  }

  std::vector<std::size_t> context;
  if (mode == ContextMode::two_stage) {
    for (const auto& h : detail::context_scan(query_image.embedding, bank, params.k, params.context_thresh)) {
      context.push_back(h.index);
    }
  } else {
    context.resize(bank.images().size());
    for (std::size_t i = 0; i < context.size(); ++i) context[i] = i;
  }
  if (context.empty()) return {};

  std::vector<std::string> context_ids;
  context_ids.reserve(context.size());
  for (std::size_t i : context) context_ids.push_back(bank.images()[i].image_id);
  std::vector<std::size_t> scan_order = context;
  std::sort(scan_order.begin(), scan_order.end());

  std::vector<ClassifiedDetection> out;
  for (const auto& p : proposals) {
    auto hits = detail::instance_scan(p.embedding, bank, scan_order, params.n, params.instance_thresh);
    if (hits.empty()) continue;
    const auto matches = detail::to_instance_matches(hits, bank);
    const VoteResult v = vote(matches);
    out.push_back(ClassifiedDetection{p.image_id, p.bbox, v.label,
                                      fuse_score(p.proposal_score, v.top_match.similarity, params.w1, params.w2),
                                      v.top_match.instance_id, context_ids});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const ClassifiedDetection& a, const ClassifiedDetection& b) { return a.score > b.score; });
  return out;
}

}  // namespace racdet
