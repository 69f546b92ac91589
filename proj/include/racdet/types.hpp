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
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "racdet/error.hpp"

namespace racdet {

namespace detail {

// Accumulation is in double; the float inputs are widened per term.
inline double dot(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return acc;
}

inline double squared_norm(std::span<const float> a) { return dot(a, a); }

inline double l2_norm(std::span<const float> a) { return std::sqrt(squared_norm(a)); }

// Shared by the value API and the contiguous bank scans so both produce
// bit-identical similarities.
inline double cosine_from_parts(double dot_ab, double norm_a, double norm_b) {
  return std::clamp(dot_ab / (norm_a * norm_b), -1.0, 1.0);
}

}  // namespace detail

/// Fixed-dimension float embedding. A constructed vector is non-empty,
/// finite and has non-zero norm; a default-constructed one has dim 0 and is
/// only a placeholder.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;

  explicit EmbeddingVector(std::vector<float> values) : values_(std::move(values)) {
    if (values_.empty()) throw Error("embedding has dimension 0");
    for (float v : values_) {
      if (!std::isfinite(v)) throw Error("embedding has a non-finite component");
    }
    norm_ = detail::l2_norm(values_);
    if (norm_ == 0.0) throw Error("embedding has zero norm");
  }

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const float> values() const noexcept { return values_; }
  double norm() const noexcept { return norm_; }

  friend bool operator==(const EmbeddingVector& a, const EmbeddingVector& b) {
    return a.values_ == b.values_;
  }

 private:
  std::vector<float> values_;
  double norm_ = 0.0;
};

/// Cosine similarity clamped to [-1, 1]. Throws on dimension mismatch or a
/// zero-norm operand.
inline double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw Error("dimension mismatch: " + std::to_string(a.size()) + " != " +
                std::to_string(b.size()));
  }
  const double na = detail::l2_norm(a);
  const double nb = detail::l2_norm(b);
  if (na == 0.0 || nb == 0.0) throw Error("cosine of zero-norm vector");
  return detail::cosine_from_parts(detail::dot(a, b), na, nb);
}

inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  return cosine_similarity(a.values(), b.values());
}

/// Axis-aligned box in pixel coordinates.
class BBox {
 public:
  BBox() = default;

  BBox(float x_min, float y_min, float x_max, float y_max)
      : x_min_(x_min), y_min_(y_min), x_max_(x_max), y_max_(y_max) {
    for (float v : {x_min, y_min, x_max, y_max}) {
      if (!std::isfinite(v) || v < 0.0f) throw Error("bbox coordinates must be finite and >= 0");
    }
    if (!(x_min < x_max) || !(y_min < y_max)) throw Error("bbox must satisfy min < max");
  }

  float x_min() const noexcept { return x_min_; }
  float y_min() const noexcept { return y_min_; }
  float x_max() const noexcept { return x_max_; }
  float y_max() const noexcept { return y_max_; }

  double area() const noexcept {
    return (static_cast<double>(x_max_) - x_min_) * (static_cast<double>(y_max_) - y_min_);
  }

  friend bool operator==(const BBox&, const BBox&) = default;
  friend auto operator<=>(const BBox&, const BBox&) = default;

 private:
  float x_min_ = 0.0f;
  float y_min_ = 0.0f;
  float x_max_ = 1.0f;
  float y_max_ = 1.0f;
};

struct ClassLabel {
  int id = 0;
  std::string name;

  friend bool operator==(const ClassLabel&, const ClassLabel&) = default;
};

/// Ordered class ontology; ids are dense in [0, size()).
class ClassTable {
 public:
  ClassTable() = default;

  explicit ClassTable(std::vector<std::string> names) : names_(std::move(names)) {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (!index_.emplace(names_[i], static_cast<int>(i)).second) {
        throw Error("duplicate class name '" + names_[i] + "'");
      }
    }
  }

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  std::optional<ClassLabel> find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return ClassLabel{it->second, name};
  }

  ClassLabel label(const std::string& name) const {
    auto found = find(name);
    if (!found) throw Error("unknown label '" + name + "'");
    return *found;
  }

  ClassLabel label(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= names_.size()) {
      throw Error("class id " + std::to_string(id) + " out of range");
    }
    return ClassLabel{id, names_[static_cast<std::size_t>(id)]};
  }

  bool contains(const ClassLabel& l) const {
    return l.id >= 0 && static_cast<std::size_t>(l.id) < names_.size() &&
           names_[static_cast<std::size_t>(l.id)] == l.name;
  }

  friend bool operator==(const ClassTable& a, const ClassTable& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
};

/// Sidecar manifest shared by every file of one bank or dataset.
struct Manifest {
  std::size_t dim = 0;
  ClassTable classes;
  int version = 1;

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

struct ImageRecord {
  std::string image_id;
  EmbeddingVector embedding;
  std::optional<std::string> source_uri;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct InstanceRecord {
  std::string instance_id;
  std::string image_id;
  BBox bbox;
  ClassLabel label;
  EmbeddingVector embedding;

  friend bool operator==(const InstanceRecord&, const InstanceRecord&) = default;
};

struct Proposal {
  std::string image_id;
  BBox bbox;
  float proposal_score = 0.0f;
  EmbeddingVector embedding;
  // Provenance only; classification never reads it.
  std::optional<std::string> upstream_label;

  friend bool operator==(const Proposal&, const Proposal&) = default;
};

struct GroundTruth {
  std::string image_id;
  BBox bbox;
  ClassLabel label;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct ClassifiedDetection {
  std::string image_id;
  BBox bbox;
  ClassLabel label;
  double score = 0.0;
  std::string match_instance_id;
  std::vector<std::string> context_image_ids;

  friend bool operator==(const ClassifiedDetection&, const ClassifiedDetection&) = default;
};

inline void check_score(double s, const char* what) {
  if (!(s >= 0.0 && s <= 1.0)) throw Error(std::string(what) + " must lie in [0, 1]");
}

}  // namespace racdet
