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

#include <cassert>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "racdet/error.hpp"
#include "racdet/io.hpp"
#include "racdet/types.hpp"

namespace racdet {

/// Maximum number of labeled images per class when constructing a bank
/// (10 for a "tiny" bank, 250 for a "base" bank). Enforced by seed
/// selection, not by MemoryBank.
struct BankBudget {
  std::size_t max_images_per_class = 10;

  void validate() const {
    if (max_images_per_class < 1) throw Error("max_images_per_class must be >= 1");
  }
};

/// Immutable view of a bank at one generation. Images and instances are
/// ordered by id; their embeddings are laid out row-major in contiguous
/// buffers with precomputed norms so retrieval is a linear scan.
class BankSnapshot {
 public:
  BankSnapshot(Manifest manifest, std::uint64_t generation, std::vector<ImageRecord> images,
               std::vector<InstanceRecord> instances, std::vector<std::size_t> per_class_counts)
      : manifest_(std::move(manifest)),
        generation_(generation),
        images_(std::move(images)),
        instances_(std::move(instances)),
        per_class_counts_(std::move(per_class_counts)) {
    const std::size_t d = manifest_.dim;
    image_rows_.reserve(images_.size() * d);
    image_norms_.reserve(images_.size());
    for (std::size_t i = 0; i < images_.size(); ++i) {
      const auto& img = images_[i];
      image_rows_.insert(image_rows_.end(), img.embedding.values().begin(), img.embedding.values().end());
      image_norms_.push_back(img.embedding.norm());
      image_index_.emplace(img.image_id, i);
    }
    instance_rows_.reserve(instances_.size() * d);
    instance_norms_.reserve(instances_.size());
    instance_owner_.reserve(instances_.size());
    std::vector<std::vector<std::size_t>> by_image(images_.size());
    for (std::size_t j = 0; j < instances_.size(); ++j) {
      const auto& inst = instances_[j];
      instance_rows_.insert(instance_rows_.end(), inst.embedding.values().begin(),
                            inst.embedding.values().end());
      instance_norms_.push_back(inst.embedding.norm());
      const std::size_t owner = image_index_.at(inst.image_id);
      instance_owner_.push_back(owner);
      by_image[owner].push_back(j);
    }
    owned_offsets_.reserve(images_.size() + 1);
    owned_offsets_.push_back(0);
    for (const auto& list : by_image) {
      owned_.insert(owned_.end(), list.begin(), list.end());
      owned_offsets_.push_back(owned_.size());
    }
  }

  const Manifest& manifest() const noexcept { return manifest_; }
  std::size_t dim() const noexcept { return manifest_.dim; }
  std::uint64_t generation() const noexcept { return generation_; }
  bool empty() const noexcept { return images_.empty(); }

  const std::vector<ImageRecord>& images() const noexcept { return images_; }
  const std::vector<InstanceRecord>& instances() const noexcept { return instances_; }
  const std::vector<std::size_t>& per_class_counts() const noexcept { return per_class_counts_; }

  std::span<const float> image_row(std::size_t i) const {
    return {image_rows_.data() + i * dim(), dim()};
  }
  double image_norm(std::size_t i) const { return image_norms_[i]; }

  std::span<const float> instance_row(std::size_t j) const {
    return {instance_rows_.data() + j * dim(), dim()};
  }
  double instance_norm(std::size_t j) const { return instance_norms_[j]; }
  std::size_t instance_owner(std::size_t j) const { return instance_owner_[j]; }

  std::optional<std::size_t> image_index(const std::string& image_id) const {
    auto it = image_index_.find(image_id);
    if (it == image_index_.end()) return std::nullopt;
    return it->second;
  }

  /// Instance indices owned by image `i`, ascending (hence ascending id).
  std::span<const std::size_t> instances_of(std::size_t i) const {
    return {owned_.data() + owned_offsets_[i], owned_offsets_[i + 1] - owned_offsets_[i]};
  }

 private:
  Manifest manifest_;
  std::uint64_t generation_;
  std::vector<ImageRecord> images_;
  std::vector<InstanceRecord> instances_;
  std::vector<std::size_t> per_class_counts_;

  std::vector<float> image_rows_;
  std::vector<double> image_norms_;
  std::map<std::string, std::size_t> image_index_;
  std::vector<float> instance_rows_;
  std::vector<double> instance_norms_;
  std::vector<std::size_t> instance_owner_;
  std::vector<std::size_t> owned_;
  std::vector<std::size_t> owned_offsets_;
};

/// Online-updatable store of labeled context images and object instances.
///
/// Single writer, many readers: mutations are serialized by an internal
/// mutex and readers work on immutable snapshots. Every successful mutation
/// bumps the generation. Removing an image removes all of its instances.
class MemoryBank {
 public:
  explicit MemoryBank(Manifest manifest) : manifest_(std::move(manifest)) {
    if (manifest_.dim == 0) throw Error("bank dim must be >= 1");
    per_class_counts_.assign(manifest_.classes.size(), 0);
  }

  MemoryBank(MemoryBank&& other) noexcept {
    std::lock_guard lock(other.mu_);
    manifest_ = std::move(other.manifest_);
    images_ = std::move(other.images_);
    instances_ = std::move(other.instances_);
    instances_by_image_ = std::move(other.instances_by_image_);
    per_class_counts_ = std::move(other.per_class_counts_);
    generation_ = other.generation_;
    cached_ = std::move(other.cached_);
  }
  MemoryBank(const MemoryBank&) = delete;
  MemoryBank& operator=(const MemoryBank&) = delete;
  MemoryBank& operator=(MemoryBank&&) = delete;

  std::uint64_t add_image(ImageRecord image) {
    std::lock_guard lock(mu_);
    check_dim(image.embedding, "image '" + image.image_id + "'");
    if (images_.count(image.image_id) != 0) throw Error("duplicate image_id '" + image.image_id + "'");
    const std::string id = image.image_id;
    images_.emplace(id, std::move(image));
    instances_by_image_[id];
    return bump();
  }

  std::uint64_t add_instance(InstanceRecord inst) {
    std::lock_guard lock(mu_);
    check_dim(inst.embedding, "instance '" + inst.instance_id + "'");
    if (images_.count(inst.image_id) == 0) {
      throw Error("instance '" + inst.instance_id + "' references unknown image '" + inst.image_id + "'");
    }
    if (!manifest_.classes.contains(inst.label)) {
      throw Error("instance '" + inst.instance_id + "' has unknown label '" + inst.label.name + "'");
    }
    if (instances_.count(inst.instance_id) != 0) {
      throw Error("duplicate instance_id '" + inst.instance_id + "'");
    }
    ++per_class_counts_[static_cast<std::size_t>(inst.label.id)];
    instances_by_image_[inst.image_id].insert(inst.instance_id);
    const std::string id = inst.instance_id;
    instances_.emplace(id, std::move(inst));
    return bump();
  }

  std::uint64_t remove_image(const std::string& image_id) {
    std::lock_guard lock(mu_);
    auto it = images_.find(image_id);
    if (it == images_.end()) throw Error("unknown image_id '" + image_id + "'");
    auto owned = instances_by_image_.find(image_id);
    for (const auto& inst_id : owned->second) {
      auto inst = instances_.find(inst_id);
      --per_class_counts_[static_cast<std::size_t>(inst->second.label.id)];
      instances_.erase(inst);
    }
    instances_by_image_.erase(owned);
    images_.erase(it);
    return bump();
  }

  /// Immutable view at the current generation; cached until the next mutation.
  std::shared_ptr<const BankSnapshot> snapshot() const {
    std::lock_guard lock(mu_);
    if (!cached_) {
      std::vector<ImageRecord> images;
      images.reserve(images_.size());
      for (const auto& [id, img] : images_) images.push_back(img);
      std::vector<InstanceRecord> instances;
      instances.reserve(instances_.size());
      for (const auto& [id, inst] : instances_) instances.push_back(inst);
      cached_ = std::make_shared<const BankSnapshot>(manifest_, generation_, std::move(images),
                                                     std::move(instances), per_class_counts_);
    }
    return cached_;
  }

  const Manifest& manifest() const noexcept { return manifest_; }

  std::uint64_t generation() const {
    std::lock_guard lock(mu_);
    return generation_;
  }
  std::size_t image_count() const {
    std::lock_guard lock(mu_);
    return images_.size();
  }
  std::size_t instance_count() const {
    std::lock_guard lock(mu_);
    return instances_.size();
  }
  bool contains_image(const std::string& id) const {
    std::lock_guard lock(mu_);
    return images_.count(id) != 0;
  }
  std::vector<std::size_t> per_class_counts() const {
    std::lock_guard lock(mu_);
    return per_class_counts_;
  }

  /// Full recount: referential integrity, per-class counts and dims.
  bool audit() const {
    std::lock_guard lock(mu_);
    return audit_locked();
  }

  /// Content equality; the generation is ignored.
  friend bool same_content(const MemoryBank& a, const MemoryBank& b) {
    std::scoped_lock lock(a.mu_, b.mu_);
    return a.manifest_ == b.manifest_ && a.images_ == b.images_ && a.instances_ == b.instances_ &&
           a.per_class_counts_ == b.per_class_counts_;
  }

  void save(const std::filesystem::path& dir) const {
    auto snap = snapshot();
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("cannot create bank directory " + dir.string());
    write_manifest(dir / "manifest.json", snap->manifest());
    write_records(dir / "images.jsonl", snap->images());
    write_records(dir / "instances.jsonl", snap->instances());
  }

  /// Loads a saved bank. The generation restarts at 0.
  static MemoryBank load(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    if (!std::filesystem::exists(manifest_path)) throw Error("no manifest.json in " + dir.string());
    for (const char* name : {"images.jsonl", "instances.jsonl"}) {
      if (!std::filesystem::exists(dir / name)) throw Error(std::string("no ") + name + " in " + dir.string());
    }
    MemoryBank bank(read_manifest(manifest_path));
    const auto ctx = context_for(bank.manifest_);
    for (auto& img : read_records<ImageRecord>(dir / "images.jsonl", ctx)) bank.add_image(std::move(img));
    for (auto& inst : read_records<InstanceRecord>(dir / "instances.jsonl", ctx)) {
      bank.add_instance(std::move(inst));
    }
    bank.generation_ = 0;
    bank.cached_.reset();
    return bank;
  }

 private:
  void check_dim(const EmbeddingVector& e, const std::string& what) const {
    if (e.dim() != manifest_.dim) {
      throw Error(what + ": dim " + std::to_string(e.dim()) + " != " + std::to_string(manifest_.dim));
    }
  }

  std::uint64_t bump() {
    cached_.reset();
    ++generation_;
    assert(audit_locked());
    return generation_;
  }

  bool audit_locked() const {
    std::vector<std::size_t> counts(manifest_.classes.size(), 0);
    std::size_t owned_total = 0;
    for (const auto& [id, inst] : instances_) {
      if (images_.count(inst.image_id) == 0) return false;
      if (!manifest_.classes.contains(inst.label)) return false;
      if (inst.embedding.dim() != manifest_.dim) return false;
      ++counts[static_cast<std::size_t>(inst.label.id)];
    }
    for (const auto& [id, img] : images_) {
      if (img.embedding.dim() != manifest_.dim) return false;
      auto it = instances_by_image_.find(id);
      if (it == instances_by_image_.end()) return false;
      for (const auto& inst_id : it->second) {
        auto inst = instances_.find(inst_id);
        if (inst == instances_.end() || inst->second.image_id != id) return false;
      }
      owned_total += it->second.size();
    }
    return counts == per_class_counts_ && owned_total == instances_.size() &&
           instances_by_image_.size() == images_.size();
  }

  mutable std::mutex mu_;
  Manifest manifest_;
  std::map<std::string, ImageRecord> images_;
  std::map<std::string, InstanceRecord> instances_;
  std::map<std::string, std::set<std::string>> instances_by_image_;
  std::vector<std::size_t> per_class_counts_;
  std::uint64_t generation_ = 0;
  mutable std::shared_ptr<const BankSnapshot> cached_;
};

}  // namespace racdet
