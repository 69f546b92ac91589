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
// Builds a small bank in memory, classifies one query image, then adds a new
// labeled image online and classifies again against a fresh snapshot.

#include <iostream>

#include "racdet/racdet.hpp"

using namespace racdet;

int main() {
  auto ds = fixtures::generate(fixtures::easy_domain(7));

  MemoryBank bank(ds.manifest);
  const auto ids = select_bank_images(ds.pool, ds.manifest.classes, 2, SeedStrategy::random_per_cluster, 7);
  for (const auto& cand : ds.pool) {
    if (std::find(ids.begin(), ids.end(), cand.image.image_id) != ids.end()) bank.add_image(cand.image);
  }
  for (const auto& inst : ds.pool_instances) {
    if (bank.contains_image(inst.image_id)) bank.add_instance(inst);
  }

  const auto& query = ds.queries.front();
  std::vector<Proposal> props;
  for (const auto& p : ds.proposals) {
    if (p.image_id == query.image_id) props.push_back(p);
  }

  auto before = bank.snapshot();
  const RacParams params;  // k=50, n=1, 0.1 / 0.8, w=0.5/0.5
  std::cout << "generation " << before->generation() << ", " << before->images().size() << " images\n";
  for (const auto& d : classify_proposals(query, props, *before, params)) {
    std::cout << "  " << d.label.name << " score=" << d.score << " via " << d.match_instance_id << '\n';
  }

  // Online update: label one more pool image.
  for (const auto& cand : ds.pool) {
    if (bank.contains_image(cand.image.image_id)) continue;
    bank.add_image(cand.image);
    for (const auto& inst : ds.pool_instances) {
      if (inst.image_id == cand.image.image_id) bank.add_instance(inst);
    }
    break;
  }
  auto after = bank.snapshot();
  std::cout << "generation " << after->generation() << ", " << after->images().size() << " images"
            << " (old snapshot still has " << before->images().size() << ")\n";
  for (const auto& d : classify_proposals(query, props, *after, params)) {
    std::cout << "  " << d.label.name << " score=" << d.score << " via " << d.match_instance_id << '\n';
  }
  return 0;
}
