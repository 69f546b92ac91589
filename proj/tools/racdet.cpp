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
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "racdet/racdet.hpp"

namespace fs = std::filesystem;
using namespace racdet;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Values given on the command line; each overrides the config file.
struct Flags {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;

  std::optional<std::string> bank, manifest, images, instances, pool, pool_instances, queries, proposals,
      groundtruth, detections, select;

  std::optional<std::size_t> k, n;
  std::optional<double> context_thresh, instance_thresh, w1, w2;
  std::vector<double> iou;
  std::optional<std::size_t> max_dets;
  std::optional<std::size_t> budget;
  std::optional<std::string> strategy;
  std::optional<std::string> sweep_axis;
  std::optional<std::string> sweep_values;
  bool context_free = false;

  std::string domain = "easy";
  std::optional<std::size_t> pool_images, query_images;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON run config; flags override it");
  cmd->add_option("--seed", f.seed, "RNG seed");
  cmd->add_option("--out", f.out, "Output path");
}

void add_rac(CLI::App* cmd, Flags& f) {
  cmd->add_option("--k", f.k, "Context images retrieved");
  cmd->add_option("--n", f.n, "Instances voting");
  cmd->add_option("--context-thresh", f.context_thresh, "Context similarity threshold");
  cmd->add_option("--instance-thresh", f.instance_thresh, "Instance similarity threshold");
  cmd->add_option("--w1", f.w1, "Proposal-score weight");
  cmd->add_option("--w2", f.w2, "Cosine-score weight");
}

void add_eval(CLI::App* cmd, Flags& f) {
  cmd->add_option("--iou", f.iou, "IoU threshold(s); AP/AR are averaged over them");
  cmd->add_option("--max-dets", f.max_dets, "Detections kept per image");
}

template <class T>
void set_if(const std::optional<T>& v, T& out) {
  if (v) out = *v;
}

void set_path(const std::optional<std::string>& v, fs::path& out) {
  if (v) out = *v;
}

RunConfig merged(const Flags& f) {
  RunConfig c = f.config ? load_run_config(*f.config) : RunConfig{};
  set_path(f.bank, c.bank);
  set_path(f.manifest, c.manifest);
  set_path(f.images, c.images);
  set_path(f.instances, c.instances);
  set_path(f.pool, c.pool);
  set_path(f.pool_instances, c.pool_instances);
  set_path(f.queries, c.queries);
  set_path(f.proposals, c.proposals);
  set_path(f.groundtruth, c.groundtruth);
  set_path(f.detections, c.detections);
  set_if(f.k, c.rac.k);
  set_if(f.n, c.rac.n);
  set_if(f.context_thresh, c.rac.context_thresh);
  set_if(f.instance_thresh, c.rac.instance_thresh);
  // A lone weight implies its complement.
  if (f.w1 && !f.w2) {
    c.rac.w1 = *f.w1;
    c.rac.w2 = 1.0 - *f.w1;
  } else if (f.w2 && !f.w1) {
    c.rac.w2 = *f.w2;
    c.rac.w1 = 1.0 - *f.w2;
  } else {
    set_if(f.w1, c.rac.w1);
    set_if(f.w2, c.rac.w2);
  }
  if (!f.iou.empty()) c.iou_thresholds = f.iou;
  set_if(f.max_dets, c.max_dets_per_image);
  set_if(f.budget, c.budget.max_images_per_class);
  if (f.strategy) c.strategy = parse_seed_strategy(*f.strategy);
  set_if(f.seed, c.seed);
  if (f.sweep_axis) {
    if (!c.sweep) c.sweep = SweepSpec{};
    c.sweep->axis = *f.sweep_axis;
  }
  if (f.sweep_values) {
    if (!c.sweep) c.sweep = SweepSpec{};
    c.sweep->values.clear();
    std::stringstream ss(*f.sweep_values);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      try {
        c.sweep->values.push_back(json::parse(item));
      } catch (const json::parse_error&) {
        c.sweep->values.emplace_back(item);
      }
    }
  }
  return c;
}

const fs::path& need(const fs::path& p, const char* what) {
  if (p.empty()) throw UsageError(std::string("missing required input: ") + what);
  return p;
}

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

std::string counts_table(const Manifest& m, const std::vector<std::size_t>& counts) {
  std::ostringstream out;
  std::size_t width = 5;
  for (const auto& name : m.classes.names()) width = std::max(width, name.size());
  out << std::left << std::setw(static_cast<int>(width) + 2) << "class" << "instances\n";
  for (std::size_t c = 0; c < counts.size(); ++c) {
    out << std::left << std::setw(static_cast<int>(width) + 2) << m.classes.names()[c] << counts[c] << '\n';
  }
  return out.str();
}

void write_text(const fs::path& path, const std::string& text) {
  detail::write_atomically(path, [&](std::ostream& out) { out << text; });
}

// Manifest from --manifest, else from the bank directory.
Manifest resolve_manifest(const RunConfig& c) {
  if (!c.manifest.empty()) return read_manifest(c.manifest);
  if (!c.bank.empty()) return read_manifest(c.bank / "manifest.json");
  throw UsageError("missing required input: --manifest (or --bank)");
}

int cmd_build_db(const Flags& f) {
  RunConfig c = merged(f);
  if (f.out) c.bank = *f.out;
  need(c.bank, "--out (bank directory)");
  const Manifest m = read_manifest(need(c.manifest, "--manifest"));
  const auto ctx = context_for(m);
  const auto images = read_records<ImageRecord>(need(c.images, "--images"), ctx);
  const auto instances = read_records<InstanceRecord>(need(c.instances, "--instances"), ctx);
  std::optional<std::vector<std::string>> keep;
  if (f.select) {
    std::ifstream in(*f.select);
    if (!in) throw Error("cannot open " + *f.select);
    keep.emplace();
    for (std::string line; std::getline(in, line);) {
      if (!line.empty()) keep->push_back(line);
    }
  }
  const MemoryBank bank = build_bank(m, images, instances, keep);
  if (bank.instance_count() == 0) warn("no instances; the bank holds context images only");
  bank.save(c.bank);
  std::cout << "bank " << c.bank.string() << ": " << bank.image_count() << " images, " << bank.instance_count()
            << " instances\n"
            << counts_table(m, bank.per_class_counts());
  return 0;
}

int cmd_select_seeds(const Flags& f) {
  const RunConfig c = merged(f);
  const auto pool = read_records<PoolCandidate>(need(c.pool.empty() ? c.images : c.pool, "--pool"));
  ClassTable classes;
  if (!c.manifest.empty()) {
    classes = read_manifest(c.manifest).classes;
  } else {
    std::set<std::string> names;
    for (const auto& cand : pool) names.insert(cand.class_hints.begin(), cand.class_hints.end());
    classes = ClassTable(std::vector<std::string>(names.begin(), names.end()));
  }
  std::vector<std::string> warnings;
  const auto ids = select_bank_images(pool, classes, c.budget.max_images_per_class, c.strategy, c.seed, &warnings);
  for (const auto& w : warnings) warn(w);
  std::string text;
  for (const auto& id : ids) text += id + "\n";
  if (f.out) {
    write_text(*f.out, text);
  } else {
    std::cout << text;
  }
  return 0;
}

int cmd_classify(const Flags& f) {
  RunConfig c = merged(f);
  if (f.out) c.detections = *f.out;
  need(c.detections, "--out (detections file)");
  c.rac.validate();
  const auto start = std::chrono::steady_clock::now();
  const MemoryBank bank = MemoryBank::load(need(c.bank, "--bank"));
  const auto snap = bank.snapshot();
  const RecordContext ctx{snap->dim(), nullptr};
  const auto queries = read_records<ImageRecord>(need(c.queries, "--queries"), ctx);
  const auto proposals = read_records<Proposal>(need(c.proposals, "--proposals"), ctx);
  const auto dets = classify_dataset(queries, proposals, *snap, c.rac,
                                     f.context_free ? ContextMode::context_free : ContextMode::two_stage);
  write_records(c.detections, dets);
  const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  if (dets.empty() && !proposals.empty()) warn("no proposal matched the bank above the thresholds");
  std::cout << "classified " << proposals.size() << " proposals over " << queries.size() << " images: "
            << dets.size() << " detections in " << std::fixed << std::setprecision(1) << ms << " ms\n";
  return 0;
}

int cmd_eval(const Flags& f) {
  const RunConfig c = merged(f);
  const Manifest m = resolve_manifest(c);
  const RecordContext ctx{0, &m.classes};
  const auto dets = read_records<ClassifiedDetection>(need(c.detections, "--detections"), ctx);
  const auto gts = read_records<GroundTruth>(need(c.groundtruth, "--groundtruth"), ctx);
  const EvalReport rep = evaluate(dets, gts, eval_config(c, m.classes));
  const std::string body = report_json(rep).dump(2) + "\n";
  if (f.out) write_text(*f.out, body);
  std::cout << report_table(rep) << body;
  return 0;
}

int cmd_ablate(const Flags& f) {
  const RunConfig c = merged(f);
  Workload w;
  w.manifest = resolve_manifest(c);
  const auto ctx = context_for(w.manifest);
  if (!c.pool.empty()) {
    w.pool = read_records<PoolCandidate>(c.pool, ctx);
    w.pool_instances = read_records<InstanceRecord>(need(c.pool_instances, "--pool-instances"), ctx);
  }
  w.queries = read_records<ImageRecord>(need(c.queries, "--queries"), ctx);
  w.proposals = read_records<Proposal>(need(c.proposals, "--proposals"), ctx);
  w.groundtruth = read_records<GroundTruth>(need(c.groundtruth, "--groundtruth"), ctx);
  if (!c.sweep || c.sweep->axis.empty()) throw UsageError("missing required input: --axis");
  if (c.sweep->values.empty()) throw UsageError("missing required input: --values");

  std::optional<MemoryBank> bank;
  std::shared_ptr<const BankSnapshot> snap;
  if (!c.bank.empty()) {
    bank.emplace(MemoryBank::load(c.bank));
    snap = bank->snapshot();
  }
  const auto rows = run_ablation(w, snap.get(), c);
  const std::string csv = ablation_csv(rows);
  if (f.out) {
    write_text(*f.out, csv);
  } else {
    std::cout << csv;
  }
  return 0;
}

int cmd_gen_fixtures(const Flags& f) {
  const RunConfig base = merged(f);
  if (!f.out) throw UsageError("missing required input: --out (fixture directory)");
  const fs::path dir = *f.out;
  fixtures::DomainSpec spec;
  if (f.domain == "easy") {
    spec = fixtures::easy_domain(base.seed);
  } else if (f.domain == "hard") {
    spec = fixtures::hard_domain(base.seed);
  } else if (f.domain == "lookalike") {
    spec = fixtures::lookalike_domain(base.seed);
  } else {
    throw UsageError("unknown domain '" + f.domain + "' (easy | hard | lookalike)");
  }
  set_if(f.pool_images, spec.pool_images);
  set_if(f.query_images, spec.query_images);
  const auto ds = fixtures::generate(spec);

  fs::create_directories(dir);
  write_manifest(dir / "manifest.json", ds.manifest);
  write_records(dir / "pool.jsonl", ds.pool);
  write_records(dir / "pool_instances.jsonl", ds.pool_instances);
  write_records(dir / "queries.jsonl", ds.queries);
  write_records(dir / "proposals.jsonl", ds.proposals);
  write_records(dir / "groundtruth.jsonl", ds.groundtruth);

  const auto ids = select_bank_images(ds.pool, ds.manifest.classes, base.budget.max_images_per_class, base.strategy,
                                      base.seed);
  const MemoryBank bank = build_bank(ds.manifest, images_of(ds.pool), ds.pool_instances, ids);
  bank.save(dir / "bank");

  json cfg = {{"manifest", "manifest.json"},
              {"bank", "bank"},
              {"pool", "pool.jsonl"},
              {"pool_instances", "pool_instances.jsonl"},
              {"queries", "queries.jsonl"},
              {"proposals", "proposals.jsonl"},
              {"groundtruth", "groundtruth.jsonl"},
              {"detections", "detections.jsonl"},
              {"rac",
               {{"k", base.rac.k},
                {"n", base.rac.n},
                {"context_thresh", base.rac.context_thresh},
                {"instance_thresh", base.rac.instance_thresh},
                {"w1", base.rac.w1},
                {"w2", base.rac.w2}}},
              {"eval", {{"iou_thresholds", base.iou_thresholds}, {"max_dets_per_image", base.max_dets_per_image}}},
              {"budget", {{"max_images_per_class", base.budget.max_images_per_class}}},
              {"strategy", std::string(to_string(base.strategy))},
              {"seed", base.seed}};
  write_text(dir / "config.json", cfg.dump(2) + "\n");
  std::cout << "fixtures (" << f.domain << ") in " << dir.string() << ": " << ds.pool.size() << " pool images, "
            << ds.queries.size() << " queries, " << ds.proposals.size() << " proposals; bank "
            << bank.image_count() << " images\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retrieval-augmented classification of detector proposals against a labeled memory bank"};
  app.require_subcommand(1);
  Flags f;

  auto* build = app.add_subcommand("build-db", "Build a memory bank directory from images + instances JSONL");
  add_common(build, f);
  build->add_option("--manifest", f.manifest, "Manifest JSON (dim, classes)");
  build->add_option("--images", f.images, "Images JSONL");
  build->add_option("--instances", f.instances, "Instances JSONL");
  build->add_option("--select", f.select, "File of image ids to keep (one per line)");

  auto* seeds = app.add_subcommand("select-seeds", "Choose images to label, per class, via k-means");
  add_common(seeds, f);
  seeds->add_option("--pool", f.pool, "Candidate images JSONL (optional class_hint field)");
  seeds->add_option("--manifest", f.manifest, "Manifest JSON for the class table");
  seeds->add_option("--budget", f.budget, "Images per class");
  seeds->add_option("--strategy", f.strategy, "centroid | random_per_cluster | uniform_random");

  auto* classify = app.add_subcommand("classify", "Classify proposals against a bank");
  add_common(classify, f);
  classify->add_option("--bank", f.bank, "Bank directory");
  classify->add_option("--queries", f.queries, "Query images JSONL");
  classify->add_option("--proposals", f.proposals, "Proposals JSONL");
  classify->add_flag("--context-free", f.context_free, "Skip context retrieval (ablation)");
  add_rac(classify, f);

  auto* ev = app.add_subcommand("eval", "Evaluate detections against ground truth");
  add_common(ev, f);
  ev->add_option("--detections", f.detections, "Detections JSONL");
  ev->add_option("--groundtruth", f.groundtruth, "Ground truth JSONL");
  ev->add_option("--manifest", f.manifest, "Manifest JSON for the class table");
  ev->add_option("--bank", f.bank, "Bank directory (class table source if no --manifest)");
  add_eval(ev, f);

  auto* ablate = app.add_subcommand("ablate", "Sweep one axis and report mAP/mAR as CSV");
  add_common(ablate, f);
  ablate->add_option("--axis", f.sweep_axis, "db_size | per_class | strategy | k | n | context_thresh | instance_thresh | w1");
  ablate->add_option("--values", f.sweep_values, "Comma-separated axis values");
  ablate->add_option("--bank", f.bank, "Fixed bank for parameter sweeps");
  ablate->add_option("--manifest", f.manifest, "Manifest JSON");
  ablate->add_option("--pool", f.pool, "Candidate images JSONL");
  ablate->add_option("--pool-instances", f.pool_instances, "Instances of the candidate images");
  ablate->add_option("--queries", f.queries, "Query images JSONL");
  ablate->add_option("--proposals", f.proposals, "Proposals JSONL");
  ablate->add_option("--groundtruth", f.groundtruth, "Ground truth JSONL");
  ablate->add_option("--budget", f.budget, "Images per class when building from the pool");
  ablate->add_option("--strategy", f.strategy, "Seed strategy when building from the pool");
  add_rac(ablate, f);
  add_eval(ablate, f);

  auto* gen = app.add_subcommand("gen-fixtures", "Write synthetic Gaussian-domain fixtures");
  gen->group("");
  add_common(gen, f);
  gen->add_option("--domain", f.domain, "easy | hard | lookalike");
  gen->add_option("--budget", f.budget, "Bank images per class");
  gen->add_option("--strategy", f.strategy, "Seed strategy for the bank");
  gen->add_option("--pool-images", f.pool_images, "Candidate pool size");
  gen->add_option("--query-images", f.query_images, "Query image count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*build) return cmd_build_db(f);
    if (*seeds) return cmd_select_seeds(f);
    if (*classify) return cmd_classify(f);
    if (*ev) return cmd_eval(f);
    if (*ablate) return cmd_ablate(f);
    if (*gen) return cmd_gen_fixtures(f);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
