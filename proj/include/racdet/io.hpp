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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "racdet/error.hpp"
#include "racdet/types.hpp"

namespace racdet {

using json = nlohmann::json;

/// What a reader needs to validate one file: the expected embedding dim
/// (0 = take it from the first record) and the class table for label fields.
struct RecordContext {
  std::size_t dim = 0;
  const ClassTable* classes = nullptr;
};

/// Candidate image for seed selection. `class_hints` drives per-class pooling.
struct PoolCandidate {
  ImageRecord image;
  std::vector<std::string> class_hints;

  friend bool operator==(const PoolCandidate&, const PoolCandidate&) = default;
};

namespace detail {

template <class T>
T field(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(std::string("missing field '") + key + "'");
  try {
    return it->template get<T>();
  } catch (const json::exception&) {
    throw Error(std::string("field '") + key + "' has the wrong type");
  }
}

template <class T>
std::optional<T> optional_field(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  try {
    return it->template get<T>();
  } catch (const json::exception&) {
    throw Error(std::string("field '") + key + "' has the wrong type");
  }
}

inline EmbeddingVector parse_embedding(const json& obj, RecordContext& ctx) {
  auto values = field<std::vector<float>>(obj, "embedding");
  if (ctx.dim != 0 && values.size() != ctx.dim) {
    throw Error("dim " + std::to_string(values.size()) + " != " + std::to_string(ctx.dim));
  }
  EmbeddingVector v(std::move(values));
  if (ctx.dim == 0) ctx.dim = v.dim();
  return v;
}

inline BBox parse_bbox(const json& obj) {
  auto c = field<std::vector<float>>(obj, "bbox");
  if (c.size() != 4) throw Error("bbox must have 4 coordinates");
  return BBox(c[0], c[1], c[2], c[3]);
}

inline ClassLabel parse_label(const json& obj, const RecordContext& ctx) {
  auto name = field<std::string>(obj, "label");
  if (ctx.classes == nullptr) throw Error("no class table available to resolve label '" + name + "'");
  return ctx.classes->label(name);
}

inline json bbox_json(const BBox& b) {
  return json::array({b.x_min(), b.y_min(), b.x_max(), b.y_max()});
}

inline json embedding_json(const EmbeddingVector& e) {
  return json(std::vector<float>(e.values().begin(), e.values().end()));
}

}  // namespace detail

/// Per-kind JSONL mapping. `key` returns the id that must be unique within a
/// file, or nullopt for kinds without one.
template <class Record>
struct RecordTraits;

template <>
struct RecordTraits<ImageRecord> {
  static constexpr const char* kind = "images";
  static ImageRecord parse(const json& j, RecordContext& ctx) {
    ImageRecord r;
    r.image_id = detail::field<std::string>(j, "image_id");
    r.embedding = detail::parse_embedding(j, ctx);
    r.source_uri = detail::optional_field<std::string>(j, "source_uri");
    return r;
  }
  static json dump(const ImageRecord& r) {
    json j = {{"image_id", r.image_id}, {"embedding", detail::embedding_json(r.embedding)}};
    if (r.source_uri) j["source_uri"] = *r.source_uri;
    return j;
  }
  static std::optional<std::string> key(const ImageRecord& r) { return r.image_id; }
};

template <>
struct RecordTraits<PoolCandidate> {
  static constexpr const char* kind = "candidates";
  static PoolCandidate parse(const json& j, RecordContext& ctx) {
    PoolCandidate c;
    c.image = RecordTraits<ImageRecord>::parse(j, ctx);
    auto it = j.find("class_hint");
    if (it != j.end() && !it->is_null()) {
      if (it->is_string()) {
        c.class_hints.push_back(it->get<std::string>());
      } else if (it->is_array()) {
        c.class_hints = detail::field<std::vector<std::string>>(j, "class_hint");
      } else {
        throw Error("field 'class_hint' must be a string or an array of strings");
      }
    }
    return c;
  }
  static json dump(const PoolCandidate& c) {
    json j = RecordTraits<ImageRecord>::dump(c.image);
    if (!c.class_hints.empty()) j["class_hint"] = c.class_hints;
    return j;
  }
  static std::optional<std::string> key(const PoolCandidate& c) { return c.image.image_id; }
};

template <>
struct RecordTraits<InstanceRecord> {
  static constexpr const char* kind = "instances";
  static InstanceRecord parse(const json& j, RecordContext& ctx) {
    InstanceRecord r;
    r.instance_id = detail::field<std::string>(j, "instance_id");
    r.image_id = detail::field<std::string>(j, "image_id");
    r.bbox = detail::parse_bbox(j);
    r.label = detail::parse_label(j, ctx);
    r.embedding = detail::parse_embedding(j, ctx);
    return r;
  }
  static json dump(const InstanceRecord& r) {
    return {{"instance_id", r.instance_id},
            {"image_id", r.image_id},
            {"bbox", detail::bbox_json(r.bbox)},
            {"label", r.label.name},
            {"embedding", detail::embedding_json(r.embedding)}};
  }
  static std::optional<std::string> key(const InstanceRecord& r) { return r.instance_id; }
};

template <>
struct RecordTraits<Proposal> {
  static constexpr const char* kind = "proposals";
  static Proposal parse(const json& j, RecordContext& ctx) {
    Proposal p;
    p.image_id = detail::field<std::string>(j, "image_id");
    p.bbox = detail::parse_bbox(j);
    p.proposal_score = detail::field<float>(j, "proposal_score");
    check_score(p.proposal_score, "proposal_score");
    p.embedding = detail::parse_embedding(j, ctx);
    p.upstream_label = detail::optional_field<std::string>(j, "upstream_label");
    return p;
  }
  static json dump(const Proposal& p) {
    json j = {{"image_id", p.image_id},
              {"bbox", detail::bbox_json(p.bbox)},
              {"proposal_score", p.proposal_score},
              {"embedding", detail::embedding_json(p.embedding)}};
    if (p.upstream_label) j["upstream_label"] = *p.upstream_label;
    return j;
  }
  static std::optional<std::string> key(const Proposal&) { return std::nullopt; }
};

template <>
struct RecordTraits<GroundTruth> {
  static constexpr const char* kind = "groundtruth";
  static GroundTruth parse(const json& j, RecordContext& ctx) {
    GroundTruth g;
    g.image_id = detail::field<std::string>(j, "image_id");
    g.bbox = detail::parse_bbox(j);
    g.label = detail::parse_label(j, ctx);
    return g;
  }
  static json dump(const GroundTruth& g) {
    return {{"image_id", g.image_id}, {"bbox", detail::bbox_json(g.bbox)}, {"label", g.label.name}};
  }
  static std::optional<std::string> key(const GroundTruth&) { return std::nullopt; }
};

template <>
struct RecordTraits<ClassifiedDetection> {
  static constexpr const char* kind = "detections";
  static ClassifiedDetection parse(const json& j, RecordContext& ctx) {
    ClassifiedDetection d;
    d.image_id = detail::field<std::string>(j, "image_id");
    d.bbox = detail::parse_bbox(j);
    d.label = detail::parse_label(j, ctx);
    d.score = detail::field<double>(j, "score");
    check_score(d.score, "score");
    d.match_instance_id = detail::optional_field<std::string>(j, "match_instance_id").value_or("");
    d.context_image_ids =
        detail::optional_field<std::vector<std::string>>(j, "context_image_ids").value_or(std::vector<std::string>{});
    return d;
  }
  static json dump(const ClassifiedDetection& d) {
    return {{"image_id", d.image_id},
            {"bbox", detail::bbox_json(d.bbox)},
            {"label", d.label.name},
            {"score", d.score},
            {"match_instance_id", d.match_instance_id},
            {"context_image_ids", d.context_image_ids}};
  }
  static std::optional<std::string> key(const ClassifiedDetection&) { return std::nullopt; }
};

/// Reads one JSONL file of `Record`. Blank lines are skipped; the first bad
/// line aborts with "<path>: line N: <reason>". On return `ctx.dim` holds the
/// file's dimension if it was inferred.
template <class Record>
std::vector<Record> read_records(const std::filesystem::path& path, RecordContext& ctx) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<Record> out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error& e) {
        throw Error(std::string("malformed JSON: ") + e.what());
      }
      if (!j.is_object()) throw Error("expected a JSON object");
      Record r = RecordTraits<Record>::parse(j, ctx);
      if (auto k = RecordTraits<Record>::key(r); k && !seen.insert(*k).second) {
        throw Error("duplicate id '" + *k + "'");
      }
      out.push_back(std::move(r));
    } catch (const Error& e) {
      throw Error(path.string() + ": line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

template <class Record>
std::vector<Record> read_records(const std::filesystem::path& path, const RecordContext& ctx = {}) {
  RecordContext local = ctx;
  return read_records<Record>(path, local);
}

namespace detail {

// Writes through a sibling temp file and renames, so a failed write never
// leaves a truncated output behind.
template <class Fn>
void write_atomically(const std::filesystem::path& path, Fn&& body) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    try {
      body(out);
    } catch (...) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw;
    }
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error("write failed for " + path.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error("cannot write " + path.string());
  }
}

inline std::string dump_line(const json& j) {
  try {
    return j.dump(-1, ' ', false, json::error_handler_t::strict);
  } catch (const json::type_error& e) {
    throw Error(std::string("cannot serialize record: ") + e.what());
  }
}

}  // namespace detail

template <class Record>
void write_records(const std::filesystem::path& path, std::span<const Record> records) {
  detail::write_atomically(path, [&](std::ostream& out) {
    for (const auto& r : records) out << detail::dump_line(RecordTraits<Record>::dump(r)) << '\n';
  });
}

template <class Record>
void write_records(const std::filesystem::path& path, const std::vector<Record>& records) {
  write_records(path, std::span<const Record>(records));
}

inline json manifest_json(const Manifest& m) {
  return {{"dim", m.dim}, {"classes", m.classes.names()}, {"version", m.version}};
}

inline Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest " + path.string());
  try {
    json j = json::parse(in);
    Manifest m;
    m.dim = detail::field<std::size_t>(j, "dim");
    if (m.dim == 0) throw Error("dim must be >= 1");
    m.classes = ClassTable(detail::field<std::vector<std::string>>(j, "classes"));
    m.version = detail::optional_field<int>(j, "version").value_or(1);
    if (m.version != 1) throw Error("unsupported manifest version " + std::to_string(m.version));
    return m;
  } catch (const json::exception& e) {
    throw Error(path.string() + ": malformed manifest: " + e.what());
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

inline void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  detail::write_atomically(path, [&](std::ostream& out) { out << manifest_json(m).dump(2) << '\n'; });
}

inline RecordContext context_for(const Manifest& m) { return RecordContext{m.dim, &m.classes}; }

}  // namespace racdet
