// Copyright 2026 The kbvqa Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "knowledge.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "common.hpp"
#include "json.hpp"

namespace kbvqa {
namespace {

using nlohmann::json;

// What a (possibly noisy) detector reported for one scene graph. Indices
// follow the graph's object and triple order; absent entries were dropped.
struct Detections {
  std::vector<std::optional<std::string>> names;
  std::vector<std::vector<std::optional<std::string>>> attributes;
  struct Triple {
    std::string subject;
    std::string predicate;
    std::string object;
  };
  std::vector<std::optional<Triple>> triples;
};

Detections perfect_detections(const SceneGraph& graph, const Lexicon& lexicon) {
  Detections d;
  for (const SceneObject& o : graph.objects) {
    d.names.emplace_back(singularize(o.name, lexicon));
    std::vector<std::optional<std::string>> attrs(o.attributes.begin(), o.attributes.end());
    d.attributes.push_back(std::move(attrs));
  }
  for (const RelationTriple& t : graph.triples) {
    d.triples.emplace_back(Detections::Triple{
        singularize(graph.find_object(t.subject_id)->name, lexicon), t.predicate,
        singularize(graph.find_object(t.object_id)->name, lexicon)});
  }
  return d;
}

enum class NoiseOutcome { kKeep, kDrop, kSwap };

// One independent draw per item, keyed by (seed, image, tag, a, b).
struct NoiseDraw {
  NoiseOutcome outcome;
  std::size_t swap_index;
};

NoiseDraw draw_noise(const NoiseModel& noise, const std::string& image_id, int tag,
                     std::size_t a, std::size_t b, std::size_t vocab_size) {
  std::uint64_t key = hash_string(image_id, noise.seed);
  key = mix64(key ^ (static_cast<std::uint64_t>(tag) << 56) ^ (a << 24) ^ b);
  Rng rng(key);
  double u = rng.uniform();
  std::size_t swap_index = rng.index(vocab_size);
  if (u < noise.p_drop) return {NoiseOutcome::kDrop, 0};
  if (u < noise.p_drop + noise.p_swap) return {NoiseOutcome::kSwap, swap_index};
  return {NoiseOutcome::kKeep, 0};
}

Eigen::MatrixXd region_projection(int dim, std::uint64_t seed, int half) {
  Rng rng(mix64(seed * 2 + static_cast<std::uint64_t>(half)));
  Eigen::MatrixXd p(dim, dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < dim; ++c) p(r, c) = rng.normal() * scale;
  }
  return p;
}

Eigen::MatrixXd stack_rows(const std::vector<Eigen::VectorXd>& rows, int dim) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  return m;
}

KnowledgeStream label_stream(StreamKind kind, std::vector<std::string> labels,
                             const EmbeddingTable& table) {
  KnowledgeStream s;
  s.kind = kind;
  s.vectors = embed_items(labels, table);
  s.labels = std::move(labels);
  return s;
}

ImageKnowledge assemble(const SceneGraph& graph, const Detections& det,
                        const Lexicon& lexicon, const EmbeddingTable& table,
                        Phase phase, const RegionConfig& region) {
  const int dim = table.dim();
  ImageKnowledge out;
  out.image_id = graph.image_id;
  out.phase = phase;

  // Region: one row per detected object.
  {
    const Eigen::MatrixXd name_proj = region_projection(dim, region.seed, 0);
    const Eigen::MatrixXd attr_proj = region_projection(dim, region.seed, 1);
    KnowledgeStream s;
    s.kind = StreamKind::kRegion;
    std::vector<Eigen::VectorXd> rows;
    for (std::size_t i = 0; i < graph.objects.size(); ++i) {
      if (!det.names[i]) continue;
      Eigen::VectorXd attr_mean = Eigen::VectorXd::Zero(dim);
      int n_attr = 0;
      for (const auto& a : det.attributes[i]) {
        if (!a) continue;
        attr_mean += embed_label(*a, table).values;
        ++n_attr;
      }
      if (n_attr > 0) attr_mean /= n_attr;
      Rng rng(mix64(hash_string(graph.image_id, region.seed) ^ (i + 1)));
      Eigen::VectorXd v =
          name_proj * embed_label(*det.names[i], table).values + attr_proj * attr_mean;
      for (int k = 0; k < dim; ++k) v[k] += region.noise * rng.normal();
      rows.push_back(std::move(v));
      s.labels.push_back(graph.objects[i].object_id);
    }
    s.vectors = stack_rows(rows, dim);
    out.streams.push_back(std::move(s));
  }

  std::vector<std::string> names;
  for (const auto& n : det.names) {
    if (n) names.push_back(*n);
  }
  std::vector<std::string> attrs;
  for (const auto& per_object : det.attributes) {
    for (const auto& a : per_object) {
      if (a) attrs.push_back(*a);
    }
  }
  AttributeSplit split = split_attributes(attrs, lexicon.flags);
  attrs = std::move(split.adjectives);
  attrs.insert(attrs.end(), split.non_adjectives.begin(), split.non_adjectives.end());
  if (phase == Phase::kTest) {
    names = expand_categories(names, lexicon.taxonomy);
    attrs = expand_categories(attrs, lexicon.taxonomy);
  }
  out.streams.push_back(label_stream(StreamKind::kObjectLabel, std::move(names), table));
  out.streams.push_back(label_stream(StreamKind::kAttribute, std::move(attrs), table));

  KnowledgeStream rel;
  rel.kind = StreamKind::kRelationship;
  std::vector<Eigen::VectorXd> rows;
  for (const auto& t : det.triples) {
    if (!t) continue;
    rel.labels.push_back(t->subject + " " + t->predicate + " " + t->object);
    rows.push_back((embed_label(t->subject, table).values +
                    embed_label(t->predicate, table).values +
                    embed_label(t->object, table).values) /
                   3.0);
  }
  rel.vectors = stack_rows(rows, dim);
  out.streams.push_back(std::move(rel));
  return out;
}

}  // namespace

const char* feature_mode_name(FeatureMode mode) {
  switch (mode) {
    case FeatureMode::kGroundTruth: return "groundtruth";
    case FeatureMode::kStats: return "stats";
    case FeatureMode::kDetected: return "detected";
  }
  return "";
}

const char* stream_kind_name(StreamKind kind) {
  switch (kind) {
    case StreamKind::kRegion: return "region";
    case StreamKind::kObjectLabel: return "object_label";
    case StreamKind::kAttribute: return "attribute";
    case StreamKind::kRelationship: return "relationship";
    case StreamKind::kStatsWord: return "stats_word";
  }
  return "";
}

const char* phase_name(Phase phase) {
  return phase == Phase::kTrain ? "train" : "test";
}

FeatureMode parse_feature_mode(std::string_view name) {
  for (FeatureMode m : {FeatureMode::kGroundTruth, FeatureMode::kStats, FeatureMode::kDetected}) {
    if (name == feature_mode_name(m)) return m;
  }
  throw Error(ErrorKind::kConfig, "unknown feature mode '" + std::string(name) + "'");
}

StreamKind parse_stream_kind(std::string_view name) {
  for (StreamKind k : {StreamKind::kRegion, StreamKind::kObjectLabel, StreamKind::kAttribute,
                       StreamKind::kRelationship, StreamKind::kStatsWord}) {
    if (name == stream_kind_name(k)) return k;
  }
  throw Error(ErrorKind::kConfig, "unknown stream kind '" + std::string(name) + "'");
}

Phase parse_phase(std::string_view name) {
  if (name == "train") return Phase::kTrain;
  if (name == "test") return Phase::kTest;
  throw Error(ErrorKind::kConfig, "unknown phase '" + std::string(name) + "'");
}

bool KnowledgeStream::operator==(const KnowledgeStream& other) const {
  return kind == other.kind && labels == other.labels &&
         vectors.rows() == other.vectors.rows() &&
         vectors.cols() == other.vectors.cols() && vectors == other.vectors;
}

const KnowledgeStream* ImageKnowledge::find(StreamKind kind) const {
  for (const KnowledgeStream& s : streams) {
    if (s.kind == kind) return &s;
  }
  return nullptr;
}

ImageKnowledge assemble_groundtruth(const SceneGraph& graph, const Lexicon& lexicon,
                                    const EmbeddingTable& table, Phase phase,
                                    const RegionConfig& region) {
  return assemble(graph, perfect_detections(graph, lexicon), lexicon, table, phase, region);
}

ImageKnowledge assemble_detected(const SceneGraph& graph, const NoiseModel& noise,
                                 const Lexicon& lexicon, const EmbeddingTable& table,
                                 Phase phase, const std::vector<std::string>& vocab,
                                 const std::vector<std::string>& attribute_vocab,
                                 const RegionConfig& region) {
  if (vocab.empty()) {
    throw Error(ErrorKind::kContract, "assemble_detected: confusion vocabulary is empty");
  }
  if (noise.p_drop < 0 || noise.p_swap < 0 || noise.p_drop + noise.p_swap > 1.0) {
    throw Error(ErrorKind::kConfig, "noise probabilities must be >= 0 and sum to <= 1");
  }
  const std::vector<std::string>& attr_pool = attribute_vocab.empty() ? vocab : attribute_vocab;
  Detections det = perfect_detections(graph, lexicon);
  auto relabel = [&](NoiseDraw d) { return singularize(vocab[d.swap_index], lexicon); };
  for (std::size_t i = 0; i < det.names.size(); ++i) {
    NoiseDraw d = draw_noise(noise, graph.image_id, 0, i, 0, vocab.size());
    if (d.outcome == NoiseOutcome::kDrop) det.names[i].reset();
    if (d.outcome == NoiseOutcome::kSwap) det.names[i] = relabel(d);
    for (std::size_t k = 0; k < det.attributes[i].size(); ++k) {
      NoiseDraw da = draw_noise(noise, graph.image_id, 1, i, k, attr_pool.size());
      if (da.outcome == NoiseOutcome::kDrop) det.attributes[i][k].reset();
      if (da.outcome == NoiseOutcome::kSwap) det.attributes[i][k] = attr_pool[da.swap_index];
    }
  }
  for (std::size_t t = 0; t < det.triples.size(); ++t) {
    NoiseDraw d = draw_noise(noise, graph.image_id, 2, t, 0, vocab.size());
    if (d.outcome == NoiseOutcome::kDrop) det.triples[t].reset();
    if (d.outcome == NoiseOutcome::kSwap) det.triples[t]->object = relabel(d);
  }
  return assemble(graph, det, lexicon, table, phase, region);
}

ImageKnowledge assemble_stats(const StatsKnowledgeBase& kb, const std::string& image_id,
                              const EmbeddingTable& table, Phase phase,
                              const SceneGraph* graph, const Lexicon* lexicon,
                              const RegionConfig& region) {
  ImageKnowledge out;
  out.image_id = image_id;
  out.phase = phase;
  out.streams.push_back(label_stream(StreamKind::kStatsWord, kb.tokens(image_id), table));
  if (graph != nullptr) {
    const Lexicon& lex = lexicon != nullptr ? *lexicon : default_lexicon();
    ImageKnowledge gt =
        assemble(*graph, perfect_detections(*graph, lex), lex, table, Phase::kTrain, region);
    out.streams.push_back(*gt.find(StreamKind::kRegion));
  }
  return out;
}

std::string serialize_knowledge(const std::vector<ImageKnowledge>& images) {
  std::string out;
  for (const ImageKnowledge& img : images) {
    json streams = json::array();
    for (const KnowledgeStream& s : img.streams) {
      json vectors = json::array();
      for (Eigen::Index r = 0; r < s.vectors.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < s.vectors.cols(); ++c) row.push_back(s.vectors(r, c));
        vectors.push_back(std::move(row));
      }
      streams.push_back({{"kind", stream_kind_name(s.kind)},
                         {"dim", s.vectors.cols()},
                         {"labels", s.labels},
                         {"vectors", std::move(vectors)}});
    }
    json line = {{"image_id", img.image_id},
                 {"phase", phase_name(img.phase)},
                 {"streams", std::move(streams)}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::vector<ImageKnowledge> parse_knowledge(std::istream& in) {
  std::vector<ImageKnowledge> images;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  std::size_t offset = 0;
  bool last_had_newline = true;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t line_offset = offset;
    offset += line.size() + 1;
    last_had_newline = !in.eof();
    if (trim(line).empty()) continue;
    auto corrupt = [&](const std::string& what) {
      return ParseError(ErrorKind::kCorrupt, line_no,
                        "byte offset " + std::to_string(line_offset) + ": " + what);
    };
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw corrupt(e.what());
    }
    try {
      ImageKnowledge img;
      img.image_id = obj.at("image_id").get<std::string>();
      img.phase = parse_phase(obj.at("phase").get<std::string>());
      std::set<StreamKind> kinds;
      for (const json& s : obj.at("streams")) {
        KnowledgeStream stream;
        stream.kind = parse_stream_kind(s.at("kind").get<std::string>());
        if (!kinds.insert(stream.kind).second) throw corrupt("repeated stream kind");
        const long dim = s.at("dim").get<long>();
        stream.labels = s.at("labels").get<std::vector<std::string>>();
        const json& vectors = s.at("vectors");
        if (dim < 1 || vectors.size() != stream.labels.size()) {
          throw corrupt("labels/vectors size mismatch");
        }
        stream.vectors.resize(static_cast<Eigen::Index>(vectors.size()), dim);
        for (std::size_t r = 0; r < vectors.size(); ++r) {
          if (vectors[r].size() != static_cast<std::size_t>(dim)) {
            throw corrupt("vector row has wrong dimension");
          }
          for (long c = 0; c < dim; ++c) {
            stream.vectors(static_cast<Eigen::Index>(r), c) =
                vectors[r][static_cast<std::size_t>(c)].get<double>();
          }
        }
        img.streams.push_back(std::move(stream));
      }
      if (img.streams.empty()) throw corrupt("image has no streams");
      if (!seen.insert(img.image_id).second) {
        throw ParseError(ErrorKind::kDuplicateKey, line_no,
                         "duplicate image_id '" + img.image_id + "'");
      }
      images.push_back(std::move(img));
    } catch (const json::exception& e) {
      throw corrupt(e.what());
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw corrupt(e.what());
    }
  }
  if (!last_had_newline) {
    throw ParseError(ErrorKind::kCorrupt, line_no,
                     "byte offset " + std::to_string(offset - 1) + ": truncated final line");
  }
  return images;
}

void write_knowledge(const std::string& path, const std::vector<ImageKnowledge>& images) {
  write_file_atomic(path, serialize_knowledge(images));
}

std::vector<ImageKnowledge> read_knowledge(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  return parse_knowledge(in);
}

}  // namespace kbvqa
