#pragma once
// Immutable indexed triple store with per-entity incidence lists.
// Safe to share across threads after construction.

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "fms/dataset.hpp"

namespace fms {

enum class EdgeDir : uint8_t { kOutgoing, kIncoming };

struct IncidentEdge {
  int64_t edge_id;
  int32_t rel;
  int32_t other;  // opposite endpoint
  EdgeDir dir;    // outgoing = this entity is the head
};

class KnowledgeGraph {
 public:
  KnowledgeGraph(std::vector<Triple> triples, int64_t num_entities, int64_t num_relations);

  int64_t num_entities() const { return num_entities_; }
  int64_t num_relations() const { return num_relations_; }
  int64_t num_edges() const { return static_cast<int64_t>(edges_.size()); }

  const Triple& edge(int64_t id) const { return edges_[static_cast<size_t>(id)]; }
  const std::vector<Triple>& edges() const { return edges_; }

  // Incidence list of an entity, sorted by edge id.
  std::span<const IncidentEdge> incident(int32_t entity) const {
    const auto& v = incidence_[static_cast<size_t>(entity)];
    return {v.data(), v.size()};
  }

  int64_t degree(int32_t entity) const {
    return static_cast<int64_t>(incidence_[static_cast<size_t>(entity)].size());
  }

  // Edge ids carrying the same relation between the same unordered entity
  // pair; used to scrub a training query (and its co-located duplicates)
  // from its own context.
  std::vector<int64_t> duplicate_edge_ids(int32_t head, int32_t rel, int32_t tail) const;

 private:
  int64_t num_entities_;
  int64_t num_relations_;
  std::vector<Triple> edges_;
  std::vector<std::vector<IncidentEdge>> incidence_;
  std::unordered_map<uint64_t, std::vector<int64_t>> by_pair_rel_;

  static uint64_t pair_rel_key(int32_t a, int32_t b, int32_t rel);
};

}  // namespace fms
