#include "fms/graph.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace fms {

uint64_t KnowledgeGraph::pair_rel_key(int32_t a, int32_t b, int32_t rel) {
  if (a > b) std::swap(a, b);
  uint64_t h = static_cast<uint32_t>(a);
  h = h * 0x9e3779b97f4a7c15ull + static_cast<uint32_t>(b);
  h = h * 0x9e3779b97f4a7c15ull + static_cast<uint32_t>(rel);
  return h;
}

KnowledgeGraph::KnowledgeGraph(std::vector<Triple> triples, int64_t num_entities,
                               int64_t num_relations)
    : num_entities_(num_entities),
      num_relations_(num_relations),
      edges_(std::move(triples)),
      incidence_(static_cast<size_t>(num_entities)) {
  for (size_t id = 0; id < edges_.size(); ++id) {
    const Triple& t = edges_[id];
    if (t.head < 0 || t.head >= num_entities_ || t.tail < 0 || t.tail >= num_entities_ ||
        t.rel < 0 || t.rel >= num_relations_)
      throw std::out_of_range("triple index out of range at edge " + std::to_string(id));
    const int64_t eid = static_cast<int64_t>(id);
    incidence_[static_cast<size_t>(t.head)].push_back(
        {eid, t.rel, t.tail, EdgeDir::kOutgoing});
    incidence_[static_cast<size_t>(t.tail)].push_back(
        {eid, t.rel, t.head, EdgeDir::kIncoming});
    by_pair_rel_[pair_rel_key(t.head, t.tail, t.rel)].push_back(eid);
  }
  // Construction pushes edges in increasing id order, so the lists are
  // already sorted; self-loops appear twice in their entity's list.
}

std::vector<int64_t> KnowledgeGraph::duplicate_edge_ids(int32_t head, int32_t rel,
                                                        int32_t tail) const {
  auto it = by_pair_rel_.find(pair_rel_key(head, tail, rel));
  if (it == by_pair_rel_.end()) return {};
  // Hash keys can collide across distinct (pair, rel) tuples; filter exactly.
  std::vector<int64_t> out;
  for (int64_t id : it->second) {
    const Triple& t = edges_[static_cast<size_t>(id)];
    const bool same_pair = (t.head == head && t.tail == tail) ||
                           (t.head == tail && t.tail == head);
    if (same_pair && t.rel == rel) out.push_back(id);
  }
  return out;
}

}  // namespace fms
