#include "fms/sampler.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "fms/rng.hpp"

namespace fms {

ContextSubgraph sample_context(const KnowledgeGraph& graph, int32_t head, int32_t tail,
                               int hops, int neighbor_samples,
                               const std::vector<int64_t>& excluded, uint64_t rng_seed) {
  if (hops < 1) throw std::invalid_argument("sample_context: hops must be >= 1");
  if (neighbor_samples < 1)
    throw std::invalid_argument("sample_context: neighbor_samples must be >= 1");

  ContextSubgraph sub;
  sub.query_head = head;
  sub.query_tail = tail;
  sub.excluded = excluded;

  auto is_excluded = [&](int64_t id) {
    return std::binary_search(excluded.begin(), excluded.end(), id);
  };

  std::unordered_set<int64_t> sampled_ids;
  std::unordered_set<int32_t> visited;
  std::vector<int32_t> frontier;
  frontier.push_back(head);
  if (tail != head) frontier.push_back(tail);
  std::sort(frontier.begin(), frontier.end());
  for (int32_t v : frontier) visited.insert(v);

  std::vector<const IncidentEdge*> pool;
  for (int hop = 0; hop < hops; ++hop) {
    std::vector<int32_t> next;
    for (int32_t node : frontier) {
      pool.clear();
      for (const IncidentEdge& ie : graph.incident(node))
        if (!is_excluded(ie.edge_id)) pool.push_back(&ie);
      if (pool.empty()) continue;
      const int64_t avail = static_cast<int64_t>(pool.size());
      const int64_t k = std::min<int64_t>(neighbor_samples, avail);
      rng::SplitMix64 g(rng::mix(rng_seed, static_cast<uint64_t>(static_cast<uint32_t>(node)),
                                 static_cast<uint64_t>(hop)));
      for (int64_t pi : rng::sample_without_replacement(avail, k, g)) {
        const IncidentEdge& ie = *pool[static_cast<size_t>(pi)];
        if (!sampled_ids.insert(ie.edge_id).second) continue;  // drawn via another node
        const Triple& t = graph.edge(ie.edge_id);
        sub.edges.push_back({ie.edge_id, t.rel, t.head, t.tail});
        for (int32_t endpoint : {t.head, t.tail})
          if (visited.insert(endpoint).second) next.push_back(endpoint);
      }
    }
    std::sort(next.begin(), next.end());
    frontier = std::move(next);
    if (frontier.empty()) break;
  }

  // Bucket sampled-edge positions by endpoint; buckets come out ascending
  // because positions are visited in order.
  std::unordered_map<int32_t, std::vector<int64_t>> bucket;
  for (size_t p = 0; p < sub.edges.size(); ++p) {
    const SubgraphEdge& e = sub.edges[p];
    bucket[e.head].push_back(static_cast<int64_t>(p));
    if (e.tail != e.head) bucket[e.tail].push_back(static_cast<int64_t>(p));
  }

  sub.neighbor_offsets.assign(1, 0);
  std::vector<int64_t> merged;
  for (size_t p = 0; p < sub.edges.size(); ++p) {
    const SubgraphEdge& e = sub.edges[p];
    merged.clear();
    const auto& bh = bucket[e.head];
    merged.insert(merged.end(), bh.begin(), bh.end());
    if (e.tail != e.head) {
      const auto& bt = bucket[e.tail];
      merged.insert(merged.end(), bt.begin(), bt.end());
    }
    std::sort(merged.begin(), merged.end());
    merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
    for (int64_t q : merged)
      if (q != static_cast<int64_t>(p)) sub.neighbor_index.push_back(q);
    sub.neighbor_offsets.push_back(static_cast<int64_t>(sub.neighbor_index.size()));
  }

  if (auto it = bucket.find(head); it != bucket.end()) sub.incident_of_head = it->second;
  if (auto it = bucket.find(tail); it != bucket.end()) sub.incident_of_tail = it->second;
  return sub;
}

}  // namespace fms
