#pragma once
// Seeded multi-hop edge-neighborhood sampling around a query pair.
//
// Breadth-first from {head, tail}. At each hop every frontier node draws
// min(neighbor_samples, available) of its non-excluded incident edges
// uniformly without replacement, from a substream seeded by
// (rng_seed, node, hop). Sampling is pure: same inputs, same subgraph,
// byte for byte, regardless of thread count.

#include <cstdint>
#include <vector>

#include "fms/graph.hpp"

namespace fms {

struct SubgraphEdge {
  int64_t edge_id;
  int32_t rel;
  int32_t head;
  int32_t tail;
};

struct ContextSubgraph {
  int32_t query_head = -1;
  int32_t query_tail = -1;
  std::vector<SubgraphEdge> edges;

  // CSR adjacency over sampled-edge positions: position j is a neighbor of
  // position i iff the two edges share at least one endpoint and i != j.
  std::vector<int64_t> neighbor_offsets;  // size edges.size()+1
  std::vector<int64_t> neighbor_index;

  // Positions of sampled edges incident to the query endpoints.
  std::vector<int64_t> incident_of_head;
  std::vector<int64_t> incident_of_tail;

  // Edge ids that were barred from sampling (sorted).
  std::vector<int64_t> excluded;

  std::span<const int64_t> neighbors(int64_t pos) const {
    return {neighbor_index.data() + neighbor_offsets[static_cast<size_t>(pos)],
            static_cast<size_t>(neighbor_offsets[static_cast<size_t>(pos) + 1] -
                                neighbor_offsets[static_cast<size_t>(pos)])};
  }
};

// `excluded` must be sorted ascending. hops must be >= 1.
ContextSubgraph sample_context(const KnowledgeGraph& graph, int32_t head, int32_t tail,
                               int hops, int neighbor_samples,
                               const std::vector<int64_t>& excluded, uint64_t rng_seed);

}  // namespace fms
