#pragma once
// Protocol-exact filtered ranking for relation and entity prediction.
//
// Ranks are pessimistic: candidates tying the ground truth count as ranked
// above it, so a constant scorer earns the worst possible rank rather than
// a perfect one. Filtering removes every other known-true candidate
// (across train/valid/test) before the rank is computed.
//
// Scoring is injected as a callback so the ranking logic can be checked
// against hand-set scores independently of any model.

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "fms/dataset.hpp"

namespace fms {

struct Metrics {
  double mrr = 0, hits1 = 0, hits3 = 0, hits10 = 0;
  int64_t num_queries = 0;
};

Metrics compute_metrics(const std::vector<int64_t>& ranks);

struct RankingReport {
  std::vector<int64_t> ranks;
  Metrics overall;
  std::vector<std::pair<std::string, Metrics>> per_category;
};

// Known-true candidates per query key, over every split of the dataset.
class FilterIndex {
 public:
  // (h, t) -> true relations
  static FilterIndex build_relation(const std::vector<const std::vector<Triple>*>& splits);
  // (h, r) -> true tails and (r, t) -> true heads
  static FilterIndex build_entity(const std::vector<const std::vector<Triple>*>& splits);

  const std::vector<int32_t>* true_rels(int32_t h, int32_t t) const;
  const std::vector<int32_t>* true_tails(int32_t h, int32_t r) const;
  const std::vector<int32_t>* true_heads(int32_t r, int32_t t) const;

 private:
  std::unordered_map<uint64_t, std::vector<int32_t>> rels_, tails_, heads_;
  static void sort_all(std::unordered_map<uint64_t, std::vector<int32_t>>& m);
};

// Filtered pessimistic rank of candidate `true_idx` within `scores`.
// `filtered_true` lists candidate indices to drop (the ground truth itself
// is always kept).
int64_t filtered_rank(const std::vector<float>& scores, int32_t true_idx,
                      const std::vector<int32_t>* filtered_true);

enum class RelationCategory : uint8_t { kOneToOne, kOneToMany, kManyToOne, kManyToMany };

const char* category_name(RelationCategory c);

// Average tails-per-head / heads-per-tail thresholds (default 1.5) on the
// training split.
std::vector<RelationCategory> categorize_relations(const std::vector<Triple>& train,
                                                   int64_t num_relations,
                                                   double threshold = 1.5);

// ---- evaluation drivers ----

using RelationScoreFn =
    std::function<std::vector<float>(int32_t h, int32_t t, int32_t true_rel)>;
// (fixed entity, rel, candidates, tail_query, true_entity) -> scores
using EntityScoreFn = std::function<std::vector<float>(
    int32_t fixed, int32_t rel, const std::vector<int32_t>& candidates, bool tail_query,
    int32_t true_entity)>;

struct EvalOptions {
  int64_t candidate_cap = 10000;
  bool per_category = false;
  uint64_t seed = 0;       // candidate subsampling substream
  int64_t max_queries = 0;  // 0 = all (used to subsample validation checks)
};

// One rank per query triple (h, ?, t). Per-category sub-reports bucket by
// the true relation's category plus a "multi" bucket for entity pairs
// carrying two or more true relations.
RankingReport evaluate_relation_task(const std::vector<Triple>& queries,
                                     const FilterIndex& filter, int64_t num_relations,
                                     const RelationScoreFn& score,
                                     const std::vector<RelationCategory>* categories,
                                     const EvalOptions& opts);

// Two ranks per query triple: tail prediction (h, r, ?) and head
// prediction (?, r, t).
RankingReport evaluate_entity_task(const std::vector<Triple>& queries,
                                   const FilterIndex& filter, int64_t num_entities,
                                   const EntityScoreFn& score,
                                   const std::vector<RelationCategory>* categories,
                                   const EvalOptions& opts);

}  // namespace fms
