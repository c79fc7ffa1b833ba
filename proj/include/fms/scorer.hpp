#pragma once
// Read-only query scoring on top of trained parameters. Each call builds a
// forward-only tape; callers may fan out over queries in parallel since the
// graph and parameters are never mutated.

#include <cstdint>
#include <vector>

#include "fms/graph.hpp"
#include "fms/model.hpp"
#include "fms/sampler.hpp"

namespace fms {

template <typename T>
class Scorer {
 public:
  Scorer(const KnowledgeGraph& graph, const ParameterStore<T>& store, const ModelConfig& cfg,
         uint64_t sample_seed)
      : graph_(graph), store_(store), cfg_(cfg), sample_seed_(sample_seed) {}

  // Scores for all |R| relations of the pair (h, t). When the query's
  // ground-truth relation is known (training accuracy, filtered ranking of
  // observed triples) pass it as exclude_rel so the query edge and its
  // co-located duplicates are scrubbed from the context.
  std::vector<T> relation_scores(int32_t h, int32_t t, int32_t exclude_rel = -1) const {
    std::vector<int64_t> excluded;
    if (exclude_rel >= 0) excluded = graph_.duplicate_edge_ids(h, exclude_rel, t);
    const ContextSubgraph sub =
        sample_context(graph_, h, t, cfg_.context.hops, cfg_.context.neighbor_samples,
                       excluded, sample_seed_);

    Tape<T> tape;
    const ContextBatch batch = ContextBatch::assemble({&sub});
    const auto ctx = context_forward(tape, store_, batch, cfg_.context, sample_seed_);
    auto s = static_score(tape, store_, ctx.head_message, ctx.tail_message);
    if (!cfg_.no_flow) {
      const auto v = modulation_vector(tape, store_, ctx.head_message, ctx.tail_message,
                                       cfg_.flow, sample_seed_);
      s = modulate(tape, s, v);
    }
    const auto logits = relation_logits(tape, store_, s);
    return tape.value(logits).vec();
  }

  // One score per candidate pair. tail_query: pairs are (fixed, cand);
  // otherwise (cand, fixed). true_entity identifies the observed triple
  // (fixed, rel, true) whose edge is scrubbed from every candidate context.
  std::vector<T> entity_scores(int32_t fixed, int32_t rel,
                               const std::vector<int32_t>& candidates, bool tail_query,
                               int32_t true_entity) const {
    const int32_t th = tail_query ? fixed : true_entity;
    const int32_t tt = tail_query ? true_entity : fixed;
    const std::vector<int64_t> excluded = graph_.duplicate_edge_ids(th, rel, tt);

    std::vector<ContextSubgraph> subs(candidates.size());
#pragma omp parallel for schedule(dynamic, 8)
    for (size_t i = 0; i < candidates.size(); ++i) {
      const int32_t h = tail_query ? fixed : candidates[i];
      const int32_t t = tail_query ? candidates[i] : fixed;
      subs[i] = sample_context(graph_, h, t, cfg_.context.hops,
                               cfg_.context.neighbor_samples, excluded, sample_seed_);
    }
    std::vector<const ContextSubgraph*> ptrs(subs.size());
    for (size_t i = 0; i < subs.size(); ++i) ptrs[i] = &subs[i];
    const ContextBatch batch = ContextBatch::assemble(ptrs);

    Tape<T> tape;
    const auto ctx = context_forward(tape, store_, batch, cfg_.context, sample_seed_);
    const std::vector<int64_t> rel_rows(candidates.size(), static_cast<int64_t>(rel));
    const auto x_r = tape.gather_rows(tape.param("rel_emb", store_.get("rel_emb")), rel_rows);
    auto s = static_score(tape, store_, ctx.head_message, ctx.tail_message, x_r);
    if (!cfg_.no_flow) {
      const auto v = modulation_vector(tape, store_, ctx.head_message, ctx.tail_message,
                                       cfg_.flow, sample_seed_);
      s = modulate(tape, s, v);
    }
    const auto logits = entity_logit(tape, store_, s);
    return tape.value(logits).vec();
  }

  const ModelConfig& config() const { return cfg_; }
  const KnowledgeGraph& graph() const { return graph_; }

 private:
  const KnowledgeGraph& graph_;
  const ParameterStore<T>& store_;
  ModelConfig cfg_;
  uint64_t sample_seed_;
};

using Scorerf = Scorer<float>;

}  // namespace fms
