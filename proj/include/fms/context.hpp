#pragma once
// Edge-centric message passing over sampled context subgraphs.
//
// Edge states start from relation embeddings. Each layer scores every
// neighbor of every edge, keeps the top-k, mean-aggregates the kept states
// and updates the edge through a multi-head gated attention aggregator.
// All edges update synchronously per layer. Selection is a hard choice:
// gradients flow through the aggregated states only, never the scores.
//
// Subgraphs of a whole batch are flattened into one ContextBatch so each
// layer is a handful of large dense ops on an [E_total x d] matrix.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "fms/param_store.hpp"
#include "fms/rng.hpp"
#include "fms/sampler.hpp"
#include "fms/tape.hpp"

namespace fms {

enum class SelectionMode { kEnergyTopK, kDotTopK, kRandomK };
enum class AggregatorKind { kAttention, kMean, kConcatMlp };

struct ContextConfig {
  int hops = 2;
  int top_k = 3;
  int neighbor_samples = 8;
  int heads = 4;
  int64_t dim = 64;
  double temperature = 0.95;
  SelectionMode selection = SelectionMode::kEnergyTopK;
  AggregatorKind aggregator = AggregatorKind::kAttention;

  void validate() const {
    if (hops < 1) throw std::invalid_argument("context: hops must be >= 1");
    if (top_k < 1) throw std::invalid_argument("context: top_k must be >= 1");
    if (neighbor_samples < 1)
      throw std::invalid_argument("context: neighbor_samples must be >= 1");
    if (dim < 1 || heads < 1 || dim % heads != 0)
      throw std::invalid_argument("context: dim must be a positive multiple of heads");
    if (!(temperature > 0)) throw std::invalid_argument("context: temperature must be > 0");
  }
};

// One or more sampled subgraphs flattened for a single tape pass.
struct ContextBatch {
  int64_t num_queries = 0;
  int64_t total_edges = 0;
  std::vector<int64_t> edge_rel;                      // per row
  std::vector<int64_t> nbr_offsets{0}, nbr_index;     // CSR, global row positions
  std::vector<int64_t> head_inc_offsets{0}, head_inc_index;  // per query
  std::vector<int64_t> tail_inc_offsets{0}, tail_inc_index;

  static ContextBatch assemble(const std::vector<const ContextSubgraph*>& subs) {
    ContextBatch b;
    b.num_queries = static_cast<int64_t>(subs.size());
    for (const ContextSubgraph* sub : subs) {
      const int64_t base = b.total_edges;
      for (const SubgraphEdge& e : sub->edges)
        b.edge_rel.push_back(static_cast<int64_t>(e.rel));
      for (size_t p = 0; p < sub->edges.size(); ++p) {
        for (int64_t q : sub->neighbors(static_cast<int64_t>(p)))
          b.nbr_index.push_back(base + q);
        b.nbr_offsets.push_back(static_cast<int64_t>(b.nbr_index.size()));
      }
      for (int64_t p : sub->incident_of_head) b.head_inc_index.push_back(base + p);
      b.head_inc_offsets.push_back(static_cast<int64_t>(b.head_inc_index.size()));
      for (int64_t p : sub->incident_of_tail) b.tail_inc_index.push_back(base + p);
      b.tail_inc_offsets.push_back(static_cast<int64_t>(b.tail_inc_index.size()));
      b.total_edges += static_cast<int64_t>(sub->edges.size());
    }
    return b;
  }
};

// Parameter names follow "context.layer<i>.<name>"; the scoring map g is
// shared across layers.
template <typename T>
void create_context_params(ParameterStore<T>& store, const ContextConfig& cfg,
                           int64_t num_relations, rng::SplitMix64& g) {
  cfg.validate();
  const int64_t d = cfg.dim;
  store.create_embedding("rel_emb", num_relations, d, g);
  store.create_xavier("context.g", d, d, g);
  for (int i = 0; i < cfg.hops; ++i) {
    const std::string p = "context.layer" + std::to_string(i) + ".";
    if (cfg.aggregator == AggregatorKind::kConcatMlp) {
      store.create_xavier(p + "w_self", d, d, g);
      store.create(p + "b_self", {d});
      store.create_xavier(p + "w_nbhd", d, d, g);
      store.create(p + "b_nbhd", {d});
      store.create_xavier(p + "w_cat", 2 * d, d, g);
      store.create(p + "b_out", {d});
    } else {
      store.create_xavier(p + "w_self", d, d, g);
      store.create(p + "b_self", {d});
      store.create_xavier(p + "w_nbhd", d, d, g);
      store.create(p + "b_nbhd", {d});
      store.create_xavier(p + "w_out", d, d, g);
      store.create(p + "b_out", {d});
    }
  }
}

// exp(-||g(s_c) - g(s_n)||^2 / tau), recorded on the tape (differentiable
// through the mapping g). s_c and s_n are [1 x d] nodes, g_map is [d x d].
template <typename T>
typename Tape<T>::Id energy_score(Tape<T>& tape, typename Tape<T>::Id s_c,
                                  typename Tape<T>::Id s_n, typename Tape<T>::Id g_map,
                                  T tau) {
  if (!(tau > T(0))) throw std::invalid_argument("energy_score: tau must be > 0");
  const auto gc = tape.matmul(s_c, g_map);
  const auto gn = tape.matmul(s_n, g_map);
  const auto dist_sq = tape.squared_error(gc, gn);  // single row: plain squared distance
  return tape.exp(tape.scale(dist_sq, T(-1) / tau));
}

// Positions of the k highest-scoring entries; ties resolved toward the
// lower position. Result is in ascending position order.
template <typename T>
std::vector<int64_t> select_topk(const T* scores, int64_t n, int64_t k) {
  std::vector<int64_t> pos(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) pos[static_cast<size_t>(i)] = i;
  if (k < n) {
    auto by_score = [&](int64_t a, int64_t b) {
      if (scores[a] != scores[b]) return scores[a] > scores[b];
      return a < b;
    };
    std::partial_sort(pos.begin(), pos.begin() + static_cast<size_t>(k), pos.end(), by_score);
    pos.resize(static_cast<size_t>(k));
  }
  std::sort(pos.begin(), pos.end());
  return pos;
}

template <typename T>
std::vector<int64_t> select_topk(const std::vector<T>& scores, int64_t k) {
  return select_topk(scores.data(), static_cast<int64_t>(scores.size()), k);
}

template <typename T>
struct ContextForward {
  typename Tape<T>::Id final_states;  // [E_total x d]
  typename Tape<T>::Id head_message;  // [Q x d]
  typename Tape<T>::Id tail_message;  // [Q x d]
};

namespace detail {

// Per-layer hard neighbor selection. Runs on raw state values, off-tape.
template <typename T>
void select_neighbors(const Tensor<T>& states, const ContextBatch& batch,
                      const ContextConfig& cfg, const Tensor<T>& g_weight, int layer,
                      uint64_t selection_seed, std::vector<int64_t>& sel_flat,
                      std::vector<int64_t>& sel_offsets) {
  const int64_t E = batch.total_edges;
  const int64_t d = cfg.dim;
  sel_flat.clear();
  sel_offsets.assign(1, 0);

  Tensor<T> proj;
  const Tensor<T>* basis = &states;
  if (cfg.selection == SelectionMode::kEnergyTopK) {
    proj = Tensor<T>({E, d});
    kernels::matmul(states.data(), g_weight.data(), proj.data(), E, d, d);
    basis = &proj;
  }

  // Per-edge top-k positions, computed in parallel then concatenated in
  // edge order (row counts are per-edge deterministic).
  std::vector<std::vector<int64_t>> picked(static_cast<size_t>(E));
#pragma omp parallel
  {
    std::vector<T> scores;
#pragma omp for schedule(static)
    for (int64_t e = 0; e < E; ++e) {
      const int64_t lo = batch.nbr_offsets[static_cast<size_t>(e)];
      const int64_t hi = batch.nbr_offsets[static_cast<size_t>(e) + 1];
      const int64_t deg = hi - lo;
      if (deg == 0) continue;
      if (deg <= cfg.top_k) {
        auto& out = picked[static_cast<size_t>(e)];
        out.assign(batch.nbr_index.begin() + lo, batch.nbr_index.begin() + hi);
        continue;
      }
      std::vector<int64_t> local;
      if (cfg.selection == SelectionMode::kRandomK) {
        rng::SplitMix64 g(rng::mix(selection_seed, static_cast<uint64_t>(layer),
                                   static_cast<uint64_t>(e)));
        local = rng::sample_without_replacement(deg, cfg.top_k, g);
      } else {
        scores.assign(static_cast<size_t>(deg), T(0));
        const T* se = basis->data() + e * d;
        for (int64_t j = 0; j < deg; ++j) {
          const T* sn = basis->data() + batch.nbr_index[static_cast<size_t>(lo + j)] * d;
          T acc = T(0);
          if (cfg.selection == SelectionMode::kEnergyTopK) {
            for (int64_t c = 0; c < d; ++c) {
              const T diff = se[c] - sn[c];
              acc -= diff * diff;  // exp(-dist^2/tau) orders identically
            }
          } else {  // dot-product similarity
            for (int64_t c = 0; c < d; ++c) acc += se[c] * sn[c];
          }
          scores[static_cast<size_t>(j)] = acc;
        }
        local = select_topk(scores, cfg.top_k);
      }
      auto& out = picked[static_cast<size_t>(e)];
      out.reserve(local.size());
      for (int64_t j : local)
        out.push_back(batch.nbr_index[static_cast<size_t>(lo + j)]);
    }
  }
  for (int64_t e = 0; e < E; ++e) {
    const auto& out = picked[static_cast<size_t>(e)];
    sel_flat.insert(sel_flat.end(), out.begin(), out.end());
    sel_offsets.push_back(static_cast<int64_t>(sel_flat.size()));
  }
}

}  // namespace detail

// Full propagation: rel-embedding lookup, `hops` update layers, and the two
// query-endpoint messages (mean of incident final edge states; zero vector
// when nothing was sampled).
template <typename T>
ContextForward<T> context_forward(Tape<T>& tape, const ParameterStore<T>& store,
                                  const ContextBatch& batch, const ContextConfig& cfg,
                                  uint64_t selection_seed) {
  cfg.validate();
  using Id = typename Tape<T>::Id;

  Id cur = tape.gather_rows(tape.param("rel_emb", store.get("rel_emb")), batch.edge_rel);

  std::vector<int64_t> sel_flat, sel_offsets;
  for (int layer = 0; layer < cfg.hops; ++layer) {
    detail::select_neighbors(tape.value(cur), batch, cfg, store.get("context.g"), layer,
                             selection_seed, sel_flat, sel_offsets);
    const Id nbhd = tape.segment_mean(tape.gather_rows(cur, sel_flat), sel_offsets);

    const std::string p = "context.layer" + std::to_string(layer) + ".";
    auto lp = [&](const char* n) { return tape.param(p + n, store.get(p + n)); };
    const Id a = tape.add(tape.matmul(cur, lp("w_self")), lp("b_self"));
    const Id c = tape.add(tape.matmul(nbhd, lp("w_nbhd")), lp("b_nbhd"));
    switch (cfg.aggregator) {
      case AggregatorKind::kAttention:
        cur = tape.relu(tape.add(tape.matmul(tape.headwise_gate(a, c, cfg.heads),
                                             lp("w_out")),
                                 lp("b_out")));
        break;
      case AggregatorKind::kMean:
        cur = tape.relu(tape.add(tape.matmul(tape.scale(tape.add(a, c), T(0.5)),
                                             lp("w_out")),
                                 lp("b_out")));
        break;
      case AggregatorKind::kConcatMlp:
        cur = tape.relu(tape.add(tape.matmul(tape.concat_cols(a, c), lp("w_cat")),
                                 lp("b_out")));
        break;
    }
  }

  ContextForward<T> out;
  out.final_states = cur;
  out.head_message =
      tape.segment_mean(tape.gather_rows(cur, batch.head_inc_index), batch.head_inc_offsets);
  out.tail_message =
      tape.segment_mean(tape.gather_rows(cur, batch.tail_inc_index), batch.tail_inc_offsets);
  return out;
}

// Single-subgraph conveniences used by tests and the exporters.

template <typename T>
ContextForward<T> context_forward_single(Tape<T>& tape, const ParameterStore<T>& store,
                                         const ContextSubgraph& sub,
                                         const ContextConfig& cfg, uint64_t selection_seed) {
  const ContextBatch batch = ContextBatch::assemble({&sub});
  return context_forward(tape, store, batch, cfg, selection_seed);
}

}  // namespace fms
