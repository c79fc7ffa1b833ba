#pragma once
// Score assembly: context messages -> static score -> flow modulation ->
// task head -> loss. The static score lives in the d-dimensional hidden
// space (sigmoid of a linear map over the concatenated messages); the flow
// field multiplies it elementwise; a final linear head maps to |R| relation
// logits or to one logit per candidate entity pair.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fms/context.hpp"
#include "fms/flow.hpp"
#include "fms/param_store.hpp"
#include "fms/tape.hpp"

namespace fms {

enum class TaskKind { kRelation, kEntity };

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelConfig {
  TaskKind task = TaskKind::kRelation;
  ContextConfig context;
  FlowConfig flow;
  int64_t num_relations = 0;
  bool no_flow = false;  // ablation: v == 1 and the field loss is dropped

  int64_t score_input_width() const {
    return (task == TaskKind::kEntity ? 3 : 2) * context.dim;
  }
};

template <typename T>
void create_model_params(ParameterStore<T>& store, const ModelConfig& cfg,
                         rng::SplitMix64& g) {
  if (cfg.num_relations < 1) throw std::invalid_argument("model: num_relations must be >= 1");
  create_context_params(store, cfg.context, cfg.num_relations, g);
  create_flow_params(store, cfg.context.dim, g);
  const int64_t d = cfg.context.dim;
  store.create_xavier("score.w1", cfg.score_input_width(), d, g);
  store.create("score.b1", {d});
  const int64_t head_out = cfg.task == TaskKind::kRelation ? cfg.num_relations : 1;
  store.create_xavier("score.w2", d, head_out, g);
  store.create("score.b2", {head_out});
}

// sigmoid(W1 . [m_h, m_t (, x_r)] + b1), in (0,1)^d per row.
template <typename T>
typename Tape<T>::Id static_score(Tape<T>& tape, const ParameterStore<T>& store,
                                  typename Tape<T>::Id head_msg,
                                  typename Tape<T>::Id tail_msg,
                                  typename Tape<T>::Id rel_cond = -1) {
  auto in = tape.concat_cols(head_msg, tail_msg);
  if (rel_cond >= 0) in = tape.concat_cols(in, rel_cond);
  return tape.sigmoid(tape.add(tape.matmul(in, tape.param("score.w1", store.get("score.w1"))),
                               tape.param("score.b1", store.get("score.b1"))));
}

// Elementwise product of the static score and the field output.
template <typename T>
typename Tape<T>::Id modulate(Tape<T>& tape, typename Tape<T>::Id score,
                              typename Tape<T>::Id field) {
  return tape.mul(score, field);
}

// d -> |R| relation logits.
template <typename T>
typename Tape<T>::Id relation_logits(Tape<T>& tape, const ParameterStore<T>& store,
                                     typename Tape<T>::Id score_vec) {
  return tape.add(tape.matmul(score_vec, tape.param("score.w2", store.get("score.w2"))),
                  tape.param("score.b2", store.get("score.b2")));
}

// d -> 1 logit per candidate pair row.
template <typename T>
typename Tape<T>::Id entity_logit(Tape<T>& tape, const ParameterStore<T>& store,
                                  typename Tape<T>::Id score_vec) {
  return tape.add(tape.matmul(score_vec, tape.param("score.w2", store.get("score.w2"))),
                  tape.param("score.b2", store.get("score.b2")));
}

// pred + lambda * cfm (+ optional externally computed penalty term).
template <typename T>
typename Tape<T>::Id total_loss(Tape<T>& tape, typename Tape<T>::Id pred_loss,
                                typename Tape<T>::Id cfm_loss, T lambda,
                                typename Tape<T>::Id l2_term = -1) {
  auto out = pred_loss;
  if (cfm_loss >= 0 && lambda != T(0)) out = tape.add(out, tape.scale(cfm_loss, lambda));
  if (l2_term >= 0) out = tape.add(out, l2_term);
  return out;
}

// ---- batched training losses ----

template <typename T>
struct BatchLoss {
  typename Tape<T>::Id loss = -1;
  T pred_value = T(0);
  T cfm_value = T(0);
};

// Relation task: one row per triple, targets are relation ids. Flow draws
// are keyed per row by `flow_seeds`. Training-time modulation reuses the
// same stochastic (t, x_t) draw that the field regression sees.
template <typename T>
BatchLoss<T> relation_batch_loss(Tape<T>& tape, const ParameterStore<T>& store,
                                 const ContextBatch& batch,
                                 const std::vector<int64_t>& target_rels,
                                 const ModelConfig& cfg, T lambda, uint64_t selection_seed,
                                 const std::vector<uint64_t>& flow_seeds) {
  const auto ctx = context_forward(tape, store, batch, cfg.context, selection_seed);
  const auto s = static_score(tape, store, ctx.head_message, ctx.tail_message);

  BatchLoss<T> out;
  if (cfg.no_flow) {
    const auto logits = relation_logits(tape, store, s);
    out.loss = tape.cross_entropy_with_logits(logits, target_rels);
    out.pred_value = tape.value(out.loss).item();
    return out;
  }

  const auto fl = flow_training_pass(tape, store, ctx.head_message, ctx.tail_message,
                                     cfg.flow, flow_seeds);
  const auto logits = relation_logits(tape, store, modulate(tape, s, fl.field));
  const auto pred = tape.cross_entropy_with_logits(logits, target_rels);
  out.loss = total_loss(tape, pred, fl.cfm_loss, lambda);
  out.pred_value = tape.value(pred).item();
  out.cfm_value = tape.value(fl.cfm_loss).item();
  return out;
}

// Entity task: rows are candidate pairs grouped per query, ground truth at
// slot 0 of each group of size `group`. rel_of_row conditions the score on
// the observed relation. The field regression only fits the true pairs;
// modulation still applies to every candidate row.
template <typename T>
BatchLoss<T> entity_batch_loss(Tape<T>& tape, const ParameterStore<T>& store,
                               const ContextBatch& batch,
                               const std::vector<int64_t>& rel_of_row, int64_t group,
                               const ModelConfig& cfg, T lambda, uint64_t selection_seed,
                               const std::vector<uint64_t>& flow_seeds) {
  const int64_t rows = batch.num_queries;
  if (group < 1 || rows % group != 0)
    throw ShapeError("entity_batch_loss: rows not divisible by group size");
  const int64_t n_queries = rows / group;

  const auto ctx = context_forward(tape, store, batch, cfg.context, selection_seed);
  const auto x_r = tape.gather_rows(tape.param("rel_emb", store.get("rel_emb")), rel_of_row);
  const auto s = static_score(tape, store, ctx.head_message, ctx.tail_message, x_r);

  BatchLoss<T> out;
  typename Tape<T>::Id logit_col;
  typename Tape<T>::Id cfm = -1;
  if (cfg.no_flow) {
    logit_col = entity_logit(tape, store, s);
  } else {
    const auto fl = flow_training_pass(tape, store, ctx.head_message, ctx.tail_message,
                                       cfg.flow, flow_seeds);
    logit_col = entity_logit(tape, store, modulate(tape, s, fl.field));
    std::vector<int64_t> positives(static_cast<size_t>(n_queries));
    for (int64_t q = 0; q < n_queries; ++q) positives[static_cast<size_t>(q)] = q * group;
    cfm = tape.squared_error(tape.gather_rows(fl.field, positives),
                             tape.gather_rows(fl.u_target, positives));
  }

  const auto grouped = tape.reshape(logit_col, {n_queries, group});
  const auto pred =
      tape.cross_entropy_with_logits(grouped, std::vector<int64_t>(static_cast<size_t>(n_queries), 0));
  out.loss = total_loss(tape, pred, cfm, lambda);
  out.pred_value = tape.value(pred).item();
  if (cfm >= 0) out.cfm_value = tape.value(cfm).item();
  return out;
}

}  // namespace fms
