#pragma once
// Joint training: shuffled minibatches, per-batch context sampling with the
// query edge scrubbed, one tape per batch, Adam updates, per-epoch filtered
// validation MRR and best-model snapshotting.

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "fms/dataset.hpp"
#include "fms/eval.hpp"
#include "fms/model.hpp"
#include "fms/param_store.hpp"

namespace fms {

struct TrainConfig {
  TaskKind task = TaskKind::kRelation;
  int epochs = 20;
  int batch_size = 128;
  double lr = 5e-3;
  double l2 = 1e-7;
  double lambda = 1.2;
  int negatives_per_query = 64;  // entity task
  uint64_t seed = 0;
  ContextConfig context;
  FlowConfig flow;
  bool no_flow = false;
  int64_t candidate_cap = 10000;
  // Cap on validation queries used for per-epoch model selection (0 = all).
  int64_t valid_max_queries = 0;

  void validate() const;
  ModelConfig model_config(int64_t num_relations) const;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0;
  double valid_mrr = 0;
  double seconds = 0;
};

struct TrainResult {
  ParamStoref best_params;
  double best_valid_mrr = -1;
  int best_epoch = -1;
  std::vector<EpochLog> log;
};

// jsonl, when given, receives one {"epoch","train_loss","valid_mrr","seconds"}
// line per epoch.
TrainResult train_model(const Dataset& ds, const TrainConfig& cfg, std::ostream* jsonl);

}  // namespace fms
