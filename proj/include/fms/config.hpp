#pragma once
// Run configuration shared by the CLI subcommands. Field names double as
// the config-file keys (one "key = value" per line, # comments) and the
// long flag names; flags win over file values.

#include <cstdint>
#include <string>

#include "fms/train.hpp"

namespace fms {

struct RunConfig {
  std::string dataset;
  std::string task = "relation";        // relation | entity
  std::string setting = "transductive";  // transductive | inductive
  int64_t dim = 64;
  int hops = 2;
  int topk = 3;
  int neighbor_samples = 8;
  int heads = 4;
  double temperature = 0.95;
  double sigma = 0.1;
  double lambda = 1.2;
  double lr = 5e-3;
  double l2 = 1e-7;
  int epochs = 20;
  int batch_size = 128;
  std::string coupling = "paired";    // paired | ot
  std::string inference = "midpoint";  // midpoint | mc:<S>
  std::string ablation = "none";       // none | no-topk | no-energy-score | no-flow
  uint64_t seed = 0;
  std::string out = "runs/out";
  std::string checkpoint;
  int64_t candidate_cap = 10000;
  int negatives = 64;
  int64_t valid_max_queries = 0;
  std::string split = "test";  // eval split

  DatasetMode dataset_mode() const;
  TaskKind task_kind() const;
  TrainConfig train_config() const;
  ModelConfig model_config(int64_t num_relations) const;

  // Deterministic "key = value" dump, parseable by parse_config_file.
  std::string resolved_text() const;
};

// Reads key = value lines (UTF-8, # comments) into an existing config.
// Unknown keys are an error.
void apply_config_file(RunConfig& cfg, const std::string& path);

}  // namespace fms
