// Command-line entry point: train / eval / export subcommands.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fms/config.hpp"
#include "fms/eval.hpp"
#include "fms/export.hpp"
#include "fms/graph.hpp"
#include "fms/scorer.hpp"
#include "fms/train.hpp"

namespace {

using namespace fms;

std::string dataset_name(const std::string& path) {
  return std::filesystem::path(path).filename().string();
}

void add_common_options(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--dataset", cfg.dataset, "dataset directory (train/valid/test.txt)");
  cmd->add_option("--task", cfg.task, "relation | entity");
  cmd->add_option("--setting", cfg.setting, "transductive | inductive");
  cmd->add_option("--dim", cfg.dim, "hidden dimension");
  cmd->add_option("--hops", cfg.hops, "context hops / aggregation layers");
  cmd->add_option("--topk", cfg.topk, "neighbors kept per edge per layer");
  cmd->add_option("--neighbor-samples", cfg.neighbor_samples, "incident edges sampled per node per hop");
  cmd->add_option("--heads", cfg.heads, "attention heads");
  cmd->add_option("--temperature", cfg.temperature, "energy score temperature");
  cmd->add_option("--sigma", cfg.sigma, "flow path noise std");
  cmd->add_option("--lambda", cfg.lambda, "field-regression loss weight");
  cmd->add_option("--lr", cfg.lr, "Adam learning rate");
  cmd->add_option("--l2", cfg.l2, "L2 penalty weight");
  cmd->add_option("--epochs", cfg.epochs, "training epochs");
  cmd->add_option("--batch-size", cfg.batch_size, "triples (or entity queries) per batch");
  cmd->add_option("--coupling", cfg.coupling, "paired | ot");
  cmd->add_option("--inference", cfg.inference, "midpoint | mc:<S>");
  cmd->add_option("--ablation", cfg.ablation, "none | no-topk | no-energy-score | no-flow");
  cmd->add_option("--seed", cfg.seed, "master seed");
  cmd->add_option("--out", cfg.out, "output directory");
  cmd->add_option("--checkpoint", cfg.checkpoint, "checkpoint path");
  cmd->add_option("--candidate-cap", cfg.candidate_cap, "entity ranking candidate cap");
  cmd->add_option("--negatives", cfg.negatives, "entity-task negatives per query");
  cmd->add_option("--valid-max-queries", cfg.valid_max_queries,
                  "cap validation queries used for model selection (0 = all)");
  cmd->add_option("--split", cfg.split, "eval split: valid | test");
}

// Evaluate a parameter store on the configured split, per protocol.
RankingReport run_eval(const Dataset& ds, const ParamStoref& store, const RunConfig& rc,
                       bool per_category) {
  const ModelConfig mcfg = rc.model_config(ds.num_relations());
  EvalOptions opts;
  opts.candidate_cap = rc.candidate_cap;
  opts.per_category = per_category;
  opts.seed = rc.seed;

  const std::vector<RelationCategory> cats =
      categorize_relations(ds.train, ds.num_relations());

  const bool inductive = ds.mode == DatasetMode::kInductive;
  const std::vector<Triple>& queries =
      inductive ? ds.inductive->queries : (rc.split == "valid" ? ds.valid : ds.test);
  const std::vector<Triple>& graph_triples = inductive ? ds.inductive->observed : ds.train;
  const int64_t n_entities =
      inductive ? ds.inductive->entities.size() : ds.num_entities();
  const KnowledgeGraph graph(graph_triples, n_entities, ds.num_relations());
  const Scorerf scorer(graph, store, mcfg, rng::mix(rc.seed, rng::tag("eval-ctx")));

  if (rc.task_kind() == TaskKind::kRelation) {
    const FilterIndex filter =
        inductive ? FilterIndex::build_relation({&ds.inductive->observed, &ds.inductive->queries})
                  : FilterIndex::build_relation({&ds.train, &ds.valid, &ds.test});
    return evaluate_relation_task(
        queries, filter, ds.num_relations(),
        [&](int32_t h, int32_t t, int32_t r) { return scorer.relation_scores(h, t, r); },
        &cats, opts);
  }
  const FilterIndex filter =
      inductive ? FilterIndex::build_entity({&ds.inductive->observed, &ds.inductive->queries})
                : FilterIndex::build_entity({&ds.train, &ds.valid, &ds.test});
  return evaluate_entity_task(
      queries, filter, n_entities,
      [&](int32_t fixed, int32_t rel, const std::vector<int32_t>& cands, bool tail_q,
          int32_t truth) { return scorer.entity_scores(fixed, rel, cands, tail_q, truth); },
      &cats, opts);
}

nlohmann::json metrics_json(const RankingReport& report, const RunConfig& rc) {
  nlohmann::json j;
  j["task"] = rc.task;
  j["dataset"] = dataset_name(rc.dataset);
  j["setting"] = rc.setting;
  j["filtered"] = true;
  j["mrr"] = report.overall.mrr;
  j["hits1"] = report.overall.hits1;
  j["hits3"] = report.overall.hits3;
  j["hits10"] = report.overall.hits10;
  j["num_queries"] = report.overall.num_queries;
  j["candidate_cap"] = rc.candidate_cap;
  nlohmann::json pc = nlohmann::json::object();
  for (const auto& [name, m] : report.per_category) {
    pc[name] = {{"mrr", m.mrr},
                {"hits1", m.hits1},
                {"hits3", m.hits3},
                {"hits10", m.hits10},
                {"num_queries", m.num_queries}};
  }
  j["per_category"] = pc;
  return j;
}

void validate_checkpoint(const ParamStoref& store, const Dataset& ds, const RunConfig& rc) {
  const ModelConfig mcfg = rc.model_config(ds.num_relations());
  const char* required[] = {"rel_emb",  "context.g", "flow.w1",  "flow.b1",
                            "flow.w2",  "flow.b2",   "score.w1", "score.b1",
                            "score.w2", "score.b2"};
  for (const char* name : required)
    if (!store.has(name)) throw DataError("checkpoint is missing tensor '" + std::string(name) + "'");
  const Tensorf& emb = store.get("rel_emb");
  if (emb.dim(0) != ds.num_relations())
    throw DataError("checkpoint tensor 'rel_emb' has " + std::to_string(emb.dim(0)) +
                    " rows but the dataset has " + std::to_string(ds.num_relations()) +
                    " relations");
  if (emb.dim(1) != mcfg.context.dim)
    throw DataError("checkpoint tensor 'rel_emb' has dim " + std::to_string(emb.dim(1)) +
                    " but the run is configured with dim " + std::to_string(mcfg.context.dim));
  const Tensorf& w1 = store.get("score.w1");
  if (w1.dim(0) != mcfg.score_input_width())
    throw DataError("checkpoint tensor 'score.w1' expects input width " +
                    std::to_string(w1.dim(0)) + " but task '" + rc.task + "' needs " +
                    std::to_string(mcfg.score_input_width()));
  const Tensorf& w2 = store.get("score.w2");
  const int64_t head_out = rc.task_kind() == TaskKind::kRelation ? ds.num_relations() : 1;
  if (w2.dim(1) != head_out)
    throw DataError("checkpoint tensor 'score.w2' has " + std::to_string(w2.dim(1)) +
                    " outputs but task '" + rc.task + "' needs " + std::to_string(head_out));
}

int cmd_train(RunConfig rc) {
  if (rc.dataset.empty()) throw DataError("--dataset is required");
  const Dataset ds = load_dataset(rc.dataset, rc.dataset_mode());
  std::filesystem::create_directories(rc.out);

  {
    std::ofstream rcfg(rc.out + "/resolved_config");
    rcfg << rc.resolved_text();
  }
  std::ofstream jsonl(rc.out + "/epochs.jsonl");

  const TrainConfig tc = rc.train_config();
  const TrainResult result = train_model(ds, tc, &jsonl);

  const std::string ckpt_path =
      rc.checkpoint.empty() ? rc.out + "/checkpoint.fms" : rc.checkpoint;
  save_checkpoint(result.best_params, ckpt_path);

  const RankingReport report = run_eval(ds, result.best_params, rc, true);
  const nlohmann::json j = metrics_json(report, rc);
  {
    std::ofstream mf(rc.out + "/metrics.json");
    mf << j.dump(2) << "\n";
  }
  std::cout << j.dump(2) << "\n";
  std::cerr << "best epoch " << result.best_epoch << ", valid MRR " << result.best_valid_mrr
            << ", checkpoint " << ckpt_path << "\n";
  return 0;
}

int cmd_eval(RunConfig rc, bool out_given) {
  if (rc.dataset.empty()) throw DataError("--dataset is required");
  if (rc.checkpoint.empty()) throw DataError("--checkpoint is required");
  if (rc.split != "valid" && rc.split != "test")
    throw DataError("--split must be valid or test, got '" + rc.split + "'");
  const Dataset ds = load_dataset(rc.dataset, rc.dataset_mode());
  const ParamStoref store = load_checkpoint(rc.checkpoint);
  validate_checkpoint(store, ds, rc);

  const RankingReport report = run_eval(ds, store, rc, true);
  const nlohmann::json j = metrics_json(report, rc);
  std::cout << j.dump(2) << "\n";
  if (out_given) {
    std::filesystem::create_directories(rc.out);
    std::ofstream mf(rc.out + "/metrics.json");
    mf << j.dump(2) << "\n";
  }
  return 0;
}

int cmd_export(RunConfig rc, const std::string& kind, int64_t max_rows) {
  if (rc.dataset.empty()) throw DataError("--dataset is required");
  if (rc.checkpoint.empty()) throw DataError("--checkpoint is required");
  const Dataset ds = load_dataset(rc.dataset, rc.dataset_mode());
  const ParamStoref store = load_checkpoint(rc.checkpoint);
  validate_checkpoint(store, ds, rc);
  const ModelConfig mcfg = rc.model_config(ds.num_relations());
  const KnowledgeGraph graph(ds.train, ds.num_entities(), ds.num_relations());
  std::filesystem::create_directories(rc.out);

  const uint64_t seed = rng::mix(rc.seed, rng::tag("eval-ctx"));
  if (kind == "correlation") {
    export_correlation(ds, graph, store, mcfg, seed, rc.out + "/correlation.csv");
    std::cout << rc.out + "/correlation.csv" << "\n";
  } else if (kind == "flowvis") {
    export_flowvis(ds, graph, store, mcfg, seed, rc.out + "/flowvis.csv", max_rows);
    std::cout << rc.out + "/flowvis.csv" << "\n";
  } else {
    throw DataError("export kind must be correlation or flowvis, got '" + kind + "'");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"knowledge graph completion with flow-modulated scoring"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string config_path;
  std::string export_kind;
  int64_t export_max_rows = 0;

  // File values act as defaults; explicit flags override them.
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--config") config_path = argv[i + 1];
  if (!config_path.empty()) {
    try {
      apply_config_file(cfg, config_path);
    } catch (const fms::DataError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    }
  }

  CLI::App* train = app.add_subcommand("train", "train a model and evaluate the best checkpoint");
  add_common_options(train, cfg);
  train->add_option("--config", config_path, "config file (key = value lines)");

  CLI::App* eval = app.add_subcommand("eval", "evaluate an existing checkpoint");
  add_common_options(eval, cfg);
  eval->add_option("--config", config_path, "config file (key = value lines)");

  CLI::App* exp = app.add_subcommand("export", "export case-study CSVs");
  add_common_options(exp, cfg);
  exp->add_option("--config", config_path, "config file (key = value lines)");
  exp->add_option("kind", export_kind, "correlation | flowvis")->required();
  exp->add_option("--max-rows", export_max_rows, "row cap for flowvis (0 = all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (train->parsed()) return cmd_train(cfg);
    if (eval->parsed()) return cmd_eval(cfg, eval->count("--out") > 0);
    if (exp->parsed()) return cmd_export(cfg, export_kind, export_max_rows);
  } catch (const fms::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const fms::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
