#include "fms/train.hpp"

#include <chrono>
#include <cmath>
#include <ostream>

#include <json.hpp>

#include "fms/graph.hpp"
#include "fms/rng.hpp"
#include "fms/scorer.hpp"

namespace fms {

void TrainConfig::validate() const {
  context.validate();
  flow.validate();
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(lr > 0)) throw std::invalid_argument("train: lr must be > 0");
  if (l2 < 0) throw std::invalid_argument("train: l2 must be >= 0");
  if (lambda < 0) throw std::invalid_argument("train: lambda must be >= 0");
  if (negatives_per_query < 1)
    throw std::invalid_argument("train: negatives_per_query must be >= 1");
}

ModelConfig TrainConfig::model_config(int64_t num_relations) const {
  ModelConfig m;
  m.task = task;
  m.context = context;
  m.flow = flow;
  m.num_relations = num_relations;
  m.no_flow = no_flow;
  return m;
}

namespace {

constexpr float kAdamBeta1 = 0.9f;
constexpr float kAdamBeta2 = 0.999f;
constexpr float kAdamEps = 1e-8f;

struct EntityQuery {
  Triple triple;
  bool tail_query;
};

double validation_mrr(const Dataset& ds, const KnowledgeGraph& graph,
                      const ParamStoref& store, const ModelConfig& mcfg,
                      const TrainConfig& cfg, const FilterIndex& filter) {
  const Scorerf scorer(graph, store, mcfg, rng::mix(cfg.seed, rng::tag("eval-ctx")));
  EvalOptions opts;
  opts.candidate_cap = cfg.candidate_cap;
  opts.seed = cfg.seed;
  opts.max_queries = cfg.valid_max_queries;
  if (cfg.task == TaskKind::kRelation) {
    const auto report = evaluate_relation_task(
        ds.valid, filter, ds.num_relations(),
        [&](int32_t h, int32_t t, int32_t r) { return scorer.relation_scores(h, t, r); },
        nullptr, opts);
    return report.overall.mrr;
  }
  const auto report = evaluate_entity_task(
      ds.valid, filter, ds.num_entities(),
      [&](int32_t fixed, int32_t rel, const std::vector<int32_t>& cands, bool tail_q,
          int32_t truth) { return scorer.entity_scores(fixed, rel, cands, tail_q, truth); },
      nullptr, opts);
  return report.overall.mrr;
}

}  // namespace

TrainResult train_model(const Dataset& ds, const TrainConfig& cfg, std::ostream* jsonl) {
  cfg.validate();
  const ModelConfig mcfg = cfg.model_config(ds.num_relations());
  const KnowledgeGraph graph(ds.train, ds.num_entities(), ds.num_relations());

  ParamStoref store;
  {
    rng::SplitMix64 g(rng::mix(cfg.seed, rng::tag("init")));
    create_model_params(store, mcfg, g);
  }

  const FilterIndex filter =
      cfg.task == TaskKind::kRelation
          ? FilterIndex::build_relation({&ds.train, &ds.valid, &ds.test})
          : FilterIndex::build_entity({&ds.train, &ds.valid, &ds.test});

  TrainResult result;
  const float lambda = static_cast<float>(cfg.lambda);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const uint64_t ctx_seed = rng::mix(cfg.seed, rng::tag("ctx"), static_cast<uint64_t>(epoch));
    const uint64_t sel_seed =
        rng::mix(cfg.seed, rng::tag("select"), static_cast<uint64_t>(epoch));
    double loss_sum = 0;
    int64_t loss_batches = 0;

    if (cfg.task == TaskKind::kRelation) {
      std::vector<int64_t> order(ds.train.size());
      for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int64_t>(i);
      rng::SplitMix64 sh(rng::mix(cfg.seed, rng::tag("shuffle"), static_cast<uint64_t>(epoch)));
      rng::shuffle(order, sh);

      for (size_t base = 0; base < order.size(); base += static_cast<size_t>(cfg.batch_size)) {
        const size_t b_end = std::min(order.size(), base + static_cast<size_t>(cfg.batch_size));
        const int64_t bsz = static_cast<int64_t>(b_end - base);

        std::vector<ContextSubgraph> subs(static_cast<size_t>(bsz));
#pragma omp parallel for schedule(dynamic, 4)
        for (int64_t i = 0; i < bsz; ++i) {
          const Triple& tr = ds.train[static_cast<size_t>(order[base + static_cast<size_t>(i)])];
          const auto excluded = graph.duplicate_edge_ids(tr.head, tr.rel, tr.tail);
          subs[static_cast<size_t>(i)] =
              sample_context(graph, tr.head, tr.tail, cfg.context.hops,
                             cfg.context.neighbor_samples, excluded, ctx_seed);
        }
        std::vector<const ContextSubgraph*> ptrs(subs.size());
        std::vector<int64_t> targets(subs.size());
        std::vector<uint64_t> flow_seeds(subs.size());
        for (int64_t i = 0; i < bsz; ++i) {
          ptrs[static_cast<size_t>(i)] = &subs[static_cast<size_t>(i)];
          const Triple& tr = ds.train[static_cast<size_t>(order[base + static_cast<size_t>(i)])];
          targets[static_cast<size_t>(i)] = tr.rel;
          flow_seeds[static_cast<size_t>(i)] =
              rng::mix(cfg.seed, rng::tag("flow"), static_cast<uint64_t>(epoch),
                       static_cast<uint64_t>(base + static_cast<size_t>(i)));
        }

        Tapef tape;
        const ContextBatch batch = ContextBatch::assemble(ptrs);
        const auto bl = relation_batch_loss(tape, store, batch, targets, mcfg, lambda,
                                            sel_seed, flow_seeds);
        const float lv = tape.value(bl.loss).item();
        if (!std::isfinite(lv))
          throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) +
                             ", batch " + std::to_string(base / cfg.batch_size));
        tape.backward(bl.loss, store.grads());
        store.adam_step(static_cast<float>(cfg.lr), kAdamBeta1, kAdamBeta2, kAdamEps,
                        static_cast<float>(cfg.l2));
        loss_sum += lv;
        ++loss_batches;
      }
    } else {
      std::vector<EntityQuery> queries;
      queries.reserve(ds.train.size() * 2);
      for (const Triple& tr : ds.train) {
        queries.push_back({tr, true});
        queries.push_back({tr, false});
      }
      rng::SplitMix64 sh(rng::mix(cfg.seed, rng::tag("shuffle"), static_cast<uint64_t>(epoch)));
      rng::shuffle(queries, sh);

      const int64_t group = 1 + cfg.negatives_per_query;
      const int64_t nE = ds.num_entities();

      for (size_t base = 0; base < queries.size(); base += static_cast<size_t>(cfg.batch_size)) {
        const size_t b_end =
            std::min(queries.size(), base + static_cast<size_t>(cfg.batch_size));
        const int64_t n_q = static_cast<int64_t>(b_end - base);
        const int64_t rows = n_q * group;

        // candidate entity per row: ground truth first, then corruptions
        std::vector<int32_t> row_cand(static_cast<size_t>(rows));
        std::vector<int64_t> rel_of_row(static_cast<size_t>(rows));
        std::vector<uint64_t> flow_seeds(static_cast<size_t>(rows));
        for (int64_t q = 0; q < n_q; ++q) {
          const EntityQuery& eq = queries[base + static_cast<size_t>(q)];
          const int32_t truth = eq.tail_query ? eq.triple.tail : eq.triple.head;
          rng::SplitMix64 ng(rng::mix(cfg.seed, rng::tag("neg"), static_cast<uint64_t>(epoch),
                                      static_cast<uint64_t>(base + static_cast<size_t>(q))));
          for (int64_t c = 0; c < group; ++c) {
            const int64_t row = q * group + c;
            int32_t cand = truth;
            if (c > 0) {
              do {
                cand = static_cast<int32_t>(rng::bounded(ng, static_cast<uint64_t>(nE)));
              } while (cand == truth && nE > 1);
            }
            row_cand[static_cast<size_t>(row)] = cand;
            rel_of_row[static_cast<size_t>(row)] = eq.triple.rel;
            flow_seeds[static_cast<size_t>(row)] =
                rng::mix(cfg.seed, rng::tag("flow"), static_cast<uint64_t>(epoch),
                         static_cast<uint64_t>((base + static_cast<size_t>(q)) * 131071 +
                                               static_cast<size_t>(c)));
          }
        }

        std::vector<ContextSubgraph> subs(static_cast<size_t>(rows));
#pragma omp parallel for schedule(dynamic, 8)
        for (int64_t r = 0; r < rows; ++r) {
          const EntityQuery& eq = queries[base + static_cast<size_t>(r / group)];
          const int32_t truth = eq.tail_query ? eq.triple.tail : eq.triple.head;
          const int32_t cand = row_cand[static_cast<size_t>(r)];
          const int32_t h = eq.tail_query ? eq.triple.head : cand;
          const int32_t t = eq.tail_query ? cand : eq.triple.tail;
          const int32_t th = eq.tail_query ? eq.triple.head : truth;
          const int32_t tt = eq.tail_query ? truth : eq.triple.tail;
          const auto excluded = graph.duplicate_edge_ids(th, eq.triple.rel, tt);
          subs[static_cast<size_t>(r)] =
              sample_context(graph, h, t, cfg.context.hops, cfg.context.neighbor_samples,
                             excluded, ctx_seed);
        }
        std::vector<const ContextSubgraph*> ptrs(subs.size());
        for (size_t i = 0; i < subs.size(); ++i) ptrs[i] = &subs[i];

        Tapef tape;
        const ContextBatch batch = ContextBatch::assemble(ptrs);
        const auto bl = entity_batch_loss(tape, store, batch, rel_of_row, group, mcfg,
                                          lambda, sel_seed, flow_seeds);
        const float lv = tape.value(bl.loss).item();
        if (!std::isfinite(lv))
          throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) +
                             ", batch " + std::to_string(base / cfg.batch_size));
        tape.backward(bl.loss, store.grads());
        store.adam_step(static_cast<float>(cfg.lr), kAdamBeta1, kAdamBeta2, kAdamEps,
                        static_cast<float>(cfg.l2));
        loss_sum += lv;
        ++loss_batches;
      }
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss =
        loss_sum / std::max<int64_t>(1, loss_batches) + cfg.l2 * store.l2_norm_sq();
    log.valid_mrr = validation_mrr(ds, graph, store, mcfg, cfg, filter);
    log.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(log);

    if (log.valid_mrr > result.best_valid_mrr) {
      result.best_valid_mrr = log.valid_mrr;
      result.best_epoch = epoch;
      result.best_params = store.snapshot();
    }

    if (jsonl) {
      nlohmann::json j;
      j["epoch"] = log.epoch;
      j["train_loss"] = log.train_loss;
      j["valid_mrr"] = log.valid_mrr;
      j["seconds"] = log.seconds;
      (*jsonl) << j.dump() << "\n" << std::flush;
    }
  }
  return result;
}

}  // namespace fms
