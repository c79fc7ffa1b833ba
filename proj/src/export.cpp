#include "fms/export.hpp"

#include <fstream>
#include <vector>

#include "fms/context.hpp"
#include "fms/flow.hpp"
#include "fms/rng.hpp"
#include "fms/sampler.hpp"

namespace fms {

namespace {

std::ofstream open_csv(const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open for writing: " + path);
  return os;
}

struct QueryForward {
  std::vector<float> static_score_v;
  std::vector<float> modulated_v;
  std::vector<float> head_msg;
  std::vector<float> tail_msg;
  std::vector<float> probs;          // relation task only
  std::vector<char> context_rels;    // presence per relation
};

QueryForward forward_query(const KnowledgeGraph& graph, const ParamStoref& store,
                           const ModelConfig& cfg, uint64_t seed, const Triple& q) {
  const auto excluded = graph.duplicate_edge_ids(q.head, q.rel, q.tail);
  const ContextSubgraph sub = sample_context(graph, q.head, q.tail, cfg.context.hops,
                                             cfg.context.neighbor_samples, excluded, seed);
  QueryForward out;
  out.context_rels.assign(static_cast<size_t>(cfg.num_relations), 0);
  for (const SubgraphEdge& e : sub.edges) out.context_rels[static_cast<size_t>(e.rel)] = 1;

  Tapef tape;
  const ContextBatch batch = ContextBatch::assemble({&sub});
  const auto ctx = context_forward(tape, store, batch, cfg.context, seed);
  const auto s = static_score(tape, store, ctx.head_message, ctx.tail_message);
  auto s_mod = s;
  if (!cfg.no_flow) {
    const auto v =
        modulation_vector(tape, store, ctx.head_message, ctx.tail_message, cfg.flow, seed);
    s_mod = modulate(tape, s, v);
  }
  const auto logits = relation_logits(tape, store, s_mod);
  const auto probs = tape.softmax_rows(logits);

  out.static_score_v = tape.value(s).vec();
  out.modulated_v = tape.value(s_mod).vec();
  out.head_msg = tape.value(ctx.head_message).vec();
  out.tail_msg = tape.value(ctx.tail_message).vec();
  out.probs = tape.value(probs).vec();
  return out;
}

}  // namespace

void export_correlation(const Dataset& ds, const KnowledgeGraph& graph,
                        const ParamStoref& store, const ModelConfig& cfg, uint64_t seed,
                        const std::string& csv_path) {
  const int64_t R = cfg.num_relations;
  std::vector<double> m(static_cast<size_t>(R * R), 0.0);

  std::vector<QueryForward> fwd(ds.test.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (size_t i = 0; i < ds.test.size(); ++i)
    fwd[i] = forward_query(graph, store, cfg, seed, ds.test[i]);

  for (const QueryForward& f : fwd)
    for (int64_t i = 0; i < R; ++i)
      if (f.context_rels[static_cast<size_t>(i)])
        for (int64_t j = 0; j < R; ++j)
          m[static_cast<size_t>(i * R + j)] += f.probs[static_cast<size_t>(j)];
  const double inv = ds.test.empty() ? 0.0 : 1.0 / static_cast<double>(ds.test.size());
  for (double& x : m) x *= inv;

  auto os = open_csv(csv_path);
  os << "context_relation";
  for (int64_t j = 0; j < R; ++j) os << "," << ds.relations.name_of(static_cast<int32_t>(j));
  os << "\n";
  for (int64_t i = 0; i < R; ++i) {
    os << ds.relations.name_of(static_cast<int32_t>(i));
    for (int64_t j = 0; j < R; ++j) os << "," << m[static_cast<size_t>(i * R + j)];
    os << "\n";
  }
}

void export_flowvis(const Dataset& ds, const KnowledgeGraph& graph, const ParamStoref& store,
                    const ModelConfig& cfg, uint64_t seed, const std::string& csv_path,
                    int64_t max_rows) {
  const int64_t d = cfg.context.dim;
  const int64_t n = max_rows > 0
                        ? std::min<int64_t>(max_rows, static_cast<int64_t>(ds.test.size()))
                        : static_cast<int64_t>(ds.test.size());

  std::vector<QueryForward> fwd(static_cast<size_t>(n));
#pragma omp parallel for schedule(dynamic, 4)
  for (int64_t i = 0; i < n; ++i)
    fwd[static_cast<size_t>(i)] = forward_query(graph, store, cfg, seed, ds.test[static_cast<size_t>(i)]);

  auto os = open_csv(csv_path);
  os << "query,head,relation,tail";
  for (const char* base : {"static", "modulated", "head_msg", "tail_msg"})
    for (int64_t j = 0; j < d; ++j) os << "," << base << "_" << j;
  os << "\n";
  for (int64_t i = 0; i < n; ++i) {
    const Triple& q = ds.test[static_cast<size_t>(i)];
    const QueryForward& f = fwd[static_cast<size_t>(i)];
    os << i << "," << ds.entities.name_of(q.head) << "," << ds.relations.name_of(q.rel) << ","
       << ds.entities.name_of(q.tail);
    for (const auto* vec : {&f.static_score_v, &f.modulated_v, &f.head_msg, &f.tail_msg})
      for (int64_t j = 0; j < d; ++j) os << "," << (*vec)[static_cast<size_t>(j)];
    os << "\n";
  }
}

}  // namespace fms
