#pragma once
// Case-study CSV exporters: relation co-activation matrix and per-query
// score/embedding dumps for external projection. No rendering here.

#include <cstdint>
#include <string>

#include "fms/dataset.hpp"
#include "fms/graph.hpp"
#include "fms/model.hpp"
#include "fms/param_store.hpp"

namespace fms {

// |R| x |R| matrix: mean over test queries of
//   presence(context relation i) * predicted_prob(relation j).
void export_correlation(const Dataset& ds, const KnowledgeGraph& graph,
                        const ParamStoref& store, const ModelConfig& cfg, uint64_t seed,
                        const std::string& csv_path);

// Per-query rows: static score vector, modulated score vector, and the two
// context messages. max_rows <= 0 dumps every test query.
void export_flowvis(const Dataset& ds, const KnowledgeGraph& graph, const ParamStoref& store,
                    const ModelConfig& cfg, uint64_t seed, const std::string& csv_path,
                    int64_t max_rows);

}  // namespace fms
