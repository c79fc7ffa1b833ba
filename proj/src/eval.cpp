#include "fms/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "fms/rng.hpp"

namespace fms {

namespace {

uint64_t pair_key(int32_t a, int32_t b) {
  return (static_cast<uint64_t>(static_cast<uint32_t>(a)) << 32) |
         static_cast<uint64_t>(static_cast<uint32_t>(b));
}

}  // namespace

Metrics compute_metrics(const std::vector<int64_t>& ranks) {
  if (ranks.empty()) throw std::invalid_argument("compute_metrics: empty rank list");
  Metrics m;
  m.num_queries = static_cast<int64_t>(ranks.size());
  for (int64_t r : ranks) {
    if (r < 1) throw std::invalid_argument("compute_metrics: ranks must be positive");
    m.mrr += 1.0 / static_cast<double>(r);
    m.hits1 += r <= 1;
    m.hits3 += r <= 3;
    m.hits10 += r <= 10;
  }
  const double n = static_cast<double>(m.num_queries);
  m.mrr /= n;
  m.hits1 /= n;
  m.hits3 /= n;
  m.hits10 /= n;
  return m;
}

void FilterIndex::sort_all(std::unordered_map<uint64_t, std::vector<int32_t>>& m) {
  for (auto& [k, v] : m) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
}

FilterIndex FilterIndex::build_relation(
    const std::vector<const std::vector<Triple>*>& splits) {
  FilterIndex f;
  for (const auto* split : splits)
    for (const Triple& t : *split) f.rels_[pair_key(t.head, t.tail)].push_back(t.rel);
  sort_all(f.rels_);
  return f;
}

FilterIndex FilterIndex::build_entity(const std::vector<const std::vector<Triple>*>& splits) {
  FilterIndex f;
  for (const auto* split : splits) {
    for (const Triple& t : *split) {
      f.tails_[pair_key(t.head, t.rel)].push_back(t.tail);
      f.heads_[pair_key(t.rel, t.tail)].push_back(t.head);
    }
  }
  sort_all(f.tails_);
  sort_all(f.heads_);
  return f;
}

const std::vector<int32_t>* FilterIndex::true_rels(int32_t h, int32_t t) const {
  auto it = rels_.find(pair_key(h, t));
  return it == rels_.end() ? nullptr : &it->second;
}
const std::vector<int32_t>* FilterIndex::true_tails(int32_t h, int32_t r) const {
  auto it = tails_.find(pair_key(h, r));
  return it == tails_.end() ? nullptr : &it->second;
}
const std::vector<int32_t>* FilterIndex::true_heads(int32_t r, int32_t t) const {
  auto it = heads_.find(pair_key(r, t));
  return it == heads_.end() ? nullptr : &it->second;
}

int64_t filtered_rank(const std::vector<float>& scores, int32_t true_idx,
                      const std::vector<int32_t>* filtered_true) {
  const float s_true = scores[static_cast<size_t>(true_idx)];
  auto is_filtered = [&](int32_t i) {
    return filtered_true &&
           std::binary_search(filtered_true->begin(), filtered_true->end(), i);
  };
  int64_t rank = 1;
  for (int32_t i = 0; i < static_cast<int32_t>(scores.size()); ++i) {
    if (i == true_idx || is_filtered(i)) continue;
    if (scores[static_cast<size_t>(i)] >= s_true) ++rank;  // pessimistic ties
  }
  return rank;
}

const char* category_name(RelationCategory c) {
  switch (c) {
    case RelationCategory::kOneToOne: return "1-1";
    case RelationCategory::kOneToMany: return "1-N";
    case RelationCategory::kManyToOne: return "N-1";
    case RelationCategory::kManyToMany: return "N-N";
  }
  return "?";
}

std::vector<RelationCategory> categorize_relations(const std::vector<Triple>& train,
                                                   int64_t num_relations, double threshold) {
  std::vector<int64_t> triples(static_cast<size_t>(num_relations), 0);
  std::vector<std::unordered_set<int32_t>> heads(static_cast<size_t>(num_relations));
  std::vector<std::unordered_set<int32_t>> tails(static_cast<size_t>(num_relations));
  for (const Triple& t : train) {
    ++triples[static_cast<size_t>(t.rel)];
    heads[static_cast<size_t>(t.rel)].insert(t.head);
    tails[static_cast<size_t>(t.rel)].insert(t.tail);
  }
  std::vector<RelationCategory> out(static_cast<size_t>(num_relations),
                                    RelationCategory::kOneToOne);
  for (int64_t r = 0; r < num_relations; ++r) {
    const auto idx = static_cast<size_t>(r);
    if (triples[idx] == 0) continue;  // unseen relation stays 1-1
    const double tph = static_cast<double>(triples[idx]) / heads[idx].size();
    const double hpt = static_cast<double>(triples[idx]) / tails[idx].size();
    if (tph < threshold && hpt < threshold)
      out[idx] = RelationCategory::kOneToOne;
    else if (tph >= threshold && hpt < threshold)
      out[idx] = RelationCategory::kOneToMany;
    else if (tph < threshold && hpt >= threshold)
      out[idx] = RelationCategory::kManyToOne;
    else
      out[idx] = RelationCategory::kManyToMany;
  }
  return out;
}

namespace {

void append_category_reports(RankingReport& report,
                             const std::vector<std::pair<std::string, std::vector<int64_t>>>&
                                 buckets) {
  for (const auto& [name, ranks] : buckets)
    if (!ranks.empty()) report.per_category.emplace_back(name, compute_metrics(ranks));
}

std::vector<Triple> subsample(const std::vector<Triple>& queries, int64_t cap,
                              uint64_t seed) {
  if (cap <= 0 || static_cast<int64_t>(queries.size()) <= cap) return queries;
  std::vector<Triple> out = queries;
  rng::SplitMix64 g(rng::mix(seed, rng::tag("eval-subsample")));
  rng::shuffle(out, g);
  out.resize(static_cast<size_t>(cap));
  return out;
}

}  // namespace

RankingReport evaluate_relation_task(const std::vector<Triple>& queries,
                                     const FilterIndex& filter, int64_t num_relations,
                                     const RelationScoreFn& score,
                                     const std::vector<RelationCategory>* categories,
                                     const EvalOptions& opts) {
  const std::vector<Triple> qs = subsample(queries, opts.max_queries, opts.seed);
  RankingReport report;
  report.ranks.assign(qs.size(), 0);

#pragma omp parallel for schedule(dynamic, 4)
  for (size_t i = 0; i < qs.size(); ++i) {
    const Triple& q = qs[i];
    const std::vector<float> scores = score(q.head, q.tail, q.rel);
    if (static_cast<int64_t>(scores.size()) != num_relations)
      throw std::runtime_error("relation scorer returned wrong candidate count");
    report.ranks[i] = filtered_rank(scores, q.rel, filter.true_rels(q.head, q.tail));
  }

  report.overall = compute_metrics(report.ranks);
  if (opts.per_category && categories) {
    std::vector<std::pair<std::string, std::vector<int64_t>>> buckets{
        {"1-1", {}}, {"1-N", {}}, {"N-1", {}}, {"N-N", {}}, {"multi", {}}};
    for (size_t i = 0; i < qs.size(); ++i) {
      const Triple& q = qs[i];
      const auto cat = (*categories)[static_cast<size_t>(q.rel)];
      buckets[static_cast<size_t>(cat)].second.push_back(report.ranks[i]);
      const auto* rels = filter.true_rels(q.head, q.tail);
      if (rels && rels->size() >= 2) buckets[4].second.push_back(report.ranks[i]);
    }
    append_category_reports(report, buckets);
  }
  return report;
}

RankingReport evaluate_entity_task(const std::vector<Triple>& queries,
                                   const FilterIndex& filter, int64_t num_entities,
                                   const EntityScoreFn& score,
                                   const std::vector<RelationCategory>* categories,
                                   const EvalOptions& opts) {
  const std::vector<Triple> qs = subsample(queries, opts.max_queries, opts.seed);
  RankingReport report;
  report.ranks.assign(qs.size() * 2, 0);  // tail query then head query per triple

#pragma omp parallel for schedule(dynamic, 2)
  for (size_t i = 0; i < qs.size(); ++i) {
    const Triple& q = qs[i];
    for (const bool tail_query : {true, false}) {
      const int32_t fixed = tail_query ? q.head : q.tail;
      const int32_t truth = tail_query ? q.tail : q.head;
      const auto* known = tail_query ? filter.true_tails(q.head, q.rel)
                                     : filter.true_heads(q.rel, q.tail);

      std::vector<int32_t> candidates;
      int32_t true_pos = 0;
      std::vector<int32_t> filtered_positions;
      if (num_entities <= opts.candidate_cap) {
        candidates.resize(static_cast<size_t>(num_entities));
        for (int32_t e = 0; e < num_entities; ++e) candidates[static_cast<size_t>(e)] = e;
        true_pos = truth;
        if (known)
          for (int32_t e : *known)
            if (e != truth) filtered_positions.push_back(e);
      } else {
        // truth + (cap-1) uniformly sampled non-true entities
        candidates.push_back(truth);
        rng::SplitMix64 g(rng::mix(opts.seed, rng::tag("cand"),
                                   static_cast<uint64_t>(i), tail_query ? 1u : 0u));
        std::unordered_set<int32_t> seen{truth};
        while (static_cast<int64_t>(candidates.size()) < opts.candidate_cap) {
          const auto e = static_cast<int32_t>(
              rng::bounded(g, static_cast<uint64_t>(num_entities)));
          if (seen.count(e)) continue;
          if (known && std::binary_search(known->begin(), known->end(), e)) continue;
          seen.insert(e);
          candidates.push_back(e);
        }
        true_pos = 0;
      }

      const std::vector<float> scores = score(fixed, q.rel, candidates, tail_query, truth);
      if (scores.size() != candidates.size())
        throw std::runtime_error("entity scorer returned wrong candidate count");
      std::sort(filtered_positions.begin(), filtered_positions.end());
      const int64_t rank = filtered_rank(scores, true_pos, &filtered_positions);
      report.ranks[i * 2 + (tail_query ? 0 : 1)] = rank;
    }
  }

  report.overall = compute_metrics(report.ranks);
  if (opts.per_category && categories) {
    std::vector<std::pair<std::string, std::vector<int64_t>>> buckets{
        {"1-1", {}}, {"1-N", {}}, {"N-1", {}}, {"N-N", {}},
        {"head-1-N", {}}, {"head-N-1", {}}, {"head-N-N", {}},
        {"tail-1-N", {}}, {"tail-N-1", {}}, {"tail-N-N", {}}};
    for (size_t i = 0; i < qs.size(); ++i) {
      const auto cat = (*categories)[static_cast<size_t>(qs[i].rel)];
      const int64_t tail_rank = report.ranks[i * 2];
      const int64_t head_rank = report.ranks[i * 2 + 1];
      buckets[static_cast<size_t>(cat)].second.push_back(tail_rank);
      buckets[static_cast<size_t>(cat)].second.push_back(head_rank);
      const char* cn = category_name(cat);
      for (auto& [name, ranks] : buckets) {
        if (name == std::string("head-") + cn) ranks.push_back(head_rank);
        if (name == std::string("tail-") + cn) ranks.push_back(tail_rank);
      }
    }
    append_category_reports(report, buckets);
  }
  return report;
}

}  // namespace fms
