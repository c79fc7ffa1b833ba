#include "fms/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <unordered_set>

namespace fms {

namespace {

struct RawTriple {
  std::string head, rel, tail;
};

// Reads "head<TAB>relation<TAB>tail" lines. Blank lines are skipped;
// anything else with a field count other than 3 is an error naming the line.
std::vector<RawTriple> read_triple_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path);
  std::vector<RawTriple> out;
  std::string line;
  int64_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const size_t t1 = line.find('\t');
    const size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    const size_t t3 = t2 == std::string::npos ? std::string::npos : line.find('\t', t2 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos || t3 != std::string::npos)
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": expected 3 tab-separated fields");
    out.push_back({line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1), line.substr(t2 + 1)});
  }
  if (out.empty()) throw DataError(path + ": empty split file");
  return out;
}

struct TripleHash {
  size_t operator()(const Triple& t) const {
    uint64_t h = static_cast<uint32_t>(t.head);
    h = h * 0x9e3779b97f4a7c15ull + static_cast<uint32_t>(t.rel);
    h = h * 0x9e3779b97f4a7c15ull + static_cast<uint32_t>(t.tail);
    h ^= h >> 29;
    return static_cast<size_t>(h);
  }
};

std::vector<Triple> index_triples(const std::vector<RawTriple>& raw, Vocab& entities,
                                  Vocab& relations, const std::string& path) {
  std::vector<Triple> out;
  out.reserve(raw.size());
  std::unordered_set<Triple, TripleHash> seen;
  seen.reserve(raw.size() * 2);
  for (size_t i = 0; i < raw.size(); ++i) {
    Triple t;
    t.head = entities.get_or_add(raw[i].head);
    t.rel = relations.get_or_add(raw[i].rel);
    t.tail = entities.get_or_add(raw[i].tail);
    if (!seen.insert(t).second)
      throw DataError(path + ": duplicate triple (" + raw[i].head + ", " + raw[i].rel + ", " +
                      raw[i].tail + ")");
    out.push_back(t);
  }
  return out;
}

}  // namespace

Dataset load_dataset(const std::string& dir, DatasetMode mode) {
  namespace fs = std::filesystem;
  Dataset ds;
  ds.mode = mode;

  const auto raw_train = read_triple_file(dir + "/train.txt");
  const auto raw_valid = read_triple_file(dir + "/valid.txt");
  const auto raw_test = read_triple_file(dir + "/test.txt");

  // Dense vocabularies in first-appearance order, train -> valid -> test.
  ds.train = index_triples(raw_train, ds.entities, ds.relations, dir + "/train.txt");
  ds.valid = index_triples(raw_valid, ds.entities, ds.relations, dir + "/valid.txt");
  ds.test = index_triples(raw_test, ds.entities, ds.relations, dir + "/test.txt");

  if (mode == DatasetMode::kInductive) {
    const std::string ind_dir = dir + "_ind";
    if (!fs::exists(ind_dir))
      throw DataError("inductive mode: missing test-graph directory " + ind_dir);
    const auto raw_obs = read_triple_file(ind_dir + "/train.txt");
    const auto raw_q = read_triple_file(ind_dir + "/test.txt");

    Dataset::Inductive ind;
    auto index_ind = [&](const std::vector<RawTriple>& raw,
                         const std::string& path) -> std::vector<Triple> {
      std::vector<Triple> out;
      out.reserve(raw.size());
      std::unordered_set<Triple, TripleHash> seen;
      for (const auto& r : raw) {
        Triple t;
        t.head = ind.entities.get_or_add(r.head);
        t.tail = ind.entities.get_or_add(r.tail);
        t.rel = ds.relations.index_of(r.rel);
        if (t.rel < 0)
          throw DataError(path + ": relation '" + r.rel +
                          "' not present in the training relation vocabulary");
        if (!seen.insert(t).second)
          throw DataError(path + ": duplicate triple (" + r.head + ", " + r.rel + ", " +
                          r.tail + ")");
        out.push_back(t);
      }
      return out;
    };
    ind.observed = index_ind(raw_obs, ind_dir + "/train.txt");
    ind.queries = index_ind(raw_q, ind_dir + "/test.txt");

    // Test-graph entities must be unseen during training.
    for (int32_t i = 0; i < ind.entities.size(); ++i) {
      if (ds.entities.index_of(ind.entities.name_of(i)) >= 0)
        throw DataError(ind_dir + ": entity '" + ind.entities.name_of(i) +
                        "' also appears in the training graph (inductive split must be "
                        "entity-disjoint)");
    }
    ds.inductive = std::move(ind);
  }
  return ds;
}

}  // namespace fms
