#pragma once
// Triple-file ingestion and vocabulary construction.
//
// Expected layout (tab-separated "head relation tail" lines, UTF-8):
//   <dir>/train.txt  <dir>/valid.txt  <dir>/test.txt
// Inductive runs additionally read a sibling "<dir>_ind/" directory whose
// train.txt holds the observed test-graph facts and test.txt the queries;
// the test graph has its own entity vocabulary (disjoint from training)
// while its relations must be a subset of the training relations.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace fms {

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Triple {
  int32_t head = 0;
  int32_t rel = 0;
  int32_t tail = 0;
  bool operator==(const Triple&) const = default;
};

// Bidirectional name <-> dense index map, first-appearance order.
class Vocab {
 public:
  int32_t get_or_add(const std::string& name) {
    auto it = index_.find(name);
    if (it != index_.end()) return it->second;
    const int32_t id = static_cast<int32_t>(names_.size());
    index_.emplace(name, id);
    names_.push_back(name);
    return id;
  }

  // -1 when absent.
  int32_t index_of(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
  }

  const std::string& name_of(int32_t id) const { return names_.at(static_cast<size_t>(id)); }
  int64_t size() const { return static_cast<int64_t>(names_.size()); }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int32_t> index_;
};

enum class DatasetMode { kTransductive, kInductive };

struct Dataset {
  Vocab entities;
  Vocab relations;
  std::vector<Triple> train, valid, test;
  DatasetMode mode = DatasetMode::kTransductive;

  struct Inductive {
    Vocab entities;
    std::vector<Triple> observed;
    std::vector<Triple> queries;
  };
  std::optional<Inductive> inductive;

  int64_t num_entities() const { return entities.size(); }
  int64_t num_relations() const { return relations.size(); }
};

Dataset load_dataset(const std::string& dir, DatasetMode mode);

}  // namespace fms
