#include "fms/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fms {

DatasetMode RunConfig::dataset_mode() const {
  if (setting == "transductive") return DatasetMode::kTransductive;
  if (setting == "inductive") return DatasetMode::kInductive;
  throw std::invalid_argument("setting must be transductive or inductive, got '" + setting +
                              "'");
}

TaskKind RunConfig::task_kind() const {
  if (task == "relation") return TaskKind::kRelation;
  if (task == "entity") return TaskKind::kEntity;
  throw std::invalid_argument("task must be relation or entity, got '" + task + "'");
}

namespace {

FlowInference parse_inference(const std::string& s, int& mc_samples) {
  if (s == "midpoint") return FlowInference::kMidpoint;
  if (s.rfind("mc:", 0) == 0) {
    mc_samples = std::stoi(s.substr(3));
    return FlowInference::kMcAverage;
  }
  throw std::invalid_argument("inference must be midpoint or mc:<S>, got '" + s + "'");
}

}  // namespace

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.task = task_kind();
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.lr = lr;
  t.l2 = l2;
  t.lambda = lambda;
  t.negatives_per_query = negatives;
  t.seed = seed;
  t.candidate_cap = candidate_cap;
  t.valid_max_queries = valid_max_queries;

  t.context.hops = hops;
  t.context.top_k = topk;
  t.context.neighbor_samples = neighbor_samples;
  t.context.heads = heads;
  t.context.dim = dim;
  t.context.temperature = temperature;

  t.flow.sigma = sigma;
  if (coupling == "paired")
    t.flow.coupling = FlowCoupling::kPaired;
  else if (coupling == "ot")
    t.flow.coupling = FlowCoupling::kMinibatchOT;
  else
    throw std::invalid_argument("coupling must be paired or ot, got '" + coupling + "'");
  t.flow.inference = parse_inference(inference, t.flow.mc_samples);

  if (ablation == "none") {
  } else if (ablation == "no-topk") {
    t.context.selection = SelectionMode::kRandomK;
  } else if (ablation == "no-energy-score") {
    t.context.selection = SelectionMode::kDotTopK;
  } else if (ablation == "no-flow") {
    t.no_flow = true;
    t.lambda = 0;
  } else {
    throw std::invalid_argument(
        "ablation must be none, no-topk, no-energy-score or no-flow, got '" + ablation + "'");
  }
  return t;
}

ModelConfig RunConfig::model_config(int64_t num_relations) const {
  return train_config().model_config(num_relations);
}

std::string RunConfig::resolved_text() const {
  std::ostringstream os;
  os << "dataset = " << dataset << "\n";
  os << "task = " << task << "\n";
  os << "setting = " << setting << "\n";
  os << "dim = " << dim << "\n";
  os << "hops = " << hops << "\n";
  os << "topk = " << topk << "\n";
  os << "neighbor-samples = " << neighbor_samples << "\n";
  os << "heads = " << heads << "\n";
  os << "temperature = " << temperature << "\n";
  os << "sigma = " << sigma << "\n";
  os << "lambda = " << lambda << "\n";
  os << "lr = " << lr << "\n";
  os << "l2 = " << l2 << "\n";
  os << "epochs = " << epochs << "\n";
  os << "batch-size = " << batch_size << "\n";
  os << "coupling = " << coupling << "\n";
  os << "inference = " << inference << "\n";
  os << "ablation = " << ablation << "\n";
  os << "seed = " << seed << "\n";
  os << "out = " << out << "\n";
  os << "checkpoint = " << checkpoint << "\n";
  os << "candidate-cap = " << candidate_cap << "\n";
  os << "negatives = " << negatives << "\n";
  os << "valid-max-queries = " << valid_max_queries << "\n";
  os << "split = " << split << "\n";
  return os.str();
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError(path + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    try {
      if (key == "dataset") cfg.dataset = val;
      else if (key == "task") cfg.task = val;
      else if (key == "setting") cfg.setting = val;
      else if (key == "dim") cfg.dim = std::stoll(val);
      else if (key == "hops") cfg.hops = std::stoi(val);
      else if (key == "topk") cfg.topk = std::stoi(val);
      else if (key == "neighbor-samples") cfg.neighbor_samples = std::stoi(val);
      else if (key == "heads") cfg.heads = std::stoi(val);
      else if (key == "temperature") cfg.temperature = std::stod(val);
      else if (key == "sigma") cfg.sigma = std::stod(val);
      else if (key == "lambda") cfg.lambda = std::stod(val);
      else if (key == "lr") cfg.lr = std::stod(val);
      else if (key == "l2") cfg.l2 = std::stod(val);
      else if (key == "epochs") cfg.epochs = std::stoi(val);
      else if (key == "batch-size") cfg.batch_size = std::stoi(val);
      else if (key == "coupling") cfg.coupling = val;
      else if (key == "inference") cfg.inference = val;
      else if (key == "ablation") cfg.ablation = val;
      else if (key == "seed") cfg.seed = std::stoull(val);
      else if (key == "out") cfg.out = val;
      else if (key == "checkpoint") cfg.checkpoint = val;
      else if (key == "candidate-cap") cfg.candidate_cap = std::stoll(val);
      else if (key == "negatives") cfg.negatives = std::stoi(val);
      else if (key == "valid-max-queries") cfg.valid_max_queries = std::stoll(val);
      else if (key == "split") cfg.split = val;
      else
        throw DataError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw DataError(path + ":" + std::to_string(lineno) + ": bad value for '" + key + "'");
    }
  }
}

}  // namespace fms
