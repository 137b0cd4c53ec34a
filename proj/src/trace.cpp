#include "trace.hpp"

#include <sstream>

#include "errors.hpp"
#include "strategies.hpp"

namespace moar {

std::string trace_to_jsonl(const std::vector<Json>& records) {
  std::ostringstream os;
  for (const auto& r : records) os << r.dump() << "\n";
  return os.str();
}

std::vector<Json> trace_from_jsonl(const std::string& text) {
  std::vector<Json> records;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      records.push_back(Json::parse(line));
    } catch (const Json::exception& e) {
      fail(ErrorKind::Parse, std::string("bad trace line: ") + e.what());
    }
  }
  if (records.empty()) fail(ErrorKind::Parse, "trace is empty");
  return records;
}

Json frontier_to_json(const RunResult& result) {
  Json arr = Json::array();
  for (size_t i = 0; i < result.frontier.size(); ++i) {
    const auto& p = result.frontier[i];
    arr.push_back({{"pipeline_key", p.pipeline_key},
                   {"cost", p.cost.dollars()},
                   {"cost_micros", p.cost.micros},
                   {"accuracy", p.accuracy},
                   {"path", i < result.frontier_paths.size() ? result.frontier_paths[i] : ""}});
  }
  return arr;
}

std::string frontier_to_csv(const RunResult& result) {
  std::ostringstream os;
  os << "cost,accuracy,pipeline_key,path\n";
  for (size_t i = 0; i < result.frontier.size(); ++i) {
    const auto& p = result.frontier[i];
    std::string path = i < result.frontier_paths.size() ? result.frontier_paths[i] : "";
    // quote the free-text path column
    std::string quoted = "\"";
    for (char c : path) {
      if (c == '"') quoted += "\"\"";
      else quoted.push_back(c);
    }
    quoted += "\"";
    char line[64];
    std::snprintf(line, sizeof(line), "%.6f,%.6f,", p.cost.dollars(), p.accuracy);
    os << line << p.pipeline_key << "," << quoted << "\n";
  }
  return os.str();
}

Json frontier_from_trace(const std::string& jsonl_text) {
  auto records = trace_from_jsonl(jsonl_text);
  std::map<std::string, std::pair<EvalPoint, std::string>> by_key;  // first wins
  for (const auto& r : records) {
    std::string type = r.value("type", "");
    bool is_eval = type == "eval";
    bool is_added = type == "iteration" && r.value("outcome", "") == "added";
    if (!is_eval && !is_added) continue;
    std::string key = r.at("pipeline_key").get<std::string>();
    if (by_key.count(key)) continue;
    EvalPoint p{key, Money{r.at("cost_micros").get<int64_t>()}, r.at("accuracy").get<double>()};
    by_key.emplace(key, std::make_pair(p, r.value("path", "")));
  }
  std::vector<EvalPoint> points;
  for (const auto& [key, entry] : by_key) points.push_back(entry.first);
  auto front = pareto_set(points);
  std::sort(front.begin(), front.end(), [](const EvalPoint& a, const EvalPoint& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    return a.accuracy < b.accuracy;
  });
  Json arr = Json::array();
  for (const auto& p : front) {
    arr.push_back({{"pipeline_key", p.pipeline_key},
                   {"cost", p.cost.dollars()},
                   {"cost_micros", p.cost.micros},
                   {"accuracy", p.accuracy},
                   {"path", by_key.at(p.pipeline_key).second}});
  }
  return arr;
}

std::optional<std::string> replay_trace(const std::string& jsonl_text) {
  auto records = trace_from_jsonl(jsonl_text);
  const Json& header = records.front();
  if (header.value("type", "") != "header")
    fail(ErrorKind::Parse, "trace does not start with a header record");
  if (header.value("workers", 1) != 1)
    fail(ErrorKind::Validation, "replay requires a workers=1 trace");
  if (!header.value("agent_endpoint", std::string()).empty())
    fail(ErrorKind::Validation, "replay of agent-driven runs is not supported");

  RunSpec spec;
  spec.pipeline = pipeline_from_yaml(header.at("pipeline_yaml").get<std::string>());
  spec.catalog = catalog_from_yaml(header.at("models_yaml").get<std::string>());
  spec.landscape = LandscapeModel::from_yaml(header.at("landscape_yaml").get<std::string>());
  spec.strategy = strategy_from_string(header.at("strategy").get<std::string>());
  spec.config.seed = header.at("seed").get<uint64_t>();
  spec.config.budget = header.at("budget").get<int>();
  spec.config.workers = 1;
  spec.config.model_cap = header.value("model_cap", 12);
  spec.config.per_family_cap = header.value("per_family_cap", 3);
  spec.config.retry_limit = header.value("retry_limit", 3);
  spec.sample_docs_jsonl = header.value("sample_docs_jsonl", std::string());

  RunResult rerun = run_search(spec);
  if (rerun.trace.size() != records.size()) {
    return "record count differs: trace has " + std::to_string(records.size()) +
           ", replay produced " + std::to_string(rerun.trace.size());
  }
  for (size_t i = 0; i < records.size(); ++i) {
    std::string a = records[i].dump();
    std::string b = rerun.trace[i].dump();
    if (a != b) {
      return "first mismatch at record " + std::to_string(i) + ":\n  trace:  " + a +
             "\n  replay: " + b;
    }
  }
  return std::nullopt;
}

}  // namespace moar
