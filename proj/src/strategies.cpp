#include "strategies.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "errors.hpp"

namespace moar {

RunResult run_search(const RunSpec& spec) {
  auto evaluator = std::make_shared<SimulatedEvaluator>(spec.landscape, spec.catalog,
                                                        spec.config.seed);
  std::shared_ptr<Instantiator> instantiator;
  if (spec.agent_endpoint.empty()) {
    instantiator = std::make_shared<StubInstantiator>(spec.catalog, spec.config.seed);
  } else {
    instantiator = make_agent_instantiator(spec.agent_endpoint, spec.catalog,
                                           spec.config.retry_limit);
  }
  std::shared_ptr<DocPeek> peek;
  if (!spec.sample_docs_jsonl.empty())
    peek = std::make_shared<JsonlDocPeek>(spec.sample_docs_jsonl);

  Search search(spec.pipeline, spec.catalog, evaluator, instantiator, spec.config,
                spec.strategy, peek);
  Json header;
  header["pipeline_yaml"] = pipeline_to_yaml(spec.pipeline);
  header["models_yaml"] = catalog_to_yaml(spec.catalog);
  header["landscape_yaml"] = spec.landscape.to_yaml();
  header["agent_endpoint"] = spec.agent_endpoint;
  header["sample_docs_jsonl"] = spec.sample_docs_jsonl;
  search.set_header(std::move(header));
  return search.run();
}

// ---------------------------------------------------------------------------
// Bench
// ---------------------------------------------------------------------------

double hypervolume(const std::vector<EvalPoint>& frontier, Money ref_cost) {
  // Strictly increasing accuracy staircase over costs <= ref.
  std::vector<EvalPoint> points = frontier;
  std::sort(points.begin(), points.end(), [](const EvalPoint& a, const EvalPoint& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    return a.accuracy > b.accuracy;
  });
  double volume = 0.0;
  double last_accuracy = 0.0;
  for (const auto& p : points) {
    if (p.cost > ref_cost) break;
    if (p.accuracy <= last_accuracy) continue;
    volume += (ref_cost.dollars() - p.cost.dollars()) * (p.accuracy - last_accuracy);
    last_accuracy = p.accuracy;
  }
  return volume;
}

double one_sided_sign_test(int wins, int losses) {
  int n = wins + losses;
  if (n == 0) return 1.0;
  // P(X >= wins), X ~ Binomial(n, 1/2), in log space for safety
  double p = 0.0;
  for (int k = wins; k <= n; ++k) {
    double log_c = std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1);
    p += std::exp(log_c - n * std::log(2.0));
  }
  return std::min(1.0, p);
}

BenchReport run_bench(const RunSpec& base, const std::vector<std::string>& strategies,
                      int n_seeds) {
  BenchReport report;
  // shared reference cost so hypervolumes are comparable across strategies
  Money ref_cost{0};
  std::vector<std::pair<BenchEntry, std::vector<EvalPoint>>> staged;
  for (int s = 0; s < n_seeds; ++s) {
    for (const auto& name : strategies) {
      RunSpec spec = base;
      spec.strategy = strategy_from_string(name);
      spec.config.seed = base.config.seed + uint64_t(s);
      RunResult result = run_search(spec);
      BenchEntry entry;
      entry.strategy = name;
      entry.seed = spec.config.seed;
      entry.evaluations = result.evaluations_used;
      entry.frontier_size = int(result.frontier.size());
      entry.best_accuracy = 0.0;
      for (const auto& p : result.frontier)
        entry.best_accuracy = std::max(entry.best_accuracy, p.accuracy);
      for (const auto& p : result.frontier) ref_cost = std::max(ref_cost, p.cost);
      staged.emplace_back(std::move(entry), result.frontier);
    }
  }
  ref_cost = Money{ref_cost.micros + ref_cost.micros / 20 + 1};
  for (auto& [entry, frontier] : staged) {
    entry.hypervolume = hypervolume(frontier, ref_cost);
    report.entries.push_back(entry);
  }
  return report;
}

double BenchReport::mean_best_accuracy(const std::string& strategy) const {
  double sum = 0.0;
  int n = 0;
  for (const auto& e : entries) {
    if (e.strategy != strategy) continue;
    sum += e.best_accuracy;
    ++n;
  }
  return n == 0 ? 0.0 : sum / n;
}

namespace {

std::vector<std::pair<double, double>> paired_best(const BenchReport& r, const std::string& a,
                                                   const std::string& b) {
  std::map<uint64_t, std::pair<double, double>> by_seed;
  for (const auto& e : r.entries) {
    if (e.strategy == a) by_seed[e.seed].first = e.best_accuracy;
    if (e.strategy == b) by_seed[e.seed].second = e.best_accuracy;
  }
  std::vector<std::pair<double, double>> out;
  for (const auto& [seed, pair] : by_seed) out.push_back(pair);
  return out;
}

}  // namespace

double BenchReport::win_rate(const std::string& a, const std::string& b) const {
  auto pairs = paired_best(*this, a, b);
  if (pairs.empty()) return 0.0;
  int wins = 0;
  for (const auto& [x, y] : pairs)
    if (x >= y) ++wins;
  return double(wins) / double(pairs.size());
}

double BenchReport::sign_test_p(const std::string& a, const std::string& b) const {
  int wins = 0, losses = 0;
  for (const auto& [x, y] : paired_best(*this, a, b)) {
    if (x > y) ++wins;
    else if (y > x) ++losses;
  }
  return one_sided_sign_test(wins, losses);
}

Json BenchReport::to_json() const {
  Json runs = Json::array();
  std::set<std::string> names;
  for (const auto& e : entries) {
    names.insert(e.strategy);
    runs.push_back({{"strategy", e.strategy},
                    {"seed", e.seed},
                    {"best_accuracy", e.best_accuracy},
                    {"hypervolume", e.hypervolume},
                    {"evaluations", e.evaluations},
                    {"frontier_size", e.frontier_size}});
  }
  Json aggregates = Json::object();
  for (const auto& name : names)
    aggregates[name] = {{"mean_best_accuracy", mean_best_accuracy(name)}};
  Json comparisons = Json::object();
  for (const auto& name : names) {
    if (name == "moar" || !names.count("moar")) continue;
    comparisons["moar_vs_" + name] = {{"win_rate", win_rate("moar", name)},
                                      {"sign_test_p", sign_test_p("moar", name)}};
  }
  return Json{{"runs", runs}, {"aggregates", aggregates}, {"comparisons", comparisons}};
}

std::string BenchReport::to_table() const {
  std::set<std::string> names;
  std::set<uint64_t> seeds;
  for (const auto& e : entries) {
    names.insert(e.strategy);
    seeds.insert(e.seed);
  }
  std::ostringstream os;
  os << "strategy      seeds  mean_best_acc  mean_hv      mean_evals\n";
  for (const auto& name : names) {
    double hv = 0.0, evals = 0.0;
    int n = 0;
    for (const auto& e : entries) {
      if (e.strategy != name) continue;
      hv += e.hypervolume;
      evals += e.evaluations;
      ++n;
    }
    char line[160];
    std::snprintf(line, sizeof(line), "%-12s  %5d  %13.4f  %11.6f  %10.1f\n", name.c_str(), n,
                  mean_best_accuracy(name), n ? hv / n : 0.0, n ? evals / n : 0.0);
    os << line;
  }
  for (const auto& name : names) {
    if (name == "moar") continue;
    if (!names.count("moar")) break;
    char line[160];
    std::snprintf(line, sizeof(line), "moar vs %-8s win_rate=%.2f  sign_test_p=%.4f\n",
                  name.c_str(), win_rate("moar", name), sign_test_p("moar", name));
    os << line;
  }
  return os.str();
}

}  // namespace moar
