#pragma once

#include <string>
#include <vector>

#include "landscape.hpp"
#include "search.hpp"

namespace moar {

/// Everything one optimization run needs. The landscape evaluator is seeded
/// with landscape.seed + config.seed so different seeded runs see perturbed
/// (but individually deterministic and replayable) landscapes.
struct RunSpec {
  PipelineSpec pipeline;
  ModelCatalog catalog;
  LandscapeModel landscape;
  SearchConfig config;
  StrategyKind strategy = StrategyKind::Moar;
  std::string agent_endpoint;      // empty = deterministic stub instantiator
  std::string sample_docs_jsonl;   // optional sample for read_next_doc
};

RunResult run_search(const RunSpec& spec);

// ---------------------------------------------------------------------------
// Benchmark harness (strategy comparison)
// ---------------------------------------------------------------------------

struct BenchEntry {
  std::string strategy;
  uint64_t seed = 0;
  double best_accuracy = 0.0;
  double hypervolume = 0.0;
  int evaluations = 0;
  int frontier_size = 0;
};

struct BenchReport {
  std::vector<BenchEntry> entries;

  double mean_best_accuracy(const std::string& strategy) const;
  /// Fraction of seeds where `a`'s best accuracy >= `b`'s.
  double win_rate(const std::string& a, const std::string& b) const;
  /// One-sided sign test on per-seed strict wins of `a` over `b`.
  double sign_test_p(const std::string& a, const std::string& b) const;

  Json to_json() const;
  std::string to_table() const;
};

BenchReport run_bench(const RunSpec& base, const std::vector<std::string>& strategies,
                      int n_seeds);

/// 2D hypervolume against reference point (ref_cost, accuracy 0). Comparison
/// metric for the bench harness only; never used in selection.
double hypervolume(const std::vector<EvalPoint>& frontier, Money ref_cost);

/// P(Binomial(wins + losses, 1/2) >= wins); ties excluded by the caller.
double one_sided_sign_test(int wins, int losses);

}  // namespace moar
