#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "directives.hpp"
#include "evaluator.hpp"
#include "instantiate.hpp"
#include "pareto.hpp"
#include "util.hpp"

namespace moar {

/// Progressive-widening cap W(n) = max(2, floor(1 + sqrt(n))): a node with
/// four visits may have at most three children; a fourth needs nine visits.
int widening_cap(int n);

struct SearchNode {
  int id = 0;
  PipelineSpec pipeline;
  EvalPoint eval;
  int parent = -1;
  std::vector<int> children;
  int n = 1;  // visit count
  int depth = 0;
  std::string last_action;  // directive that produced this node; empty at root
  bool disabled = false;    // excluded from selection
  std::vector<RewriteRecord> path;  // root-to-node rewrite history
  std::string path_label;           // "ROOT -> model_substitution(m) -> ..."
  int pending_children = 0;         // reserved by in-flight workers
};

enum class StrategyKind { Moar, Greedy, Random };
const char* to_string(StrategyKind s);
StrategyKind strategy_from_string(const std::string& s);

struct SearchConfig {
  int budget = 40;       // B: pipeline evaluations
  int workers = 3;
  int model_cap = 12;    // C_m
  int per_family_cap = 3;
  int retry_limit = 3;
  uint64_t seed = 0;
  /// Safety valve for iterations that consume no budget (cache hits); 0
  /// derives 6*budget + 32.
  int max_iterations = 0;

  int iteration_cap() const { return max_iterations > 0 ? max_iterations : 6 * budget + 32; }
};

class SearchTree {
 public:
  int add_root(PipelineSpec pipeline, EvalPoint eval);
  int add_child(int parent, PipelineSpec pipeline, EvalPoint eval, std::string last_action,
                std::vector<RewriteRecord> path, std::string path_label);

  SearchNode& node(int id) { return nodes_[size_t(id)]; }
  const SearchNode& node(int id) const { return nodes_[size_t(id)]; }
  int size() const { return int(nodes_.size()); }

  /// Distinct evaluated points (first node per canonical key, discovery order).
  const std::vector<EvalPoint>& distinct_points() const { return points_; }
  /// Node id of the first node carrying this canonical key, or -1.
  int find_canonical(const std::string& key) const;

  /// delta of a node's point against the current distinct-point set.
  double delta_of(int id) const;
  /// Sum of delta over the node and all its descendants.
  double subtree_delta(int id) const;
  /// Eq. 1 utility; the node must have a parent.
  double utility(int id) const;

  /// Descend by max utility while the fan-out check fails, then return the
  /// expandable node; increments visit counts along the selection path.
  /// Throws Error(SearchSpaceExhausted) when nothing is selectable.
  int select();
  /// Undo the visit-count increments select() applied for this node.
  void decrement_path(int id);
  void increment_path(int id);

  /// 1-based accuracy rank among distinct points (1 = most accurate; ties by
  /// lower cost, then earlier discovery).
  int rank_of_key(const std::string& key) const;

  std::vector<EvalPoint> frontier() const;
  /// Representative node id per frontier point.
  std::vector<int> frontier_node_ids() const;

  /// Recompute n = 1 + |descendants| for every node (used after batch init).
  void reset_visit_counts();

 private:
  std::vector<SearchNode> nodes_;
  std::vector<EvalPoint> points_;
  std::map<std::string, int> canonical_index_;
  std::map<std::string, int> discovery_order_;
};

struct RunStats {
  std::map<std::string, ModelStat> model_stats;
  std::map<std::string, DirectiveStat> directive_stats;
  std::map<int, std::map<std::string, int>> usage;  // nu(node, directive)
};

struct RunResult {
  std::shared_ptr<SearchTree> tree;
  std::vector<Json> trace;          // header + one record per evaluation/iteration
  std::vector<EvalPoint> frontier;  // sorted by cost
  std::vector<std::string> frontier_paths;  // path label per frontier point
  RunStats stats;
  int evaluations_used = 0;
  int iterations = 0;
};

/// The search loop: initialization (model sweep + two rewrites per frontier
/// variant), then select / rewrite / evaluate until the budget is exhausted.
class Search {
 public:
  Search(PipelineSpec p0, ModelCatalog catalog, std::shared_ptr<Evaluator> evaluator,
         std::shared_ptr<Instantiator> instantiator, SearchConfig config,
         StrategyKind strategy = StrategyKind::Moar, std::shared_ptr<DocPeek> peek = nullptr);

  /// Trace header fields the caller wants persisted (pipeline/models/landscape
  /// YAML text for replay).
  void set_header(Json header);

  RunResult run();

 private:
  struct IterationOutcome;
  friend struct SearchTestAccess;

  void initialize(RunResult& result);
  bool run_one_iteration(RunResult& result, int iteration, int forced_node = -1,
                         std::optional<Objective> forced_objective = std::nullopt);
  AgentContext build_context(int node_id, Objective objective,
                             const std::vector<const Directive*>& allowed) const;
  std::vector<const Directive*> pruned_for(int node_id) const;
  Objective objective_for(int node_id) const;
  int select_node();

  PipelineSpec p0_;
  ModelCatalog catalog_;
  ModelCatalog swept_;  // after family subsampling
  std::shared_ptr<Evaluator> raw_evaluator_;
  std::shared_ptr<CachedEvaluator> evaluator_;
  std::shared_ptr<Instantiator> instantiator_;
  std::shared_ptr<DocPeek> peek_;
  SearchConfig config_;
  StrategyKind strategy_;
  Json header_ = Json::object();

  std::shared_ptr<SearchTree> tree_;
  RunStats stats_;
  int evals_used_ = 0;
  std::unique_ptr<Rng> rng_;
  std::mutex mu_;
};

}  // namespace moar
