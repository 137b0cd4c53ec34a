#include "search.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <set>
#include <thread>

#include "errors.hpp"

namespace moar {

int widening_cap(int n) {
  return std::max(2, int(std::floor(1.0 + std::sqrt(double(n)))));
}

const char* to_string(StrategyKind s) {
  switch (s) {
    case StrategyKind::Moar: return "moar";
    case StrategyKind::Greedy: return "greedy";
    case StrategyKind::Random: return "random";
  }
  return "?";
}

StrategyKind strategy_from_string(const std::string& s) {
  if (s == "moar") return StrategyKind::Moar;
  if (s == "greedy") return StrategyKind::Greedy;
  if (s == "random") return StrategyKind::Random;
  fail(ErrorKind::Parse, "unknown strategy: " + s);
}

// ---------------------------------------------------------------------------
// SearchTree
// ---------------------------------------------------------------------------

int SearchTree::add_root(PipelineSpec pipeline, EvalPoint eval) {
  SearchNode node;
  node.id = 0;
  node.pipeline = std::move(pipeline);
  node.eval = std::move(eval);
  node.path_label = "ROOT";
  nodes_.clear();
  points_.clear();
  canonical_index_.clear();
  discovery_order_.clear();
  canonical_index_[node.eval.pipeline_key] = 0;
  discovery_order_[node.eval.pipeline_key] = 0;
  points_.push_back(node.eval);
  nodes_.push_back(std::move(node));
  return 0;
}

int SearchTree::add_child(int parent, PipelineSpec pipeline, EvalPoint eval,
                          std::string last_action, std::vector<RewriteRecord> path,
                          std::string path_label) {
  SearchNode node;
  node.id = int(nodes_.size());
  node.pipeline = std::move(pipeline);
  node.eval = std::move(eval);
  node.parent = parent;
  node.depth = nodes_[size_t(parent)].depth + 1;
  node.last_action = std::move(last_action);
  node.path = std::move(path);
  node.path_label = std::move(path_label);
  nodes_[size_t(parent)].children.push_back(node.id);
  if (!canonical_index_.count(node.eval.pipeline_key)) {
    canonical_index_[node.eval.pipeline_key] = node.id;
    discovery_order_[node.eval.pipeline_key] = int(discovery_order_.size());
    points_.push_back(node.eval);
  }
  nodes_.push_back(std::move(node));
  return int(nodes_.size()) - 1;
}

int SearchTree::find_canonical(const std::string& key) const {
  auto it = canonical_index_.find(key);
  return it == canonical_index_.end() ? -1 : it->second;
}

double SearchTree::delta_of(int id) const {
  return delta(points_, nodes_[size_t(id)].eval);
}

double SearchTree::subtree_delta(int id) const {
  double sum = delta_of(id);
  for (int child : nodes_[size_t(id)].children) sum += subtree_delta(child);
  return sum;
}

double SearchTree::utility(int id) const {
  const SearchNode& node = nodes_[size_t(id)];
  if (node.parent < 0) fail(ErrorKind::Internal, "utility of root is undefined");
  double exploitation = subtree_delta(id) / double(node.n);
  double parent_n = double(nodes_[size_t(node.parent)].n);
  double exploration = std::sqrt(2.0 * std::log(parent_n) / double(node.n));
  return exploitation + exploration;
}

void SearchTree::increment_path(int id) {
  for (int cur = id; cur >= 0; cur = nodes_[size_t(cur)].parent) ++nodes_[size_t(cur)].n;
}

void SearchTree::decrement_path(int id) {
  for (int cur = id; cur >= 0; cur = nodes_[size_t(cur)].parent) --nodes_[size_t(cur)].n;
}

int SearchTree::select() {
  if (nodes_.empty()) fail(ErrorKind::SearchSpaceExhausted, "empty tree");
  if (nodes_[0].disabled) fail(ErrorKind::SearchSpaceExhausted, "root disabled");
  // Greedy utility descent; a capped node whose live children are all
  // disabled is a dead end for this call, and the walk restarts without it.
  std::set<int> dead;
  while (true) {
    int current = 0;
    bool dead_end = false;
    while (!dead_end) {
      const SearchNode& node = nodes_[size_t(current)];
      int fan_out = int(node.children.size()) + node.pending_children;
      bool has_evaluated_children = !node.children.empty();
      if (fan_out < widening_cap(node.n) || !has_evaluated_children) {
        increment_path(current);
        return current;
      }
      int best = -1;
      double best_utility = 0.0;
      for (int child : node.children) {
        if (nodes_[size_t(child)].disabled || dead.count(child)) continue;
        double u = utility(child);
        if (best < 0 || u > best_utility) {
          best = child;
          best_utility = u;
        }
      }
      if (best < 0) {
        if (current == 0)
          fail(ErrorKind::SearchSpaceExhausted, "every selectable node is disabled or capped");
        dead.insert(current);
        dead_end = true;
      } else {
        current = best;
      }
    }
  }
}

int SearchTree::rank_of_key(const std::string& key) const {
  auto order = [&](const EvalPoint& p) {
    return discovery_order_.at(p.pipeline_key);
  };
  std::vector<const EvalPoint*> sorted;
  sorted.reserve(points_.size());
  for (const auto& p : points_) sorted.push_back(&p);
  std::sort(sorted.begin(), sorted.end(), [&](const EvalPoint* a, const EvalPoint* b) {
    if (a->accuracy != b->accuracy) return a->accuracy > b->accuracy;
    if (a->cost != b->cost) return a->cost < b->cost;
    return order(*a) < order(*b);
  });
  for (size_t i = 0; i < sorted.size(); ++i)
    if (sorted[i]->pipeline_key == key) return int(i) + 1;
  fail(ErrorKind::PointNotFound, "rank_of_key: unknown key");
}

std::vector<EvalPoint> SearchTree::frontier() const {
  auto front = pareto_set(points_);
  std::sort(front.begin(), front.end(), [](const EvalPoint& a, const EvalPoint& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    return a.accuracy < b.accuracy;
  });
  return front;
}

std::vector<int> SearchTree::frontier_node_ids() const {
  std::vector<int> ids;
  for (const auto& p : frontier()) ids.push_back(canonical_index_.at(p.pipeline_key));
  return ids;
}

void SearchTree::reset_visit_counts() {
  for (auto& node : nodes_) node.n = 1;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->parent >= 0) nodes_[size_t(it->parent)].n += it->n;
  }
}

// ---------------------------------------------------------------------------
// Search
// ---------------------------------------------------------------------------

namespace {

PipelineSpec with_all_models(const PipelineSpec& p, const std::string& model_id) {
  PipelineSpec out = p;
  for (auto& op : out.operators)
    if (is_llm(op.type)) op.model = model_id;
  return out;
}

std::string salient_param(const RewriteRecord& rec) {
  if (rec.directive_name == "model_substitution" && rec.params.contains("model"))
    return rec.params["model"].get<std::string>();
  if (rec.directive_name == "doc_chunking" && rec.params.contains("chunk_size"))
    return "size=" + std::to_string(rec.params["chunk_size"].get<long long>());
  if (rec.params.contains("method")) return rec.params["method"].get<std::string>();
  return "";
}

std::string extend_label(const std::string& parent_label, const RewriteRecord& rec) {
  std::string arg = salient_param(rec);
  return parent_label + " -> " + rec.directive_name + (arg.empty() ? "" : "(" + arg + ")");
}

ModelCatalog subsample_catalog(const ModelCatalog& catalog, int model_cap, int per_family_cap,
                               Rng& rng) {
  if (int(catalog.entries.size()) <= model_cap) return catalog;
  std::vector<std::string> families;
  for (const auto& m : catalog.entries)
    if (std::find(families.begin(), families.end(), m.family) == families.end())
      families.push_back(m.family);
  // seeded Fisher-Yates over family order
  for (size_t i = families.size(); i > 1; --i)
    std::swap(families[i - 1], families[rng.index(i)]);
  ModelCatalog out;
  for (const auto& fam : families) {
    int taken = 0;
    for (const auto& m : catalog.entries) {
      if (m.family != fam || taken >= per_family_cap) continue;
      if (int(out.entries.size()) >= model_cap) return out;
      out.entries.push_back(m);
      ++taken;
    }
  }
  return out;
}

bool is_rewrite_failure(ErrorKind kind) {
  return kind == ErrorKind::InvalidParams || kind == ErrorKind::RewriteInvalid ||
         kind == ErrorKind::InstantiationFailed || kind == ErrorKind::Parse ||
         kind == ErrorKind::NoApplicableDirective || kind == ErrorKind::UnknownModel;
}

}  // namespace

Search::Search(PipelineSpec p0, ModelCatalog catalog, std::shared_ptr<Evaluator> evaluator,
               std::shared_ptr<Instantiator> instantiator, SearchConfig config,
               StrategyKind strategy, std::shared_ptr<DocPeek> peek)
    : p0_(std::move(p0)),
      catalog_(std::move(catalog)),
      raw_evaluator_(std::move(evaluator)),
      instantiator_(std::move(instantiator)),
      peek_(std::move(peek)),
      config_(config),
      strategy_(strategy) {
  evaluator_ = std::make_shared<CachedEvaluator>(raw_evaluator_);
  tree_ = std::make_shared<SearchTree>();
  rng_ = std::make_unique<Rng>(config_.seed);
}

void Search::set_header(Json header) { header_ = std::move(header); }

std::vector<const Directive*> Search::pruned_for(int node_id) const {
  const SearchNode& node = tree_->node(node_id);
  return prune_registry(node.pipeline, node.path, Registry::builtin().pointers());
}

Objective Search::objective_for(int node_id) const {
  const SearchNode& node = tree_->node(node_id);
  int rank = tree_->rank_of_key(node.eval.pipeline_key);
  double half = double(tree_->distinct_points().size()) / 2.0;
  return double(rank) <= half ? Objective::ReduceCost : Objective::ImproveAccuracy;
}

AgentContext Search::build_context(int node_id, Objective objective,
                                   const std::vector<const Directive*>& allowed) const {
  const SearchNode& node = tree_->node(node_id);
  AgentContext ctx;
  ctx.pipeline_yaml = pipeline_to_yaml(node.pipeline);
  for (const Directive* d : allowed) {
    ctx.directive_briefs.push_back({{"name", d->name},
                                    {"category", to_string(d->category)},
                                    {"short_doc", d->short_doc},
                                    {"lhs", d->lhs.signature},
                                    {"param_sensitive", d->param_sensitive},
                                    {"candidate_count", d->candidate_count}});
  }
  for (int i = 0; i < tree_->size(); ++i) {
    const SearchNode& other = tree_->node(i);
    ctx.explored_paths.push_back({other.path_label, other.eval.cost, other.eval.accuracy});
  }
  ctx.current_path = node.path_label;
  ctx.depth = node.depth;
  ctx.model_stats = stats_.model_stats;
  ctx.directive_stats = stats_.directive_stats;
  ctx.objective = objective;
  auto usage_it = stats_.usage.find(node_id);
  if (usage_it != stats_.usage.end()) ctx.usage = usage_it->second;
  for (const auto& op : node.pipeline.operators)
    if (op.model) ctx.models_tried.insert(*op.model);
  for (const auto& rec : node.path)
    if (rec.directive_name == "model_substitution" && rec.params.contains("model"))
      ctx.models_tried.insert(rec.params["model"].get<std::string>());
  return ctx;
}

int Search::select_node() {
  switch (strategy_) {
    case StrategyKind::Moar:
      return tree_->select();
    case StrategyKind::Greedy: {
      int best = -1;
      for (int i = 0; i < tree_->size(); ++i) {
        const SearchNode& node = tree_->node(i);
        if (node.disabled) continue;
        if (best < 0 || node.eval.accuracy > tree_->node(best).eval.accuracy) best = i;
      }
      if (best < 0) fail(ErrorKind::SearchSpaceExhausted, "all nodes disabled");
      return best;
    }
    case StrategyKind::Random: {
      std::vector<int> selectable;
      for (int i = 0; i < tree_->size(); ++i)
        if (!tree_->node(i).disabled) selectable.push_back(i);
      if (selectable.empty()) fail(ErrorKind::SearchSpaceExhausted, "all nodes disabled");
      return selectable[rng_->index(selectable.size())];
    }
  }
  fail(ErrorKind::Internal, "bad strategy");
}

// One select -> rewrite -> evaluate -> insert iteration. Returns false when
// the search should stop (budget gone or nothing selectable).
bool Search::run_one_iteration(RunResult& result, int iteration, int forced_node,
                               std::optional<Objective> forced_objective) {
  const bool in_init = forced_node >= 0;
  const Registry& registry = Registry::builtin();

  int node_id;
  PipelineSpec p_star;
  std::vector<const Directive*> allowed;
  Objective objective;
  std::vector<int> blocked_free;  // kept for clarity; blocked names below
  (void)blocked_free;
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (evals_used_ >= config_.budget) return false;
    if (in_init) {
      node_id = forced_node;
    } else {
      try {
        node_id = select_node();
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::SearchSpaceExhausted) return false;
        throw;
      }
    }
    SearchNode& node = tree_->node(node_id);
    node.pending_children++;
    p_star = node.pipeline;
    allowed = pruned_for(node_id);
    objective = forced_objective ? *forced_objective : objective_for(node_id);
  }

  EvalPoint parent_point;
  {
    std::lock_guard<std::mutex> lock(mu_);
    parent_point = tree_->node(node_id).eval;
  }

  enum class Outcome { Added, Failed, Transport, Sterile };
  Outcome outcome = Outcome::Failed;
  std::string failure_note;
  int attempts = 0;
  std::set<std::string> blocked;

  RewriteRecord winner_rec;
  PipelineSpec winner_pipeline;
  EvalResult winner_result;
  std::string winner_key;
  std::string chosen_directive;
  int k_candidates = 0;
  int evals_counted = 0;
  int cache_hits = 0;

  while (true) {
    // choose a directive under the lock (nu bookkeeping, context snapshot)
    Choice choice;
    const Directive* d = nullptr;
    {
      std::lock_guard<std::mutex> lock(mu_);
      std::vector<const Directive*> open;
      for (const Directive* cand : allowed)
        if (!blocked.count(cand->name)) open.push_back(cand);
      AgentContext ctx = build_context(node_id, objective, open);
      try {
        if (strategy_ == StrategyKind::Random && !in_init) {
          std::vector<std::pair<const Directive*, std::vector<Span>>> applicable;
          for (const Directive* cand : open) {
            auto sites = match_sites(*cand, p_star);
            if (!sites.empty()) applicable.push_back({cand, std::move(sites)});
          }
          if (applicable.empty())
            fail(ErrorKind::NoApplicableDirective, "nothing applicable");
          auto& picked = applicable[rng_->index(applicable.size())];
          choice = {picked.first->name, picked.second[rng_->index(picked.second.size())]};
        } else {
          choice = instantiator_->choose({p_star, open, ctx});
        }
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::NoApplicableDirective) {
          outcome = Outcome::Sterile;
          failure_note = e.what();
          break;
        }
        throw;
      }
      d = registry.find(choice.directive_name);
      if (d == nullptr ||
          std::none_of(open.begin(), open.end(),
                       [&](const Directive* cand) { return cand->name == choice.directive_name; })) {
        // an agent picked something outside the pruned list
        ++attempts;
        failure_note = "chose unavailable directive '" + choice.directive_name + "'";
        if (attempts >= config_.retry_limit) {
          outcome = Outcome::Failed;
          break;
        }
        continue;
      }
      stats_.usage[node_id][choice.directive_name]++;
      chosen_directive = choice.directive_name;
    }

    // instantiate + apply (no lock)
    struct Candidate {
      int index;
      RewriteRecord rec;
      PipelineSpec pipeline;
      std::string key;
      EvalResult result;
      bool evaluated = false;
      bool duplicate_node = false;
    };
    std::vector<Candidate> candidates;
    try {
      std::vector<Json> params_list =
          instantiator_->instantiate(*d, p_star, choice.span, objective, peek_.get());
      if (params_list.empty())
        fail(ErrorKind::InstantiationFailed, d->name + ": no candidates produced");
      for (size_t i = 0; i < params_list.size(); ++i) {
        Candidate c;
        c.index = int(i);
        c.rec = RewriteRecord{d->name, choice.span, params_list[i], objective};
        c.pipeline = apply(*d, p_star, c.rec, &catalog_);
        c.key = pipeline_key(c.pipeline);
        candidates.push_back(std::move(c));
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Endpoint) {
        outcome = Outcome::Transport;
        failure_note = e.what();
        break;
      }
      if (is_rewrite_failure(e.kind())) {
        ++attempts;
        failure_note = e.what();
        if (attempts >= config_.retry_limit) {
          outcome = Outcome::Failed;
          break;
        }
        continue;
      }
      throw;
    }

    // evaluate candidates; cache hits and already-known tree nodes are free
    k_candidates = int(candidates.size());
    bool transport_failed = false;
    for (auto& c : candidates) {
      {
        std::lock_guard<std::mutex> lock(mu_);
        int existing = tree_->find_canonical(c.key);
        if (existing >= 0) {
          c.result = EvalResult{tree_->node(existing).eval.cost,
                                tree_->node(existing).eval.accuracy, true, c.index};
          c.evaluated = true;
          c.duplicate_node = true;
          ++cache_hits;
          continue;
        }
      }
      if (auto hit = evaluator_->lookup(c.key)) {
        c.result = *hit;
        c.result.cache_hit = true;
        c.result.candidate_index = c.index;
        c.evaluated = true;
        ++cache_hits;
        continue;
      }
      bool reserved = false;
      {
        std::lock_guard<std::mutex> lock(mu_);
        if (evals_used_ < config_.budget) {
          ++evals_used_;
          reserved = true;
        }
      }
      if (!reserved) continue;  // budget exhausted; remaining candidates are skipped
      try {
        c.result = evaluator_->evaluate(c.pipeline);
        c.result.candidate_index = c.index;
        c.evaluated = true;
        ++evals_counted;
        if (c.result.cache_hit) {
          // raced with another worker: the inner evaluator was not invoked
          std::lock_guard<std::mutex> lock(mu_);
          --evals_used_;
          --evals_counted;
          ++cache_hits;
        }
      } catch (const Error& e) {
        {
          // a failed execution scored nothing; release the reservation
          std::lock_guard<std::mutex> lock(mu_);
          --evals_used_;
        }
        if (e.kind() == ErrorKind::EvaluatorTransport) {
          transport_failed = true;
          failure_note = e.what();
          break;
        }
        throw;
      }
    }
    if (transport_failed) {
      outcome = Outcome::Transport;
      break;
    }

    // pick the winner: highest accuracy, ties by lower cost then lower index
    auto better = [](const Candidate& a, const Candidate& b) {
      if (a.result.accuracy != b.result.accuracy) return a.result.accuracy > b.result.accuracy;
      if (a.result.cost != b.result.cost) return a.result.cost < b.result.cost;
      return a.index < b.index;
    };
    const Candidate* winner = nullptr;
    const Candidate* best_novel = nullptr;
    for (const auto& c : candidates) {
      if (!c.evaluated) continue;
      if (!winner || better(c, *winner)) winner = &c;
      if (!c.duplicate_node && (!best_novel || better(c, *best_novel))) best_novel = &c;
    }
    if (winner == nullptr) {
      // budget ran out before any candidate could be evaluated
      outcome = Outcome::Failed;
      failure_note = "budget exhausted before evaluation";
      break;
    }
    if (winner->duplicate_node) {
      if (best_novel == nullptr) {
        // this directive only reproduces known pipelines here; rotate
        blocked.insert(d->name);
        continue;
      }
      winner = best_novel;  // prefer extending the tree over re-adding a known pipeline
    }

    winner_rec = winner->rec;
    winner_pipeline = winner->pipeline;
    winner_result = winner->result;
    winner_key = winner->key;
    outcome = Outcome::Added;
    break;
  }

  // commit
  std::lock_guard<std::mutex> lock(mu_);
  SearchNode& node = tree_->node(node_id);
  node.pending_children--;
  Json record{{"iter", iteration},
              {"phase", in_init ? "init_rewrite" : "search"},
              {"parent_id", node_id},
              {"directive", chosen_directive},
              {"objective", to_string(objective)},
              {"k", k_candidates},
              {"evals", evals_counted},
              {"cache_hits", cache_hits}};
  std::vector<int> selected_path;
  for (int cur = node_id; cur >= 0; cur = tree_->node(cur).parent) selected_path.push_back(cur);
  std::reverse(selected_path.begin(), selected_path.end());
  record["selected_path"] = selected_path;

  if (outcome == Outcome::Added) {
    std::vector<RewriteRecord> child_path = node.path;
    child_path.push_back(winner_rec);
    std::string label = extend_label(node.path_label, winner_rec);
    EvalPoint point = EvalPoint::make(winner_key, winner_result.cost, winner_result.accuracy);
    int child_id = tree_->add_child(node_id, std::move(winner_pipeline), point,
                                    winner_rec.directive_name, std::move(child_path), label);
    // baselines keep n = 1 + |desc| by bumping the ancestor chain at insertion
    if (!in_init && strategy_ != StrategyKind::Moar) tree_->increment_path(node_id);
    auto& dstat = stats_.directive_stats[winner_rec.directive_name];
    double dc = point.cost.dollars() - parent_point.cost.dollars();
    double da = point.accuracy - parent_point.accuracy;
    dstat.samples += 1;
    dstat.mean_cost_delta_dollars += (dc - dstat.mean_cost_delta_dollars) / dstat.samples;
    dstat.mean_accuracy_delta += (da - dstat.mean_accuracy_delta) / dstat.samples;
    record["type"] = "iteration";
    record["outcome"] = "added";
    record["node_id"] = child_id;
    record["pipeline_key"] = winner_key;
    record["params_sha"] = sha256_hex(winner_rec.params.dump());
    record["cost"] = point.cost.dollars();
    record["cost_micros"] = point.cost.micros;
    record["accuracy"] = point.accuracy;
    record["path"] = tree_->node(child_id).path_label;
  } else {
    // handle_failure: no node; selection increments roll back
    if (!in_init && strategy_ == StrategyKind::Moar) tree_->decrement_path(node_id);
    record["type"] = "iteration";
    record["node_id"] = -1;
    record["params_sha"] = "";
    record["cost"] = 0.0;
    record["accuracy"] = 0.0;
    switch (outcome) {
      case Outcome::Failed: record["outcome"] = "discarded"; break;
      case Outcome::Transport: record["outcome"] = "discarded_transport"; break;
      case Outcome::Sterile:
        record["outcome"] = "discarded_exhausted";
        node.disabled = true;
        break;
      default: record["outcome"] = "discarded"; break;
    }
    record["failure"] = failure_note;
    record["attempts"] = attempts;
  }
  record["budget_used"] = evals_used_;
  record["frontier_size"] = int(tree_->frontier().size());
  result.trace.push_back(std::move(record));
  return true;
}

void Search::initialize(RunResult& result) {
  ValidationReport report = validate_pipeline(p0_);
  if (!report.ok())
    fail(ErrorKind::Validation, "initial pipeline is invalid:\n" + report.to_string());
  catalog_.check();
  if (catalog_.entries.empty()) fail(ErrorKind::Validation, "empty model catalog");
  for (const auto& op : p0_.operators) {
    if (is_llm(op.type) && !catalog_.find(op.model.value_or("")))
      fail(ErrorKind::Validation,
           "operator '" + op.id + "' uses a model missing from the catalog");
  }
  swept_ = subsample_catalog(catalog_, config_.model_cap, config_.per_family_cap, *rng_);
  if (config_.budget < int(swept_.entries.size()) + 2)
    fail(ErrorKind::BudgetExhausted,
         "budget " + std::to_string(config_.budget) + " cannot cover initialization (" +
             std::to_string(swept_.entries.size()) + " model variants + 2)");

  // model sweep
  struct Variant {
    std::string model_id;
    PipelineSpec pipeline;
    EvalResult result;
  };
  std::vector<Variant> variants;
  for (const auto& m : swept_.entries) {
    Variant v;
    v.model_id = m.model_id;
    v.pipeline = with_all_models(p0_, m.model_id);
    v.result = evaluator_->evaluate(v.pipeline);
    if (!v.result.cache_hit) ++evals_used_;
    variants.push_back(std::move(v));
  }
  // the root shares the default-model variant's measurement through the cache
  EvalResult root_result = evaluator_->evaluate(p0_);
  if (!root_result.cache_hit) ++evals_used_;
  tree_->add_root(p0_, EvalPoint::make(pipeline_key(p0_), root_result.cost, root_result.accuracy));

  int event = 0;
  for (const auto& v : variants) {
    RewriteRecord rec;
    rec.directive_name = "model_substitution";
    rec.match_span = {0, int(p0_.operators.size()) - 1};
    rec.params = Json{{"model", v.model_id}};
    rec.objective = Objective::ReduceCost;
    EvalPoint point =
        EvalPoint::make(pipeline_key(v.pipeline), v.result.cost, v.result.accuracy);
    std::string label = extend_label("ROOT", rec);
    int id = tree_->add_child(0, v.pipeline, point, "model_substitution", {rec}, label);
    stats_.model_stats[v.model_id] = ModelStat{point.cost, point.accuracy};
    result.trace.push_back({{"type", "eval"},
                            {"phase", "init_sweep"},
                            {"iter", event++},
                            {"node_id", id},
                            {"parent_id", 0},
                            {"model", v.model_id},
                            {"pipeline_key", point.pipeline_key},
                            {"cost", point.cost.dollars()},
                            {"cost_micros", point.cost.micros},
                            {"accuracy", point.accuracy},
                            {"path", label},
                            {"budget_used", evals_used_},
                            {"frontier_size", int(tree_->frontier().size())}});
  }

  // two rewrites per frontier variant: one per objective
  std::set<std::string> frontier_keys;
  for (const auto& p : tree_->frontier()) frontier_keys.insert(p.pipeline_key);
  std::vector<int> frontier_children;
  for (int child : tree_->node(0).children)
    if (frontier_keys.count(tree_->node(child).eval.pipeline_key))
      frontier_children.push_back(child);
  int init_iter = 0;
  for (int child : frontier_children) {
    run_one_iteration(result, init_iter++, child, Objective::ImproveAccuracy);
    run_one_iteration(result, init_iter++, child, Objective::ReduceCost);
  }

  // disable non-frontier model variants from future selection
  for (int child : tree_->node(0).children) {
    SearchNode& node = tree_->node(child);
    if (!frontier_keys.count(node.eval.pipeline_key)) {
      node.disabled = true;
      result.trace.push_back(
          {{"type", "disable"}, {"node_id", child}, {"reason", "non_frontier_model_variant"}});
    }
  }
  tree_->reset_visit_counts();
}

RunResult Search::run() {
  RunResult result;
  result.tree = tree_;
  Json header = header_;
  header["type"] = "header";
  header["strategy"] = to_string(strategy_);
  header["seed"] = config_.seed;
  header["budget"] = config_.budget;
  header["workers"] = config_.workers;
  header["model_cap"] = config_.model_cap;
  header["per_family_cap"] = config_.per_family_cap;
  header["retry_limit"] = config_.retry_limit;
  result.trace.push_back(header);

  initialize(result);

  int iteration = 0;
  if (config_.workers <= 1) {
    while (iteration < config_.iteration_cap()) {
      bool proceed;
      {
        std::lock_guard<std::mutex> lock(mu_);
        proceed = evals_used_ < config_.budget;
      }
      if (!proceed) break;
      if (!run_one_iteration(result, ++iteration)) break;
    }
  } else {
    std::atomic<int> iter_counter{0};
    std::atomic<bool> stop{false};
    auto worker = [&]() {
      while (!stop.load()) {
        int it = ++iter_counter;
        if (it > config_.iteration_cap()) {
          stop.store(true);
          break;
        }
        {
          std::lock_guard<std::mutex> lock(mu_);
          if (evals_used_ >= config_.budget) {
            stop.store(true);
            break;
          }
        }
        if (!run_one_iteration(result, it)) {
          stop.store(true);
          break;
        }
      }
    };
    std::vector<std::thread> threads;
    for (int i = 0; i < config_.workers; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    iteration = iter_counter.load();
  }

  result.frontier = tree_->frontier();
  for (int id : tree_->frontier_node_ids())
    result.frontier_paths.push_back(tree_->node(id).path_label);
  result.stats = stats_;
  result.evaluations_used = evals_used_;
  result.iterations = iteration;
  result.trace.push_back({{"type", "summary"},
                          {"evaluations", evals_used_},
                          {"iterations", iteration},
                          {"frontier_size", int(result.frontier.size())},
                          {"tree_size", tree_->size()}});
  return result;
}

}  // namespace moar
